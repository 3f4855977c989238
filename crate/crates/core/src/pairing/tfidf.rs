// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::PairingError;

/// TF-IDF vectors over a fixed document list.
///
/// `tf` is the raw count, `idf(t) = ln(N / (1 + df(t))) + 1` and each vector
/// is L2-normalized, so similarity is a dot product. Documents are
/// addressed by position in the input order.
#[derive(Debug, Clone)]
pub struct TfidfIndex {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    /// Sparse rows sorted by term index.
    vectors: Vec<Vec<(usize, f64)>>,
}

impl TfidfIndex {
    pub fn build<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<Self, PairingError> {
        let n = documents.len();
        if n < 2 {
            return Err(PairingError::InsufficientCorpus(n));
        }

        let mut vocabulary = BTreeMap::new();
        for doc in documents {
            for t in doc {
                if !vocabulary.contains_key(t.as_ref()) {
                    vocabulary.insert(t.as_ref().to_string(), 0);
                }
            }
        }
        // Index terms in sorted order so ids never depend on document order.
        for (i, v) in vocabulary.values_mut().enumerate() {
            *v = i;
        }

        let counts: Vec<BTreeMap<usize, u32>> = documents
            .iter()
            .map(|doc| {
                let mut c = BTreeMap::new();
                for t in doc {
                    *c.entry(vocabulary[t.as_ref()]).or_insert(0) += 1;
                }
                c
            })
            .collect();

        let mut df = vec![0u32; vocabulary.len()];
        for c in &counts {
            for &term in c.keys() {
                df[term] += 1;
            }
        }
        let idf: Vec<f64> = df
            .iter()
            .map(|&d| (n as f64 / (1.0 + f64::from(d))).ln() + 1.0)
            .collect();

        let vectors = counts
            .iter()
            .map(|c| {
                let mut row: Vec<(usize, f64)> =
                    c.iter().map(|(&t, &tf)| (t, f64::from(tf) * idf[t])).collect();
                let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, w) in &mut row {
                        *w /= norm;
                    }
                }
                row
            })
            .collect();

        Ok(TfidfIndex {
            vocabulary,
            idf,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    pub fn vector(&self, doc: usize) -> &[(usize, f64)] {
        &self.vectors[doc]
    }

    /// Cosine similarity of documents `a` and `b`, clamped to `[0, 1]`.
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.vectors[a], &self.vectors[b]);
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < x.len() && j < y.len() {
            match x[i].0.cmp(&y[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += x[i].1 * y[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot.clamp(0.0, 1.0)
    }
}
