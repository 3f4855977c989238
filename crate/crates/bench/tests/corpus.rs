// SPDX-License-Identifier: Apache-2.0

use rtlsafe_bench::corpus;

#[test]
fn corpus_is_deterministic() {
    let ids = |n| {
        let (p, d) = corpus(n);
        p.iter().chain(d.iter()).map(|m| m.id.as_str().to_owned()).collect::<Vec<_>>()
    };
    assert_eq!(ids(64), ids(64));
    assert_eq!(ids(64).len(), 128);
}

#[test]
fn modules_are_distinct() {
    let (p, d) = corpus(256);
    assert_eq!((p.len(), d.len()), (256, 256));
}
