// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn output(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtlsafe"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn rtlsafe")
}

pub fn rtlsafe_status(args: &[&str], cwd: &Path) -> Option<i32> {
    output(args, cwd).status.code()
}

/// Stdout on success.
pub fn rtlsafe(args: &[&str], cwd: &Path) -> Option<String> {
    let o = output(args, cwd);
    if o.status.success() {
        Some(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        eprintln!("rtlsafe {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        None
    }
}

/// ingest, mine-pairs, extract-principles, optimize, evaluate, report
/// against the fixture config.
pub fn run_pipeline(out: &Path, cwd: &Path) -> Result<(), String> {
    let cfg = fixtures().join("run.toml");
    let principles = out.join("principles/power-k2-s7.json");
    let steps: [&[&str]; 6] = [
        &["ingest"],
        &["mine-pairs"],
        &["extract-principles"],
        &["optimize", "--principles", principles.to_str().unwrap()],
        &["evaluate"],
        &["report"],
    ];
    for step in steps {
        let mut args = vec!["-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(step);
        rtlsafe(&args, cwd).ok_or_else(|| format!("step {} failed", step[0]))?;
    }
    Ok(())
}

/// Relative path to contents, for every file under `root`.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn tree_digest(tree: &BTreeMap<String, Vec<u8>>) -> String {
    let mut buf = Vec::new();
    for (k, v) in tree {
        buf.extend_from_slice(k.as_bytes());
        buf.push(0);
        buf.extend_from_slice(rtlsafe_core::hashing::sha256_hex(v).as_bytes());
        buf.push(b'\n');
    }
    rtlsafe_core::hashing::sha256_hex(&buf)
}

pub fn first_difference(want: &str, got: &str) -> String {
    for (i, (w, g)) in want.lines().zip(got.lines()).enumerate() {
        if w != g {
            return format!("line {}:\n  want: {w}\n  got:  {g}", i + 1);
        }
    }
    format!("lengths differ: want {} lines, got {}", want.lines().count(), got.lines().count())
}
