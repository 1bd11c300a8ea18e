//! Regenerates `fixtures/toy_vocab.tsv`: every single byte, then the
//! substrings of the gold documents that save the most tokens.
//!
//! Run with `cargo run -p toonbench-core --example toy_vocab`.

use std::collections::{BTreeMap, HashSet};

use toonbench_core::{builtin_cases, canonicalize, emit_canonical_json, encode_toon, Vocabulary};

const MERGES: usize = 200;
const MAX_LEN: usize = 8;

fn main() {
    let mut corpus = Vec::new();
    for case in builtin_cases() {
        corpus.push(format!("{}\n", encode_toon(&case.gold).expect("object gold")));
        corpus.push(emit_canonical_json(&canonicalize(&case.gold)));
    }
    let mut counts: BTreeMap<&[u8], usize> = BTreeMap::new();
    for doc in &corpus {
        let b = doc.as_bytes();
        for len in 2..=MAX_LEN {
            for w in b.windows(len) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&[u8], usize)> = counts.into_iter().filter(|(_, c)| *c > 1).collect();
    // Highest saving first; ties broken by the bytes for determinism.
    ranked.sort_by(|a, b| (b.1 * (b.0.len() - 1)).cmp(&(a.1 * (a.0.len() - 1))).then(a.0.cmp(b.0)));

    let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut seen: HashSet<Vec<u8>> = tokens.iter().cloned().collect();
    for (bytes, _) in ranked {
        if tokens.len() == 256 + MERGES {
            break;
        }
        if std::str::from_utf8(bytes).is_ok() && seen.insert(bytes.to_vec()) {
            tokens.push(bytes.to_vec());
        }
    }
    let vocab = Vocabulary::new(tokens).expect("distinct tokens");
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_vocab.tsv");
    std::fs::write(path, vocab.to_fixture()).expect("write fixture");
    println!("wrote {} tokens to {path}", vocab.len());
}
