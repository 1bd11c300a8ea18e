//! Mask soundness and completeness checks over the toy vocabulary. Each
//! returns an error message instead of panicking so callers can report it.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toonbench_core::grammar::{
    allowed_mask, constrained_generate_cached, init_state, GrammarState, MaskCache, Mode, Scores, Vocabulary,
};
use toonbench_core::{
    builtin_cases, canonicalize, case_by_name, emit_canonical_json, encode_toon, parse_json, parse_toon, validate,
    Schema,
};

pub type Check<T> = Result<T, String>;

pub fn brute_force(state: &GrammarState, vocab: &Vocabulary) -> Vec<u32> {
    (0..vocab.len() as u32)
        .filter(|&id| state.advance(vocab, id).is_ok())
        .collect()
}

/// Start states: free TOON, JSON, and TOON under each case schema.
pub fn starts() -> Vec<(String, GrammarState)> {
    let mut out = vec![
        ("toon".to_string(), init_state(Mode::Toon, None).unwrap()),
        ("json".to_string(), init_state(Mode::Json, None).unwrap()),
    ];
    for case in builtin_cases() {
        out.push((format!("toon+{}", case.name), init_state(Mode::Toon, Some(&case.schema)).unwrap()));
    }
    out
}

/// Bytes that drive documents toward structure rather than long scalars.
pub fn is_structural(token: &[u8]) -> bool {
    b"\n :,[]{}-\"".contains(&token[0])
}

/// Uniform random walk over allowed tokens, stopping with probability 1/4 at
/// each accepting state. Returns the visited states and the text if the walk
/// ended accepting.
pub fn walk(
    start: &GrammarState,
    vocab: &Vocabulary,
    rng: &mut ChaCha8Rng,
    cache: &mut MaskCache,
) -> Check<(Vec<GrammarState>, Option<String>)> {
    let mut state = start.clone();
    let mut text = Vec::new();
    let mut visited = vec![state.clone()];
    for _ in 0..600 {
        let mask = cache.get(&state, vocab).clone();
        if mask.is_dead_end() {
            return Err(format!("dead end after {:?}", String::from_utf8_lossy(&text)));
        }
        if mask.is_accepting() && (mask.count() == 0 || rng.random_bool(0.25)) {
            let text = String::from_utf8(text).map_err(|e| format!("accepted text is not UTF-8: {e}"))?;
            return Ok((visited, Some(text)));
        }
        let allowed: Vec<u32> = mask.iter().collect();
        let structural: Vec<u32> = allowed.iter().copied().filter(|&t| is_structural(vocab.token(t))).collect();
        let pool = if !structural.is_empty() && rng.random_bool(0.5) { &structural } else { &allowed };
        let id = pool[rng.random_range(0..pool.len())];
        state = state.advance(vocab, id).map_err(|e| format!("mask allowed a rejected token {id}: {e}"))?;
        text.extend_from_slice(vocab.token(id));
        visited.push(state.clone());
    }
    Ok((visited, None))
}

/// Parses `text` as the start label's language and validates it against
/// the schema, if any.
pub fn check_document(label: &str, schema: Option<&Schema>, text: &str) -> Check<()> {
    if label == "json" {
        return parse_json(text).map(drop).map_err(|e| format!("{label}: {e}\n{text}"));
    }
    let doc = parse_toon(text).map_err(|e| format!("{label}: {e}\n{text}"))?;
    if let Some(s) = schema {
        let errors = validate(&doc.root, s);
        if !errors.is_empty() {
            return Err(format!("{label}: {errors:?}\n{text}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SoundnessStats {
    pub walks: usize,
    pub finished: usize,
    pub states_checked: usize,
}

/// Random walks from every start; every finished document must parse (and
/// validate), and the mask at sampled distinct states must equal the brute
/// force one bit for bit.
pub fn mask_soundness(walks: usize, seed: u64) -> Check<SoundnessStats> {
    let vocab = Vocabulary::toy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = starts();
    let schemas: HashMap<String, Schema> = builtin_cases()
        .into_iter()
        .map(|c| (format!("toon+{}", c.name), c.schema))
        .collect();
    let mut sampled = Vec::new();
    let mut seen = HashSet::new();
    let mut finished = 0;
    for i in 0..walks {
        let (label, start) = &starts[i % starts.len()];
        let mut cache = MaskCache::new(4096);
        let (visited, text) = walk(start, &vocab, &mut rng, &mut cache)?;
        if let Some(text) = text {
            check_document(label, schemas.get(label), &text)?;
            finished += 1;
        }
        for s in visited {
            if seen.insert(s.clone()) && rng.random_bool(0.05) {
                sampled.push(s);
            }
        }
    }
    for s in &sampled {
        let mask = allowed_mask(s, &vocab);
        if mask.iter().collect::<Vec<_>>() != brute_force(s, &vocab) {
            return Err(format!("mask differs from brute force at {s:?}"));
        }
    }
    Ok(SoundnessStats {
        walks,
        finished,
        states_checked: sampled.len(),
    })
}

/// Random scores pushed toward punctuation and away from digits, so that
/// declared counts stay small enough to fill within the token budget.
pub fn adversarial_policy(vocab: &Vocabulary, seed: u64) -> impl FnMut(&[u8]) -> Scores + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias = rng.random_range(0.5..2.0);
    move |_: &[u8]| Scores {
        tokens: (0..vocab.len() as u32)
            .map(|id| {
                let t = vocab.token(id);
                let mut s = rng.random::<f64>();
                if is_structural(t) {
                    s += bias;
                }
                if t.iter().any(u8::is_ascii_digit) {
                    s -= bias;
                }
                s
            })
            .collect(),
        eos: rng.random_range(0.0..1.0 + bias),
    }
}

/// Greedy constrained generation on the order schema under `runs` seeded
/// adversarial policies; every document must parse and validate.
pub fn adversarial_runs(runs: u64) -> Check<usize> {
    let vocab = Vocabulary::toy();
    let order = case_by_name("order").unwrap();
    let start = init_state(Mode::Toon, Some(&order.schema)).unwrap();
    let mut cache = MaskCache::default();
    for seed in 0..runs {
        let g = constrained_generate_cached(&mut adversarial_policy(&vocab, seed), &vocab, &start, 4000, &mut cache)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        check_document("toon+order", Some(&order.schema), &g.text).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(runs as usize)
}

/// States after every prefix of `text`, byte by byte.
pub fn prefix_states(start: &GrammarState, text: &[u8]) -> Check<Vec<GrammarState>> {
    let mut out = vec![start.clone()];
    for (i, &b) in text.iter().enumerate() {
        let next = out[i]
            .advance_bytes(&[b])
            .map_err(|e| format!("{e} at {:?}", String::from_utf8_lossy(&text[..=i])))?;
        out.push(next);
    }
    Ok(out)
}

/// Every token matching anywhere in `text` is allowed there and lands on the
/// byte-by-byte state, and the full text is accepting. By induction every
/// tokenization is accepted step by step and ends accepting. Returns the
/// number of distinct tokenizations covered.
pub fn all_tokenizations_accepted(start: &GrammarState, vocab: &Vocabulary, text: &[u8]) -> Check<f64> {
    let states = prefix_states(start, text)?;
    if !states[text.len()].is_accepting() {
        return Err(format!("not accepting at the end of {:?}", String::from_utf8_lossy(text)));
    }
    let mut cache = MaskCache::default();
    let mut ways = vec![0f64; text.len() + 1];
    ways[0] = 1.0;
    for p in 0..text.len() {
        for id in vocab.matches_at(text, p) {
            let end = p + vocab.token(id).len();
            if !cache.get(&states[p], vocab).allows(id) {
                return Err(format!("token {id} masked at byte {p}"));
            }
            if states[p].advance(vocab, id).map_err(|e| e.to_string())? != states[end] {
                return Err(format!("token {id} at byte {p} reaches a different state"));
            }
            ways[end] += ways[p];
        }
    }
    Ok(ways[text.len()])
}

/// The gold TOON of every case (with and without a final newline) under its
/// schema and free, and the canonical gold JSON.
pub fn gold_tokenizations() -> Check<Vec<(String, f64)>> {
    let vocab = Vocabulary::toy();
    let mut out = Vec::new();
    for case in builtin_cases() {
        let toon = encode_toon(&case.gold).unwrap();
        let json = emit_canonical_json(&canonicalize(&case.gold));
        let schema_start = init_state(Mode::Toon, Some(&case.schema)).unwrap();
        let free_start = init_state(Mode::Toon, None).unwrap();
        for text in [toon.clone(), format!("{toon}\n")] {
            let n = all_tokenizations_accepted(&schema_start, &vocab, text.as_bytes())
                .map_err(|e| format!("{} (schema): {e}", case.name))?;
            all_tokenizations_accepted(&free_start, &vocab, text.as_bytes())
                .map_err(|e| format!("{} (free): {e}", case.name))?;
            out.push((format!("{}.toon", case.name), n));
        }
        let n = all_tokenizations_accepted(&init_state(Mode::Json, None).unwrap(), &vocab, json.as_bytes())
            .map_err(|e| format!("{} (json): {e}", case.name))?;
        out.push((format!("{}.json", case.name), n));
    }
    Ok(out)
}

/// Visits every state reachable within `depth` tokens, failing on a dead
/// end. Returns the number of distinct states.
pub fn explore(start: &GrammarState, vocab: &Vocabulary, depth: usize) -> Check<usize> {
    let mut frontier = vec![start.clone()];
    let mut seen: HashSet<GrammarState> = frontier.iter().cloned().collect();
    for depth in 0..depth {
        let mut next = Vec::new();
        for s in &frontier {
            let mask = allowed_mask(s, vocab);
            if mask.is_dead_end() {
                return Err(format!("dead end at depth {depth}: {s:?}"));
            }
            for id in mask.iter() {
                let child = s.advance(vocab, id).map_err(|e| e.to_string())?;
                if seen.insert(child.clone()) {
                    next.push(child);
                }
            }
        }
        frontier = next;
    }
    if let Some(s) = frontier.iter().find(|s| allowed_mask(s, vocab).is_dead_end()) {
        return Err(format!("dead end: {s:?}"));
    }
    Ok(seen.len())
}
