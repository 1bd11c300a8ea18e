//! A deterministic offline stand-in for a real provider.
//!
//! Each cell gets its own generator seeded from the provider seed and the
//! cell identity, so results do not depend on scheduling or on which other
//! cells run. Answers are either the gold document in the track's format or
//! a plausible wrong one.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toonbench_core::{case_by_name, emit_canonical_json, encode_toon, CaseSpec, Track, Value};

use crate::harness::{CellId, Provider};
use crate::llm::{estimate_tokens, ChatModel, ChatRequest, ChatResponse, LlmError, Usage};

/// Success probabilities, per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub one_shot_rate: f64,
    pub repair_rate: f64,
}

impl Default for SimProfile {
    fn default() -> Self {
        SimProfile {
            one_shot_rate: 0.7,
            repair_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    pub seed: u64,
    pub profile: SimProfile,
}

impl SimulatedProvider {
    pub fn new(seed: u64, profile: SimProfile) -> SimulatedProvider {
        SimulatedProvider { seed, profile }
    }
}

fn cell_seed(seed: u64, cell: &CellId) -> u64 {
    // FNV-1a: stable across platforms and toolchains.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    let key = format!("{}\0{}\0{}\0{}", cell.model, cell.run_index, cell.case, cell.track);
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Provider for SimulatedProvider {
    fn model(&self, cell: &CellId) -> Arc<dyn ChatModel> {
        Arc::new(SimModel {
            case: case_by_name(&cell.case),
            track: cell.track,
            profile: self.profile,
            state: Mutex::new((ChaCha8Rng::seed_from_u64(cell_seed(self.seed, cell)), 0)),
        })
    }
}

struct SimModel {
    case: Option<CaseSpec>,
    track: Track,
    profile: SimProfile,
    /// Generator and attempts answered so far.
    state: Mutex<(ChaCha8Rng, u32)>,
}

impl ChatModel for SimModel {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let case = self
            .case
            .as_ref()
            .ok_or_else(|| LlmError::Api { status: 404, body: "unknown case".into() })?;
        let mut guard = self.state.lock().expect("sim lock");
        let (rng, answered) = &mut *guard;
        let rate = if *answered == 0 { self.profile.one_shot_rate } else { self.profile.repair_rate };
        *answered += 1;
        let content = if rng.random_bool(rate.clamp(0.0, 1.0)) {
            render(&case.gold, self.track, rng.random_bool(0.2))
        } else {
            wrong_answer(case, self.track, rng)
        };
        let prompt_bytes: usize = req.messages.iter().map(|m| m.content.len()).sum();
        Ok(ChatResponse {
            usage: Usage {
                prompt_tokens: estimate_tokens(prompt_bytes),
                completion_tokens: estimate_tokens(content.len()),
            },
            content,
            finish_reason: Some("stop".into()),
            usage_estimated: false,
        })
    }
}

fn render(v: &Value, track: Track, fenced_json: bool) -> String {
    match track {
        Track::T => format!("```toon\n{}\n```", encode_toon(v).expect("gold payloads encode")),
        Track::J if fenced_json => format!("```json\n{}\n```", emit_canonical_json(v)),
        _ => emit_canonical_json(v),
    }
}

fn wrong_answer(case: &CaseSpec, track: Track, rng: &mut ChaCha8Rng) -> String {
    match (track, rng.random_range(0..3)) {
        (Track::T, 0) => {
            let toon = encode_toon(&case.gold).expect("gold payloads encode");
            let miscounted = miscount(&toon).unwrap_or(toon);
            format!("```toon\n{miscounted}\n```")
        }
        (Track::J, 0) => {
            let json = emit_canonical_json(&case.gold);
            json[..json.len() / 2].to_string()
        }
        (_, 1) => render(&drop_last_field(&case.gold), track, false),
        _ => render(&perturb(&case.gold), track, false),
    }
}

/// Raises the first `[N]` count by one.
fn miscount(toon: &str) -> Option<String> {
    let open = toon.find('[')?;
    let close = open + toon[open..].find(']')?;
    let n: usize = toon[open + 1..close].parse().ok()?;
    Some(format!("{}[{}]{}", &toon[..open], n + 1, &toon[close + 1..]))
}

fn drop_last_field(v: &Value) -> Value {
    let mut v = v.clone();
    if let Value::Object(m) = &mut v {
        m.pop();
    }
    v
}

/// Changes the first scalar leaf.
fn perturb(v: &Value) -> Value {
    fn go(v: &mut Value) -> bool {
        match v {
            Value::Object(m) => m.values_mut().any(go),
            Value::Array(a) => a.iter_mut().any(go),
            Value::Str(s) => {
                s.push('x');
                true
            }
            Value::Bool(b) => {
                *b = !*b;
                true
            }
            other => {
                let bumped = other.as_f64().map(|f| f + 1.0);
                *other = bumped.and_then(Value::float).unwrap_or(Value::int(0));
                true
            }
        }
    }
    let mut v = v.clone();
    go(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{evaluate, Outcome};

    #[test]
    fn wrong_answers_fail_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in toonbench_core::builtin_cases() {
            for track in Track::ALL {
                assert_eq!(evaluate(&case, track, &render(&case.gold, track, true)).outcome, Outcome::Success);
                for _ in 0..20 {
                    let out = wrong_answer(&case, track, &mut rng);
                    assert_ne!(evaluate(&case, track, &out).outcome, Outcome::Success, "{}/{track}: {out}", case.name);
                }
            }
        }
    }

    #[test]
    fn miscount_changes_only_the_count() {
        assert_eq!(miscount("a[2]{x}:\n  1\n  2").unwrap(), "a[3]{x}:\n  1\n  2");
        assert_eq!(miscount("a: 1"), None);
    }

    #[test]
    fn cells_are_independent_of_order() {
        let p = SimulatedProvider::new(3, SimProfile { one_shot_rate: 0.5, repair_rate: 0.5 });
        let cell = CellId {
            model: "m".into(),
            run_index: 2,
            case: "users".into(),
            track: Track::J,
        };
        let req = ChatRequest::new("m", "p");
        let a: Vec<_> = (0..4).map(|_| p.model(&cell)).map(|m| m.complete(&req).unwrap().content).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }
}
