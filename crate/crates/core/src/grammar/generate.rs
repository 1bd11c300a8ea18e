use thiserror::Error;

use super::mask::{allowed_mask, Mask, MaskCache};
use super::vocab::Vocabulary;
use super::GrammarState;

/// Next-token scores: one per vocabulary id, plus end-of-sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub tokens: Vec<f64>,
    pub eos: f64,
}

/// A scoring model. It sees the bytes generated so far.
pub trait Policy {
    fn scores(&mut self, generated: &[u8]) -> Scores;
}

impl<F: FnMut(&[u8]) -> Scores> Policy for F {
    fn scores(&mut self, generated: &[u8]) -> Scores {
        self(generated)
    }
}

/// One decoding step; `token` is `None` when end-of-sequence was chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub token: Option<u32>,
    /// Number of tokens the mask allowed.
    pub allowed: usize,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub tokens: Vec<u32>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("no token is allowed at step {step} and the document is incomplete")]
    DeadEnd { step: usize, text: String },
    #[error("document still incomplete after {max_tokens} tokens")]
    TokenBudget { max_tokens: usize, text: String },
    #[error("policy returned {got} token scores for a vocabulary of {expected}")]
    PolicyArity { expected: usize, got: usize },
}

/// Greedy decoding under the grammar mask. The highest-scoring allowed token
/// wins, ties going to the lowest id. End-of-sequence is taken once the
/// document is complete and its score is at least the best token's, or no
/// token is allowed.
pub fn constrained_generate(
    policy: &mut impl Policy,
    vocab: &Vocabulary,
    state: &GrammarState,
    max_tokens: usize,
) -> Result<Generation, GenerateError> {
    run(policy, vocab, state, max_tokens, |s| allowed_mask(s, vocab))
}

/// [`constrained_generate`] with masks served from `cache`.
pub fn constrained_generate_cached(
    policy: &mut impl Policy,
    vocab: &Vocabulary,
    state: &GrammarState,
    max_tokens: usize,
    cache: &mut MaskCache,
) -> Result<Generation, GenerateError> {
    run(policy, vocab, state, max_tokens, |s| cache.get(s, vocab).clone())
}

fn run(
    policy: &mut impl Policy,
    vocab: &Vocabulary,
    state: &GrammarState,
    max_tokens: usize,
    mut mask_of: impl FnMut(&GrammarState) -> Mask,
) -> Result<Generation, GenerateError> {
    let mut state = state.clone();
    let mut bytes = Vec::new();
    let mut tokens = Vec::new();
    let mut steps = Vec::new();
    let text = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
    loop {
        let mask = mask_of(&state);
        let accepting = mask.is_accepting();
        let allowed = mask.count();
        if mask.is_dead_end() {
            return Err(GenerateError::DeadEnd {
                step: steps.len(),
                text: text(&bytes),
            });
        }
        if tokens.len() == max_tokens && !accepting {
            return Err(GenerateError::TokenBudget {
                max_tokens,
                text: text(&bytes),
            });
        }
        let scores = policy.scores(&bytes);
        if scores.tokens.len() != vocab.len() {
            return Err(GenerateError::PolicyArity {
                expected: vocab.len(),
                got: scores.tokens.len(),
            });
        }
        let mut best: Option<(u32, f64)> = None;
        if tokens.len() < max_tokens {
            for id in mask.iter() {
                let s = scores.tokens[id as usize];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((id, s));
                }
            }
        }
        match best {
            Some((id, s)) if !(accepting && scores.eos >= s) => {
                steps.push(Step {
                    token: Some(id),
                    allowed,
                    accepting,
                });
                state = state
                    .advance(vocab, id)
                    .expect("masked tokens are accepted");
                bytes.extend_from_slice(vocab.token(id));
                tokens.push(id);
            }
            _ => {
                steps.push(Step {
                    token: None,
                    allowed,
                    accepting,
                });
                return Ok(Generation {
                    text: text(&bytes),
                    tokens,
                    steps,
                });
            }
        }
    }
}
