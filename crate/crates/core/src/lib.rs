//! Core of the TOON generation benchmark toolkit: the shared value model and
//! canonical JSON, the TOON codec, benchmark case schemas, prompt templates,
//! and grammar-constrained token masking for TOON and JSON.

pub mod cases;
pub mod grammar;
pub mod json;
pub mod number;
pub mod prompts;
pub mod schema;
pub mod toon;
pub mod value;

pub use cases::{builtin_cases, case_by_name, write_gold, CaseSpec};
pub use grammar::{allowed_mask, constrained_generate, init_state, GrammarState, Mask, Mode, Vocabulary};
pub use json::{emit_canonical_json, parse_json, JsonError};
pub use prompts::{render_prompt, render_repair_prompt, Prompts, Track};
pub use schema::{validate, Schema, ValidationError};
pub use toon::{
    encode_toon, extract_toon_block, parse_toon, toon_to_json, ToonDocument, ToonError,
    ToonErrorKind,
};
pub use value::{canonicalize, deep_equal, DiffKind, DiffPath, Kind, Map, Segment, Value};
