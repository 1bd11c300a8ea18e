//! TOON (Token-Oriented Object Notation) codec.
//!
//! The accepted dialect:
//!
//! ```text
//! id: 100                      scalar field
//! metadata:                    nested object, fields indented by 2
//!   version: 1
//! sections[2]:                 list array, one `- ` item per element
//!   - code: A                  object item: first field on the dash line,
//!     title: Introduction      the rest aligned under it
//! items[2]{id,value}:          tabular array, one row per element
//!   1,First
//!   2,Second
//! ```
//!
//! Scalars lex as `true`/`false`/`null`, JSON-style numerals, or strings.
//! Strings that would be ambiguous are double-quoted with backslash escapes.
//! Every array header carries the exact element count.

pub(crate) mod encode;
mod parse;

use std::fmt;

use thiserror::Error;

pub use encode::{encode_toon, needs_quotes, EncodeError};
pub use parse::parse_toon;

use crate::json::emit_canonical_json;
use crate::value::{Segment, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToonErrorKind {
    BadIndent,
    CountMismatch,
    ArityMismatch,
    BadEscape,
    UnexpectedToken,
    DuplicateKey,
    MissingFence,
}

impl fmt::Display for ToonErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToonErrorKind::BadIndent => "bad-indent",
            ToonErrorKind::CountMismatch => "count-mismatch",
            ToonErrorKind::ArityMismatch => "arity-mismatch",
            ToonErrorKind::BadEscape => "bad-escape",
            ToonErrorKind::UnexpectedToken => "unexpected-token",
            ToonErrorKind::DuplicateKey => "duplicate-key",
            ToonErrorKind::MissingFence => "missing-fence",
        })
    }
}

/// A decode failure. Positions are 1-based and always inside the offending
/// line; the `Display` form is what goes into repair prompts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}: {message}")]
pub struct ToonError {
    pub line: usize,
    pub column: usize,
    pub kind: ToonErrorKind,
    pub message: String,
}

impl ToonError {
    pub(crate) fn new(
        kind: ToonErrorKind,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        ToonError {
            line,
            column,
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrayLayout {
    List,
    Tabular { headers: Vec<String> },
}

/// Layout metadata for one array in a parsed document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayInfo {
    pub path: Vec<Segment>,
    pub layout: ArrayLayout,
    pub declared_count: usize,
    /// 1-based line of the `[N]` header.
    pub line: usize,
}

/// A parsed TOON document: the value tree plus the layout of every array.
#[derive(Debug, Clone, PartialEq)]
pub struct ToonDocument {
    pub root: Value,
    pub arrays: Vec<ArrayInfo>,
}

/// Returns the body of the first ```` ```toon ```` block. Without a fence the
/// whole output is returned if it parses as TOON on its own.
pub fn extract_toon_block(llm_output: &str) -> Result<&str, ToonError> {
    const OPEN: &str = "```toon";
    if let Some(start) = llm_output.find(OPEN) {
        let after = &llm_output[start + OPEN.len()..];
        // The opening fence runs to the end of its line.
        let body = match after.find('\n') {
            Some(nl) => &after[nl + 1..],
            None => "",
        };
        let end = closing_fence(body).unwrap_or(body.len());
        return Ok(body[..end].trim_end_matches(['\n', '\r']));
    }
    if !llm_output.trim().is_empty() && parse_toon(llm_output).is_ok() {
        return Ok(llm_output);
    }
    Err(ToonError::new(
        ToonErrorKind::MissingFence,
        1,
        1,
        "no ```toon code block found and the output is not valid TOON",
    ))
}

/// Byte offset of the line holding the closing ```` ``` ````.
fn closing_fence(body: &str) -> Option<usize> {
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            return Some(offset);
        }
        offset += line.len();
    }
    None
}

/// Decodes TOON and re-emits it as canonical JSON.
pub fn toon_to_json(text: &str) -> Result<String, ToonError> {
    Ok(emit_canonical_json(&parse_toon(text)?.root))
}
