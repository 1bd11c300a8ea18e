//! Grammar-constrained decoding for TOON and JSON.
//!
//! A [`GrammarState`] is a byte-driven automaton. Feeding it the bytes of a
//! token either succeeds or rejects; the state depends only on the bytes
//! consumed, never on how they were split into tokens. [`allowed_mask`] turns
//! a state into an exact per-token mask by walking the vocabulary trie.
//!
//! TOON mode tracks a stack of open blocks (objects, list arrays, tables)
//! with their indentation column and, for arrays, the number of items still
//! owed to the `[N]` header. With a schema, key names, key order, scalar
//! kinds and array layouts are fixed by the schema. Without one, keys are
//! identifiers of at most 64 bytes, unique per object, and nesting is capped
//! at 16 blocks.
//!
//! JSON mode checks well-formedness only: an object at the root, unique keys,
//! and nesting capped at 16.
//!
//! Every accepted byte leaves a way to finish the document, so the mask is
//! never empty before the document is complete.

mod generate;
mod json;
mod lex;
mod mask;
mod toon;
mod vocab;

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use generate::{constrained_generate, constrained_generate_cached, GenerateError, Generation, Policy, Scores, Step};
pub use mask::{allowed_mask, Mask, MaskCache};
pub use vocab::{VocabError, Vocabulary};

use crate::schema::Schema;
use crate::toon::encode::format_key;
use lex::ScalarKind;

/// Nesting limit for unconstrained documents.
pub const MAX_DEPTH: usize = 16;
/// Key length limit for unconstrained TOON documents.
pub const MAX_KEY_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Toon,
    Json,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Toon => "toon",
            Mode::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("{0}")]
    UnsupportedSchema(String),
}

/// A token or byte the automaton cannot accept.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rejected at byte {offset} of the token: {reason}")]
pub struct Reject {
    pub offset: usize,
    pub reason: &'static str,
}

type NodeId = u32;
/// The unconstrained node: any value allowed by the mode.
const ANY: NodeId = u32::MAX;

#[derive(Debug)]
struct Field {
    /// Key as written, quoted if needed.
    text: Box<[u8]>,
    node: NodeId,
}

#[derive(Debug)]
enum Node {
    Scalar(ScalarKind),
    Object(Vec<Field>),
    Array {
        elem: NodeId,
        /// `{f1,f2}` when the element is a non-empty object of scalars.
        header: Option<Box<[u8]>>,
        cells: Vec<ScalarKind>,
    },
}

/// A schema flattened into a node table.
#[derive(Debug)]
pub(crate) struct Grammar {
    mode: Mode,
    nodes: Vec<Node>,
    root: NodeId,
}

impl Grammar {
    fn compile(mode: Mode, schema: Option<&Schema>) -> Result<Grammar, GrammarError> {
        let mut g = Grammar {
            mode,
            nodes: Vec::new(),
            root: ANY,
        };
        if let Some(s) = schema {
            if mode == Mode::Json {
                return Err(GrammarError::UnsupportedSchema(
                    "json mode checks well-formedness only and takes no schema".into(),
                ));
            }
            if !matches!(s, Schema::Object(f) if !f.is_empty()) {
                return Err(GrammarError::UnsupportedSchema(
                    "a TOON document schema must be an object with at least one field".into(),
                ));
            }
            g.root = g.add(s);
        }
        Ok(g)
    }

    fn add(&mut self, s: &Schema) -> NodeId {
        let node = match s {
            Schema::Object(fields) => Node::Object(
                fields
                    .iter()
                    .map(|(k, fs)| Field {
                        text: format_key(k).into_bytes().into(),
                        node: self.add(fs),
                    })
                    .collect(),
            ),
            Schema::Array(elem) => {
                let (header, cells) = match elem.flat_fields() {
                    Some(fields) => {
                        let names: Vec<String> = fields.iter().map(|(k, _)| format_key(k)).collect();
                        let kinds = fields
                            .iter()
                            .map(|(_, s)| ScalarKind::of(s).expect("flat fields are scalars"))
                            .collect();
                        (Some(format!("{{{}}}", names.join(",")).into_bytes().into()), kinds)
                    }
                    None => (None, Vec::new()),
                };
                Node::Array {
                    elem: self.add(elem),
                    header,
                    cells,
                }
            }
            scalar => Node::Scalar(ScalarKind::of(scalar).expect("scalar schema")),
        };
        self.nodes.push(node);
        (self.nodes.len() - 1) as NodeId
    }

    fn node(&self, id: NodeId) -> Option<&Node> {
        (id != ANY).then(|| &self.nodes[id as usize])
    }

    fn fields(&self, id: NodeId) -> &[Field] {
        match self.node(id) {
            Some(Node::Object(fields)) => fields,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Core {
    Toon(toon::ToonCore),
    Json(json::JsonCore),
}

/// Decoding state: the compiled grammar plus the automaton position.
/// Equality and hashing look at the automaton position and the identity of
/// the compiled grammar.
#[derive(Clone)]
pub struct GrammarState {
    grammar: Arc<Grammar>,
    core: Core,
}

impl PartialEq for GrammarState {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grammar, &other.grammar) && self.core == other.core
    }
}

impl Eq for GrammarState {}

impl Hash for GrammarState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        Arc::as_ptr(&self.grammar).hash(state);
        self.core.hash(state);
    }
}

impl fmt::Debug for GrammarState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.core {
            Core::Toon(c) => c.fmt(f),
            Core::Json(c) => c.fmt(f),
        }
    }
}

impl GrammarState {
    pub fn mode(&self) -> Mode {
        self.grammar.mode
    }

    /// Whether the state was compiled with a schema.
    pub fn has_schema(&self) -> bool {
        self.grammar.root != ANY
    }

    fn step(&mut self, b: u8) -> Result<(), &'static str> {
        match &mut self.core {
            Core::Toon(c) => c.step(&self.grammar, b),
            Core::Json(c) => c.step(b),
        }
    }

    /// Consumes raw bytes.
    pub fn advance_bytes(&self, bytes: &[u8]) -> Result<GrammarState, Reject> {
        let mut next = self.clone();
        for (offset, &b) in bytes.iter().enumerate() {
            next.step(b).map_err(|reason| Reject { offset, reason })?;
        }
        Ok(next)
    }

    /// Consumes one token.
    pub fn advance(&self, vocab: &Vocabulary, token: u32) -> Result<GrammarState, Reject> {
        self.advance_bytes(vocab.token(token))
    }

    /// The bytes consumed so far form a complete document.
    pub fn is_accepting(&self) -> bool {
        match &self.core {
            Core::Toon(c) => c.is_accepting(&self.grammar),
            Core::Json(c) => c.is_accepting(),
        }
    }
}

/// A state at the start of a document. A schema is only supported in TOON
/// mode and must be an object.
pub fn init_state(mode: Mode, schema: Option<&Schema>) -> Result<GrammarState, GrammarError> {
    let grammar = Arc::new(Grammar::compile(mode, schema)?);
    let core = match mode {
        Mode::Toon => Core::Toon(toon::ToonCore::new(&grammar)),
        Mode::Json => Core::Json(json::JsonCore::default()),
    };
    Ok(GrammarState { grammar, core })
}

pub fn advance(state: &GrammarState, vocab: &Vocabulary, token: u32) -> Result<GrammarState, Reject> {
    state.advance(vocab, token)
}

pub fn is_accepting(state: &GrammarState) -> bool {
    state.is_accepting()
}
