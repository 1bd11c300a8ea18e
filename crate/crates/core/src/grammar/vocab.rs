use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("token {0} is empty")]
    EmptyToken(u32),
    #[error("tokens {0} and {1} have the same bytes")]
    DuplicateToken(u32, u32),
    #[error("token ids must be dense: expected id {expected}, found {found}")]
    NotDense { expected: u32, found: u32 },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TrieNode {
    /// Sorted by byte.
    pub(crate) children: Vec<(u8, u32)>,
    pub(crate) token: Option<u32>,
}

/// Token id to byte string map, with a byte trie over all tokens.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<Box<[u8]>>,
    nodes: Vec<TrieNode>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<Vec<u8>>) -> Result<Vocabulary, VocabError> {
        let mut nodes = vec![TrieNode::default()];
        for (id, bytes) in tokens.iter().enumerate() {
            let id = id as u32;
            if bytes.is_empty() {
                return Err(VocabError::EmptyToken(id));
            }
            let mut at = 0usize;
            for &b in bytes {
                at = match nodes[at].children.binary_search_by_key(&b, |c| c.0) {
                    Ok(i) => nodes[at].children[i].1 as usize,
                    Err(i) => {
                        let next = nodes.len() as u32;
                        nodes[at].children.insert(i, (b, next));
                        nodes.push(TrieNode::default());
                        next as usize
                    }
                };
            }
            if let Some(prev) = nodes[at].token.replace(id) {
                return Err(VocabError::DuplicateToken(prev, id));
            }
        }
        Ok(Vocabulary {
            tokens: tokens.into_iter().map(Vec::into_boxed_slice).collect(),
            nodes,
        })
    }

    /// One token per byte value; token id equals the byte.
    pub fn bytes() -> Vocabulary {
        Vocabulary::new((0..=255u8).map(|b| vec![b]).collect()).expect("distinct bytes")
    }

    /// The bundled test vocabulary: all 256 single bytes plus merges drawn from
    /// the gold documents.
    pub fn toy() -> Vocabulary {
        Vocabulary::from_fixture(include_str!("../../fixtures/toy_vocab.tsv"))
            .expect("bundled vocabulary is well-formed")
    }

    /// Parses `id<TAB>hex-bytes` lines; ids must run 0, 1, 2, ...
    pub fn from_fixture(text: &str) -> Result<Vocabulary, VocabError> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: &str| VocabError::Line {
                line: i + 1,
                message: message.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            let (id, hex) = line.split_once('\t').ok_or_else(|| err("expected `id<TAB>hex`"))?;
            let id: u32 = id.trim().parse().map_err(|_| err("token id is not a number"))?;
            if id as usize != tokens.len() {
                return Err(VocabError::NotDense {
                    expected: tokens.len() as u32,
                    found: id,
                });
            }
            let hex = hex.trim();
            if hex.len() % 2 != 0 {
                return Err(err("odd number of hex digits"));
            }
            let bytes = (0..hex.len())
                .step_by(2)
                .map(|j| u8::from_str_radix(&hex[j..j + 2], 16))
                .collect::<Result<Vec<u8>, _>>()
                .map_err(|_| err("invalid hex digit"))?;
            tokens.push(bytes);
        }
        Vocabulary::new(tokens)
    }

    pub fn load(path: &Path) -> Result<Vocabulary, VocabError> {
        let text = std::fs::read_to_string(path).map_err(|source| VocabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Vocabulary::from_fixture(&text)
    }

    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        for (id, t) in self.tokens.iter().enumerate() {
            let hex: String = t.iter().map(|b| format!("{b:02x}")).collect();
            writeln!(out, "{id}\t{hex}").expect("writing to a String");
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> &[u8] {
        &self.tokens[id as usize]
    }

    pub fn id_of(&self, bytes: &[u8]) -> Option<u32> {
        let mut at = 0usize;
        for &b in bytes {
            at = self.child(at, b)? as usize;
        }
        self.nodes[at].token
    }

    pub(crate) fn node(&self, i: u32) -> &TrieNode {
        &self.nodes[i as usize]
    }

    fn child(&self, at: usize, b: u8) -> Option<u32> {
        let children = &self.nodes[at].children;
        children
            .binary_search_by_key(&b, |c| c.0)
            .ok()
            .map(|i| children[i].1)
    }

    /// Ids of all tokens that match `text` at `pos`, shortest first.
    pub fn matches_at(&self, text: &[u8], pos: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut at = 0usize;
        for &b in &text[pos..] {
            match self.child(at, b) {
                Some(next) => at = next as usize,
                None => break,
            }
            out.extend(self.nodes[at].token);
        }
        out
    }

    /// Greedy longest-match tokenization; `None` if some byte has no token.
    pub fn tokenize(&self, text: &[u8]) -> Option<Vec<u32>> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let id = *self.matches_at(text, pos).last()?;
            pos += self.token(id).len();
            out.push(id);
        }
        Some(out)
    }

    /// Byte-string lookup table, for callers that map text back to ids.
    pub fn index(&self) -> HashMap<&[u8], u32> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (&t[..], i as u32))
            .collect()
    }
}
