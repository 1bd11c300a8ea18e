use std::collections::BTreeSet;
use std::sync::Arc;

use arrayvec::ArrayVec;

use super::lex::{QuoteLex, QuoteStep, ScalarKind, ScalarLex};
use super::{Grammar, Node, NodeId, ANY, MAX_DEPTH, MAX_KEY_LEN};

type KeyBuf = ArrayVec<u8, MAX_KEY_LEN>;
type KeySet = BTreeSet<KeyBuf>;

fn ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn ident_cont(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.'
}

/// Whether `key` can still be extended into an identifier not in `taken`.
fn completable(key: &mut KeyBuf, taken: &KeySet) -> bool {
    if !taken.contains(key) {
        return true;
    }
    if key.is_full() {
        return false;
    }
    for c in (0..=255u8).filter(|&c| ident_cont(c)) {
        key.push(c);
        let ok = completable(key, taken);
        key.pop();
        if ok {
            return true;
        }
    }
    false
}

/// An open block. `col` is the column its own lines start at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Frame {
    /// `keys` tracks used names in unconstrained objects; schema objects
    /// track the next field with `cursor` instead.
    Object {
        col: u16,
        node: NodeId,
        cursor: u16,
        keys: Option<Arc<KeySet>>,
    },
    List {
        col: u16,
        remaining: u16,
        elem: NodeId,
    },
    Table {
        col: u16,
        remaining: u16,
        arity: u16,
        node: NodeId,
    },
}

impl Frame {
    fn col(&self) -> u16 {
        match self {
            Frame::Object { col, .. } | Frame::List { col, .. } | Frame::Table { col, .. } => *col,
        }
    }

    fn closable(&self, g: &Grammar) -> bool {
        match self {
            Frame::Object { node, cursor, .. } => {
                *node == ANY || *cursor as usize == g.fields(*node).len()
            }
            Frame::List { remaining, .. } | Frame::Table { remaining, .. } => *remaining == 0,
        }
    }

    fn accepts_line(&self, g: &Grammar) -> bool {
        match self {
            Frame::Object { node, cursor, .. } => {
                *node == ANY || (*cursor as usize) < g.fields(*node).len()
            }
            Frame::List { remaining, .. } | Frame::Table { remaining, .. } => *remaining > 0,
        }
    }
}

/// Where a scalar ends: at the end of the line, or as cell `i` of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum End {
    Line,
    Cell(u16),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Phase {
    /// Start of a line, after `n` spaces.
    Indent(u16),
    /// After the `-` of a list item whose dash is at `col`.
    Dash { elem: NodeId, col: u16 },
    /// After `- `.
    ItemHead { elem: NodeId, col: u16 },
    /// An identifier key. At the head of an unconstrained list item the
    /// bytes may instead be a scalar, lexed in parallel by `alt`.
    KeyFree {
        buf: KeyBuf,
        alt: Option<ScalarLex>,
        item_col: Option<u16>,
    },
    /// Spelling field `field` of the top object.
    KeyFixed { field: u16, pos: u16 },
    /// Key complete; `[` or `:` follows.
    AfterKey { node: NodeId, child_col: u16 },
    AfterColon { node: NodeId, child_col: u16 },
    ValueStart { kind: ScalarKind, end: End },
    Unquoted {
        lex: ScalarLex,
        kind: ScalarKind,
        end: End,
    },
    Quoted { lex: QuoteLex, end: End },
    QuotedEnd { end: End },
    Count {
        n: u16,
        digits: u8,
        node: NodeId,
        child_col: u16,
    },
    AfterCount { n: u16, node: NodeId, child_col: u16 },
    HeaderFree {
        names: Arc<KeySet>,
        buf: KeyBuf,
        n: u16,
        child_col: u16,
    },
    HeaderFixed {
        pos: u16,
        n: u16,
        node: NodeId,
        child_col: u16,
    },
    HeaderColon {
        n: u16,
        node: NodeId,
        child_col: u16,
        arity: u16,
    },
    /// `[N]...:` complete; the newline opens `frame`.
    HeaderEnd { frame: Frame },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(super) struct ToonCore {
    frames: Vec<Frame>,
    phase: Phase,
    started: bool,
}

const MAX_COUNT_DIGITS: u8 = 4;

impl ToonCore {
    pub(super) fn new(g: &Grammar) -> ToonCore {
        ToonCore {
            frames: vec![object_frame(0, g.root, 0)],
            phase: Phase::Indent(0),
            started: false,
        }
    }

    pub(super) fn step(&mut self, g: &Grammar, b: u8) -> Result<(), &'static str> {
        let phase = std::mem::replace(&mut self.phase, Phase::Indent(0));
        self.phase = self.next(g, phase, b)?;
        Ok(())
    }

    pub(super) fn is_accepting(&self, g: &Grammar) -> bool {
        if !self.started {
            return false;
        }
        let mut end = self.clone();
        if end.phase != Phase::Indent(0) && end.step(g, b'\n').is_err() {
            return false;
        }
        end.frames.iter().all(|f| f.closable(g))
    }

    /// Blocks a line may start in: (column, frame index), innermost first.
    /// A block is reachable if every block above it can close.
    fn targets(&self, g: &Grammar) -> ArrayVec<(u16, usize), MAX_TARGETS> {
        let mut out = ArrayVec::new();
        for (i, f) in self.frames.iter().enumerate().rev() {
            if f.accepts_line(g) && !out.is_full() {
                out.push((f.col(), i));
            }
            if !f.closable(g) {
                break;
            }
        }
        out
    }

    fn top(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("the root frame is never popped")
    }

    fn next(&mut self, g: &Grammar, phase: Phase, b: u8) -> Result<Phase, &'static str> {
        match phase {
            Phase::Indent(n) => {
                let targets = self.targets(g);
                if b == b' ' {
                    return if targets.iter().any(|&(c, _)| c > n) {
                        Ok(Phase::Indent(n + 1))
                    } else {
                        Err("no open block is indented this deep")
                    };
                }
                let &(_, idx) = targets
                    .iter()
                    .find(|&&(c, _)| c == n)
                    .ok_or("no open block accepts a line at this indentation")?;
                self.frames.truncate(idx + 1);
                self.started = true;
                self.line_start(g, b)
            }
            Phase::Dash { elem, col } => {
                let empty_object = matches!(g.node(elem), Some(Node::Object(f)) if f.is_empty());
                match b {
                    b'\n' if elem == ANY || empty_object => Ok(Phase::Indent(0)),
                    b' ' if !empty_object => Ok(Phase::ItemHead { elem, col }),
                    _ => Err("expected `- ` or a bare `-`"),
                }
            }
            Phase::ItemHead { elem, col } => self.item_head(g, elem, col, b),
            Phase::KeyFree { buf, alt, item_col } => self.key_free(buf, alt, item_col, b),
            Phase::KeyFixed { field, pos } => {
                let Frame::Object { col, node, .. } = *self.top() else {
                    unreachable!("fixed keys belong to an object")
                };
                let f = &g.fields(node)[field as usize];
                if f.text[pos as usize] != b {
                    return Err("key differs from the schema");
                }
                Ok(if pos as usize + 1 == f.text.len() {
                    Phase::AfterKey {
                        node: f.node,
                        child_col: col + 2,
                    }
                } else {
                    Phase::KeyFixed {
                        field,
                        pos: pos + 1,
                    }
                })
            }
            Phase::AfterKey { node, child_col } => match (g.node(node), b) {
                (Some(Node::Array { .. }), b'[') => Ok(count(node, child_col)),
                (Some(Node::Array { .. }), _) => Err("expected `[` after an array key"),
                (_, b':') => Ok(Phase::AfterColon { node, child_col }),
                _ => Err("expected `:` after the key"),
            },
            Phase::AfterColon { node, child_col } => match (b, g.node(node)) {
                (b' ', None) => Ok(value_start(ScalarKind::Any, End::Line)),
                (b' ', Some(Node::Scalar(kind))) => Ok(value_start(*kind, End::Line)),
                (b'\n', None) => {
                    if self.frames.len() < MAX_DEPTH {
                        self.frames.push(object_frame(child_col, ANY, 0));
                    }
                    Ok(Phase::Indent(0))
                }
                (b'\n', Some(Node::Object(_))) => {
                    self.frames.push(object_frame(child_col, node, 0));
                    Ok(Phase::Indent(0))
                }
                _ => Err("expected ` value` or a nested block after `:`"),
            },
            Phase::ValueStart { kind, end } => {
                if b == b'"' {
                    return if kind.allows_quoted() {
                        Ok(Phase::Quoted {
                            lex: QuoteLex::default(),
                            end,
                        })
                    } else {
                        Err("a quoted string cannot have this scalar kind")
                    };
                }
                let mut lex = ScalarLex::default();
                if lex.feed(b, kind) {
                    Ok(Phase::Unquoted { lex, kind, end })
                } else {
                    Err("byte cannot start a scalar of this kind")
                }
            }
            Phase::Unquoted { mut lex, kind, end } => {
                if b == b'\n' || b == b',' {
                    if !lex.can_end(kind) {
                        return Err("scalar is incomplete or of the wrong kind");
                    }
                    return self.end_value(g, end, b);
                }
                if lex.feed(b, kind) {
                    Ok(Phase::Unquoted { lex, kind, end })
                } else {
                    Err("byte not allowed in this scalar")
                }
            }
            Phase::Quoted { mut lex, end } => match lex.feed(b) {
                QuoteStep::Continue => Ok(Phase::Quoted { lex, end }),
                QuoteStep::Close => Ok(Phase::QuotedEnd { end }),
                QuoteStep::Reject => Err("byte not allowed in a quoted string"),
            },
            Phase::QuotedEnd { end } => self.end_value(g, end, b),
            Phase::Count {
                n,
                digits,
                node,
                child_col,
            } => {
                if b.is_ascii_digit() {
                    if digits == MAX_COUNT_DIGITS || (digits == 1 && n == 0) {
                        return Err("count has too many digits or a leading zero");
                    }
                    return Ok(Phase::Count {
                        n: n * 10 + u16::from(b - b'0'),
                        digits: digits + 1,
                        node,
                        child_col,
                    });
                }
                if b == b']' && digits > 0 {
                    Ok(Phase::AfterCount { n, node, child_col })
                } else {
                    Err("expected a digit or `]`")
                }
            }
            Phase::AfterCount { n, node, child_col } => match (b, g.node(node)) {
                (b':', None) => Ok(Phase::HeaderEnd {
                    frame: Frame::List {
                        col: child_col,
                        remaining: n,
                        elem: ANY,
                    },
                }),
                (b':', Some(Node::Array { elem, header, .. })) if header.is_none() || n == 0 => {
                    Ok(Phase::HeaderEnd {
                        frame: Frame::List {
                            col: child_col,
                            remaining: n,
                            elem: *elem,
                        },
                    })
                }
                (b'{', None) => Ok(Phase::HeaderFree {
                    names: Arc::default(),
                    buf: KeyBuf::new(),
                    n,
                    child_col,
                }),
                (b'{', Some(Node::Array { header: Some(_), .. })) => Ok(Phase::HeaderFixed {
                    pos: 1,
                    n,
                    node,
                    child_col,
                }),
                _ => Err("unexpected byte after `[N]`"),
            },
            Phase::HeaderFixed {
                pos,
                n,
                node,
                child_col,
            } => {
                let Some(Node::Array {
                    header: Some(text),
                    cells,
                    ..
                }) = g.node(node)
                else {
                    unreachable!("fixed headers belong to tabular arrays")
                };
                if text[pos as usize] != b {
                    return Err("header differs from the schema");
                }
                Ok(if pos as usize + 1 == text.len() {
                    Phase::HeaderColon {
                        n,
                        node,
                        child_col,
                        arity: cells.len() as u16,
                    }
                } else {
                    Phase::HeaderFixed {
                        pos: pos + 1,
                        n,
                        node,
                        child_col,
                    }
                })
            }
            Phase::HeaderFree {
                mut names,
                mut buf,
                n,
                child_col,
            } => {
                let ident = if buf.is_empty() { ident_start(b) } else { ident_cont(b) };
                if ident && !buf.is_full() {
                    buf.push(b);
                    if completable(&mut buf, &names) {
                        return Ok(Phase::HeaderFree {
                            names,
                            buf,
                            n,
                            child_col,
                        });
                    }
                    return Err("field name can only become a duplicate");
                }
                if !matches!(b, b',' | b'}') || buf.is_empty() || names.contains(&buf) {
                    return Err("expected a new field name, `,` or `}`");
                }
                Arc::make_mut(&mut names).insert(buf);
                Ok(if b == b',' {
                    Phase::HeaderFree {
                        names,
                        buf: KeyBuf::new(),
                        n,
                        child_col,
                    }
                } else {
                    Phase::HeaderColon {
                        n,
                        node: ANY,
                        child_col,
                        arity: names.len() as u16,
                    }
                })
            }
            Phase::HeaderColon {
                n,
                node,
                child_col,
                arity,
            } => {
                if b != b':' {
                    return Err("expected `:` after the field list");
                }
                Ok(Phase::HeaderEnd {
                    frame: Frame::Table {
                        col: child_col,
                        remaining: n,
                        arity,
                        node,
                    },
                })
            }
            Phase::HeaderEnd { frame } => {
                if b != b'\n' {
                    return Err("expected a line break after an array header");
                }
                self.frames.push(frame);
                Ok(Phase::Indent(0))
            }
        }
    }

    fn line_start(&mut self, g: &Grammar, b: u8) -> Result<Phase, &'static str> {
        match self.top() {
            Frame::Object { node: ANY, .. } => self.next(
                g,
                Phase::KeyFree {
                    buf: KeyBuf::new(),
                    alt: None,
                    item_col: None,
                },
                b,
            ),
            Frame::Object { cursor, .. } => {
                let field = *cursor;
                *cursor += 1;
                self.next(g, Phase::KeyFixed { field, pos: 0 }, b)
            }
            Frame::List {
                remaining,
                elem,
                col,
            } => {
                if b != b'-' {
                    return Err("expected `-` to start a list item");
                }
                *remaining -= 1;
                Ok(Phase::Dash {
                    elem: *elem,
                    col: *col,
                })
            }
            Frame::Table {
                remaining, node, ..
            } => {
                *remaining -= 1;
                let kind = cell_kind(g, *node, 0);
                self.next(g, value_start(kind, End::Cell(0)), b)
            }
        }
    }

    fn item_head(&mut self, g: &Grammar, elem: NodeId, col: u16, b: u8) -> Result<Phase, &'static str> {
        match g.node(elem) {
            None => {
                if b == b'[' {
                    if self.frames.len() >= MAX_DEPTH {
                        return Err("nesting limit reached");
                    }
                    return Ok(count(ANY, col + 4));
                }
                if ident_start(b) {
                    let mut alt = ScalarLex::default();
                    let alt = alt.feed(b, ScalarKind::Any).then_some(alt);
                    let mut buf = KeyBuf::new();
                    buf.push(b);
                    return Ok(Phase::KeyFree {
                        buf,
                        alt,
                        item_col: Some(col),
                    });
                }
                self.next(g, value_start(ScalarKind::Any, End::Line), b)
            }
            Some(Node::Scalar(kind)) => self.next(g, value_start(*kind, End::Line), b),
            Some(Node::Object(_)) => {
                self.frames.push(Frame::Object {
                    col: col + 2,
                    node: elem,
                    cursor: 1,
                    keys: None,
                });
                self.next(g, Phase::KeyFixed { field: 0, pos: 0 }, b)
            }
            Some(Node::Array { .. }) => {
                if b == b'[' {
                    Ok(count(elem, col + 4))
                } else {
                    Err("expected a nested `[N]` header")
                }
            }
        }
    }

    fn key_free(
        &mut self,
        mut buf: KeyBuf,
        mut alt: Option<ScalarLex>,
        item_col: Option<u16>,
        b: u8,
    ) -> Result<Phase, &'static str> {
        let ident = if buf.is_empty() { ident_start(b) } else { ident_cont(b) };
        if ident && !buf.is_full() {
            buf.push(b);
            let live = match (item_col, self.top()) {
                (None, Frame::Object { keys: Some(keys), .. }) => completable(&mut buf, keys),
                _ => true,
            };
            if live {
                if let Some(a) = &mut alt {
                    if !a.feed(b, ScalarKind::Any) {
                        alt = None;
                    }
                }
                return Ok(Phase::KeyFree { buf, alt, item_col });
            }
            buf.pop();
        }
        if matches!(b, b':' | b'[') && !buf.is_empty() {
            return self.commit_key(buf, item_col, b);
        }
        let Some(mut lex) = alt else {
            return Err("expected an identifier key");
        };
        if b == b'\n' {
            return if lex.can_end(ScalarKind::Any) {
                Ok(Phase::Indent(0))
            } else {
                Err("scalar is incomplete")
            };
        }
        if lex.feed(b, ScalarKind::Any) {
            Ok(Phase::Unquoted {
                lex,
                kind: ScalarKind::Any,
                end: End::Line,
            })
        } else {
            Err("byte not allowed in a key or scalar")
        }
    }

    fn commit_key(&mut self, buf: KeyBuf, item_col: Option<u16>, b: u8) -> Result<Phase, &'static str> {
        let owner_col = match item_col {
            None => {
                let Frame::Object {
                    keys: Some(keys),
                    col,
                    ..
                } = self.top()
                else {
                    unreachable!("free keys belong to unconstrained objects")
                };
                if keys.contains(&buf) {
                    return Err("duplicate key");
                }
                let col = *col;
                Arc::make_mut(keys).insert(buf);
                col
            }
            Some(dash) => {
                if self.frames.len() >= MAX_DEPTH {
                    return Err("nesting limit reached");
                }
                let mut keys = KeySet::new();
                keys.insert(buf);
                self.frames.push(Frame::Object {
                    col: dash + 2,
                    node: ANY,
                    cursor: 0,
                    keys: Some(Arc::new(keys)),
                });
                dash + 2
            }
        };
        if b == b':' {
            return Ok(Phase::AfterColon {
                node: ANY,
                child_col: owner_col + 2,
            });
        }
        if self.frames.len() >= MAX_DEPTH {
            return Err("nesting limit reached");
        }
        Ok(count(ANY, owner_col + 2))
    }

    fn end_value(&mut self, g: &Grammar, end: End, b: u8) -> Result<Phase, &'static str> {
        match end {
            End::Line if b == b'\n' => Ok(Phase::Indent(0)),
            End::Line => Err("expected the end of the line"),
            End::Cell(i) => {
                let Frame::Table { arity, node, .. } = *self.top() else {
                    unreachable!("cells belong to a table")
                };
                match b {
                    b',' if i + 1 < arity => Ok(value_start(cell_kind(g, node, i + 1), End::Cell(i + 1))),
                    b'\n' if i + 1 == arity => Ok(Phase::Indent(0)),
                    _ => Err("row length differs from the header"),
                }
            }
        }
    }
}

const MAX_TARGETS: usize = 64;

fn object_frame(col: u16, node: NodeId, cursor: u16) -> Frame {
    Frame::Object {
        col,
        node,
        cursor,
        keys: (node == ANY).then(Arc::default),
    }
}

fn count(node: NodeId, child_col: u16) -> Phase {
    Phase::Count {
        n: 0,
        digits: 0,
        node,
        child_col,
    }
}

fn value_start(kind: ScalarKind, end: End) -> Phase {
    Phase::ValueStart { kind, end }
}

fn cell_kind(g: &Grammar, node: NodeId, i: u16) -> ScalarKind {
    match g.node(node) {
        Some(Node::Array { cells, .. }) => cells[i as usize],
        _ => ScalarKind::Any,
    }
}
