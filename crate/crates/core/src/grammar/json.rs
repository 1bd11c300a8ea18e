use std::collections::BTreeSet;
use std::sync::Arc;

use super::lex::{NumLex, Utf8};
use super::MAX_DEPTH;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Frame {
    /// Decoded keys seen so far.
    Object(Arc<BTreeSet<Box<[u8]>>>),
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
enum Escape {
    #[default]
    None,
    Backslash,
    /// Inside `\uXXXX` after `digits` hex digits, with the code unit so far.
    Hex { digits: u8, unit: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct StrLex {
    escape: Escape,
    utf8: Utf8,
}

enum StrStep {
    /// Accepted, contributing these decoded bytes.
    Bytes(arrayvec::ArrayVec<u8, 4>),
    Close,
}

impl StrLex {
    /// Lone surrogate escapes are rejected outright, so a `\u` escape always
    /// decodes to one scalar value.
    fn feed(&mut self, b: u8) -> Result<StrStep, &'static str> {
        let mut out = arrayvec::ArrayVec::new();
        match self.escape {
            Escape::Backslash => {
                let decoded = match b {
                    b'"' | b'\\' | b'/' => b,
                    b'b' => 0x08,
                    b'f' => 0x0C,
                    b'n' => b'\n',
                    b'r' => b'\r',
                    b't' => b'\t',
                    b'u' => {
                        self.escape = Escape::Hex { digits: 0, unit: 0 };
                        return Ok(StrStep::Bytes(out));
                    }
                    _ => return Err("invalid escape"),
                };
                self.escape = Escape::None;
                out.push(decoded);
            }
            Escape::Hex { digits, unit } => {
                let d = (b as char).to_digit(16).ok_or("expected a hex digit")? as u16;
                let unit = unit << 4 | d;
                if digits == 1 && (0xD8..=0xDF).contains(&unit) {
                    return Err("surrogate escapes are not allowed");
                }
                if digits == 3 {
                    self.escape = Escape::None;
                    let c = char::from_u32(u32::from(unit)).expect("surrogates excluded");
                    let mut buf = [0u8; 4];
                    out.extend(c.encode_utf8(&mut buf).bytes());
                } else {
                    self.escape = Escape::Hex {
                        digits: digits + 1,
                        unit,
                    };
                }
            }
            Escape::None => {
                if self.utf8.complete() {
                    match b {
                        b'"' => return Ok(StrStep::Close),
                        b'\\' => {
                            self.escape = Escape::Backslash;
                            return Ok(StrStep::Bytes(out));
                        }
                        0x00..=0x1F => return Err("control byte in a string"),
                        _ => {}
                    }
                }
                if !self.utf8.feed(b) {
                    return Err("invalid UTF-8");
                }
                out.push(b);
            }
        }
        Ok(StrStep::Bytes(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
enum Phase {
    /// Before the root `{`.
    #[default]
    Start,
    Value,
    /// After `{`: a key or `}`.
    ObjOpen,
    /// After `,` in an object: a key.
    ObjNext,
    Key { lex: StrLex, buf: Vec<u8> },
    Colon,
    /// After `[`: a value or `]`.
    ArrOpen,
    Str(StrLex),
    Num(NumLex),
    Lit { word: u8, pos: u8 },
    /// After a complete value.
    After,
    /// After the root object closed.
    Done,
}

const WORDS: [&[u8]; 3] = [b"true", b"false", b"null"];

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Well-formed JSON with an object at the root, no leading whitespace,
/// unique keys and at most `MAX_DEPTH` nested containers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub(super) struct JsonCore {
    stack: Vec<Frame>,
    phase: Phase,
}

impl JsonCore {
    pub(super) fn is_accepting(&self) -> bool {
        self.phase == Phase::Done
    }

    pub(super) fn step(&mut self, b: u8) -> Result<(), &'static str> {
        let phase = std::mem::take(&mut self.phase);
        self.phase = self.next(phase, b)?;
        Ok(())
    }

    fn next(&mut self, phase: Phase, b: u8) -> Result<Phase, &'static str> {
        if is_ws(b)
            && matches!(
                phase,
                Phase::Value
                    | Phase::ObjOpen
                    | Phase::ObjNext
                    | Phase::Colon
                    | Phase::ArrOpen
                    | Phase::After
                    | Phase::Done
            )
        {
            return Ok(phase);
        }
        match phase {
            Phase::Start if b == b'{' => self.open(Frame::Object(Arc::default()), Phase::ObjOpen),
            Phase::Start => Err("the document must be an object"),
            Phase::ObjOpen if b == b'}' => Ok(self.close()),
            Phase::ObjOpen | Phase::ObjNext if b == b'"' => Ok(Phase::Key {
                lex: StrLex::default(),
                buf: Vec::new(),
            }),
            Phase::ObjOpen | Phase::ObjNext => Err("expected a key"),
            Phase::Key { mut lex, mut buf } => match lex.feed(b)? {
                StrStep::Bytes(bytes) => {
                    buf.extend(bytes);
                    Ok(Phase::Key { lex, buf })
                }
                StrStep::Close => {
                    let Some(Frame::Object(keys)) = self.stack.last_mut() else {
                        unreachable!("keys belong to an object")
                    };
                    if keys.contains(&buf[..]) {
                        return Err("duplicate key");
                    }
                    Arc::make_mut(keys).insert(buf.into_boxed_slice());
                    Ok(Phase::Colon)
                }
            },
            Phase::Colon if b == b':' => Ok(Phase::Value),
            Phase::Colon => Err("expected `:`"),
            Phase::ArrOpen if b == b']' => Ok(self.close()),
            Phase::ArrOpen | Phase::Value => self.value(b),
            Phase::Str(mut lex) => match lex.feed(b)? {
                StrStep::Bytes(_) => Ok(Phase::Str(lex)),
                StrStep::Close => Ok(Phase::After),
            },
            Phase::Num(num) => {
                let mut grown = num;
                grown.feed(b);
                if !grown.dead() && grown.in_bounds() {
                    Ok(Phase::Num(grown))
                } else if num.complete() && matches!(b, b',' | b']' | b'}') {
                    self.next(Phase::After, b)
                } else if num.complete() && is_ws(b) {
                    Ok(Phase::After)
                } else {
                    Err("invalid number")
                }
            }
            Phase::Lit { word, pos } => {
                let w = WORDS[word as usize];
                if w[pos as usize] != b {
                    return Err("invalid literal");
                }
                Ok(if pos as usize + 1 == w.len() {
                    Phase::After
                } else {
                    Phase::Lit { word, pos: pos + 1 }
                })
            }
            Phase::After => match (b, self.stack.last()) {
                (b',', Some(Frame::Object(_))) => Ok(Phase::ObjNext),
                (b',', Some(Frame::Array)) => Ok(Phase::Value),
                (b'}', Some(Frame::Object(_))) | (b']', Some(Frame::Array)) => Ok(self.close()),
                _ => Err("expected `,` or a closing bracket"),
            },
            Phase::Done => Err("only whitespace may follow the document"),
        }
    }

    fn value(&mut self, b: u8) -> Result<Phase, &'static str> {
        match b {
            b'{' => self.open(Frame::Object(Arc::default()), Phase::ObjOpen),
            b'[' => self.open(Frame::Array, Phase::ArrOpen),
            b'"' => Ok(Phase::Str(StrLex::default())),
            b't' | b'f' | b'n' => Ok(Phase::Lit {
                word: match b {
                    b't' => 0,
                    b'f' => 1,
                    _ => 2,
                },
                pos: 1,
            }),
            b'-' | b'0'..=b'9' => {
                let mut num = NumLex::default();
                num.feed(b);
                Ok(Phase::Num(num))
            }
            _ => Err("expected a value"),
        }
    }

    fn open(&mut self, frame: Frame, phase: Phase) -> Result<Phase, &'static str> {
        if self.stack.len() >= MAX_DEPTH {
            return Err("nesting limit reached");
        }
        self.stack.push(frame);
        Ok(phase)
    }

    fn close(&mut self) -> Phase {
        self.stack.pop();
        if self.stack.is_empty() {
            Phase::Done
        } else {
            Phase::After
        }
    }
}
