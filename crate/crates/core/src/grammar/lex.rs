//! Byte-level lexers shared by the TOON and JSON automata.

use crate::schema::Schema;

/// What a scalar position accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum ScalarKind {
    Any,
    Int,
    Float,
    Str,
    Bool,
}

impl ScalarKind {
    pub(crate) fn of(s: &Schema) -> Option<ScalarKind> {
        Some(match s {
            Schema::Int => ScalarKind::Int,
            Schema::Float => ScalarKind::Float,
            Schema::Str => ScalarKind::Str,
            Schema::Bool => ScalarKind::Bool,
            Schema::Object(_) | Schema::Array(_) => return None,
        })
    }

    pub(crate) fn allows_quoted(self) -> bool {
        matches!(self, ScalarKind::Any | ScalarKind::Str)
    }
}

/// Incremental UTF-8 validation (no overlongs, no surrogates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub(crate) struct Utf8 {
    need: u8,
    lo: u8,
    hi: u8,
}

impl Utf8 {
    pub(crate) fn feed(&mut self, b: u8) -> bool {
        if self.need > 0 {
            if b < self.lo || b > self.hi {
                return false;
            }
            self.need -= 1;
            self.lo = 0x80;
            self.hi = 0xBF;
            return true;
        }
        let (need, lo, hi) = match b {
            0x00..=0x7F => return true,
            0xC2..=0xDF => (1, 0x80, 0xBF),
            0xE0 => (2, 0xA0, 0xBF),
            0xE1..=0xEC | 0xEE..=0xEF => (2, 0x80, 0xBF),
            0xED => (2, 0x80, 0x9F),
            0xF0 => (3, 0x90, 0xBF),
            0xF1..=0xF3 => (3, 0x80, 0xBF),
            0xF4 => (3, 0x80, 0x8F),
            _ => return false,
        };
        *self = Utf8 { need, lo, hi };
        true
    }

    pub(crate) fn complete(self) -> bool {
        self.need == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Num {
    Start,
    Minus,
    Zero,
    Int,
    Dot,
    Frac,
    E,
    ESign,
    Exp,
    Dead,
}

/// Largest integer-part length, and exponent length, for which a numeral
/// with a fraction or exponent is guaranteed to be a finite `f64`.
const MAX_FLOAT_INT_DIGITS: u8 = 15;
const MAX_EXP_DIGITS: u8 = 2;

/// DFA for `-? (0 | [1-9][0-9]*) (\.[0-9]+)? ([eE][+-]?[0-9]+)?` with digit
/// counters for the finiteness bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct NumLex {
    state: Num,
    int_digits: u8,
    exp_digits: u8,
}

impl Default for NumLex {
    fn default() -> Self {
        NumLex {
            state: Num::Start,
            int_digits: 0,
            exp_digits: 0,
        }
    }
}

impl NumLex {
    pub(crate) fn feed(&mut self, b: u8) {
        use Num::*;
        let digit = b.is_ascii_digit();
        self.state = match (self.state, b) {
            (Start, b'-') => Minus,
            (Start | Minus, b'0') => Zero,
            (Start | Minus, _) if digit => Int,
            (Int, _) if digit => Int,
            (Zero | Int, b'.') => Dot,
            (Dot | Frac, _) if digit => Frac,
            (Zero | Int | Frac, b'e' | b'E') => E,
            (E, b'+' | b'-') => ESign,
            (E | ESign | Exp, _) if digit => Exp,
            _ => Dead,
        };
        match self.state {
            Zero | Int => self.int_digits = self.int_digits.saturating_add(1).min(16),
            Exp => self.exp_digits = self.exp_digits.saturating_add(1).min(3),
            _ => {}
        }
    }

    pub(crate) fn dead(self) -> bool {
        self.state == Num::Dead
    }

    /// The text so far is a complete numeral.
    pub(crate) fn complete(self) -> bool {
        matches!(self.state, Num::Zero | Num::Int | Num::Frac | Num::Exp)
    }

    /// Still on the integer-only path.
    pub(crate) fn integral(self) -> bool {
        matches!(self.state, Num::Start | Num::Minus | Num::Zero | Num::Int)
    }

    /// No fraction or exponent has pushed the value past the finite bound.
    pub(crate) fn in_bounds(self) -> bool {
        self.integral()
            || (self.int_digits <= MAX_FLOAT_INT_DIGITS && self.exp_digits <= MAX_EXP_DIGITS)
    }
}

const WORDS: [&[u8]; 3] = [b"true", b"false", b"null"];

/// Tracks whether the text so far is a prefix of `true`, `false` or `null`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct Keyword {
    word: u8,
    pos: u8,
}

const KW_UNDECIDED: u8 = 254;
const KW_DEAD: u8 = 255;

impl Default for Keyword {
    fn default() -> Self {
        Keyword {
            word: KW_UNDECIDED,
            pos: 0,
        }
    }
}

impl Keyword {
    pub(crate) fn feed(&mut self, b: u8) {
        if self.word == KW_UNDECIDED {
            self.word = match b {
                b't' => 0,
                b'f' => 1,
                b'n' => 2,
                _ => KW_DEAD,
            };
            self.pos = 1;
            return;
        }
        if self.word == KW_DEAD {
            return;
        }
        let w = WORDS[self.word as usize];
        if w.get(self.pos as usize) == Some(&b) {
            self.pos += 1;
        } else {
            self.word = KW_DEAD;
        }
    }

    pub(crate) fn alive(self) -> bool {
        self.word != KW_DEAD
    }

    pub(crate) fn is_bool_prefix(self) -> bool {
        matches!(self.word, 0 | 1)
    }

    /// Index into `true`, `false`, `null` of the completed word.
    pub(crate) fn complete(self) -> Option<u8> {
        (self.word < 3 && self.pos as usize == WORDS[self.word as usize].len()).then_some(self.word)
    }
}

/// Bytes that may appear in an unquoted TOON scalar.
pub(crate) fn unquoted_byte(b: u8) -> bool {
    b >= 0x20 && b != 0x7F && !b":,\"\\[]{}".contains(&b)
}

/// Lexer for one unquoted TOON scalar, pruned by the expected kind so that a
/// byte is only accepted if the scalar can still end as that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub(crate) struct ScalarLex {
    num: NumLex,
    kw: Keyword,
    utf8: Utf8,
    nonempty: bool,
    last_space: bool,
}

impl ScalarLex {
    pub(crate) fn feed(&mut self, b: u8, kind: ScalarKind) -> bool {
        if !unquoted_byte(b) || (!self.nonempty && b == b' ') || !self.utf8.feed(b) {
            return false;
        }
        self.num.feed(b);
        self.kw.feed(b);
        self.nonempty = true;
        self.last_space = b == b' ';
        match kind {
            ScalarKind::Any | ScalarKind::Str => true,
            ScalarKind::Int => !self.num.dead() && self.num.integral(),
            ScalarKind::Float => !self.num.dead() && self.num.in_bounds(),
            ScalarKind::Bool => self.kw.alive() && self.kw.is_bool_prefix(),
        }
    }

    /// The scalar may end here and will lex as `kind`.
    pub(crate) fn can_end(self, kind: ScalarKind) -> bool {
        if !self.nonempty || self.last_space || !self.utf8.complete() {
            return false;
        }
        let numeral = self.num.complete();
        match kind {
            ScalarKind::Any => !numeral || self.num.in_bounds(),
            ScalarKind::Int => numeral && self.num.integral(),
            ScalarKind::Float => numeral && self.num.in_bounds(),
            ScalarKind::Bool => matches!(self.kw.complete(), Some(0 | 1)),
            ScalarKind::Str => !numeral && self.kw.complete().is_none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QuoteStep {
    Continue,
    Close,
    Reject,
}

/// Body of a TOON double-quoted string, after the opening quote. Escapes are
/// limited to `\" \\ \n \r \t`; raw control bytes are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub(crate) struct QuoteLex {
    escape: bool,
    utf8: Utf8,
}

impl QuoteLex {
    pub(crate) fn feed(&mut self, b: u8) -> QuoteStep {
        if self.escape {
            self.escape = false;
            return if matches!(b, b'"' | b'\\' | b'n' | b'r' | b't') {
                QuoteStep::Continue
            } else {
                QuoteStep::Reject
            };
        }
        if self.utf8.complete() {
            match b {
                b'"' => return QuoteStep::Close,
                b'\\' => {
                    self.escape = true;
                    return QuoteStep::Continue;
                }
                0x00..=0x1F | 0x7F => return QuoteStep::Reject,
                _ => {}
            }
        }
        if self.utf8.feed(b) {
            QuoteStep::Continue
        } else {
            QuoteStep::Reject
        }
    }
}
