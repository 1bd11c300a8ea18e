//! Numeral lexing and float formatting shared by the JSON and TOON codecs.

use num_bigint::BigInt;

/// Result of lexing a complete numeral.
#[derive(Debug, Clone, PartialEq)]
pub enum Numeral {
    Int(BigInt),
    Float(f64),
}

/// Returns `true` if `s` is exactly a JSON-style numeral:
/// `-? (0 | [1-9][0-9]*) (\.[0-9]+)? ([eE][+-]?[0-9]+)?`.
pub fn is_numeral(s: &str) -> bool {
    numeral_shape(s).is_some()
}

/// Returns `Some(is_integer)` when `s` matches the numeral grammar.
fn numeral_shape(s: &str) -> Option<bool> {
    let b = s.as_bytes();
    let mut i = 0;
    if b.get(i) == Some(&b'-') {
        i += 1;
    }
    match b.get(i) {
        Some(b'0') => i += 1,
        Some(c) if c.is_ascii_digit() => {
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
        }
        _ => return None,
    }
    let mut integer = true;
    if b.get(i) == Some(&b'.') {
        integer = false;
        i += 1;
        let start = i;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        integer = false;
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let start = i;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    (i == b.len()).then_some(integer)
}

/// Lexes a numeral. Returns `None` when `s` is not a numeral, and
/// `Some(Err(()))` when it is one but does not fit a finite `f64`.
pub fn lex_numeral(s: &str) -> Option<Result<Numeral, ()>> {
    let integer = numeral_shape(s)?;
    if integer {
        let n: BigInt = s.parse().expect("numeral grammar admits only valid integers");
        return Some(Ok(Numeral::Int(n)));
    }
    let f: f64 = s.parse().expect("numeral grammar admits only valid floats");
    Some(if f.is_finite() {
        Ok(Numeral::Float(f))
    } else {
        Err(())
    })
}

/// Shortest round-trip decimal form. Zero-fraction values keep a `.0` so the
/// text still lexes as a float; very large or small magnitudes use exponents.
pub fn format_float(f: f64) -> String {
    debug_assert!(f.is_finite());
    let abs = f.abs();
    if abs != 0.0 && !(1e-6..1e21).contains(&abs) {
        return format!("{f:e}");
    }
    let s = format!("{f}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}
