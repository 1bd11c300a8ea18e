//! The structured-data tree shared by every track, plus canonicalization and
//! deep comparison against gold payloads.

use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};

/// Insertion-ordered object map. Keys are unique by construction.
pub type Map = IndexMap<String, Value>;

/// A finite `f64`. NaN and infinities are not representable in JSON or TOON.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Finite(f64);

impl Finite {
    pub fn new(f: f64) -> Option<Self> {
        f.is_finite().then_some(Finite(f))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The exact integer value, if the float has no fractional part.
    pub fn as_integer(self) -> Option<BigInt> {
        if self.0.fract() == 0.0 {
            BigInt::from_f64(self.0)
        } else {
            None
        }
    }
}

/// Language-neutral structured value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(BigInt),
    Float(Finite),
    Str(String),
    Object(Map),
    Array(Vec<Value>),
}

impl Value {
    /// Builds a float value; `None` for NaN or infinity.
    pub fn float(f: f64) -> Option<Value> {
        Finite::new(f).map(Value::Float)
    }

    pub fn int(i: i64) -> Value {
        Value::Int(i.into())
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    /// Builds an object from pairs. Later duplicates replace earlier ones.
    pub fn object<K: Into<String>>(pairs: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Object(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn kind(&self) -> Kind {
        match self {
            Value::Null => Kind::Null,
            Value::Bool(_) => Kind::Bool,
            Value::Int(_) => Kind::Int,
            Value::Float(_) => Kind::Float,
            Value::Str(_) => Kind::Str,
            Value::Object(_) => Kind::Object,
            Value::Array(_) => Kind::Array,
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, Value::Object(_) | Value::Array(_))
    }

    pub fn as_object(&self) -> Option<&Map> {
        match self {
            Value::Object(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => i.to_f64(),
            Value::Float(f) => Some(f.get()),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.as_object()?.get(key)
    }

    /// Follows a path of keys and indices.
    pub fn pointer(&self, path: &[Segment]) -> Option<&Value> {
        path.iter().try_fold(self, |v, seg| match (seg, v) {
            (Segment::Key(k), Value::Object(m)) => m.get(k.as_str()),
            (Segment::Index(i), Value::Array(a)) => a.get(*i),
            _ => None,
        })
    }
}

/// Coarse value kind, used in diff and validation messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Null,
    Bool,
    Int,
    Float,
    Str,
    Object,
    Array,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Null => "null",
            Kind::Bool => "bool",
            Kind::Int => "int",
            Kind::Float => "float",
            Kind::Str => "string",
            Kind::Object => "object",
            Kind::Array => "array",
        })
    }
}

/// One step of a path into a value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Key(String),
    Index(usize),
}

/// Renders a path as `items[0].qty`; the empty path renders as `$`.
pub fn format_path(path: &[Segment]) -> String {
    if path.is_empty() {
        return "$".to_string();
    }
    let mut out = String::new();
    for seg in path {
        match seg {
            Segment::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            Segment::Index(i) => {
                out.push_str(&format!("[{i}]"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffKind {
    MissingKey,
    ExtraKey,
    TypeMismatch,
    ValueMismatch,
    LengthMismatch,
}

impl fmt::Display for DiffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffKind::MissingKey => "missing-key",
            DiffKind::ExtraKey => "extra-key",
            DiffKind::TypeMismatch => "type-mismatch",
            DiffKind::ValueMismatch => "value-mismatch",
            DiffKind::LengthMismatch => "length-mismatch",
        })
    }
}

/// First point at which two values differ. An empty path means the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffPath {
    pub segments: Vec<Segment>,
    pub kind: DiffKind,
}

impl fmt::Display for DiffPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.kind, format_path(&self.segments))
    }
}

impl DiffPath {
    /// Human-readable description naming both sides, for repair prompts.
    /// `actual` and `expected` are the operands passed to [`deep_equal`].
    pub fn describe(&self, actual: &Value, expected: &Value) -> String {
        let path = format_path(&self.segments);
        let a = actual.pointer(&self.segments);
        let e = expected.pointer(&self.segments);
        let show = |v: Option<&Value>| match v {
            Some(v) if v.is_scalar() => crate::json::emit_canonical_json(v),
            Some(v) => v.kind().to_string(),
            None => "nothing".to_string(),
        };
        match self.kind {
            DiffKind::MissingKey => format!("missing field `{path}`"),
            DiffKind::ExtraKey => format!("unexpected field `{path}`"),
            DiffKind::LengthMismatch => format!(
                "wrong number of elements in `{path}`: expected {}, found {}",
                e.and_then(Value::as_array).map_or(0, <[Value]>::len),
                a.and_then(Value::as_array).map_or(0, <[Value]>::len),
            ),
            DiffKind::TypeMismatch | DiffKind::ValueMismatch => format!(
                "wrong value at `{path}`: expected {}, found {}",
                show(e),
                show(a)
            ),
        }
    }
}

/// Recursively sorts object keys and turns zero-fraction floats into ints.
/// Array order is preserved.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Float(f) => match f.as_integer() {
            Some(i) => Value::Int(i),
            None => Value::Float(*f),
        },
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> =
                m.iter().map(|(k, v)| (k.clone(), canonicalize(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

/// Structural equality of canonical forms. On inequality returns the first
/// difference in depth-first, key-sorted order. `MissingKey` means present in
/// `expected` but not in `actual`; `ExtraKey` the reverse.
pub fn deep_equal(actual: &Value, expected: &Value) -> (bool, Option<DiffPath>) {
    let a = canonicalize(actual);
    let e = canonicalize(expected);
    let mut path = Vec::new();
    match diff(&a, &e, &mut path) {
        None => (true, None),
        Some(kind) => (
            false,
            Some(DiffPath {
                segments: path,
                kind,
            }),
        ),
    }
}

fn num_eq(a: &Value, b: &Value) -> Option<bool> {
    Some(match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x.get() == y.get(),
        (Value::Int(i), Value::Float(f)) | (Value::Float(f), Value::Int(i)) => {
            f.as_integer().as_ref() == Some(i)
        }
        _ => return None,
    })
}

/// Writes the path of the first difference into `path` (which is left
/// pointing at it) and returns its kind.
fn diff(a: &Value, e: &Value, path: &mut Vec<Segment>) -> Option<DiffKind> {
    if let Some(eq) = num_eq(a, e) {
        return (!eq).then_some(DiffKind::ValueMismatch);
    }
    match (a, e) {
        (Value::Null, Value::Null) => None,
        (Value::Bool(x), Value::Bool(y)) => (x != y).then_some(DiffKind::ValueMismatch),
        (Value::Str(x), Value::Str(y)) => (x != y).then_some(DiffKind::ValueMismatch),
        (Value::Array(xs), Value::Array(ys)) => {
            for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                path.push(Segment::Index(i));
                if let Some(k) = diff(x, y, path) {
                    return Some(k);
                }
                path.pop();
            }
            (xs.len() != ys.len()).then_some(DiffKind::LengthMismatch)
        }
        (Value::Object(xm), Value::Object(ym)) => {
            // Both sides are key-sorted after canonicalization: merge-walk.
            let mut xi = xm.iter().peekable();
            let mut yi = ym.iter().peekable();
            loop {
                let step = match (xi.peek(), yi.peek()) {
                    (None, None) => return None,
                    (Some((k, _)), None) => Err((k.to_string(), DiffKind::ExtraKey)),
                    (None, Some((k, _))) => Err((k.to_string(), DiffKind::MissingKey)),
                    (Some((xk, _)), Some((yk, _))) => match xk.cmp(yk) {
                        Ordering::Less => Err((xk.to_string(), DiffKind::ExtraKey)),
                        Ordering::Greater => Err((yk.to_string(), DiffKind::MissingKey)),
                        Ordering::Equal => Ok(()),
                    },
                };
                match step {
                    Err((key, kind)) => {
                        path.push(Segment::Key(key));
                        return Some(kind);
                    }
                    Ok(()) => {
                        let (k, x) = xi.next().expect("peeked");
                        let (_, y) = yi.next().expect("peeked");
                        path.push(Segment::Key(k.clone()));
                        if let Some(kind) = diff(x, y, path) {
                            return Some(kind);
                        }
                        path.pop();
                    }
                }
            }
        }
        _ => Some(DiffKind::TypeMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(pairs: &[(&str, Value)]) -> Value {
        Value::object(pairs.iter().map(|(k, v)| (*k, v.clone())))
    }

    #[test]
    fn canonicalize_sorts_recursively() {
        let v = obj(&[
            ("b", Value::int(1)),
            ("a", obj(&[("d", Value::int(4)), ("c", Value::int(3))])),
        ]);
        let c = canonicalize(&v);
        let keys: Vec<_> = c.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["a", "b"]);
        let inner: Vec<_> = c.get("a").unwrap().as_object().unwrap().keys().cloned().collect();
        assert_eq!(inner, ["c", "d"]);
    }

    #[test]
    fn zero_fraction_float_becomes_int() {
        assert_eq!(canonicalize(&Value::float(2.0).unwrap()), Value::int(2));
        assert_eq!(
            canonicalize(&Value::float(2.5).unwrap()),
            Value::float(2.5).unwrap()
        );
        assert_eq!(canonicalize(&Value::float(-0.0).unwrap()), Value::int(0));
    }

    #[test]
    fn int_equals_integral_float() {
        let a = obj(&[("qty", Value::int(2))]);
        let b = obj(&[("qty", Value::float(2.0).unwrap())]);
        assert_eq!(deep_equal(&a, &b), (true, None));
    }

    #[test]
    fn length_mismatch_reported_at_array() {
        let x = Value::int(1);
        let a = obj(&[("items", Value::Array(vec![x.clone()]))]);
        let b = obj(&[("items", Value::Array(vec![x.clone(), Value::int(2)]))]);
        let (eq, d) = deep_equal(&a, &b);
        assert!(!eq);
        let d = d.unwrap();
        assert_eq!(d.kind, DiffKind::LengthMismatch);
        assert_eq!(d.segments, vec![Segment::Key("items".into())]);
    }

    #[test]
    fn first_difference_in_key_order() {
        let a = obj(&[("z", Value::int(1)), ("a", Value::int(1))]);
        let b = obj(&[("z", Value::int(2)), ("a", Value::int(2))]);
        let d = deep_equal(&a, &b).1.unwrap();
        assert_eq!(d.segments, vec![Segment::Key("a".into())]);
        assert_eq!(d.kind, DiffKind::ValueMismatch);
    }

    #[test]
    fn missing_and_extra_keys() {
        let a = obj(&[("a", Value::int(1))]);
        let b = obj(&[("a", Value::int(1)), ("b", Value::int(1))]);
        assert_eq!(deep_equal(&a, &b).1.unwrap().kind, DiffKind::MissingKey);
        assert_eq!(deep_equal(&b, &a).1.unwrap().kind, DiffKind::ExtraKey);
    }

    #[test]
    fn type_mismatch_and_root_path() {
        let d = deep_equal(&Value::int(1), &Value::str("1")).1.unwrap();
        assert_eq!(d.kind, DiffKind::TypeMismatch);
        assert!(d.segments.is_empty());
        assert_eq!(format_path(&d.segments), "$");
    }

    #[test]
    fn describe_mentions_both_values() {
        let a = obj(&[("price", Value::float(14.0).unwrap())]);
        let b = obj(&[("price", Value::float(14.5).unwrap())]);
        let d = deep_equal(&a, &b).1.unwrap();
        let text = d.describe(&a, &b);
        assert!(text.contains("expected 14.5"), "{text}");
        assert!(text.contains("found 14.0"), "{text}");
    }

    #[test]
    fn non_finite_floats_rejected() {
        assert!(Value::float(f64::NAN).is_none());
        assert!(Value::float(f64::INFINITY).is_none());
    }
}
