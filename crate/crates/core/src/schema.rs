//! Structural schemas and lax validation.

use std::fmt;

use crate::number::{lex_numeral, Numeral};
use crate::value::{format_path, Kind, Map, Segment, Value};

/// A structural type. Object fields are all required and ordered; the order
/// is the canonical field order used by schema-specialized decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    Int,
    Float,
    Str,
    Bool,
    Object(Vec<(String, Schema)>),
    Array(Box<Schema>),
}

impl Schema {
    /// Panics on a repeated field name.
    pub fn object<K: Into<String>>(fields: impl IntoIterator<Item = (K, Schema)>) -> Schema {
        let fields: Vec<(String, Schema)> =
            fields.into_iter().map(|(k, s)| (k.into(), s)).collect();
        for (i, (k, _)) in fields.iter().enumerate() {
            assert!(
                fields[..i].iter().all(|(seen, _)| seen != k),
                "duplicate schema field `{k}`"
            );
        }
        Schema::Object(fields)
    }

    pub fn array(element: Schema) -> Schema {
        Schema::Array(Box::new(element))
    }

    pub fn kind(&self) -> SchemaKind {
        match self {
            Schema::Int => SchemaKind::Int,
            Schema::Float => SchemaKind::Float,
            Schema::Str => SchemaKind::Str,
            Schema::Bool => SchemaKind::Bool,
            Schema::Object(_) => SchemaKind::Object,
            Schema::Array(_) => SchemaKind::Array,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Schema::Int | Schema::Float | Schema::Str | Schema::Bool)
    }

    /// The fields of an object with at least one field, all scalar: the shape
    /// whose arrays are written as tables.
    pub fn flat_fields(&self) -> Option<&[(String, Schema)]> {
        match self {
            Schema::Object(fields)
                if !fields.is_empty() && fields.iter().all(|(_, s)| s.is_scalar()) =>
            {
                Some(fields)
            }
            _ => None,
        }
    }

    /// Every path the schema requires, with array elements addressed through
    /// `sample`, a value whose arrays decide how many indices exist.
    pub fn required_paths(&self, sample: &Value) -> Vec<Vec<Segment>> {
        let mut out = Vec::new();
        collect_paths(self, sample, &mut Vec::new(), &mut out);
        out
    }
}

fn collect_paths(s: &Schema, v: &Value, path: &mut Vec<Segment>, out: &mut Vec<Vec<Segment>>) {
    out.push(path.clone());
    match s {
        Schema::Object(fields) => {
            for (k, fs) in fields {
                path.push(Segment::Key(k.clone()));
                match v.get(k) {
                    Some(child) => collect_paths(fs, child, path, out),
                    None => out.push(path.clone()),
                }
                path.pop();
            }
        }
        Schema::Array(elem) => {
            for (i, child) in v.as_array().unwrap_or_default().iter().enumerate() {
                path.push(Segment::Index(i));
                collect_paths(elem, child, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemaKind {
    Int,
    Float,
    Str,
    Bool,
    Object,
    Array,
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaKind::Int => "int",
            SchemaKind::Float => "float",
            SchemaKind::Str => "string",
            SchemaKind::Bool => "bool",
            SchemaKind::Object => "object",
            SchemaKind::Array => "array",
        })
    }
}

/// One validation failure. `expected: None` marks a field the schema does not
/// allow; `found: None` marks a required field that is absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub path: Vec<Segment>,
    pub expected: Option<SchemaKind>,
    pub found: Option<Kind>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = format_path(&self.path);
        match (self.expected, self.found) {
            (Some(e), None) => write!(f, "{path}: missing required field (expected {e})"),
            (None, Some(k)) => write!(f, "{path}: unexpected field (found {k})"),
            (Some(e), Some(k)) => write!(f, "{path}: expected {e}, found {k}"),
            (None, None) => write!(f, "{path}: invalid"),
        }
    }
}

/// Checks `v` against `s`. Numeric coercion is lax: a string holding a
/// numeral passes as a number, an int passes as a float, and an integral
/// float passes as an int. Strings and bools are strict.
pub fn validate(v: &Value, s: &Schema) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    check(v, s, &mut Vec::new(), &mut errors);
    errors
}

fn check(v: &Value, s: &Schema, path: &mut Vec<Segment>, errors: &mut Vec<ValidationError>) {
    let mismatch = |path: &Vec<Segment>| ValidationError {
        path: path.clone(),
        expected: Some(s.kind()),
        found: Some(v.kind()),
    };
    match s {
        Schema::Int | Schema::Float | Schema::Str | Schema::Bool => {
            if coerce_scalar(v, s).is_none() {
                errors.push(mismatch(path));
            }
        }
        Schema::Object(fields) => {
            let Value::Object(m) = v else {
                errors.push(mismatch(path));
                return;
            };
            for (k, fs) in fields {
                path.push(Segment::Key(k.clone()));
                match m.get(k) {
                    Some(child) => check(child, fs, path, errors),
                    None => errors.push(ValidationError {
                        path: path.clone(),
                        expected: Some(fs.kind()),
                        found: None,
                    }),
                }
                path.pop();
            }
            for (k, child) in m {
                if !fields.iter().any(|(name, _)| name == k) {
                    path.push(Segment::Key(k.clone()));
                    errors.push(ValidationError {
                        path: path.clone(),
                        expected: None,
                        found: Some(child.kind()),
                    });
                    path.pop();
                }
            }
        }
        Schema::Array(elem) => {
            let Value::Array(items) = v else {
                errors.push(mismatch(path));
                return;
            };
            for (i, item) in items.iter().enumerate() {
                path.push(Segment::Index(i));
                check(item, elem, path, errors);
                path.pop();
            }
        }
    }
}

fn coerce_scalar(v: &Value, s: &Schema) -> Option<Value> {
    match (s, v) {
        (Schema::Str, Value::Str(_)) | (Schema::Bool, Value::Bool(_)) => Some(v.clone()),
        (Schema::Int, Value::Int(_)) => Some(v.clone()),
        (Schema::Int, Value::Float(f)) => f.as_integer().map(Value::Int),
        (Schema::Int, Value::Str(text)) => match lex_numeral(text)? {
            Ok(Numeral::Int(i)) => Some(Value::Int(i)),
            _ => None,
        },
        (Schema::Float, Value::Int(_) | Value::Float(_)) => Some(v.clone()),
        (Schema::Float, Value::Str(text)) => match lex_numeral(text)? {
            Ok(Numeral::Int(i)) => Some(Value::Int(i)),
            Ok(Numeral::Float(f)) => Value::float(f),
            Err(()) => None,
        },
        _ => None,
    }
}

/// Applies the lax coercions accepted by [`validate`], turning numeric
/// strings and integral floats into the numbers the schema asks for. Values
/// that do not validate are returned with as much coercion as applies.
pub fn coerce(v: &Value, s: &Schema) -> Value {
    match (s, v) {
        (Schema::Object(fields), Value::Object(m)) => Value::Object(
            m.iter()
                .map(|(k, child)| {
                    let child = match fields.iter().find(|(name, _)| name == k) {
                        Some((_, fs)) => coerce(child, fs),
                        None => child.clone(),
                    };
                    (k.clone(), child)
                })
                .collect::<Map>(),
        ),
        (Schema::Array(elem), Value::Array(items)) => {
            Value::Array(items.iter().map(|x| coerce(x, elem)).collect())
        }
        _ if s.is_scalar() => coerce_scalar(v, s).unwrap_or_else(|| v.clone()),
        _ => v.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json::parse_json;

    fn order() -> Schema {
        Schema::object([
            ("id", Schema::Int),
            ("customer", Schema::object([("id", Schema::Int), ("name", Schema::Str)])),
            (
                "items",
                Schema::array(Schema::object([
                    ("sku", Schema::Str),
                    ("qty", Schema::Int),
                    ("price", Schema::Float),
                ])),
            ),
        ])
    }

    const GOLD: &str = r#"{"id":101,"customer":{"id":9,"name":"Ada"},"items":[{"sku":"A1","qty":2,"price":9.99},{"sku":"B2","qty":1,"price":14.50}]}"#;

    #[test]
    fn gold_is_valid() {
        assert_eq!(validate(&parse_json(GOLD).unwrap(), &order()), vec![]);
    }

    #[test]
    fn missing_field_is_reported_with_path() {
        let v = parse_json(&GOLD.replace(r#""qty":2,"#, "")).unwrap();
        let errors = validate(&v, &order());
        assert_eq!(
            errors,
            vec![ValidationError {
                path: vec![
                    Segment::Key("items".into()),
                    Segment::Index(0),
                    Segment::Key("qty".into())
                ],
                expected: Some(SchemaKind::Int),
                found: None,
            }]
        );
        assert_eq!(errors[0].to_string(), "items[0].qty: missing required field (expected int)");
    }

    #[test]
    fn numeric_strings_are_coerced() {
        let v = parse_json(&GOLD.replace(r#""qty":2"#, r#""qty":"2""#)).unwrap();
        assert_eq!(validate(&v, &order()), vec![]);
        assert_eq!(coerce(&v, &order()), parse_json(GOLD).unwrap());
        let v = parse_json(&GOLD.replace("9.99", r#""9.99""#).replace(r#""qty":1"#, r#""qty":1.0"#)).unwrap();
        assert_eq!(validate(&v, &order()), vec![]);
    }

    #[test]
    fn strict_where_coercion_would_lose_information() {
        let bad = [
            (r#""qty":2"#, r#""qty":2.5"#),
            (r#""qty":2"#, r#""qty":"2.0""#),
            (r#""qty":2"#, r#""qty":"two""#),
            (r#""qty":2"#, r#""qty":true"#),
            (r#""name":"Ada""#, r#""name":7"#),
            (r#""id":101"#, r#""id":null"#),
        ];
        for (from, to) in bad {
            let v = parse_json(&GOLD.replace(from, to)).unwrap();
            assert_eq!(validate(&v, &order()).len(), 1, "{to}");
        }
    }

    #[test]
    fn extra_fields_and_shape_errors() {
        let v = parse_json(r#"{"id":1,"customer":[],"items":{},"note":"x"}"#).unwrap();
        let rendered: Vec<String> = validate(&v, &order()).iter().map(|e| e.to_string()).collect();
        assert_eq!(
            rendered,
            [
                "customer: expected object, found array",
                "items: expected array, found object",
                "note: unexpected field (found string)",
            ]
        );
        assert_eq!(validate(&Value::int(1), &order())[0].path, vec![]);
    }

    #[test]
    fn flat_fields_decides_tabular_shape() {
        let Schema::Object(fields) = order() else { unreachable!() };
        let Schema::Array(items) = &fields[2].1 else { unreachable!() };
        assert_eq!(items.flat_fields().map(<[_]>::len), Some(3));
        assert!(order().flat_fields().is_none());
        assert!(Schema::object::<&str>([]).flat_fields().is_none());
    }

    #[test]
    #[should_panic(expected = "duplicate schema field")]
    fn duplicate_fields_rejected() {
        Schema::object([("a", Schema::Int), ("a", Schema::Str)]);
    }
}
