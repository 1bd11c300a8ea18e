use thiserror::Error;

use crate::number::{format_float, is_numeral};
use crate::value::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("TOON documents must have an object at the root")]
    NonObjectRoot,
}

/// Encodes an object as TOON with 2-space indentation. Arrays whose elements
/// are all flat objects sharing one key set use the tabular layout; all other
/// arrays use list items. The output has no trailing newline.
pub fn encode_toon(v: &Value) -> Result<String, EncodeError> {
    let Value::Object(root) = v else {
        return Err(EncodeError::NonObjectRoot);
    };
    let mut lines = Vec::new();
    fields(root, 0, &mut lines);
    Ok(lines.join("\n"))
}

fn pad(n: usize) -> String {
    " ".repeat(n)
}

fn fields(map: &Map, indent: usize, out: &mut Vec<String>) {
    for (k, v) in map {
        field(&pad(indent), k, v, indent, out);
    }
}

/// Writes one field. `lead` is the text before the key on the first line:
/// plain indentation, or `- ` for the first field of a list item.
fn field(lead: &str, key: &str, v: &Value, indent: usize, out: &mut Vec<String>) {
    let key = format_key(key);
    match v {
        Value::Object(m) => {
            out.push(format!("{lead}{key}:"));
            fields(m, indent + 2, out);
        }
        Value::Array(items) => array(&format!("{lead}{key}"), items, indent + 2, out),
        scalar => out.push(format!("{lead}{key}: {}", format_scalar(scalar))),
    }
}

/// Writes `prefix[N]...:` and the elements at `child_indent`.
fn array(prefix: &str, items: &[Value], child_indent: usize, out: &mut Vec<String>) {
    let n = items.len();
    if let Some(headers) = tabular_headers(items) {
        let names: Vec<String> = headers.iter().map(|h| format_key(h)).collect();
        out.push(format!("{prefix}[{n}]{{{}}}:", names.join(",")));
        for item in items {
            let obj = item.as_object().expect("tabular rows are objects");
            let cells: Vec<String> = headers
                .iter()
                .map(|h| format_scalar(&obj[h.as_str()]))
                .collect();
            out.push(format!("{}{}", pad(child_indent), cells.join(",")));
        }
        return;
    }
    out.push(format!("{prefix}[{n}]:"));
    for item in items {
        list_item(item, child_indent, out);
    }
}

fn list_item(item: &Value, dash_indent: usize, out: &mut Vec<String>) {
    let dash = format!("{}- ", pad(dash_indent));
    match item {
        Value::Object(m) if m.is_empty() => out.push(format!("{}-", pad(dash_indent))),
        Value::Object(m) => {
            let mut entries = m.iter();
            let (k, v) = entries.next().expect("non-empty");
            field(&dash, k, v, dash_indent + 2, out);
            for (k, v) in entries {
                field(&pad(dash_indent + 2), k, v, dash_indent + 2, out);
            }
        }
        Value::Array(items) => array(&dash, items, dash_indent + 4, out),
        scalar => out.push(format!("{dash}{}", format_scalar(scalar))),
    }
}

/// The tabular header, when every element is a non-empty flat object with
/// exactly the first element's key set.
fn tabular_headers(items: &[Value]) -> Option<Vec<String>> {
    let first = items.first()?.as_object()?;
    if first.is_empty() {
        return None;
    }
    let uniform = items.iter().all(|item| {
        item.as_object().is_some_and(|m| {
            m.len() == first.len()
                && m.values().all(Value::is_scalar)
                && first.keys().all(|k| m.contains_key(k))
        })
    });
    uniform.then(|| first.keys().cloned().collect())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

pub(crate) fn format_key(k: &str) -> String {
    if is_identifier(k) {
        k.to_string()
    } else {
        quote(k)
    }
}

/// Whether a string scalar must be quoted to read back as the same string.
pub fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.starts_with(char::is_whitespace)
        || s.ends_with(char::is_whitespace)
        || matches!(s, "true" | "false" | "null")
        || is_numeral(s)
        || s.chars().any(|c| {
            matches!(c, ':' | ',' | '"' | '\\' | '[' | ']' | '{' | '}') || c.is_control()
        })
}

fn format_scalar(v: &Value) -> String {
    match v {
        Value::Null => "null".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(f.get()),
        Value::Str(s) if needs_quotes(s) => quote(s),
        Value::Str(s) => s.clone(),
        Value::Object(_) | Value::Array(_) => unreachable!("not a scalar"),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
