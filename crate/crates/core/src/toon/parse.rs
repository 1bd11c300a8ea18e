use crate::number::{lex_numeral, Numeral};
use crate::value::{Finite, Map, Segment, Value};

use super::{ArrayInfo, ArrayLayout, ToonDocument, ToonError, ToonErrorKind};

/// Parses a TOON document (no code fences). The root is always an object;
/// an empty document is the empty object.
pub fn parse_toon(text: &str) -> Result<ToonDocument, ToonError> {
    let mut lines = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim_matches([' ', '\t']).is_empty() {
            continue;
        }
        let no = i + 1;
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if raw[indent..].starts_with('\t') {
            return Err(ToonError::new(
                ToonErrorKind::BadIndent,
                no,
                indent + 1,
                "tab character in indentation; use 2 spaces per level",
            ));
        }
        if indent % 2 != 0 {
            return Err(ToonError::new(
                ToonErrorKind::BadIndent,
                no,
                indent,
                format!("indentation of {indent} spaces is not a multiple of 2"),
            ));
        }
        lines.push(Line {
            no,
            indent,
            content: &raw[indent..],
        });
    }
    let mut p = Parser {
        lines,
        pos: 0,
        path: Vec::new(),
        arrays: Vec::new(),
    };
    let mut root = Map::new();
    p.object_block(0, &mut root)?;
    debug_assert_eq!(p.pos, p.lines.len());
    Ok(ToonDocument {
        root: Value::Object(root),
        arrays: p.arrays,
    })
}

#[derive(Clone, Copy)]
struct Line<'a> {
    no: usize,
    indent: usize,
    content: &'a str,
}

/// A slice of a line together with where it starts, for error columns.
#[derive(Clone, Copy)]
struct Span<'a> {
    text: &'a str,
    line: usize,
    /// 0-based character column of `text[0]`.
    col: usize,
}

impl<'a> Span<'a> {
    fn at(&self, byte: usize) -> usize {
        self.col + self.text[..byte].chars().count() + 1
    }

    fn err(&self, kind: ToonErrorKind, byte: usize, msg: impl Into<String>) -> ToonError {
        ToonError::new(kind, self.line, self.at(byte), msg)
    }

    fn sub(&self, from: usize) -> Span<'a> {
        Span {
            text: &self.text[from..],
            line: self.line,
            col: self.col + self.text[..from].chars().count(),
        }
    }
}

struct Header {
    count: usize,
    fields: Option<Vec<String>>,
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    path: Vec<Segment>,
    arrays: Vec<ArrayInfo>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Line<'a>> {
        self.lines.get(self.pos).copied()
    }

    fn object_block(&mut self, indent: usize, map: &mut Map) -> Result<(), ToonError> {
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(over_indented(line, indent));
            }
            self.pos += 1;
            let span = Span {
                text: line.content,
                line: line.no,
                col: line.indent,
            };
            self.field(span, indent, map)?;
        }
        Ok(())
    }

    /// Parses one `key...` line (and any block it opens) into `map`.
    fn field(&mut self, span: Span<'a>, indent: usize, map: &mut Map) -> Result<(), ToonError> {
        let Some((key, end)) = key_prefix(span)? else {
            return Err(span.err(
                ToonErrorKind::UnexpectedToken,
                0,
                "expected `key: value`, `key:` or `key[N]:`",
            ));
        };
        if map.contains_key(&key) {
            return Err(span.err(
                ToonErrorKind::DuplicateKey,
                0,
                format!("duplicate key `{key}`"),
            ));
        }
        self.path.push(Segment::Key(key.clone()));
        let value = if span.text.as_bytes()[end] == b'[' {
            self.array(span.sub(end), indent + 2)?
        } else {
            let after = &span.text[end + 1..];
            if after.trim_matches(' ').is_empty() {
                let mut child = Map::new();
                self.object_block(indent + 2, &mut child)?;
                Value::Object(child)
            } else if let Some(stripped) = after.strip_prefix(' ') {
                let lead = stripped.len() - stripped.trim_start_matches(' ').len();
                scalar(span.sub(end + 2 + lead), false)?
            } else {
                return Err(span.err(
                    ToonErrorKind::UnexpectedToken,
                    end + 1,
                    "expected a space after `:`",
                ));
            }
        };
        self.path.pop();
        map.insert(key, value);
        Ok(())
    }

    /// Parses `[N]...:` at the start of `span` and the block below it.
    fn array(&mut self, span: Span<'a>, child_indent: usize) -> Result<Value, ToonError> {
        let header = parse_header(span)?;
        let items = match &header.fields {
            None => self.list_items(child_indent)?,
            Some(fields) => self.rows(child_indent, fields, span)?,
        };
        let (values, item_lines): (Vec<Value>, Vec<usize>) = items.into_iter().unzip();
        if values.len() != header.count {
            let message = format!(
                "array declares [{}] but has {} {}",
                header.count,
                values.len(),
                if header.fields.is_some() { "rows" } else { "items" }
            );
            return Err(match item_lines.get(header.count) {
                Some(&line) => {
                    ToonError::new(ToonErrorKind::CountMismatch, line, child_indent + 1, message)
                }
                None => span.err(ToonErrorKind::CountMismatch, 1, message),
            });
        }
        self.arrays.push(ArrayInfo {
            path: self.path.clone(),
            layout: match header.fields {
                None => ArrayLayout::List,
                Some(headers) => ArrayLayout::Tabular { headers },
            },
            declared_count: header.count,
            line: span.line,
        });
        Ok(Value::Array(values))
    }

    fn list_items(&mut self, indent: usize) -> Result<Vec<(Value, usize)>, ToonError> {
        let mut items = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(over_indented(line, indent));
            }
            let span = Span {
                text: line.content,
                line: line.no,
                col: line.indent,
            };
            if !(line.content == "-" || line.content.starts_with("- ")) {
                return Err(span.err(
                    ToonErrorKind::UnexpectedToken,
                    0,
                    "expected a `- ` list item",
                ));
            }
            self.pos += 1;
            self.path.push(Segment::Index(items.len()));
            let value = self.item(span, indent)?;
            self.path.pop();
            items.push((value, line.no));
        }
        Ok(items)
    }

    fn item(&mut self, span: Span<'a>, dash_indent: usize) -> Result<Value, ToonError> {
        let rest = span.text.get(2..).unwrap_or("");
        if rest.trim_matches(' ').is_empty() {
            return Ok(Value::Object(Map::new()));
        }
        if rest.starts_with(' ') {
            return Err(span.err(
                ToonErrorKind::BadIndent,
                2,
                "list item content must follow `- ` directly",
            ));
        }
        let body = span.sub(2);
        if rest.starts_with('[') {
            return self.array(body, dash_indent + 4);
        }
        if key_prefix(body)?.is_some() {
            let mut map = Map::new();
            self.field(body, dash_indent + 2, &mut map)?;
            self.object_block(dash_indent + 2, &mut map)?;
            return Ok(Value::Object(map));
        }
        scalar(body, false)
    }

    fn rows(
        &mut self,
        indent: usize,
        fields: &[String],
        header: Span<'a>,
    ) -> Result<Vec<(Value, usize)>, ToonError> {
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].contains(f) {
                return Err(header.err(
                    ToonErrorKind::DuplicateKey,
                    0,
                    format!("duplicate field `{f}` in tabular header"),
                ));
            }
        }
        let mut rows = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(over_indented(line, indent));
            }
            self.pos += 1;
            let span = Span {
                text: line.content,
                line: line.no,
                col: line.indent,
            };
            let cells = split_cells(span)?;
            if cells.len() != fields.len() {
                let at = cells.get(fields.len()).map_or(span.text.len(), |c| c.1);
                return Err(span.err(
                    ToonErrorKind::ArityMismatch,
                    at.min(span.text.len().saturating_sub(1)),
                    format!(
                        "row has {} cells but the header declares {} fields",
                        cells.len(),
                        fields.len()
                    ),
                ));
            }
            let row: Map = fields
                .iter()
                .cloned()
                .zip(cells.into_iter().map(|c| c.0))
                .collect();
            rows.push((Value::Object(row), line.no));
        }
        Ok(rows)
    }
}

fn over_indented(line: Line<'_>, expected: usize) -> ToonError {
    ToonError::new(
        ToonErrorKind::BadIndent,
        line.no,
        expected + 1,
        format!(
            "unexpected indentation: {} spaces where at most {expected} are allowed",
            line.indent
        ),
    )
}

const KEY_STOP: &[char] = &[':', '[', ']', '{', '}', '"', ','];

/// If `span` starts with a key followed by `:` (then space or end of line)
/// or `[`, returns the key and the byte index of that delimiter.
fn key_prefix(span: Span<'_>) -> Result<Option<(String, usize)>, ToonError> {
    let text = span.text;
    let (key, end) = if text.starts_with('"') {
        let (key, len) = quoted(span)?;
        (key, len)
    } else {
        let end = text.find(KEY_STOP).unwrap_or(text.len());
        let key = &text[..end];
        if key.is_empty()
            || key.starts_with(' ')
            || key.ends_with(' ')
            || key == "-"
            || key.starts_with("- ")
        {
            return Ok(None);
        }
        (key.to_string(), end)
    };
    let next = text[end..].chars().next();
    let after = text[end..].chars().nth(1);
    Ok(match next {
        Some(':') if matches!(after, None | Some(' ')) => Some((key, end)),
        Some('[') => Some((key, end)),
        _ => None,
    })
}

/// Parses `[N]`, an optional `{f1,f2}` and the closing `:`.
fn parse_header(span: Span<'_>) -> Result<Header, ToonError> {
    let text = span.text;
    debug_assert!(text.starts_with('['));
    let close = text.find(']').ok_or_else(|| {
        span.err(ToonErrorKind::UnexpectedToken, 0, "unterminated `[N]` header")
    })?;
    let digits = &text[1..close];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(span.err(
            ToonErrorKind::UnexpectedToken,
            1.min(close),
            format!("expected an item count inside `[]`, found `{digits}`"),
        ));
    }
    let count: usize = digits.parse().map_err(|_| {
        span.err(ToonErrorKind::UnexpectedToken, 1, "item count is too large")
    })?;
    let mut i = close + 1;
    let mut fields = None;
    if text[i..].starts_with('{') {
        let mut names = Vec::new();
        i += 1;
        loop {
            while text[i..].starts_with(' ') {
                i += 1;
            }
            let name = if text[i..].starts_with('"') {
                let (s, len) = quoted(span.sub(i))?;
                i += len;
                s
            } else {
                let len = text[i..].find([',', '}']).ok_or_else(|| {
                    span.err(ToonErrorKind::UnexpectedToken, i, "unterminated `{...}` field list")
                })?;
                let s = text[i..i + len].trim_end_matches(' ').to_string();
                if s.is_empty() {
                    return Err(span.err(ToonErrorKind::UnexpectedToken, i, "empty field name"));
                }
                i += len;
                s
            };
            names.push(name);
            while text[i..].starts_with(' ') {
                i += 1;
            }
            match text[i..].chars().next() {
                Some(',') => i += 1,
                Some('}') => {
                    i += 1;
                    break;
                }
                _ => {
                    return Err(span.err(
                        ToonErrorKind::UnexpectedToken,
                        i.min(text.len() - 1),
                        "expected `,` or `}` in field list",
                    ));
                }
            }
        }
        fields = Some(names);
    }
    if !text[i..].starts_with(':') {
        return Err(span.err(
            ToonErrorKind::UnexpectedToken,
            i.min(text.len().saturating_sub(1)),
            "expected `:` after array header",
        ));
    }
    if !text[i + 1..].trim_matches(' ').is_empty() {
        return Err(span.err(
            ToonErrorKind::UnexpectedToken,
            i + 1,
            "array elements must start on the next line",
        ));
    }
    Ok(Header { count, fields })
}

/// Splits a tabular row into cells, returning each value and the byte offset
/// at which it starts.
fn split_cells(span: Span<'_>) -> Result<Vec<(Value, usize)>, ToonError> {
    let text = span.text;
    let mut cells = Vec::new();
    let mut i = 0;
    loop {
        while text[i..].starts_with(' ') {
            i += 1;
        }
        let start = i;
        let end = if text[i..].starts_with('"') {
            let (_, len) = quoted(span.sub(i))?;
            let mut j = i + len;
            while text[j..].starts_with(' ') {
                j += 1;
            }
            if j < text.len() && !text[j..].starts_with(',') {
                return Err(span.err(
                    ToonErrorKind::UnexpectedToken,
                    j,
                    "unexpected text after quoted cell",
                ));
            }
            j
        } else {
            text[i..].find(',').map_or(text.len(), |e| i + e)
        };
        cells.push((scalar(span.sub(start).truncate(end - start), true)?, start));
        if end >= text.len() {
            return Ok(cells);
        }
        i = end + 1;
    }
}

impl<'a> Span<'a> {
    fn truncate(self, len: usize) -> Span<'a> {
        Span {
            text: &self.text[..len],
            ..self
        }
    }
}

/// Lexes one scalar. `span` has no leading spaces; trailing spaces are
/// ignored. `in_cell` allows the empty string.
fn scalar(span: Span<'_>, in_cell: bool) -> Result<Value, ToonError> {
    let text = span.text.trim_end_matches(' ');
    if text.starts_with('"') {
        let (s, len) = quoted(span)?;
        if len != text.len() {
            return Err(span.err(
                ToonErrorKind::UnexpectedToken,
                len,
                "unexpected text after closing quote",
            ));
        }
        return Ok(Value::Str(s));
    }
    Ok(match text {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        "null" => Value::Null,
        "" if !in_cell => {
            return Err(span.err(ToonErrorKind::UnexpectedToken, 0, "expected a value"));
        }
        _ => match lex_numeral(text) {
            Some(Ok(Numeral::Int(i))) => Value::Int(i),
            Some(Ok(Numeral::Float(f))) => Value::Float(Finite::new(f).expect("finite")),
            Some(Err(())) => {
                return Err(span.err(
                    ToonErrorKind::UnexpectedToken,
                    0,
                    "numeric literal out of range",
                ));
            }
            None => Value::Str(text.to_string()),
        },
    })
}

/// Parses a double-quoted string at the start of `span`; returns the decoded
/// text and the byte length consumed including both quotes.
fn quoted(span: Span<'_>) -> Result<(String, usize), ToonError> {
    let text = span.text;
    debug_assert!(text.starts_with('"'));
    let mut out = String::new();
    let mut chars = text.char_indices().skip(1);
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, i + 1)),
            '\\' => {
                let Some((_, e)) = chars.next() else {
                    break;
                };
                match e {
                    '"' => out.push('"'),
                    '\\' => out.push('\\'),
                    'n' => out.push('\n'),
                    'r' => out.push('\r'),
                    't' => out.push('\t'),
                    'u' => {
                        let hex = |from: usize| {
                            text.get(from..from + 4)
                                .filter(|h| h.bytes().all(|b| b.is_ascii_hexdigit()))
                                .map(|h| u32::from_str_radix(h, 16).expect("hex"))
                        };
                        let bad = || span.err(ToonErrorKind::BadEscape, i, "invalid \\u escape");
                        let hi = hex(i + 2).ok_or_else(bad)?;
                        let mut consumed = 4;
                        let cp = if (0xD800..0xDC00).contains(&hi) {
                            let lo = (text.get(i + 6..i + 8) == Some("\\u"))
                                .then(|| hex(i + 8))
                                .flatten()
                                .filter(|lo| (0xDC00..0xE000).contains(lo))
                                .ok_or_else(bad)?;
                            consumed += 6;
                            0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                        } else {
                            hi
                        };
                        out.push(char::from_u32(cp).ok_or_else(bad)?);
                        for _ in 0..consumed {
                            chars.next();
                        }
                    }
                    other => {
                        return Err(span.err(
                            ToonErrorKind::BadEscape,
                            i,
                            format!("unsupported escape `\\{other}`"),
                        ));
                    }
                }
            }
            c => out.push(c),
        }
    }
    Err(span.err(
        ToonErrorKind::UnexpectedToken,
        0,
        "unterminated quoted string",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind_of(text: &str) -> ToonErrorKind {
        parse_toon(text).unwrap_err().kind
    }

    #[test]
    fn tabular_rows() {
        let doc = parse_toon("items[2]{id,value}:\n  1,First\n  2,Second").unwrap();
        let items = doc.root.get("items").unwrap().as_array().unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].get("value"), Some(&Value::str("Second")));
        assert_eq!(items[0].get("id"), Some(&Value::int(1)));
        assert_eq!(
            doc.arrays[0].layout,
            ArrayLayout::Tabular {
                headers: vec!["id".into(), "value".into()]
            }
        );
    }

    #[test]
    fn count_mismatch_points_at_header() {
        let err = parse_toon("items[3]{id,value}:\n  1,First\n  2,Second").unwrap_err();
        assert_eq!(err.kind, ToonErrorKind::CountMismatch);
        assert_eq!(err.line, 1);
        assert_eq!(err.column, 7);
    }

    #[test]
    fn extra_item_points_at_item() {
        let err = parse_toon("xs[1]:\n  - 1\n  - 2").unwrap_err();
        assert_eq!(err.kind, ToonErrorKind::CountMismatch);
        assert_eq!((err.line, err.column), (3, 3));
    }

    #[test]
    fn zero_count() {
        let doc = parse_toon("users[0]{id,name}:").unwrap();
        assert_eq!(doc.root.get("users"), Some(&Value::Array(vec![])));
        assert_eq!(doc.arrays[0].declared_count, 0);
    }

    #[test]
    fn indentation_errors() {
        assert_eq!(kind_of("a:\n   b: 1"), ToonErrorKind::BadIndent);
        assert_eq!(kind_of("a:\n\tb: 1"), ToonErrorKind::BadIndent);
        assert_eq!(kind_of("a: 1\n  b: 2"), ToonErrorKind::BadIndent);
        assert_eq!(kind_of("  a: 1"), ToonErrorKind::BadIndent);
    }

    #[test]
    fn arity_mismatch() {
        let err = parse_toon("t[1]{a,b}:\n  1,2,3").unwrap_err();
        assert_eq!(err.kind, ToonErrorKind::ArityMismatch);
        assert_eq!((err.line, err.column), (2, 7));
        assert_eq!(kind_of("t[1]{a,b}:\n  1"), ToonErrorKind::ArityMismatch);
    }

    #[test]
    fn escapes() {
        let doc = parse_toon(r#"s: "a\"b\\c\nd,e: \u00e9""#).unwrap();
        assert_eq!(doc.root.get("s"), Some(&Value::str("a\"b\\c\nd,e: é")));
        let err = parse_toon(r#"s: "a\qb""#).unwrap_err();
        assert_eq!(err.kind, ToonErrorKind::BadEscape);
        assert_eq!(err.column, 6);
    }

    #[test]
    fn scalar_lexing() {
        let doc = parse_toon("a: true\nb: null\nc: -1.5\nd: 007\ne: x y\nf: 1e3\ng: \"12\"").unwrap();
        let r = &doc.root;
        assert_eq!(r.get("a"), Some(&Value::Bool(true)));
        assert_eq!(r.get("b"), Some(&Value::Null));
        assert_eq!(r.get("c"), Some(&Value::float(-1.5).unwrap()));
        assert_eq!(r.get("d"), Some(&Value::str("007")));
        assert_eq!(r.get("e"), Some(&Value::str("x y")));
        assert_eq!(r.get("f"), Some(&Value::float(1000.0).unwrap()));
        assert_eq!(r.get("g"), Some(&Value::str("12")));
        assert_eq!(kind_of("a: 1e999"), ToonErrorKind::UnexpectedToken);
    }

    #[test]
    fn list_items_of_every_shape() {
        let text = "xs[4]:\n  - 1\n  - a: 1\n    b:\n      c: 2\n  -\n  - [2]:\n      - x\n      - y";
        let doc = parse_toon(text).unwrap();
        let xs = doc.root.get("xs").unwrap().as_array().unwrap();
        assert_eq!(xs[0], Value::int(1));
        assert_eq!(xs[1].get("b").unwrap().get("c"), Some(&Value::int(2)));
        assert_eq!(xs[2], Value::Object(Map::new()));
        assert_eq!(
            xs[3],
            Value::Array(vec![Value::str("x"), Value::str("y")])
        );
        assert_eq!(doc.arrays.len(), 2);
    }

    #[test]
    fn duplicate_keys() {
        assert_eq!(kind_of("a: 1\na: 2"), ToonErrorKind::DuplicateKey);
        assert_eq!(kind_of("t[1]{a,a}:\n  1,2"), ToonErrorKind::DuplicateKey);
    }

    #[test]
    fn quoted_keys_and_cells() {
        let doc = parse_toon("\"my key\": 1\nt[1]{\"a b\",c}:\n  \"x, y\",\"\"").unwrap();
        assert_eq!(doc.root.get("my key"), Some(&Value::int(1)));
        let row = &doc.root.get("t").unwrap().as_array().unwrap()[0];
        assert_eq!(row.get("a b"), Some(&Value::str("x, y")));
        assert_eq!(row.get("c"), Some(&Value::str("")));
    }

    #[test]
    fn blank_lines_and_crlf_tolerated() {
        let doc = parse_toon("a: 1\r\n\r\nb: 2\r\n").unwrap();
        assert_eq!(doc.root.get("b"), Some(&Value::int(2)));
        assert_eq!(parse_toon("").unwrap().root, Value::Object(Map::new()));
    }

    #[test]
    fn garbage_lines() {
        assert_eq!(kind_of("hello world"), ToonErrorKind::UnexpectedToken);
        assert_eq!(kind_of("a:b"), ToonErrorKind::UnexpectedToken);
        assert_eq!(kind_of("xs[2]:\n  1"), ToonErrorKind::UnexpectedToken);
        assert_eq!(kind_of("xs[two]:"), ToonErrorKind::UnexpectedToken);
        assert_eq!(kind_of("xs[1]: a"), ToonErrorKind::UnexpectedToken);
    }
}
