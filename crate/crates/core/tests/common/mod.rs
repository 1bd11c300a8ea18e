#![allow(dead_code)]

pub mod checks;

use num_bigint::BigInt;
use proptest::prelude::*;
use toonbench_core::{Map, Value};

/// Strings biased toward the lexically awkward cases: literals, numerals,
/// separators, edge whitespace, escapes and non-ASCII text.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => "[a-zA-Z_][a-zA-Z0-9_ .-]{0,12}",
        2 => "\\PC{0,10}",
        1 => "[ -~]{0,10}",
        1 => "[\\x00-\\x1f\"\\\\,:\\[\\]{} -]{0,6}",
        1 => prop::sample::select(vec![
            "", "true", "false", "null", "0", "-1", "1.5", "1e5", "-0", "007", "-", "- x",
            " lead", "trail ", "a,b", "k: v", "[1]", "{x}", "\"q\"", "é ü", "\u{a0}x", "x\u{2028}",
        ])
        .prop_map(str::to_string),
    ]
}

pub fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::int),
        "-?[1-9][0-9]{18,30}".prop_map(|s| Value::Int(s.parse::<BigInt>().unwrap())),
        any::<f64>().prop_filter_map("finite", Value::float),
        (-1000i32..1000, 0u32..4).prop_map(|(m, e)| {
            Value::float(m as f64 / 10f64.powi(e as i32)).unwrap()
        }),
        text().prop_map(Value::Str),
    ]
}

fn object_of(inner: impl Strategy<Value = Value>, max: usize) -> impl Strategy<Value = Value> {
    prop::collection::vec((text(), inner), 0..max)
        .prop_map(|pairs| Value::Object(pairs.into_iter().collect::<Map>()))
}

/// Any value tree with nesting depth at most `depth`.
pub fn value(depth: u32) -> impl Strategy<Value = Value> {
    scalar().prop_recursive(depth, 48, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
            object_of(inner.clone(), 5),
            // Uniform flat rows, so the tabular layout is exercised.
            (prop::collection::vec(text(), 1..4), 1usize..4).prop_flat_map(|(keys, n)| {
                let width = keys.len();
                prop::collection::vec(prop::collection::vec(scalar(), width), n).prop_map(
                    move |rows| {
                        Value::Array(
                            rows.into_iter()
                                .map(|cells| {
                                    Value::Object(keys.iter().cloned().zip(cells).collect())
                                })
                                .collect(),
                        )
                    },
                )
            }),
        ]
    })
}

/// An object-rooted value tree with depth at most `depth`.
pub fn document(depth: u32) -> impl Strategy<Value = Value> {
    object_of(value(depth - 1), 6)
}

/// The reference listing from the TOON instruction prompt.
pub const REFERENCE: &str = "\
id: 100
type: Sample
metadata:
  version: 1
  author: Alex
sections[2]:
  - code: A
    title: Introduction
    items[2]{id,value}:
      1,First
      2,Second
  - code: B
    title: Details
    items[1]{id,value}:
      3,Third
summary:
  total: 3
  status: complete";
