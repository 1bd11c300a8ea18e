mod common;

use proptest::prelude::*;
use toonbench_core::{canonicalize, deep_equal, emit_canonical_json, parse_json, Value};

/// Rewrites every integral float as an Int and vice versa where exact, giving
/// a differently spelled value that must still compare equal.
fn respell(v: &Value) -> Value {
    match v {
        Value::Int(i) => match i64::try_from(i) {
            Ok(n) if n.unsigned_abs() < (1 << 53) => Value::float(n as f64).unwrap(),
            _ => v.clone(),
        },
        Value::Array(xs) => Value::Array(xs.iter().map(respell).collect()),
        Value::Object(m) => {
            let mut pairs: Vec<_> = m.iter().map(|(k, x)| (k.clone(), respell(x))).collect();
            pairs.reverse();
            Value::Object(pairs.into_iter().collect())
        }
        _ => v.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn json_round_trip(v in common::value(5)) {
        let text = emit_canonical_json(&v);
        let back = parse_json(&text).unwrap();
        prop_assert!(deep_equal(&back, &v).0, "{text}");
        prop_assert_eq!(emit_canonical_json(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn emission_is_deterministic(v in common::value(5)) {
        prop_assert_eq!(emit_canonical_json(&v), emit_canonical_json(&v.clone()));
        let canon = canonicalize(&v);
        prop_assert_eq!(canonicalize(&parse_json(&emit_canonical_json(&canon)).unwrap()), canon);
    }

    #[test]
    fn canonicalize_is_idempotent(v in common::value(5)) {
        let once = canonicalize(&v);
        prop_assert_eq!(canonicalize(&once), once);
    }

    #[test]
    fn spelling_and_key_order_do_not_matter(v in common::value(5)) {
        let (eq, diff) = deep_equal(&respell(&v), &v);
        prop_assert!(eq, "{diff:?}");
    }

    #[test]
    fn deep_equal_is_an_equivalence(
        a in common::value(3),
        b in common::value(3),
        pick in 0u8..4,
    ) {
        // Random pairs are rarely equal, so also draw related triples.
        let (b, c) = match pick {
            0 => (b.clone(), b),
            1 => (respell(&a), a.clone()),
            2 => (respell(&a), respell(&respell(&a))),
            _ => (a.clone(), b),
        };
        let eq = |x: &Value, y: &Value| deep_equal(x, y).0;
        prop_assert!(eq(&a, &a));
        prop_assert_eq!(eq(&a, &b), eq(&b, &a));
        prop_assert_eq!(eq(&b, &c), eq(&c, &b));
        if eq(&a, &b) && eq(&b, &c) {
            prop_assert!(eq(&a, &c));
        }
        prop_assert_eq!(eq(&a, &b), canonicalize(&a) == canonicalize(&b));
    }
}
