use std::collections::HashMap;

use bilevel_core::expr::{parse, Compiled};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..20).prop_map(|n| n.to_string()),
        (1u32..9, 1u32..9).prop_map(|(a, b)| format!("{a}.{b}")),
        Just("x".to_string()),
        Just("y".to_string()),
    ]
}

fn expression() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]), inner.clone()).prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            (inner.clone(), 0u32..3).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (prop::sample::select(vec!["abs", "floor"]), inner.clone()).prop_map(|(f, a)| format!("{f}({a})")),
            (prop::sample::select(vec!["min", "max"]), inner.clone(), inner.clone()).prop_map(|(f, a, b)| format!("{f}({a}, {b})")),
            (inner.clone(), prop::sample::select(vec!["<", "<=", "=", ">=", ">"]), inner.clone(), inner.clone(), inner)
                .prop_map(|(a, op, b, t, e)| format!("cases {{ {a} {op} {b} -> {t}; else -> {e} }}")),
        ]
    })
}

fn value(text: &str, x: f64, y: f64) -> f64 {
    let e = parse(text).unwrap();
    Compiled::<f64>::compile(&e, &["x", "y"], &HashMap::new()).unwrap().eval(&[x, y]).unwrap_or(f64::NAN)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn printing_then_parsing_gives_the_same_tree(text in expression()) {
        let e = parse(&text).unwrap();
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e, "printed as {}", printed);
    }

    #[test]
    fn printed_form_evaluates_identically(text in expression(), x in -4i32..4, y in -4i32..4) {
        let printed = parse(&text).unwrap().to_string();
        let (a, b) = (value(&text, x as f64, y as f64), value(&printed, x as f64, y as f64));
        prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} vs {}", a, b);
    }
}

#[test]
fn precedence_and_associativity() {
    assert_eq!(value("2 - 3 - 4", 0.0, 0.0), -5.0);
    assert_eq!(value("2^3^2", 0.0, 0.0), 512.0);
    assert_eq!(value("-x^2", 3.0, 0.0), -9.0);
    assert_eq!(value("8 / 4 / 2", 0.0, 0.0), 1.0);
}
