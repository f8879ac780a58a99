use proptest::prelude::*;
use rtdc_core::gen::{generate_dtnu, GeneratorConfig};
use rtdc_core::{parse_dtnu, serialize_dtnu, ModelError};

#[test]
fn contingency_source_must_be_controllable() {
    let text = r#"{"controllables": ["a"], "uncontrollables": ["u", "v"],
        "contingencies": [{"source": "a", "target": "u", "intervals": [[1, 2]]},
                          {"source": "u", "target": "v", "intervals": [[1, 2]]}]}"#;
    assert!(matches!(parse_dtnu(text), Err(ModelError::UnknownTimepoint(_))));
}

#[test]
fn unlinked_uncontrollable_is_rejected() {
    let text = r#"{"controllables": ["a"], "uncontrollables": ["u"]}"#;
    assert_eq!(
        parse_dtnu(text),
        Err(ModelError::DuplicateContingency { target: "u".into(), links: 0 })
    );
}

#[test]
fn multi_interval_links_parse() {
    let text = r#"{"controllables": ["a"], "uncontrollables": ["u"],
        "contingencies": [{"source": "a", "target": "u", "intervals": [[1, 2], [4, "inf"]]}]}"#;
    let d = parse_dtnu(text).unwrap();
    assert_eq!(d.contingencies()[0].intervals.len(), 2);
    assert_eq!(parse_dtnu(&serialize_dtnu(&d)).unwrap(), d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_instances_roundtrip(seed in 0u64..1_000_000) {
        let d = generate_dtnu(&GeneratorConfig { seed, ..Default::default() });
        let text = serialize_dtnu(&d);
        prop_assert_eq!(parse_dtnu(&text).unwrap(), d);
    }
}
