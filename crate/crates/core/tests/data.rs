use seginr::data::{
    generate, oracle_segments, parse_dataset, read_dataset, serialize_dataset, write_dataset,
    DurationRule, TaskSpec,
};

#[test]
fn thousand_example_round_trip() {
    let spec = TaskSpec {
        seed: 5,
        ..TaskSpec::default()
    };
    let examples = generate(&spec, 1000).unwrap();
    let text = serialize_dataset(&examples);
    let parsed = parse_dataset(&text).unwrap();
    assert_eq!(parsed, examples);
    assert_eq!(serialize_dataset(&parsed), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.tsv");
    write_dataset(&examples, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    assert_eq!(read_dataset(&path).unwrap(), examples);
}

#[test]
fn generated_targets_follow_the_rule() {
    for rule in [DurationRule::Local, DurationRule::Contextual] {
        let spec = TaskSpec {
            rule,
            seed: 3,
            ..TaskSpec::default()
        };
        for ex in generate(&spec, 200).unwrap() {
            assert!((spec.u_min..=spec.u_max).contains(&ex.tokens.len()));
            assert_eq!(oracle_segments(&spec, &ex.tokens).unwrap(), ex.target);
        }
    }
}

#[test]
fn generation_is_seeded() {
    let spec = TaskSpec::default();
    assert_eq!(generate(&spec, 50).unwrap(), generate(&spec, 50).unwrap());
    let other = TaskSpec { seed: 1, ..spec };
    assert_ne!(generate(&spec, 50).unwrap(), generate(&other, 50).unwrap());
}

#[test]
fn missing_file_is_io_error() {
    let err = read_dataset(std::path::Path::new("/nonexistent/seginr/data.tsv")).unwrap_err();
    assert!(matches!(err, seginr::Error::Io { .. }));
}
