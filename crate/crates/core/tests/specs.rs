use std::path::PathBuf;

use quantlim_core::idqd::{self, Theorem};
use quantlim_core::{parse_spec, systems, Error, SystemSpec};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn shipped() -> Vec<(String, SystemSpec)> {
    let mut out: Vec<(String, SystemSpec)> = std::fs::read_dir(dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".schema.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), parse_spec(&p).unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_shipped_spec_parses_and_round_trips() {
    let specs = shipped();
    assert!(specs.len() >= 3);
    for (name, spec) in specs {
        let canon = spec.canonical();
        let again = SystemSpec::from_json_str(&canon.to_json_string()).unwrap();
        assert_eq!(again, canon, "{name}");
    }
}

#[test]
fn shipped_examples_match_builders() {
    let strip = |mut s: SystemSpec| {
        s.name = None;
        s
    };
    let ex1 = parse_spec(dir().join("example1.json")).unwrap();
    assert_eq!(strip(ex1), strip(systems::scalar_mean_var(-2.0, 2.0).unwrap()));
    let ex2 = parse_spec(dir().join("example2.json")).unwrap();
    assert_eq!(strip(ex2), strip(systems::rect_mean(-1.0, 1.0, -1.0, 1.0).unwrap()));
}

#[test]
fn shipped_verdicts() {
    let v = |name: &str| {
        let s = parse_spec(dir().join(name)).unwrap();
        idqd::verdict_for_spec(&s, s.dim_theta).unwrap()
    };
    let pair = v("identical_pair.json");
    assert_eq!((pair.lambda, pair.lambda_ism), (2, Some(1)));
    assert_eq!(pair.triggered_theorems, [Theorem::T3].into_iter().collect());
    let indep = v("independent_pair.json");
    assert_eq!((indep.lambda, indep.lambda_indep, indep.lambda_indep_ism), (3, Some(2), Some(1)));
    assert_eq!(indep.triggered_theorems, [Theorem::T4, Theorem::T5].into_iter().collect());
    assert!(v("two_threshold.json").triggered_theorems.is_empty());
}

fn example1_text() -> String {
    std::fs::read_to_string(dir().join("example1.json")).unwrap()
}

#[test]
fn zero_levels_are_rejected() {
    let text = example1_text().replace(r#""levels": 2, "cells": [ { "rects": [ [ [-2.0, 2.0] ] ] }, "complement" ]"#, r#""levels": 0, "cells": []"#);
    assert_ne!(text, example1_text());
    match SystemSpec::from_json_str(&text) {
        Err(Error::InvalidSpec(v)) => assert!(v.iter().any(|x| x.path.contains("superquantizer"))),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn violations_name_their_field() {
    let text = example1_text().replace(r#""lower": ["-inf", 1e-12]"#, r#""lower": ["-inf", -1.0]"#);
    let Err(Error::InvalidSpec(v)) = SystemSpec::from_json_str(&text) else {
        panic!("negative variance bound accepted");
    };
    assert!(v.iter().any(|x| x.path == "parameter_space.lower[1]"), "{v:?}");

    let text = example1_text().replace(r#""dim_theta": 2"#, r#""dim_theta": 2, "colour": "red""#);
    assert!(matches!(SystemSpec::from_json_str(&text), Err(Error::Json(_))));

    let text = example1_text().replace(r#""A3"]"#, r#""A3", "A4"]"#);
    let Err(Error::InvalidSpec(v)) = SystemSpec::from_json_str(&text) else {
        panic!("A4 without a grouping accepted");
    };
    assert!(v.iter().any(|x| x.path == "groupings.ism"));
}

#[test]
fn schema_file_is_valid_json_with_the_version() {
    let text = std::fs::read_to_string(dir().join("system-spec.schema.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["properties"]["schema"]["const"], quantlim_core::spec::SCHEMA_VERSION);
}
