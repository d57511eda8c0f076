use proptest::prelude::*;
use ymlab::NormalizationConvention;
use ymlab_cli::config::{parse_dims, parse_grid, FlowBoundary, Format, Settings, Suite, KEYS};
use ymlab_cli::CliError;

#[test]
fn defaults_are_valid() {
    let s = Settings::default();
    s.validate().unwrap();
    assert_eq!(s.dims, vec![5, 6, 7, 8, 9]);
    assert_eq!(s.conventions, NormalizationConvention::ALL.to_vec());
    assert_eq!(s.grid, (41, 41));
    assert_eq!(s.flow.rho_max, 30.0);
    assert_eq!(s.flow.boundary, FlowBoundary::Clamp);
}

#[test]
fn dimension_syntax() {
    assert_eq!(parse_dims("5..9").unwrap(), vec![5, 6, 7, 8, 9]);
    assert_eq!(parse_dims("5..=7").unwrap(), vec![5, 6, 7]);
    assert_eq!(parse_dims("5, 8").unwrap(), vec![5, 8]);
    assert_eq!(parse_dims("6").unwrap(), vec![6]);
    assert!(parse_dims("9..5").is_err());
    assert!(parse_dims("five").is_err());
    assert_eq!(parse_grid("41x21").unwrap(), (41, 21));
    assert!(parse_grid("41").is_err());
}

#[test]
fn every_documented_key_is_accepted() {
    let values = |k: &str| match k {
        "n" => "5..6",
        "conventions" => "A,C",
        "out" | "profile" => "somewhere",
        "grid" => "3x3",
        "format" => "json",
        "flat" | "gastel" | "harness" | "entropy" => "false",
        "suite" => "gap",
        "boundary" => "mirror",
        "seed" | "points" | "paths" | "samples" => "11",
        "t0" => "-2",
        "t1" => "-1",
        "log_t0_min" => "-1",
        _ => "0.5",
    };
    let mut s = Settings::default();
    for k in KEYS {
        s.apply(k, values(k)).unwrap_or_else(|e| panic!("{k}: {e}"));
    }
    assert_eq!(s.format, Format::Json);
    assert_eq!(s.suite, Some(Suite::Gap));
    assert_eq!(s.flow.boundary, FlowBoundary::Mirror);
}

#[test]
fn unknown_keys_and_malformed_lines_are_rejected() {
    let mut s = Settings::default();
    let e = s.apply_text("n = 5\nfrobnicate = 1\n").unwrap_err();
    assert!(matches!(e, CliError::Config(ref m) if m.contains("frobnicate")));
    assert_eq!(e.exit_code(), 2);
    assert!(Settings::default().apply_text("just words\n").is_err());
    assert!(Settings::default().apply("flat", "maybe").is_err());
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let mut s = Settings::default();
    s.apply_text("# header\n\nn = 7  # trailing\ntol_check = 1e-5\n").unwrap();
    assert_eq!(s.dims, vec![7]);
    assert_eq!(s.tol(1e-3), 1e-5);
}

#[test]
fn validation_catches_inconsistent_settings() {
    let mut s = Settings::default();
    s.flow.t1 = s.flow.t0;
    assert!(s.validate().is_err());
    let s = Settings { flat: true, profile: Some("p.csv".into()), ..Settings::default() };
    assert!(s.validate().is_err());
    let s = Settings { tol_quad: 0.0, ..Settings::default() };
    assert!(s.validate().is_err());
}

#[test]
fn settings_round_trip_through_json() {
    let mut s = Settings::default();
    s.apply_text("n = 6\ngrid = 5x9\nsuite = bianchi\ntol_check = 2e-4\n").unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: Settings = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}

proptest! {
    #[test]
    fn numeric_keys_round_trip(x in 1e-8f64..1.0, k in 1usize..1000) {
        let mut s = Settings::default();
        s.apply("tol_quad", &format!("{x}")).unwrap();
        s.apply("points", &format!("{k}")).unwrap();
        prop_assert_eq!(s.tol_quad, x);
        prop_assert_eq!(s.points, k);
    }

    #[test]
    fn ranges_expand_inclusively(a in 2usize..10, len in 0usize..6) {
        let b = a + len;
        let dims = parse_dims(&format!("{a}..{b}")).unwrap();
        prop_assert_eq!(dims.len(), len + 1);
        prop_assert_eq!(dims[0], a);
        prop_assert_eq!(*dims.last().unwrap(), b);
    }
}
