use super::*;

const AFFINE: &str = include_str!("../../../../configs/scalar_affine.toml");
const IDENTITY: &str = include_str!("../../../../configs/identity.toml");
const EXPANSIVE: &str = include_str!("../../../../configs/backward_expansive.toml");
const BUNDLED: [&str; 8] = [
    AFFINE,
    IDENTITY,
    EXPANSIVE,
    include_str!("../../../../configs/scalar_sine.toml"),
    include_str!("../../../../configs/hyperbolic_2d.toml"),
    include_str!("../../../../configs/contraction_2d.toml"),
    include_str!("../../../../configs/generalized_exp_scalar.toml"),
    include_str!("../../../../configs/uniform_shifted.toml"),
];

fn small(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text)
        .unwrap()
        .with_overrides(Some(12), None)
        .unwrap()
}

#[test]
fn bundled_configs_parse_and_build() {
    for text in BUNDLED {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        cfg.system_spec().unwrap();
        assert!(cfg.policy().window < cfg.policy().series_horizon);
    }
}

#[test]
fn config_round_trips_through_toml() {
    for text in BUNDLED {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let again = ExperimentConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let bad = AFFINE.replace("seed = 7", "seed = 7\ncolour = \"blue\"");
    let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
    assert_eq!(Outcome::of_error(&e), Outcome::ConfigError);
    let bad = AFFINE.replace("gamma = 0.0", "gamma = { scale = 0.1, ratio = 0.5, extra = 1 }");
    assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    let bad = AFFINE.replace("f = [\"0.3\"]", "f = [\"0.3 +\"]");
    let e = ExperimentConfig::from_toml_str(&bad).unwrap().system_spec().unwrap_err();
    assert_eq!(Outcome::of_error(&e), Outcome::ConfigError);
}

#[test]
fn overrides_keep_the_window_below_the_series() {
    let cfg = ExperimentConfig::from_toml_str(AFFINE).unwrap();
    assert_eq!(cfg.series_horizon(), 60);
    let cfg = cfg.with_overrides(Some(80), Some(3)).unwrap();
    assert_eq!((cfg.horizon, cfg.seed, cfg.series_horizon()), (80, 3, 90));
    let cfg = cfg.with_overrides(Some(4), None).unwrap();
    assert_eq!(cfg.sampling.max_m, 4);
}

#[test]
fn affine_constants() {
    let run = run_certify(&ExperimentConfig::from_toml_str(AFFINE).unwrap()).unwrap();
    assert!(run.passed);
    assert_eq!(run.outcome(), Outcome::Success);
    assert_eq!(run.certificate.q, 0.0);
    // sup_l 0.3 * sum_{i<l} 2^-i = 0.6 (1 - 2^-60)
    assert!((run.certificate.p - 0.6).abs() < 1e-12);
    let s = run.contraction;
    assert!(s.s1 && s.s2 && s.s3 && s.s4);
    assert!(run.text().contains("result: pass"));
}

#[test]
fn expansive_backward_step_fails_with_witness_at_zero() {
    let run = run_certify(&ExperimentConfig::from_toml_str(EXPANSIVE).unwrap()).unwrap();
    assert!(!run.passed);
    assert_eq!(run.outcome(), Outcome::CertificationFailure);
    assert!(run.failures.contains(&"P6"));
    assert_eq!(run.certificate.p6.witness, Some(vec![0]));
    // |A^-1| gamma = 2 * 0.6
    assert!((run.certificate.p6_margin + 0.2).abs() < 1e-12);
}

#[test]
fn identity_tables_are_exactly_zero() {
    let run = run_conjugate(&small(IDENTITY)).unwrap();
    assert!(run.passed);
    for r in &run.table {
        assert_eq!(
            (r.res_conj, r.res_inv_hg, r.res_inv_gh, r.res_ident_wz),
            (0.0, 0.0, 0.0, 0.0)
        );
    }
    let st = run_stability(&small(IDENTITY)).unwrap();
    assert_eq!(st.equilibrium.y_star, vec![0.0, 0.0]);
    assert!(st.preservation.rows.iter().all(|r| r.h_k0_dev == 0.0 && r.g_kystar_norm == 0.0));
}

#[test]
fn csv_layout() {
    let run = run_conjugate(&small(AFFINE)).unwrap();
    let csv = run.csv().unwrap();
    let mut lines = csv.split("\r\n");
    assert_eq!(
        lines.next().unwrap(),
        "k,m,sample_id,res_conj,res_inv_HG,res_inv_GH,res_ident_wz,err_budget"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 8);
    for field in &first[3..] {
        let v: f64 = field.parse().unwrap();
        assert_eq!(real(v), *field);
    }
    for r in &run.table {
        for res in [r.res_conj, r.res_inv_hg, r.res_inv_gh, r.res_ident_wz] {
            assert!(res <= r.err_budget);
        }
    }

    let st = run_stability(&small(AFFINE)).unwrap();
    let csv = st.csv().unwrap();
    assert!(csv.starts_with("k,H_k0_dev,majorant,G_kystar_norm,rho0_h_bound\r\n"));
    assert_eq!(csv.lines().count(), 14);
}

#[test]
fn real_keeps_seventeen_digits() {
    for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
        let s = real(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small(include_str!("../../../../configs/scalar_sine.toml"));
    let a = run_conjugate(&cfg).unwrap();
    let b = run_conjugate(&cfg).unwrap();
    assert_eq!(a.csv().unwrap(), b.csv().unwrap());
    assert_eq!(to_json(&a), to_json(&b));
    let other = run_conjugate(&cfg.clone().with_overrides(None, Some(8)).unwrap()).unwrap();
    assert_ne!(a.csv().unwrap(), other.csv().unwrap());
}

#[test]
fn saddles_have_no_stability_run() {
    let cfg = small(include_str!("../../../../configs/hyperbolic_2d.toml"));
    let e = run_stability(&cfg).unwrap_err();
    assert_eq!(e, Error::NotContractionCase);
    assert_eq!(Outcome::of_error(&e), Outcome::CertificationFailure);
}

#[test]
fn error_classes() {
    assert_eq!(Outcome::of_error(&Error::InvalidConfig("x".into())), Outcome::ConfigError);
    assert_eq!(
        Outcome::of_error(&Error::NoConvergence {
            context: "z".into(),
            iterations: 3
        }),
        Outcome::NumericFailure
    );
    assert_eq!(Outcome::of_error(&Error::NoEquilibrium { residual: 1.0 }), Outcome::NumericFailure);
    assert_eq!(Outcome::of_error(&Error::Uncertified("P5".into())), Outcome::CertificationFailure);
    assert_eq!(Outcome::Success.code(), 0);
    assert_eq!(Outcome::NumericFailure.code(), 4);
}
