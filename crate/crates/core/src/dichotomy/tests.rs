use super::*;
use crate::algebra::Matrix;
use crate::exprlang::parse;

fn scalar_spec(a: f64, gamma: f64, f: Perturbation) -> SystemSpec {
    SystemSpec::new(
        MatrixSequence::scalar(a).unwrap(),
        ProjectorFamily::Identity,
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::new(f, WeightSeq::Constant(gamma), WeightSeq::Constant(gamma), 2.0)
            .unwrap(),
    )
    .unwrap()
}

fn hyperbolic_spec() -> SystemSpec {
    let f = Perturbation::from_exprs(vec![
        parse("0.05*tanh(y1)").unwrap(),
        parse("0.05*sin(y0)").unwrap(),
    ])
    .unwrap();
    SystemSpec::new(
        MatrixSequence::diagonal(vec![0.5, 2.0]).unwrap(),
        ProjectorFamily::Constant(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::new(
            f,
            WeightSeq::Constant(0.05),
            WeightSeq::Constant(0.05 * 2f64.sqrt()),
            3.0,
        )
        .unwrap(),
    )
    .unwrap()
}

fn tables(spec: &SystemSpec, n: usize) -> (TransitionCache, ProjectorPair) {
    let cache = TransitionCache::new(&spec.linear, n).unwrap();
    let proj = ProjectorPair::build(spec.projector.clone(), &cache).unwrap();
    (cache, proj)
}

#[test]
fn growth_constant_examples() {
    let hyp = MatrixSequence::diagonal(vec![0.5, 2.0]).unwrap();
    assert_eq!(certify_p1(&hyp, 10).unwrap().m, 2.0);
    let id = MatrixSequence::constant(Matrix::identity(2, 2)).unwrap();
    assert_eq!(certify_p1(&id, 10).unwrap().m, 1.0);
    assert_eq!(certify_p1(&MatrixSequence::scalar(2.0).unwrap(), 3).unwrap().m, 2.0);
}

#[test]
fn scalar_contraction_attains_dichotomy_bound_with_equality() {
    let spec = scalar_spec(0.5, 0.0, Perturbation::zero(1));
    let (cache, proj) = tables(&spec, 30);
    let st = certify_p2(&cache, &proj, &spec.rates, 30).unwrap();
    assert!(st.holds);
    assert_eq!(st.worst_violation, 0.0);
}

#[test]
fn hyperbolic_split_satisfies_dichotomy_bound() {
    let spec = hyperbolic_spec();
    let (cache, proj) = tables(&spec, 25);
    let st = certify_p2(&cache, &proj, &spec.rates, 25).unwrap();
    assert!(st.holds, "{st:?}");
    assert!(st.worst_violation.abs() < 1e-15);
}

#[test]
fn uniform_family_with_larger_constant() {
    // |Phi(k,n)| = theta^(k-n) <= K theta^(k-n) with K = 3: slack factor 1/3
    let theta = 0.7;
    let mut spec = scalar_spec(theta, 0.0, Perturbation::zero(1));
    spec.rates = RatePair::uniform(3.0, theta).unwrap();
    let (cache, proj) = tables(&spec, 20);
    let st = certify_p2(&cache, &proj, &spec.rates, 20).unwrap();
    assert!(st.holds);
    assert!((st.worst_violation - (1.0 / 3.0 - 1.0)).abs() < 1e-12);
}

#[test]
fn understated_rates_fail_with_witness() {
    let mut spec = scalar_spec(0.5, 0.0, Perturbation::zero(1));
    spec.rates = RatePair::uniform(1.0, 0.4).unwrap();
    let (cache, proj) = tables(&spec, 10);
    let st = certify_p2(&cache, &proj, &spec.rates, 10).unwrap();
    assert!(!st.holds);
    // ratio (0.5/0.4)^(k-n), worst at the largest gap
    assert_eq!(st.witness, Some(vec![10, 0]));
}

#[test]
fn zero_weight_series_vanishes() {
    let spec = hyperbolic_spec();
    let (cache, proj) = tables(&spec, 21);
    let s = series_constant(&cache, &proj, &spec.rates, &WeightSeq::zero(), 7, 20).unwrap();
    assert_eq!(s.value, 0.0);
    assert_eq!(s.tail_bound, 0.0);
}

#[test]
fn scalar_series_is_geometric_partial_sum() {
    let gamma = 0.1;
    let spec = scalar_spec(0.5, gamma, Perturbation::zero(1));
    let (cache, proj) = tables(&spec, 31);
    for l in [0usize, 1, 2, 5, 17, 30] {
        let s = series_constant(&cache, &proj, &spec.rates, &WeightSeq::Constant(gamma), l, 30)
            .unwrap();
        // oracle: sum_{j<l} 2^-(l-1-j) gamma
        let oracle: f64 = (0..l).map(|j| 0.5f64.powi((l - 1 - j) as i32) * gamma).sum();
        assert!((s.value - oracle).abs() < 1e-15);
        assert!((s.value - gamma * (2.0 - 2f64.powi(1 - l as i32))).abs() < 1e-15);
        assert_eq!(s.tail_bound, 0.0);
        assert!(s.value < 2.0 * gamma);
    }
}

#[test]
fn uniform_case_series_below_closed_form_bound() {
    for (theta, k, gamma) in [(0.5, 1.0, 0.1), (0.3, 2.0, 0.05), (0.9, 1.5, 0.01)] {
        let mut spec = scalar_spec(theta, gamma, Perturbation::zero(1));
        spec.rates = RatePair::uniform(k, theta).unwrap();
        let (cache, proj) = tables(&spec, 41);
        for l in 0..=40 {
            let s = series_constant(&cache, &proj, &spec.rates, &WeightSeq::Constant(gamma), l, 40)
                .unwrap();
            assert!(s.value + s.tail_bound <= gamma * k / (1.0 - theta));
        }
    }
}

#[test]
fn hyperbolic_series_tail_is_exact_remainder() {
    let spec = hyperbolic_spec();
    let k_ser = 30;
    let (cache, proj) = tables(&spec, k_ser + 1);
    let g = WeightSeq::Constant(0.05);
    for l in 0..=k_ser {
        let s = series_constant(&cache, &proj, &spec.rates, &g, l, k_ser).unwrap();
        // oracle: stable part sums 2^-(l-1-j) over j < l, unstable part 2^-(j+1-l) over j >= l
        let stable: f64 = (0..l).map(|j| 0.5f64.powi((l - 1 - j) as i32)).sum();
        let unstable_trunc: f64 = (l..=k_ser).map(|j| 0.5f64.powi((j + 1 - l) as i32)).sum();
        let remainder = 0.5f64.powi((k_ser + 1 - l) as i32);
        assert!((s.value - 0.05 * (stable + unstable_trunc)).abs() < 1e-16);
        assert!((s.tail_bound - 0.05 * remainder).abs() <= 1e-18 + 1e-15 * remainder);
    }
}

#[test]
fn unsummable_tail_is_reported() {
    let mut spec = hyperbolic_spec();
    spec.rates = RatePair::new(
        RhoProfile::Constant(1.0),
        DecayProfile::GeneralizedExp {
            u: parse("1/(k+1)").unwrap(),
            u_min: None,
        },
    )
    .unwrap();
    let (cache, proj) = tables(&spec, 11);
    let r = series_constant(&cache, &proj, &spec.rates, &WeightSeq::Constant(0.05), 0, 10);
    assert!(matches!(r, Err(Error::TailNotSummable(_))));
    // a summable weight makes it finite again
    let w = WeightSeq::Geometric {
        scale: 0.05,
        ratio: 0.5,
    };
    assert!(series_constant(&cache, &proj, &spec.rates, &w, 0, 10).is_ok());
}

#[test]
fn backward_contraction_examples() {
    let zero = scalar_spec(0.5, 0.0, Perturbation::zero(1));
    let b = certify_p6(&zero.linear, &zero.perturbation, 10).unwrap();
    assert!(b.holds);
    assert_eq!(b.margin, 1.0);

    let ok = scalar_spec(0.5, 0.1, Perturbation::zero(1));
    let b = certify_p6(&ok.linear, &ok.perturbation, 10).unwrap();
    assert!(b.holds);
    assert!((b.margin - 0.8).abs() < 1e-15);

    let bad = scalar_spec(0.5, 0.6, Perturbation::zero(1));
    let b = certify_p6(&bad.linear, &bad.perturbation, 10).unwrap();
    assert!(!b.holds);
    assert!((b.margin + 0.2).abs() < 1e-15);
    assert_eq!(b.witness, 0);
}

#[test]
fn backward_lipschitz_examples() {
    let zero = scalar_spec(0.5, 0.0, Perturbation::zero(1));
    assert_eq!(backward_lipschitz_product(&zero.linear, &zero.perturbation, 1, 4).unwrap(), 8.0);
    let s = scalar_spec(0.5, 0.1, Perturbation::zero(1));
    let c = backward_lipschitz_product(&s.linear, &s.perturbation, 1, 3).unwrap();
    assert!((c - 6.25).abs() < 1e-14);
    assert_eq!(backward_lipschitz_product(&s.linear, &s.perturbation, 4, 4).unwrap(), 1.0);
    let bad = scalar_spec(0.5, 0.6, Perturbation::zero(1));
    assert!(matches!(
        backward_lipschitz_product(&bad.linear, &bad.perturbation, 0, 2),
        Err(Error::P6Violated { index: 0, .. })
    ));
}

#[test]
fn forward_gronwall_examples() {
    let id = SystemSpec::new(
        MatrixSequence::scalar(1.0).unwrap(),
        ProjectorFamily::Identity,
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::new(Perturbation::zero(1), WeightSeq::Constant(0.1), WeightSeq::zero(), 1.0)
            .unwrap(),
    )
    .unwrap();
    assert_eq!(forward_gronwall_product(&id.linear, &id.perturbation, 2, 2).unwrap(), 1.0);
    let g = forward_gronwall_product(&id.linear, &id.perturbation, 4, 7).unwrap();
    assert!((g - 0.001).abs() < 1e-17);
    let s = scalar_spec(0.5, 0.05, Perturbation::zero(1));
    let g = forward_gronwall_product(&s.linear, &s.perturbation, 0, 2).unwrap();
    assert!((g - 0.3025).abs() < 1e-15);
    let l = forward_lipschitz_product(&id.linear, &id.perturbation, 4, 7).unwrap();
    assert!((l - 1.1f64.powi(3)).abs() < 1e-15);
}

#[test]
fn decay_trend_examples() {
    let zero = scalar_spec(0.5, 0.0, Perturbation::zero(1));
    let t = certify_s4(&zero.rates, &zero.perturbation, 20).unwrap();
    assert_eq!(t.s, zero.rates.h_table(20).unwrap());
    assert!(t.holds_empirically);

    let s = scalar_spec(0.5, 0.1, Perturbation::zero(1));
    let t = certify_s4(&s.rates, &s.perturbation, 10).unwrap();
    for (k, v) in t.s.iter().enumerate() {
        assert!((v - 0.6f64.powi(k as i32)).abs() < 1e-15);
    }
    assert!((t.s[10] - 0.006046617599999999).abs() < 1e-15);
    assert!(t.holds_empirically);
}

#[test]
fn hyperbolic_certificate() {
    let spec = hyperbolic_spec();
    let c = certify(&spec, &CertifyOptions::default()).unwrap().certificate;
    assert!(c.all_hold(), "{:?}", c.failures());
    assert!(!c.contraction_case);
    assert_eq!(c.growth_constant, 2.0);
    assert!((c.p6_margin - 0.9).abs() < 1e-15);
    // oracle: 0.05 (3 - 2^(1-l)) < 0.15, exact remainder for the tail
    for (l, n) in c.n_gamma.iter().enumerate() {
        assert!((n - 0.05 * (3.0 - 2f64.powi(1 - l as i32))).abs() < 1e-16);
    }
    assert!(c.q <= 0.15 * (1.0 + 4.0 * f64::EPSILON));
    assert!(c.unstable_step.holds);
}

#[test]
fn overstated_gamma_fails_backward_contraction() {
    let spec = scalar_spec(0.5, 0.6, Perturbation::constant(vec![0.0]));
    let c = certify(&spec, &CertifyOptions::default()).unwrap().certificate;
    assert!(!c.p6.holds);
    assert_eq!(c.p6.witness, Some(vec![0]));
    assert!(c.failures().contains(&"P6"));
}

#[test]
fn fingerprint_tracks_every_component() {
    let a = hyperbolic_spec();
    let mut b = a.clone();
    assert_eq!(a.fingerprint(), b.fingerprint());
    b.perturbation.gamma = WeightSeq::Constant(0.051);
    assert_ne!(a.fingerprint(), b.fingerprint());
}

#[test]
fn dimension_mismatch_rejected() {
    let r = SystemSpec::new(
        MatrixSequence::scalar(0.5).unwrap(),
        ProjectorFamily::Identity,
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::zero(2),
    );
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}
