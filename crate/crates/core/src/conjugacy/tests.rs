use super::*;
use crate::algebra::{Matrix, MatrixSequence, ProjectorFamily};
use crate::dichotomy::{CertifyOptions, Perturbation, PerturbationSpec, RatePair, SystemSpec, WeightSeq};
use crate::exprlang::parse;
use proptest::prelude::*;

fn opts(k: usize) -> CertifyOptions {
    CertifyOptions {
        horizon: k + 1,
        series_horizon: k,
        samples: 200,
        seed: 3,
    }
}

fn policy(k: usize, window: usize) -> TruncationPolicy {
    TruncationPolicy {
        series_horizon: k,
        window,
        ..TruncationPolicy::default()
    }
}

fn scalar_cp(f: &str, gamma: f64, mu: f64) -> ConjugacyPair {
    let spec = SystemSpec::new(
        MatrixSequence::scalar(0.5).unwrap(),
        ProjectorFamily::Identity,
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::new(
            Perturbation::from_exprs(vec![parse(f).unwrap()]).unwrap(),
            WeightSeq::Constant(gamma),
            WeightSeq::Constant(mu),
            2.0,
        )
        .unwrap(),
    )
    .unwrap();
    let pair = SystemPair::certify(spec, &opts(40)).unwrap();
    ConjugacyPair::new(pair, policy(40, 20)).unwrap()
}

fn hyperbolic_cp(k: usize, tol: f64) -> ConjugacyPair {
    let f = Perturbation::from_exprs(vec![
        parse("0.05*tanh(y1)").unwrap(),
        parse("0.05*sin(y0)").unwrap(),
    ])
    .unwrap();
    let spec = SystemSpec::new(
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
    .unwrap();
    let pair = SystemPair::certify(spec, &opts(k)).unwrap();
    ConjugacyPair::new(
        pair,
        TruncationPolicy {
            fixed_point_tol: tol,
            ..policy(k, 20)
        },
    )
    .unwrap()
}

fn v1(x: f64) -> Vector {
    Vector::from_vec(vec![x])
}

/// `2c (1 - 2^-k)`: the geometric partial sum `sum_{j<k} 2^-(k-1-j) c`.
fn affine_oracle(c: f64, k: i32) -> f64 {
    2.0 * c * (1.0 - 0.5f64.powi(k))
}

#[test]
fn zero_perturbation_gives_identity_maps() {
    let cp = scalar_cp("0", 0.0, 0.0);
    for k in [0, 3, 17] {
        let z = cp.z_star(k, 2, &v1(0.7)).unwrap();
        assert_eq!(z.value[0], 0.0);
        assert_eq!(z.iterations, 1);
        assert_eq!(cp.w_star(k, 2, &v1(0.7)).unwrap().value[0], 0.0);
        assert_eq!(cp.h_map(k, &v1(0.7)).unwrap().value[0], 0.7);
        assert_eq!(cp.g_map(k, &v1(0.7)).unwrap().value[0], 0.7);
        let s = cp.shortcut_maps(k, &v1(0.7)).unwrap();
        assert_eq!(s.g_short.value[0], 0.7);
        assert_eq!(s.h_short.value[0], 0.7);
        assert_eq!(cp.d_g(k, &v1(0.7)).unwrap()[(0, 0)], 1.0);
    }
    let samples = draw_samples(5, 1, 10, 1.0, 1);
    let v = verify_all(&cp, &samples, 20).unwrap();
    assert_eq!(v.conjugacy.max_res_h, 0.0);
    assert_eq!(v.conjugacy.max_res_g, 0.0);
    assert_eq!(v.conjugacy.max_res_hg, 0.0);
    assert_eq!(v.conjugacy.max_res_gh, 0.0);
    assert_eq!(v.identities.max_res_wz, 0.0);
    assert_eq!(v.identities.max_res_zw, 0.0);
    assert_eq!(v.identities.max_res_fixed, 0.0);
    assert_eq!(v.identities.max_res_flow, 0.0);
}

#[test]
fn affine_values_match_geometric_sums() {
    let cp = scalar_cp("0.3", 0.0, 0.3);
    let z = cp.z_star(3, 3, &v1(1.0)).unwrap();
    assert!((z.value[0] - 0.525).abs() < 1e-14);
    assert_eq!(z.iterations, 1);
    assert!(z.err >= (z.value[0] - 0.525).abs() && z.err < 1e-11);
    assert!((cp.w_star(3, 3, &v1(1.0)).unwrap().value[0] + 0.525).abs() < 1e-14);
    assert!((cp.h_map(3, &v1(1.0)).unwrap().value[0] - 1.525).abs() < 1e-14);
    let g = cp.g_map(3, &v1(1.0)).unwrap();
    assert!((g.value[0] - 0.475).abs() < 1e-14);
    assert!(g.discrepancy < 1e-14);
    let s = cp.shortcut_maps(3, &v1(1.0)).unwrap();
    assert!((s.g_short.value[0] - 0.475).abs() < 1e-14);
    for k in 0..=20 {
        let z = cp.z_star(k, 5, &v1(-0.4)).unwrap();
        assert!((z.value[0] - affine_oracle(0.3, k as i32)).abs() < 1e-14);
        let w = cp.w_star(k, k, &v1(0.9)).unwrap();
        assert!((w.value[0] + affine_oracle(0.3, k as i32)).abs() < 1e-14);
        assert!((cp.d_g(k, &v1(0.2)).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
    }
    let samples = draw_samples(6, 2, 10, 1.0, 1);
    let v = verify_all(&cp, &samples, 20).unwrap();
    let c = &v.conjugacy;
    for r in [c.max_res_h, c.max_res_g, c.max_res_hg, c.max_res_gh] {
        assert!(r < 1e-10, "{r}");
    }
    assert!(v.identities.max_res_wz < 1e-10);
    assert!(c.all_within_budget && v.identities.all_within_budget);
}

#[test]
fn series_solutions_satisfy_their_difference_equations() {
    let cp = hyperbolic_cp(60, 1e-12);
    let pair = cp.pair();
    let xi = Vector::from_vec(vec![0.3, -0.8]);
    let zt = cp.z_table(4, &xi).unwrap();
    let wt = cp.w_table(4, &xi).unwrap();
    for k in 0..40 {
        let a = pair.a(k).unwrap();
        let z_next = a.as_ref() * &zt.z[k] + pair.f(k, &(&zt.x[k] + &zt.z[k])).unwrap();
        let tol = zt.err[k + 1] + 2.0 * zt.err[k] + 1e-14;
        assert!((&z_next - &zt.z[k + 1]).norm() <= tol, "z at {k}");
        let w_next = a.as_ref() * &wt.w[k] - pair.f(k, &wt.y[k]).unwrap();
        assert!((&w_next - &wt.w[k + 1]).norm() < 1e-9, "w at {k}");
    }
}

#[test]
fn maps_stay_within_p_of_identity() {
    let cp = hyperbolic_cp(60, 1e-12);
    for s in draw_samples(20, 5, 20, 1.0, 2) {
        let h = cp.h_map(s.m, &s.u).unwrap();
        assert!((&h.value - &s.u).norm() <= cp.p() + h.err);
        let g = cp.g_map(s.m, &s.u).unwrap();
        assert!((&g.value - &s.u).norm() <= cp.p() + g.err);
    }
}

#[test]
fn measured_contraction_respects_q() {
    let cp = hyperbolic_cp(60, 1e-14);
    for s in draw_samples(10, 9, 20, 1.0, 2) {
        let z = cp.z_star(s.m, s.m, &s.u).unwrap();
        assert!(z.contraction_ratio <= cp.q() + 1e-9, "{} > {}", z.contraction_ratio, cp.q());
    }
}

#[test]
fn hyperbolic_relations_within_budget() {
    let cp = hyperbolic_cp(60, 1e-12);
    let samples = draw_samples(4, 11, 10, 1.0, 2);
    let v = verify_all(&cp, &samples, 20).unwrap();
    assert!(v.conjugacy.all_within_budget, "{:?}", v.conjugacy.rows.iter().find(|r| !r.within_budget()));
    assert!(v.identities.all_within_budget, "{:?}", v.identities.rows.iter().find(|r| !r.within_budget()));
}

#[test]
fn shortcuts_need_contraction_case() {
    let cp = hyperbolic_cp(30, 1e-12);
    let u = Vector::from_vec(vec![0.1, 0.1]);
    assert_eq!(cp.shortcut_maps(3, &u).unwrap_err(), Error::NotContractionCase);
    assert_eq!(cp.d_g(3, &u).unwrap_err(), Error::NotContractionCase);
}

#[test]
fn shortcut_inverts_and_matches_series() {
    let cp = scalar_cp("0.1*sin(y0)", 0.1, 0.1);
    for k in [1, 4, 12] {
        for u in [-0.9, 0.2, 0.6] {
            let s = cp.shortcut_maps(k, &v1(u)).unwrap();
            let g = cp.g_map(k, &v1(u)).unwrap();
            let h = cp.h_map(k, &v1(u)).unwrap();
            assert!((&s.g_short.value - &g.value).norm() <= s.g_short.err + g.err);
            assert!((&s.h_short.value - &h.value).norm() <= s.h_short.err + h.err);
            let back = cp.shortcut_maps(k, &s.g_short.value).unwrap();
            assert!((back.h_short.value[0] - u).abs() < 1e-9);
        }
    }
}

#[test]
fn derivative_matches_finite_differences() {
    let cp = scalar_cp("0.1*sin(y0)", 0.1, 0.1);
    let step = 1e-5;
    for k in [1, 5, 10] {
        for u in [-0.7, 0.1, 0.8] {
            let d = cp.d_g(k, &v1(u)).unwrap()[(0, 0)];
            let gp = cp.g_map(k, &v1(u + step)).unwrap().value[0];
            let gm = cp.g_map(k, &v1(u - step)).unwrap().value[0];
            let fd = (gp - gm) / (2.0 * step);
            assert!((d - fd).abs() <= 1e-5 * d.abs(), "k={k} u={u}: {d} vs {fd}");
        }
    }
}

#[test]
fn derivative_matches_extrapolated_differences_far_from_origin() {
    // the backward orbit reaches |y(0)| ~ 2e4 at k = 15, where a plain central
    // difference with step 1e-5 is off by O(h^2 G''') ~ 1e-4; Richardson removes it
    let cp = scalar_cp("0.1*sin(y0)", 0.1, 0.1);
    let central = |k: usize, u: f64, h: f64| {
        (cp.g_map(k, &v1(u + h)).unwrap().value[0] - cp.g_map(k, &v1(u - h)).unwrap().value[0]) / (2.0 * h)
    };
    for u in [-0.7, 0.1, 0.8] {
        let d = cp.d_g(15, &v1(u)).unwrap()[(0, 0)];
        let rich = (4.0 * central(15, u, 1e-6) - central(15, u, 2e-6)) / 3.0;
        assert!((d - rich).abs() <= 1e-5 * d.abs(), "u={u}: {d} vs {rich}");
    }
}

#[test]
fn rejects_uncertified_or_short_pairs() {
    let spec = SystemSpec::new(
        MatrixSequence::scalar(0.5).unwrap(),
        ProjectorFamily::Identity,
        RatePair::uniform(1.0, 0.5).unwrap(),
        PerturbationSpec::new(
            Perturbation::from_exprs(vec![parse("0.6*sin(y0)").unwrap()]).unwrap(),
            WeightSeq::Constant(0.6),
            WeightSeq::Constant(0.6),
            2.0,
        )
        .unwrap(),
    )
    .unwrap();
    let pair = SystemPair::certify(spec, &opts(30)).unwrap();
    assert!(matches!(
        ConjugacyPair::new(pair, policy(30, 10)),
        Err(Error::Uncertified(_))
    ));
    let cp = scalar_cp("0.3", 0.0, 0.3);
    assert!(matches!(
        ConjugacyPair::new(cp.pair().clone(), policy(80, 10)),
        Err(Error::Uncertified(_))
    ));
    assert!(matches!(
        ConjugacyPair::new(cp.pair().clone(), policy(30, 30)),
        Err(Error::InvalidConfig(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scalar_sine_maps_are_mutually_inverse(u in -1.0f64..1.0, k in 0usize..15) {
        let cp = scalar_cp("0.1*sin(y0)", 0.1, 0.1);
        let g = cp.g_map(k, &v1(u)).unwrap();
        let hg = cp.h_map(k, &g.value).unwrap();
        prop_assert!((hg.value[0] - u).abs() <= hg.err + cp.lip_h(k) * g.err);
        let h = cp.h_map(k, &v1(u)).unwrap();
        let gh = cp.g_map(k, &h.value).unwrap();
        prop_assert!((gh.value[0] - u).abs() <= gh.err + cp.lip_g(k) * h.err);
    }

    #[test]
    fn h_is_monotone_for_scalar_sine(a in -1.0f64..1.0, b in -1.0f64..1.0, k in 0usize..10) {
        prop_assume!((a - b).abs() > 1e-3);
        let cp = scalar_cp("0.1*sin(y0)", 0.1, 0.1);
        let ha = cp.h_map(k, &v1(a)).unwrap().value[0];
        let hb = cp.h_map(k, &v1(b)).unwrap().value[0];
        prop_assert!((ha - hb) * (a - b) > 0.0);
    }
}


