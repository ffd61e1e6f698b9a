//! Config-driven experiments: certification, conjugacy verification and the
//! stability suite, each producing a machine-readable report and, for the
//! last two, a CSV table.
//!
//! Everything here is deterministic given the config and its seed.

mod config;

pub use config::{
    DecayConfig, ExperimentConfig, GeometricWeight, LinearConfig, OutputConfig, PerturbationConfig,
    ProjectorConfig, RatesConfig, RhoConfig, RhoExpr, SamplingConfig, StabilityConfig,
    TabulatedWeight, TruncationConfig, WeightConfig,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::conjugacy::{draw_samples, verify_all, ConjugacyPair, Verification};
use crate::dichotomy::{certify, DichotomyCertificate, HypothesisStatus};
use crate::error::{Error, Result};
use crate::stability::{
    asymptotic_stability_probe, find_equilibrium, verify_stability_preservation, EquilibriumResult,
    ProbeReport, StabilityReport,
};
use crate::trajectories::SystemPair;

/// Process exit codes of the command-line driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Success = 0,
    ConfigError = 2,
    /// A hypothesis fails or a measured value exceeds its budget.
    CertificationFailure = 3,
    NumericFailure = 4,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_error(e: &Error) -> Outcome {
        match e {
            _ if e.is_config_error() => Outcome::ConfigError,
            Error::Uncertified(_)
            | Error::P6Violated { .. }
            | Error::NotContractionCase
            | Error::NotStationary { .. }
            | Error::CertificateMismatch => Outcome::CertificationFailure,
            _ => Outcome::NumericFailure,
        }
    }

    fn from_pass(pass: bool) -> Outcome {
        if pass {
            Outcome::Success
        } else {
            Outcome::CertificationFailure
        }
    }
}

/// The contraction-case hypotheses, as special cases of the general ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContractionHypotheses {
    /// `P = I` and the dichotomy bound holds.
    pub s1: bool,
    /// The `mu`-series is bounded.
    pub s2: bool,
    /// The `gamma`-series is below one.
    pub s3: bool,
    /// The Gronwall product trends to zero on the grid.
    pub s4: bool,
}

impl ContractionHypotheses {
    pub fn of(cert: &DichotomyCertificate) -> Self {
        ContractionHypotheses {
            s1: cert.contraction_case && cert.projector_holds && cert.p2.holds,
            s2: cert.contraction_case && cert.p4.holds,
            s3: cert.contraction_case && cert.p5.holds,
            s4: cert.s4.holds_empirically,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyRun {
    pub name: String,
    pub seed: u64,
    pub certificate: DichotomyCertificate,
    pub contraction: ContractionHypotheses,
    pub failures: Vec<&'static str>,
    pub passed: bool,
}

impl CertifyRun {
    pub fn outcome(&self) -> Outcome {
        Outcome::from_pass(self.passed)
    }

    /// Human-readable per-hypothesis report.
    pub fn text(&self) -> String {
        let c = &self.certificate;
        let mut out = String::new();
        let _ = writeln!(out, "system {} (fingerprint {})", self.name, c.fingerprint);
        let _ = writeln!(out, "grid [0, {}], series horizon {}", c.horizon, c.series_horizon);
        let _ = writeln!(out, "M = {:.6e}", c.growth_constant);
        let _ = writeln!(out, "p = {:.6e} (tail {:.3e})", c.p, c.p_tail);
        let _ = writeln!(out, "q = {:.6e} (tail {:.3e})", c.q, c.q_tail);
        let _ = writeln!(out, "P6 margin = {:.6}", c.p6_margin);
        let _ = writeln!(
            out,
            "projector {}: complement {:.3e}, idempotence {:.3e}, invariance {:.3e}",
            verdict(c.projector_holds),
            c.projector.complement_defect,
            c.projector.idempotence_defect,
            c.projector.invariance_defect
        );
        for (name, h) in [
            ("P1", &c.p1),
            ("P2", &c.p2),
            ("P3", &c.p3),
            ("P4", &c.p4),
            ("P5", &c.p5),
            ("P6", &c.p6),
            ("unstable step", &c.unstable_step),
        ] {
            let _ = writeln!(out, "{name:<13} {}", status_line(h));
        }
        let s = &self.contraction;
        for (name, ok) in [("S1", s.s1), ("S2", s.s2), ("S3", s.s3), ("S4", s.s4)] {
            let _ = writeln!(out, "{name:<13} {}", verdict(ok));
        }
        let _ = writeln!(out, "result: {}", verdict(self.passed));
        out
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn status_line(h: &HypothesisStatus) -> String {
    let mut s = format!("{} worst {:+.3e}", verdict(h.holds), h.worst_violation);
    if let Some(w) = &h.witness {
        let _ = write!(s, " at {w:?}");
    }
    s
}

pub fn run_certify(cfg: &ExperimentConfig) -> Result<CertifyRun> {
    let spec = cfg.system_spec()?;
    let certified = certify(&spec, &cfg.certify_options())?;
    let certificate = certified.certificate;
    let failures = certificate.failures();
    Ok(CertifyRun {
        name: cfg.name.clone(),
        seed: cfg.seed,
        contraction: ContractionHypotheses::of(&certificate),
        passed: failures.is_empty(),
        failures,
        certificate,
    })
}

/// Certifies the configured system and builds its conjugacy pair.
pub fn build_pair(cfg: &ExperimentConfig) -> Result<ConjugacyPair> {
    let pair = SystemPair::certify(cfg.system_spec()?, &cfg.certify_options())?;
    ConjugacyPair::new(pair, cfg.policy())
}

/// One line of the conjugacy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateCsvRow {
    pub k: usize,
    pub m: usize,
    pub sample_id: usize,
    /// Larger of the two conjugacy relation residuals.
    pub res_conj: f64,
    pub res_inv_hg: f64,
    pub res_inv_gh: f64,
    pub res_ident_wz: f64,
    /// Largest budget among the residuals of the row.
    pub err_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateRun {
    pub name: String,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub verification: Verification,
    #[serde(skip)]
    pub table: Vec<ConjugateCsvRow>,
    pub passed: bool,
}

impl ConjugateRun {
    pub fn outcome(&self) -> Outcome {
        Outcome::from_pass(self.passed)
    }

    pub fn csv(&self) -> Result<String> {
        let rows = self.table.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.m.to_string(),
                r.sample_id.to_string(),
                real(r.res_conj),
                real(r.res_inv_hg),
                real(r.res_inv_gh),
                real(r.res_ident_wz),
                real(r.err_budget),
            ]
        });
        write_csv(
            &["k", "m", "sample_id", "res_conj", "res_inv_HG", "res_inv_GH", "res_ident_wz", "err_budget"],
            rows,
        )
    }
}

pub fn run_conjugate(cfg: &ExperimentConfig) -> Result<ConjugateRun> {
    let cp = build_pair(cfg)?;
    run_conjugate_on(cfg, &cp)
}

pub fn run_conjugate_on(cfg: &ExperimentConfig, cp: &ConjugacyPair) -> Result<ConjugateRun> {
    let s = &cfg.sampling;
    let samples = draw_samples(s.conjugacy, cfg.conjugacy_seed(), s.max_m, s.radius, cp.pair().dim());
    let verification = verify_all(cp, &samples, cfg.horizon)?;
    let conj = &verification.conjugacy.rows;
    let ident = &verification.identities.rows;
    if conj.len() != ident.len() {
        return Err(Error::InvalidConfig("conjugacy and identity tables disagree".into()));
    }
    let table = conj
        .iter()
        .zip(ident)
        .map(|(c, i)| {
            debug_assert_eq!((c.sample, c.k), (i.sample, i.k));
            ConjugateCsvRow {
                k: c.k,
                m: c.m,
                sample_id: c.sample,
                res_conj: c.res_h.max(c.res_g),
                res_inv_hg: c.res_hg,
                res_inv_gh: c.res_gh,
                res_ident_wz: i.res_wz,
                err_budget: [c.budget_h, c.budget_g, c.budget_hg, c.budget_gh, i.budget_wz]
                    .into_iter()
                    .fold(0.0, f64::max),
            }
        })
        .collect();
    let passed = verification.conjugacy.all_within_budget && verification.identities.all_within_budget;
    Ok(ConjugateRun {
        name: cfg.name.clone(),
        seed: cfg.seed,
        p: cp.p(),
        q: cp.q(),
        verification,
        table,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRun {
    pub name: String,
    pub seed: u64,
    pub equilibrium: EquilibriumResult,
    pub preservation: StabilityReport,
    pub probe: ProbeReport,
    /// The Gronwall product trends to zero on the certificate grid.
    pub rate_trend: bool,
    pub passed: bool,
}

impl StabilityRun {
    pub fn outcome(&self) -> Outcome {
        Outcome::from_pass(self.passed)
    }

    pub fn csv(&self) -> Result<String> {
        let rows = self.preservation.rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                real(r.h_k0_dev),
                real(r.majorant),
                real(r.g_kystar_norm),
                real(r.rho0_h_bound),
            ]
        });
        write_csv(&["k", "H_k0_dev", "majorant", "G_kystar_norm", "rho0_h_bound"], rows)
    }
}

pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityRun> {
    let cp = build_pair(cfg)?;
    run_stability_on(cfg, &cp)
}

pub fn run_stability_on(cfg: &ExperimentConfig, cp: &ConjugacyPair) -> Result<StabilityRun> {
    let eq = find_equilibrium(cp.pair(), cfg.stability.tol)?;
    let preservation = verify_stability_preservation(cp, &eq, cfg.horizon)?;
    let s = &cfg.sampling;
    let samples = draw_samples(s.probe, cfg.probe_seed(), s.max_m, s.radius, cp.pair().dim());
    let probe = asymptotic_stability_probe(cp, &eq, &samples, cfg.horizon)?;
    let rate_trend = cp.pair().certificate().s4.holds_empirically;
    if !rate_trend {
        log::warn!("Gronwall product does not trend to zero; the rate majorant proves nothing about the limit");
    }
    let passed = eq.unique_flag && preservation.all_within_bounds && probe.split_holds;
    Ok(StabilityRun {
        name: cfg.name.clone(),
        seed: cfg.seed,
        equilibrium: eq,
        preservation,
        probe,
        rate_trend,
        passed,
    })
}

/// Doubles printed with 17 significant digits, which round-trip exactly.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv<I>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    // every report type serialises; non-finite floats become null
    serde_json::to_string_pretty(v).expect("report serialises")
}

#[cfg(test)]
mod tests;
