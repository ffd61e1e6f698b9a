use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::{Matrix, MatrixFamily, MatrixSequence, ProjectorFamily};
use crate::conjugacy::TruncationPolicy;
use crate::dichotomy::{
    CertifyOptions, DecayProfile, Perturbation, PerturbationSpec, RatePair, RhoProfile, SystemSpec,
    WeightSeq,
};
use crate::error::{Error, Result};
use crate::exprlang::parse;

/// Everything one experiment needs, read from a TOML file.
///
/// Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dimension: usize,
    /// Largest `k` at which maps are evaluated and relations checked.
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    pub linear: LinearConfig,
    pub projector: ProjectorConfig,
    pub rates: RatesConfig,
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearConfig {
    Diagonal { rates: Vec<f64> },
    Constant { matrix: Vec<Vec<f64>> },
    /// Row-major entries, each an expression in `k`.
    Expression { entries: Vec<String> },
    Tabulated { matrices: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectorConfig {
    Identity,
    Constant { matrix: Vec<Vec<f64>> },
    Transported { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub rho: RhoConfig,
    pub decay: DecayConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoConfig {
    Constant(f64),
    Expression(RhoExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoExpr {
    pub expr: String,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayConfig {
    Geometric { theta: f64 },
    GeneralizedExp { u: String, u_min: Option<f64> },
    Tabulated { h: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// One expression per component, in `k` and `y0, y1, ...`.
    pub f: Vec<String>,
    pub gamma: WeightConfig,
    pub mu: WeightConfig,
    #[serde(default = "default_sample_box")]
    pub sample_box: f64,
}

fn default_sample_box() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightConfig {
    Constant(f64),
    Geometric(GeometricWeight),
    Tabulated(TabulatedWeight),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricWeight {
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedWeight {
    pub values: Vec<f64>,
    pub cutoff: Option<usize>,
}

/// Overrides for [`TruncationPolicy`]; the series horizon defaults to
/// `max(60, horizon + 10)` so that it always exceeds the evaluation window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub series_horizon: Option<usize>,
    pub fixed_point_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub backward_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Random points for the Lipschitz and bound spot-checks.
    pub certify: usize,
    /// Samples `(m, u)` for the conjugacy relations.
    pub conjugacy: usize,
    /// Samples `(j, eta)` for the stability probe.
    pub probe: usize,
    /// Base times are drawn from `[0, max_m]`.
    pub max_m: usize,
    /// Points are drawn from `[-radius, radius]^d`.
    pub radius: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            certify: 1000,
            conjugacy: 20,
            probe: 8,
            max_m: 10,
            radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Residual tolerance for the equilibrium.
    pub tol: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

fn matrix(rows: &[Vec<f64>], d: usize) -> Result<Matrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidConfig(format!("expected a {d}x{d} matrix")));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl WeightConfig {
    fn build(&self) -> WeightSeq {
        match self {
            WeightConfig::Constant(c) => WeightSeq::Constant(*c),
            WeightConfig::Geometric(g) => WeightSeq::Geometric {
                scale: g.scale,
                ratio: g.ratio,
            },
            WeightConfig::Tabulated(t) => WeightSeq::Tabulated {
                values: t.values.clone(),
                cutoff: t.cutoff,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if self.perturbation.f.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: self.perturbation.f.len(),
            });
        }
        let s = &self.sampling;
        if s.max_m > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "max_m = {} exceeds the horizon {}",
                s.max_m, self.horizon
            )));
        }
        if !(s.radius.is_finite() && s.radius >= 0.0) {
            return Err(Error::InvalidConfig("sampling radius must be nonnegative".into()));
        }
        self.policy().validate()
    }

    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(mut self, horizon: Option<usize>, seed: Option<u64>) -> Result<Self> {
        if let Some(h) = horizon {
            self.horizon = h;
            self.sampling.max_m = self.sampling.max_m.min(h);
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn series_horizon(&self) -> usize {
        self.truncation
            .series_horizon
            .unwrap_or_else(|| (self.horizon + 10).max(60))
    }

    pub fn policy(&self) -> TruncationPolicy {
        let d = TruncationPolicy::default();
        let t = &self.truncation;
        TruncationPolicy {
            series_horizon: self.series_horizon(),
            fixed_point_tol: t.fixed_point_tol.unwrap_or(d.fixed_point_tol),
            max_iters: t.max_iters.unwrap_or(d.max_iters),
            backward_tol: t.backward_tol.unwrap_or(d.backward_tol),
            window: self.horizon,
        }
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            horizon: self.horizon,
            series_horizon: self.series_horizon(),
            samples: self.sampling.certify,
            seed: self.seed,
        }
    }

    /// Seeds for the independent sample streams, all derived from `seed`.
    pub fn conjugacy_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn probe_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let d = self.dimension;
        let linear = match &self.linear {
            LinearConfig::Diagonal { rates } => MatrixSequence::new(d, MatrixFamily::DiagonalGeometric(rates.clone()))?,
            LinearConfig::Constant { matrix: m } => MatrixSequence::new(d, MatrixFamily::Constant(matrix(m, d)?))?,
            LinearConfig::Expression { entries } => MatrixSequence::new(
                d,
                MatrixFamily::Expression(entries.iter().map(|e| parse(e)).collect::<Result<_, _>>()?),
            )?,
            LinearConfig::Tabulated { matrices } => MatrixSequence::new(
                d,
                MatrixFamily::Tabulated(matrices.iter().map(|m| matrix(m, d)).collect::<Result<_>>()?),
            )?,
        };
        let projector = match &self.projector {
            ProjectorConfig::Identity => ProjectorFamily::Identity,
            ProjectorConfig::Constant { matrix: m } => ProjectorFamily::Constant(matrix(m, d)?),
            ProjectorConfig::Transported { matrix: m } => ProjectorFamily::Transported(matrix(m, d)?),
        };
        let rho = match &self.rates.rho {
            RhoConfig::Constant(c) => RhoProfile::Constant(*c),
            RhoConfig::Expression(r) => RhoProfile::Expression {
                expr: parse(&r.expr)?,
                sup: r.sup,
            },
        };
        let h = match &self.rates.decay {
            DecayConfig::Geometric { theta } => DecayProfile::Geometric(*theta),
            DecayConfig::GeneralizedExp { u, u_min } => DecayProfile::GeneralizedExp {
                u: parse(u)?,
                u_min: *u_min,
            },
            DecayConfig::Tabulated { h } => DecayProfile::Tabulated(h.clone()),
        };
        let p = &self.perturbation;
        let f = Perturbation::from_exprs(p.f.iter().map(|e| parse(e)).collect::<Result<_, _>>()?)?;
        let pert = PerturbationSpec::new(f, p.gamma.build(), p.mu.build(), p.sample_box)?;
        SystemSpec::new(linear, projector, RatePair::new(rho, h)?, pert)
    }
}
