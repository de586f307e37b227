//! Experiment configuration documents.

use crate::engine::{classify_params, GapParams, StopRule};
use crate::error::{GapError, Result};
use crate::spectral::{kappa_to_params, optimal_params};
use serde::{Deserialize, Serialize};

/// One experiment, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub problem: Problem,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Allowed absolute gap between measured and predicted rates.
    #[serde(default = "default_rate_tolerance")]
    pub rate_tolerance: f64,
    /// Trailing fraction of the usable distances used by the rate fit.
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
}

fn default_rate_tolerance() -> f64 {
    0.02
}

fn default_window_fraction() -> f64 {
    crate::engine::DEFAULT_WINDOW_FRACTION
}

impl ExperimentConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            params: ParamSpec::default(),
            start: None,
            stop: None,
            seed: 0,
            rate_tolerance: default_rate_tolerance(),
            window_fraction: default_window_fraction(),
        }
    }

    pub fn with_params(mut self, params: ParamSpec) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GapError::Domain(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_tolerance >= 0.0) {
            return Err(GapError::Domain("rate_tolerance must be nonnegative".into()));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(GapError::Domain("window_fraction must lie in (0, 1]".into()));
        }
        if let Some(stop) = &self.stop {
            if !(stop.tol >= 0.0) {
                return Err(GapError::Domain("stop.tol must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// The configured stopping rule, or `fallback` when none is given.
    pub fn stop_rule(&self, fallback: StopSpec) -> StopRule<f64> {
        let s = self.stop.clone().unwrap_or(fallback);
        StopRule { tol: s.tol, max_iter: s.max_iter }
    }

    pub fn kind(&self) -> &'static str {
        self.problem.kind()
    }
}

/// Problem description, tagged by experiment kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    SubspaceRate {
        n: usize,
        p: usize,
        q: usize,
        /// `min(p, q)` principal angles in nondecreasing order.
        angles: Vec<f64>,
        /// Iteration counts at or below this pass when the rate is undefined
        /// because the run terminated.
        #[serde(default = "default_finite_steps")]
        finite_steps: usize,
    },
    ManifoldRate {
        pair: ManifoldPair,
        #[serde(default = "default_finite_steps")]
        finite_steps: usize,
        /// Allowed entrywise gap between the finite-difference Jacobian of
        /// one step and the tangent operator.
        #[serde(default = "default_jacobian_tolerance")]
        jacobian_tolerance: f64,
    },
    ConvexRate { pair: ConvexPair },
    Counterexample {
        #[serde(default = "default_counter_iterations")]
        iterations: usize,
        /// Allowed drift of the per-step factor.
        #[serde(default = "default_beta_tolerance")]
        beta_tolerance: f64,
        /// Allowed gap to the four-decimal coordinates of the first iterate,
        /// which are truncated rather than rounded.
        #[serde(default = "default_figure_tolerance")]
        figure_tolerance: f64,
    },
    SpectrumCheck {
        #[serde(default = "default_instances")]
        instances: usize,
        #[serde(default = "default_max_dim")]
        max_dim: usize,
        #[serde(default = "default_eig_tolerance")]
        eig_tolerance: f64,
        #[serde(default = "default_bound_slack")]
        bound_slack: f64,
    },
    ParamSweep {
        theta_f: f64,
        #[serde(default = "default_sweep_dim")]
        n: usize,
        #[serde(default = "default_grid_step")]
        grid_step: f64,
        #[serde(default = "default_sweep_margin")]
        margin: f64,
    },
    AdaptiveTheta {
        target: AdaptiveTarget,
        #[serde(default = "default_angle_tolerance")]
        angle_tolerance: f64,
    },
}

fn default_finite_steps() -> usize {
    3
}
fn default_jacobian_tolerance() -> f64 {
    1e-5
}
fn default_figure_tolerance() -> f64 {
    1e-4
}
fn default_counter_iterations() -> usize {
    50
}
fn default_beta_tolerance() -> f64 {
    1e-10
}
fn default_instances() -> usize {
    100
}
fn default_max_dim() -> usize {
    40
}
fn default_eig_tolerance() -> f64 {
    1e-8
}
fn default_bound_slack() -> f64 {
    1e-10
}
fn default_sweep_dim() -> usize {
    4
}
fn default_grid_step() -> f64 {
    0.05
}
fn default_sweep_margin() -> f64 {
    1e-10
}
fn default_angle_tolerance() -> f64 {
    1e-3
}
fn default_radius() -> f64 {
    1.0
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SubspaceRate { .. } => "subspace_rate",
            Self::ManifoldRate { .. } => "manifold_rate",
            Self::ConvexRate { .. } => "convex_rate",
            Self::Counterexample { .. } => "counterexample",
            Self::SpectrumCheck { .. } => "spectrum_check",
            Self::ParamSweep { .. } => "param_sweep",
            Self::AdaptiveTheta { .. } => "adaptive_theta",
        }
    }
}

/// Smooth manifold pairs with a known intersection point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ManifoldPair {
    /// Unit circle and the line through `(1, 0)` with direction
    /// `(sin θ, cos θ)`, meeting at angle θ.
    CircleLine { theta: f64 },
    /// Unit sphere in R³ and the plane `z = height`.
    SpherePlane { height: f64 },
    /// The curve `{(t, 0, t²)}` and the `e2` axis.
    ParabolaLine,
}

/// Solid convex pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ConvexPair {
    /// Two discs of equal radius whose centers are `distance` apart.
    Discs {
        distance: f64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// The unit disc and the line `y = cos θ`.
    DiscLine { theta: f64 },
}

/// Instances for the adaptive angle estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum AdaptiveTarget {
    /// Two lines in R^n at angle `theta_f`.
    Lines { n: usize, theta_f: f64 },
    /// Two unit discs with centers `distance` apart.
    Discs { distance: f64 },
}

/// Relaxation parameters: `"optimal"`, `"ap"`, `"kappa:<value>"` or an
/// explicit `{alpha, alpha1, alpha2}` object.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ParamRepr", into = "ParamRepr")]
pub enum ParamSpec {
    /// `(1, α*, α*)` for the problem's Friedrichs angle.
    Optimal,
    /// Plain alternating projections `(1, 1, 1)`.
    #[default]
    AlternatingProjections,
    Kappa(f64),
    Explicit { alpha: f64, alpha1: f64, alpha2: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ParamRepr {
    Named(String),
    Explicit { alpha: f64, alpha1: f64, alpha2: f64 },
}

impl TryFrom<ParamRepr> for ParamSpec {
    type Error = String;

    fn try_from(r: ParamRepr) -> std::result::Result<Self, String> {
        match r {
            ParamRepr::Explicit { alpha, alpha1, alpha2 } => Ok(Self::Explicit { alpha, alpha1, alpha2 }),
            ParamRepr::Named(s) => s.parse(),
        }
    }
}

impl From<ParamSpec> for ParamRepr {
    fn from(p: ParamSpec) -> Self {
        match p {
            ParamSpec::Explicit { alpha, alpha1, alpha2 } => Self::Explicit { alpha, alpha1, alpha2 },
            other => Self::Named(other.to_string()),
        }
    }
}

impl std::str::FromStr for ParamSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "optimal" => Ok(Self::Optimal),
            "ap" => Ok(Self::AlternatingProjections),
            other => match other.strip_prefix("kappa:") {
                Some(v) => v.trim().parse().map(Self::Kappa).map_err(|e| format!("bad kappa value {v:?}: {e}")),
                None => Err(format!("unknown parameter spec {other:?}")),
            },
        }
    }
}

impl std::fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Optimal => write!(f, "optimal"),
            Self::AlternatingProjections => write!(f, "ap"),
            Self::Kappa(k) => write!(f, "kappa:{k}"),
            Self::Explicit { alpha, alpha1, alpha2 } => write!(f, "({alpha}, {alpha1}, {alpha2})"),
        }
    }
}

impl ParamSpec {
    /// Concrete parameters; `Optimal` uses `theta_f`.
    pub fn resolve(&self, theta_f: Option<f64>) -> Result<GapParams<f64>> {
        match self {
            Self::Optimal => Ok(optimal_params(theta_f).params),
            Self::AlternatingProjections => Ok(GapParams::alternating_projections()),
            Self::Kappa(k) => kappa_to_params(*k),
            Self::Explicit { alpha, alpha1, alpha2 } => Ok(classify_params(*alpha, *alpha1, *alpha2)),
        }
    }
}

/// Where the iteration starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StartSpec {
    /// An explicit point.
    Point { coords: Vec<f64> },
    /// `x* + distance · direction / ‖direction‖`.
    Offset { direction: Vec<f64>, distance: f64 },
    /// Uniform direction, radius uniform in `[inner, outer]`, around `x*`.
    Annulus { inner: f64, outer: f64 },
}

/// Stopping rule as written in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopSpec {
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_max_iter() -> usize {
    100_000
}

impl StopSpec {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}
