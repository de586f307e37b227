//! Experiment harness: configurations, runners and result files.

pub mod config;
mod counterexample;
mod linear;
mod nonlinear;
pub mod output;

pub use config::{
    AdaptiveTarget, ConvexPair, ExperimentConfig, ManifoldPair, ParamSpec, Problem, StartSpec, StopSpec,
};
pub use output::{output_dir, result_document, write_result, WrittenFiles, OUTPUT_ENV};

use crate::engine::{GapParams, IterationTrace, RateFit, RunFailure, StopReason};
use crate::error::{GapError, Result};
use crate::scalar::{to_f64, Field};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::collections::BTreeMap;

/// What the theory predicts for an experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Prediction {
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub theta_f: Option<f64>,
    pub params: Option<GapParams<f64>>,
    pub alpha_star: Option<f64>,
    pub gamma_star: Option<f64>,
}

/// One pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    /// `|value − expected| ≤ tolerance`.
    pub fn close(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (value - expected).abs() <= tolerance;
        Self {
            name: name.into(),
            passed,
            value: Some(value),
            expected: Some(expected),
            tolerance: Some(tolerance),
            detail: format!("|{value:.6e} - {expected:.6e}| = {:.3e}", (value - expected).abs()),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: None, expected: None, tolerance: None, detail: detail.into() }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

/// Consecutive steps sharing a face label.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelRun {
    pub label: String,
    pub count: usize,
}

/// Compact description of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub final_dist_a: Option<f64>,
    pub final_dist_b: Option<f64>,
    pub face_labels: Vec<LabelRun>,
}

/// One CSV row of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub dist_to_solution: Option<f64>,
    pub dist_a: Option<f64>,
    pub dist_b: Option<f64>,
    pub face_label: String,
}

/// An extra numeric table written next to the result, such as a sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub kind: String,
    pub config: ExperimentConfig,
    pub predicted: Prediction,
    pub measured: Option<RateFit>,
    pub trace: Option<TraceSummary>,
    pub checks: Vec<Check>,
    pub details: BTreeMap<String, serde_json::Value>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentResult {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.kind().into(),
            config: config.clone(),
            predicted: Prediction::default(),
            measured: None,
            trace: None,
            checks: Vec::new(),
            details: BTreeMap::new(),
            verdict: Verdict::Fail,
            rows: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.details.insert(key.into(), v);
    }

    fn finish(mut self) -> Self {
        self.verdict = if !self.checks.is_empty() && self.checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Records a trace: summary, CSV rows and, when a reference is given,
    /// distances to it.
    fn record_trace<T: Field>(&mut self, trace: &IterationTrace<T>, distances: Option<&[f64]>) {
        let labels: Vec<String> = trace.face_labels.iter().map(|l| l.as_string()).collect();
        let mut runs: Vec<LabelRun> = Vec::new();
        for l in &labels {
            match runs.last_mut() {
                Some(r) if &r.label == l => r.count += 1,
                _ => runs.push(LabelRun { label: l.clone(), count: 1 }),
            }
        }
        self.trace = Some(TraceSummary {
            iterations: trace.steps(),
            stop_reason: trace.stop_reason,
            converged: trace.converged,
            final_dist_a: trace.dist_a.last().map(to_f64),
            final_dist_b: trace.dist_b.last().map(to_f64),
            face_labels: runs,
        });
        self.rows = (0..trace.iterates.len())
            .map(|k| TraceRow {
                k,
                dist_to_solution: distances.and_then(|d| d.get(k).copied()),
                dist_a: trace.dist_a.get(k).map(to_f64),
                dist_b: trace.dist_b.get(k).map(to_f64),
                face_label: if k == 0 { "start".into() } else { labels[k - 1].clone() },
            })
            .collect();
    }
}

/// Runs the experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let result = ExperimentResult::new(config);
    let result = match &config.problem {
        Problem::SubspaceRate { n, p, q, angles, finite_steps } => {
            linear::subspace_rate(config, result, *n, *p, *q, angles, *finite_steps)?
        }
        Problem::SpectrumCheck { instances, max_dim, eig_tolerance, bound_slack } => {
            linear::spectrum_check(config, result, *instances, *max_dim, *eig_tolerance, *bound_slack)?
        }
        Problem::ParamSweep { theta_f, n, grid_step, margin } => {
            linear::param_sweep(config, result, *theta_f, *n, *grid_step, *margin)?
        }
        Problem::ManifoldRate { pair, finite_steps, jacobian_tolerance } => {
            nonlinear::manifold_rate(config, result, pair, *finite_steps, *jacobian_tolerance)?
        }
        Problem::ConvexRate { pair } => nonlinear::convex_rate(config, result, pair)?,
        Problem::AdaptiveTheta { target, angle_tolerance } => {
            nonlinear::adaptive_theta(config, result, target, *angle_tolerance)?
        }
        Problem::Counterexample { iterations, beta_tolerance, figure_tolerance } => {
            counterexample::run(config, result, *iterations, *beta_tolerance, *figure_tolerance)?
        }
    };
    Ok(result.finish())
}

/// Starting point from a spec, relative to the target `x_star`.
fn resolve_start(
    spec: Option<&StartSpec>,
    x_star: &DVector<f64>,
    default_direction: &DVector<f64>,
    default_distance: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let n = x_star.len();
    let offset = |dir: &DVector<f64>, dist: f64| -> Result<DVector<f64>> {
        let norm = dir.norm();
        if dir.len() != n {
            return Err(GapError::DimensionMismatch { expected: n, found: dir.len() });
        }
        if norm == 0.0 {
            return Err(GapError::Domain("start direction must be nonzero".into()));
        }
        Ok(x_star + dir * (dist / norm))
    };
    match spec {
        None => offset(default_direction, default_distance),
        Some(StartSpec::Point { coords }) => {
            if coords.len() != n {
                return Err(GapError::DimensionMismatch { expected: n, found: coords.len() });
            }
            Ok(DVector::from_column_slice(coords))
        }
        Some(StartSpec::Offset { direction, distance }) => offset(&DVector::from_column_slice(direction), *distance),
        Some(StartSpec::Annulus { inner, outer }) => {
            if !(0.0 <= *inner && inner <= outer) {
                return Err(GapError::Domain("annulus needs 0 ≤ inner ≤ outer".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dir = random_unit(&mut rng, n);
            let r = inner + (outer - inner) * rng.random::<f64>();
            offset(&dir, r)
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

fn run_error<T: Field>(context: &str, f: RunFailure<T>) -> GapError {
    let steps = f.partial.steps();
    match f.source {
        GapError::Precondition(m) => GapError::Precondition(format!("{context} (after {steps} steps): {m}")),
        other => other,
    }
}

/// Rate fit, or `None` when there are too few usable distances.
fn fit_or_none(fit: Result<RateFit>) -> Result<Option<RateFit>> {
    match fit {
        Ok(f) => Ok(Some(f)),
        Err(GapError::InsufficientData { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The rate comparison, or the finite-termination fallback when no rate
/// can be fitted.
fn rate_or_finite_check(
    result: &mut ExperimentResult,
    fit: Option<RateFit>,
    predicted: f64,
    tolerance: f64,
    converged: bool,
    steps: usize,
    finite_steps: usize,
) {
    match fit {
        Some(f) => {
            result.checks.push(Check::close("rate", f.rate, predicted, tolerance));
            result.measured = Some(f);
        }
        None => result.checks.push(
            Check::flag(
                "finite_termination",
                converged && steps <= finite_steps,
                format!("rate undefined; converged = {converged} after {steps} steps (limit {finite_steps})"),
            )
            .with_value(steps as f64),
        ),
    }
}
