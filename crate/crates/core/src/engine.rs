//! The GAP iteration `x_{k+1} = S x_k` with
//! `S = (1 − α) I + α Π_A^{α2} Π_B^{α1}`.
//!
//! **Ordering:** `setB` is projected first (with `α1`) and `setA` second
//! (with `α2`). Swapping the arguments changes the operator, and for
//! subspaces of different dimensions it changes the rate.

use crate::error::{GapError, Result};
use crate::scalar::{dist_sq, epsilon, lit, to_f64, Field, Real};
use crate::sets::{relax, FaceLabel, Projectable};
use crate::spectral::optimal_params;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which admissible parameter case a triple falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamCase {
    /// `α ∈ (0, 1]`, `α1, α2 ∈ (0, 2)`.
    B1,
    /// `α ∈ (0, 1)`, `α1, α2 ∈ (0, 2]`, not both equal to 2.
    B2,
    /// `α ∈ (0, 1)`, `α1 = α2 = 2`.
    B3,
    Invalid,
}

/// Relaxation parameters `(α, α1, α2)` with their case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapParams<T> {
    pub alpha: T,
    pub alpha1: T,
    pub alpha2: T,
    pub case: ParamCase,
}

/// Classifies `(α, α1, α2)`; total, never fails.
pub fn classify_params<T: Field>(alpha: T, alpha1: T, alpha2: T) -> GapParams<T> {
    let zero = T::zero();
    let one = T::one();
    let two = one.clone() + one.clone();
    let open = |x: &T, hi: &T| *x > zero && *x < *hi;
    let half_open = |x: &T, hi: &T| *x > zero && *x <= *hi;
    let case = if half_open(&alpha, &one) && open(&alpha1, &two) && open(&alpha2, &two) {
        ParamCase::B1
    } else if open(&alpha, &one) && half_open(&alpha1, &two) && half_open(&alpha2, &two) {
        if alpha1 == two && alpha2 == two {
            ParamCase::B3
        } else {
            ParamCase::B2
        }
    } else {
        ParamCase::Invalid
    };
    GapParams { alpha, alpha1, alpha2, case }
}

impl<T: Field> GapParams<T> {
    /// Plain alternating projections `(1, 1, 1)`.
    pub fn alternating_projections() -> Self {
        classify_params(T::one(), T::one(), T::one())
    }

    pub fn is_valid(&self) -> bool {
        self.case != ParamCase::Invalid
    }

    pub fn ensure_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(GapError::InvalidParams {
                alpha: to_f64(&self.alpha),
                alpha1: to_f64(&self.alpha1),
                alpha2: to_f64(&self.alpha2),
            })
        }
    }

    pub fn to_f64(&self) -> GapParams<f64> {
        GapParams {
            alpha: to_f64(&self.alpha),
            alpha1: to_f64(&self.alpha1),
            alpha2: to_f64(&self.alpha2),
            case: self.case,
        }
    }
}

/// Stopping rule: stop when `max(d_A, d_B) ≤ tol` or after `max_iter` steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StopRule<T> {
    pub tol: T,
    pub max_iter: usize,
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

impl<T: Field> Default for StopRule<T> {
    fn default() -> Self {
        Self { tol: lit(DEFAULT_TOL), max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
    /// Some iterate after the start lies exactly in both sets.
    FiniteIdentification,
}

/// Labels of the two projections made in one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepLabels {
    /// Projection of `x_k` onto `B`.
    pub first: FaceLabel,
    /// Projection of `Π_B^{α1} x_k` onto `A`.
    pub second: FaceLabel,
}

impl StepLabels {
    pub fn as_string(&self) -> String {
        format!("{}|{}", self.first.as_str(), self.second.as_str())
    }
}

/// Record of a GAP run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace<T: nalgebra::Scalar> {
    /// `x_0, x_1, …`; never empty.
    pub iterates: Vec<DVector<T>>,
    /// `face_labels[k]` describes the step from `x_k` to `x_{k+1}`.
    pub face_labels: Vec<StepLabels>,
    /// `d_A(x_k)` for each iterate that was tested against the stopping rule.
    pub dist_a: Vec<T>,
    /// `d_B(x_k)`, same indexing as `dist_a`.
    pub dist_b: Vec<T>,
    /// `‖x_k − x*‖`, filled once a reference solution is attached.
    pub distances_to_solution: Option<Vec<T>>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl<T: Field> IterationTrace<T> {
    /// A trace made of given iterates, as produced by some external linear
    /// iteration.
    pub fn from_iterates(iterates: Vec<DVector<T>>) -> Self {
        assert!(!iterates.is_empty(), "a trace needs at least one iterate");
        Self {
            iterates,
            face_labels: Vec::new(),
            dist_a: Vec::new(),
            dist_b: Vec::new(),
            distances_to_solution: None,
            converged: false,
            stop_reason: StopReason::MaxIter,
        }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &DVector<T> {
        self.iterates.last().expect("trace is never empty")
    }
}

impl<T: Real> IterationTrace<T> {
    /// Fills `distances_to_solution` with `‖x_k − reference‖`.
    pub fn attach_reference(&mut self, reference: &DVector<T>) {
        self.distances_to_solution =
            Some(self.iterates.iter().map(|x| (x - reference).norm()).collect());
    }
}

/// A run that stopped on a projection failure, with the iterates so far.
#[derive(Debug, Error)]
#[error("run aborted after {} steps: {source}", partial.steps())]
pub struct RunFailure<T: Field> {
    #[source]
    pub source: GapError,
    pub partial: Box<IterationTrace<T>>,
}

/// One step of the GAP map.
pub fn gap_step<T, A, B>(set_a: &A, set_b: &B, params: &GapParams<T>, x: &DVector<T>) -> Result<DVector<T>>
where
    T: Field,
    A: Projectable<T> + ?Sized,
    B: Projectable<T> + ?Sized,
{
    params.ensure_valid()?;
    Ok(step(set_a, set_b, params, x)?.next)
}

struct Step<T: Field> {
    /// `Π_B x`.
    pb: DVector<T>,
    /// `Π_B^{α1} x`.
    y: DVector<T>,
    /// `Π_A^{α2} y`.
    z: DVector<T>,
    next: DVector<T>,
    labels: StepLabels,
}

fn step<T, A, B>(set_a: &A, set_b: &B, params: &GapParams<T>, x: &DVector<T>) -> Result<Step<T>>
where
    T: Field,
    A: Projectable<T> + ?Sized,
    B: Projectable<T> + ?Sized,
{
    let (pb, first) = set_b.project_labeled(x)?;
    let y = relax(x, &pb, &params.alpha1);
    let (pa, second) = set_a.project_labeled(&y)?;
    let z = relax(&y, &pa, &params.alpha2);
    let next = relax(x, &z, &params.alpha);
    Ok(Step { pb, y, z, next, labels: StepLabels { first, second } })
}

/// Runs the iteration from `x0` until the stopping rule fires.
pub fn run<T, A, B>(
    set_a: &A,
    set_b: &B,
    params: &GapParams<T>,
    x0: &DVector<T>,
    stop: &StopRule<T>,
) -> std::result::Result<IterationTrace<T>, RunFailure<T>>
where
    T: Field,
    A: Projectable<T> + ?Sized,
    B: Projectable<T> + ?Sized,
{
    iterate(set_a, set_b, params.clone(), x0, stop, |_, _| None)
}

/// Shared driver. `retune` sees the current step and may replace the
/// parameters used from the next step on.
fn iterate<T, A, B, F>(
    set_a: &A,
    set_b: &B,
    mut params: GapParams<T>,
    x0: &DVector<T>,
    stop: &StopRule<T>,
    mut retune: F,
) -> std::result::Result<IterationTrace<T>, RunFailure<T>>
where
    T: Field,
    A: Projectable<T> + ?Sized,
    B: Projectable<T> + ?Sized,
    F: FnMut(&DVector<T>, &Step<T>) -> Option<GapParams<T>>,
{
    let mut trace = IterationTrace::from_iterates(vec![x0.clone()]);
    if let Err(source) = params.ensure_valid() {
        return Err(RunFailure { source, partial: Box::new(trace) });
    }
    let tol_sq = stop.tol.clone() * stop.tol.clone();
    let mut x = x0.clone();
    let mut k = 0usize;
    loop {
        let attempt = (|| -> Result<(T, Step<T>)> {
            let da = set_a.dist_sq(&x)?;
            let s = step(set_a, set_b, &params, &x)?;
            Ok((da, s))
        })();
        let (da_sq, s) = match attempt {
            Ok(v) => v,
            Err(source) => return Err(RunFailure { source, partial: Box::new(trace) }),
        };
        let db_sq = dist_sq(x.as_slice(), s.pb.as_slice());
        trace.dist_a.push(sqrt_like(&da_sq));
        trace.dist_b.push(sqrt_like(&db_sq));
        let zero = T::zero();
        if k >= 1 && da_sq == zero && db_sq == zero {
            trace.converged = true;
            trace.stop_reason = StopReason::FiniteIdentification;
            return Ok(trace);
        }
        let worst = if da_sq > db_sq { da_sq } else { db_sq };
        if worst <= tol_sq {
            trace.converged = true;
            trace.stop_reason = StopReason::Tolerance;
            return Ok(trace);
        }
        if k == stop.max_iter {
            trace.stop_reason = StopReason::MaxIter;
            return Ok(trace);
        }
        if let Some(p) = retune(&x, &s) {
            if let Err(source) = p.ensure_valid() {
                return Err(RunFailure { source, partial: Box::new(trace) });
            }
            params = p;
        }
        trace.face_labels.push(s.labels);
        x = s.next;
        trace.iterates.push(x.clone());
        k += 1;
    }
}

/// Square root through `f64` for scalars without one; exact zero stays zero.
fn sqrt_like<T: Field>(x: &T) -> T {
    if *x == T::zero() {
        return T::zero();
    }
    T::from_f64(to_f64(x).sqrt()).unwrap_or_else(|| x.clone())
}

/// Least-squares fit of `log ‖x_k − x*‖ ≈ k log μ + c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// `μ̂ = exp(slope)`.
    pub rate: f64,
    /// First and last iterate index of the fitted window.
    pub window: (usize, usize),
    /// RMS deviation of the log-distances from the fitted line.
    pub residual: f64,
    pub samples_used: usize,
}

/// Minimum number of usable iterates for a fit.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Default trailing window.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;

/// Fits the linear rate of `‖x_k − reference‖` over the trailing
/// `window_fraction` of iterates whose distance exceeds
/// `10·ε·‖reference‖`.
pub fn estimate_rate<T: Real>(
    trace: &IterationTrace<T>,
    reference: &DVector<T>,
    window_fraction: f64,
) -> Result<RateFit> {
    estimate_rate_above(trace, reference, window_fraction, 0.0)
}

/// As [`estimate_rate`], additionally discarding distances at or below `floor`.
pub fn estimate_rate_above<T: Real>(
    trace: &IterationTrace<T>,
    reference: &DVector<T>,
    window_fraction: f64,
    floor: f64,
) -> Result<RateFit> {
    let threshold = (10.0 * epsilon::<T>() * to_f64(&reference.norm())).max(floor);
    let d: Vec<f64> = trace.iterates.iter().map(|x| to_f64(&(x - reference).norm())).collect();
    fit_geometric_rate(&d, threshold, window_fraction)
}

/// Fits a geometric rate to a distance sequence indexed by iteration.
pub fn fit_geometric_rate(distances: &[f64], threshold: f64, window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(GapError::Domain(format!("window fraction {window_fraction} not in (0, 1]")));
    }
    let usable: Vec<(usize, f64)> = distances
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, d)| *d > threshold && d.is_finite())
        .collect();
    if usable.len() < MIN_FIT_SAMPLES {
        return Err(GapError::InsufficientData { usable: usable.len(), required: MIN_FIT_SAMPLES });
    }
    let take = ((usable.len() as f64 * window_fraction).ceil() as usize).clamp(3, usable.len());
    let window = &usable[usable.len() - take..];
    let n = window.len() as f64;
    let mean_k = window.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let mean_l = window.iter().map(|(_, d)| d.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, d) in window {
        let dk = *k as f64 - mean_k;
        sxy += dk * (d.ln() - mean_l);
        sxx += dk * dk;
    }
    let slope = sxy / sxx;
    let residual = (window
        .iter()
        .map(|(k, d)| {
            let fitted = mean_l + slope * (*k as f64 - mean_k);
            (d.ln() - fitted).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        rate: slope.exp(),
        window: (window[0].0, window[window.len() - 1].0),
        residual,
        samples_used: window.len(),
    })
}

/// GAP with `α1 = α2 = α*(θ̂_k)` re-tuned every step, where `θ̂_k` is the
/// angle between `v1 = Π_B^{α1} x_k − x_k` and
/// `v2 = Π_B^{α1} x_k − Π_A^{α2} Π_B^{α1} x_k`, folded into `[0, π/2]`.
/// The first step uses plain alternating projections. Estimation stops at
/// the first step where either vector vanishes; the run itself continues
/// with the last parameters.
pub fn adaptive_theta_run<T, A, B>(
    set_a: &A,
    set_b: &B,
    x0: &DVector<T>,
    stop: &StopRule<T>,
) -> std::result::Result<(IterationTrace<T>, Vec<T>), RunFailure<T>>
where
    T: Real,
    A: Projectable<T> + ?Sized,
    B: Projectable<T> + ?Sized,
{
    let mut estimates = Vec::new();
    let mut active = true;
    let start = optimal_params::<T>(None).params;
    let trace = iterate(set_a, set_b, start, x0, stop, |x, s| {
        if !active {
            return None;
        }
        let v1 = &s.y - x;
        let v2 = &s.y - &s.z;
        let (n1, n2) = (v1.norm(), v2.norm());
        if n1 == T::zero() || n2 == T::zero() {
            active = false;
            return None;
        }
        let c = (v1.dot(&v2) / (n1 * n2)).clamp(-T::one(), T::one());
        let angle = c.acos();
        let folded = angle.min(T::pi() - angle);
        estimates.push(folded);
        Some(optimal_params(Some(folded)).params)
    })?;
    Ok((trace, estimates))
}
