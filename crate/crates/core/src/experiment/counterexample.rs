//! The cone/line pair on which GAP never identifies a smooth face.
//!
//! The iteration is run in exact arithmetic over Q(√73), where every
//! claimed identity can be checked with equality. A parallel `f64` run
//! shows how quickly rounding breaks the pattern.

use super::{run_error, Check, ExperimentResult};
use crate::engine::{classify_params, fit_geometric_rate, run as gap_run, GapParams, IterationTrace, StopReason, StopRule};
use crate::error::Result;
use crate::exact::QuadSurd;
use crate::experiment::ExperimentConfig;
use crate::scalar::to_f64;
use crate::sets::{FaceLabel, PlanarPolyhedron};
use crate::spectral::{block_eigenvalues, modulus};
use nalgebra::DVector;
use num_traits::Zero;
use std::f64::consts::FRAC_PI_4;

type Q = QuadSurd<73>;

/// Coordinates of the first iterate, truncated to four decimals.
const P1_FIGURE: [f64; 2] = [-0.3465, -0.2755];

/// `γ = (1 + √73)/12`.
pub fn gamma_exact() -> Q {
    (Q::ratio(1, 1) + Q::sqrt_d()) / Q::ratio(12, 1)
}

/// `β = (6γ − 2)/8`.
pub fn beta_exact() -> Q {
    (Q::ratio(6, 1) * gamma_exact() - Q::ratio(2, 1)) / Q::ratio(8, 1)
}

fn params<T: crate::scalar::Field>() -> GapParams<T> {
    let r = |x: f64| T::from_f64(x).expect("representable");
    classify_params(r(1.0), r(1.5), r(1.5))
}

fn start<T: crate::scalar::Field>(gamma: T) -> DVector<T> {
    DVector::from_vec(vec![T::one(), -gamma])
}

fn run_pair<T: crate::scalar::Field>(x0: &DVector<T>, iterations: usize) -> Result<IterationTrace<T>> {
    let stop = StopRule { tol: T::zero(), max_iter: iterations };
    gap_run(&PlanarPolyhedron::Line, &PlanarPolyhedron::AbsCone, &params::<T>(), x0, &stop)
        .map_err(|e| run_error("counter-example run", e))
}

fn norm_f64(p: &DVector<Q>) -> f64 {
    let sq = p[0].clone() * p[0].clone() + p[1].clone() * p[1].clone();
    to_f64(&sq).sqrt()
}

pub(super) fn run(
    cfg: &ExperimentConfig,
    mut result: ExperimentResult,
    iterations: usize,
    beta_tolerance: f64,
    figure_tolerance: f64,
) -> Result<ExperimentResult> {
    let gamma = gamma_exact();
    let beta = beta_exact();
    let beta_f = to_f64(&beta);
    let trace = run_pair(&start(gamma.clone()), iterations)?;

    // (a) The cone projection alternates between the two faces.
    let first_bad_label = trace.face_labels.iter().enumerate().position(|(k, l)| {
        let expected = if k % 2 == 0 { FaceLabel::RightFace } else { FaceLabel::LeftFace };
        l.first != expected || l.second != FaceLabel::Manifold
    });
    result.checks.push(Check::flag(
        "faces_alternate",
        first_bad_label.is_none() && trace.steps() >= iterations,
        match first_bad_label {
            Some(k) => format!("pattern broken at step {k}: {}", trace.face_labels[k].as_string()),
            None => format!("right_face/left_face alternation over {} steps", trace.steps()),
        },
    ));

    // (b) p_{k+1} = β · flip_x(p_k), exactly.
    let first_bad_step = trace.iterates.windows(2).position(|w| {
        let (p, next) = (&w[0], &w[1]);
        next[0] != -(beta.clone() * p[0].clone()) || next[1] != beta.clone() * p[1].clone()
    });
    result.checks.push(Check::flag(
        "exact_flip_scaling",
        first_bad_step.is_none(),
        match first_bad_step {
            Some(k) => format!("p_{} is not β·flip(p_{k})", k + 1),
            None => "p_{k+1} = β·flip_x(p_k) holds exactly at every step".into(),
        },
    ));

    // (c) The per-step factor, measured coordinatewise, is the constant β.
    let factors: Vec<f64> = trace
        .iterates
        .windows(2)
        .flat_map(|w| [to_f64(&(-w[1][0].clone() / w[0][0].clone())), to_f64(&(w[1][1].clone() / w[0][1].clone()))])
        .collect();
    let drift = factors.iter().map(|f| (f - beta_f).abs()).fold(0.0, f64::max);
    result.checks.push(Check {
        name: "beta_constant".into(),
        passed: drift <= beta_tolerance && !factors.is_empty(),
        value: Some(drift),
        expected: Some(0.0),
        tolerance: Some(beta_tolerance),
        detail: format!("max |β_k − (6γ−2)/8| over {} ratios", factors.len()),
    });
    result.checks.push(Check::close("beta_value", beta_f, (6.0 * to_f64(&gamma) - 2.0) / 8.0, beta_tolerance));

    let p1: Vec<f64> = trace.iterates.get(1).map(|p| p.iter().map(to_f64).collect()).unwrap_or_default();
    let figure_gap = if p1.len() == 2 {
        (p1[0] - P1_FIGURE[0]).abs().max((p1[1] - P1_FIGURE[1]).abs())
    } else {
        f64::INFINITY
    };
    result.checks.push(Check {
        name: "first_iterate".into(),
        passed: figure_gap <= figure_tolerance,
        value: Some(figure_gap),
        expected: Some(0.0),
        tolerance: Some(figure_tolerance),
        detail: format!("p1 = {p1:?}"),
    });

    // (d) No finite identification: the iterates never become feasible.
    let never_feasible = trace.stop_reason == StopReason::MaxIter
        && trace.iterates.iter().all(|p| !(p[1].is_zero() && p[0].is_zero()));
    result.checks.push(Check::flag(
        "no_finite_identification",
        never_feasible,
        format!("stop reason {:?} after {} steps", trace.stop_reason, trace.steps()),
    ));

    let distances: Vec<f64> = trace.iterates.iter().map(norm_f64).collect();
    result.measured = fit_geometric_rate(&distances, 0.0, cfg.window_fraction).ok();
    let (l1, _) = block_eigenvalues(FRAC_PI_4, 1.5, 1.5);
    result.predicted.gamma = Some(beta_f);
    result.predicted.params = Some(params::<f64>());
    result.detail("gamma", to_f64(&gamma));
    result.detail("subspace_theory_rate", modulus(l1));

    // Rounding drift of the same iteration in f64.
    let g = to_f64(&gamma);
    let float_trace = run_pair(&start(g), iterations)?;
    let rel_err: Vec<f64> = float_trace
        .iterates
        .iter()
        .zip(&trace.iterates)
        .map(|(x, p)| {
            let exact = DVector::from_vec(vec![to_f64(&p[0]), to_f64(&p[1])]);
            (x - &exact).norm() / exact.norm()
        })
        .collect();
    let float_break = float_trace.face_labels.iter().zip(&trace.face_labels).position(|(a, b)| a != b);
    result.detail("f64_relative_error", &rel_err);
    result.detail("f64_label_divergence_step", float_break);
    result.detail("f64_steps", float_trace.steps());
    result.detail("f64_stop_reason", float_trace.stop_reason);

    result.record_trace(&trace, Some(&distances));
    Ok(result)
}
