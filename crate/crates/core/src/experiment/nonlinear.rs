use super::{
    fit_or_none, random_unit, rate_or_finite_check, resolve_start, run_error, AdaptiveTarget, Check, ConvexPair,
    ExperimentResult, ManifoldPair, StopSpec,
};
use crate::engine::{adaptive_theta_run, estimate_rate, estimate_rate_above, run, GapParams, StopReason};
use crate::error::{GapError, Result};
use crate::experiment::ExperimentConfig;
use crate::local::{
    finite_difference_jacobian, predicted_local_rate, regularity_constants,
    tangent_gap_operator, Classification,
};
use crate::sets::{FaceLabel, ImplicitManifold, ParabolaCurve, ProjectableSet};
use crate::spectral::optimal_params;
use crate::subspace::{construct_pair_with_angles, Subspace};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Default distance of the start point from the target solution.
pub const START_DISTANCE: f64 = 1e-2;

/// Distances to a limit point estimated from the run itself are trusted
/// only above this level.
pub const LIMIT_FLOOR: f64 = 1e-11;

/// Step of the central differences used for the Jacobian check.
const FD_STEP: f64 = 1e-6;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

struct Instance {
    a: ProjectableSet<f64>,
    b: ProjectableSet<f64>,
    x_star: DVector<f64>,
    /// Tangent space of the intersection at `x_star`, known analytically.
    cap_tangent: Subspace<f64>,
    direction: DVector<f64>,
    /// Whether `x_star` is an isolated point of the intersection.
    isolated: bool,
}

fn manifold_instance(pair: &ManifoldPair) -> Result<Instance> {
    Ok(match pair {
        ManifoldPair::CircleLine { theta } => Instance {
            a: ProjectableSet::sphere(v(&[0.0, 0.0]), 1.0)?,
            b: ProjectableSet::line_through(v(&[1.0, 0.0]), v(&[theta.sin(), theta.cos()]))?,
            x_star: v(&[1.0, 0.0]),
            cap_tangent: Subspace::trivial(2),
            direction: v(&[1.0, 1.0]),
            isolated: true,
        },
        ManifoldPair::SpherePlane { height } => {
            if !(height.abs() < 1.0) {
                return Err(GapError::Domain("the plane must cut the unit sphere: |height| < 1".into()));
            }
            let rho = (1.0 - height * height).sqrt();
            Instance {
                a: ProjectableSet::sphere(v(&[0.0, 0.0, 0.0]), 1.0)?,
                b: ProjectableSet::affine(
                    Subspace::span(&[v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]),
                    v(&[0.0, 0.0, *height]),
                )?,
                x_star: v(&[rho, 0.0, *height]),
                cap_tangent: Subspace::span(&[v(&[0.0, 1.0, 0.0])]),
                direction: v(&[1.0, 1.0, 1.0]),
                isolated: false,
            }
        }
        ManifoldPair::ParabolaLine => Instance {
            a: ProjectableSet::Implicit(ImplicitManifold::new(Arc::new(ParabolaCurve))),
            b: ProjectableSet::LinearSubspace(Subspace::span(&[v(&[0.0, 1.0, 0.0])])),
            x_star: v(&[0.0, 0.0, 0.0]),
            cap_tangent: Subspace::trivial(3),
            direction: v(&[1.0, 1.0, 1.0]),
            isolated: true,
        },
    })
}

/// The point of the sphere/plane circle nearest to `x`, and the circle's
/// tangent there.
fn circle_limit(x: &DVector<f64>, height: f64) -> (DVector<f64>, Subspace<f64>) {
    let rho = (1.0 - height * height).sqrt();
    let r = x[0].hypot(x[1]);
    let (c, s) = if r > 0.0 { (x[0] / r, x[1] / r) } else { (1.0, 0.0) };
    (v(&[rho * c, rho * s, height]), Subspace::span(&[v(&[-s, c, 0.0])]))
}

fn tangent_theta(inst: &Instance) -> Result<Option<f64>> {
    let ap = GapParams::alternating_projections();
    Ok(predicted_local_rate(&inst.a, &inst.b, &inst.x_star, &ap, Some(&inst.cap_tangent))?.theta_f)
}

pub(super) fn manifold_rate(
    cfg: &ExperimentConfig,
    mut result: ExperimentResult,
    pair: &ManifoldPair,
    finite_steps: usize,
    jacobian_tolerance: f64,
) -> Result<ExperimentResult> {
    let inst = manifold_instance(pair)?;
    let theta_f = tangent_theta(&inst)?;
    let params = cfg.params.resolve(theta_f)?;
    params.ensure_valid()?;
    let x0 = resolve_start(cfg.start.as_ref(), &inst.x_star, &inst.direction, START_DISTANCE, cfg.seed)?;
    let stop = cfg.stop_rule(StopSpec::new(1e-14, 10_000));
    let mut trace = run(&inst.a, &inst.b, &params, &x0, &stop).map_err(|e| run_error("manifold run", e))?;

    let (reference, cap_tangent) = match pair {
        ManifoldPair::SpherePlane { height } if !inst.isolated => circle_limit(trace.last(), *height),
        _ => (inst.x_star.clone(), inst.cap_tangent.clone()),
    };
    let local = predicted_local_rate(&inst.a, &inst.b, &reference, &params, Some(&cap_tangent))?;
    let gamma = local.gamma_local.ok_or_else(|| GapError::Precondition("regularity fails at the solution".into()))?;
    let opt = optimal_params(local.theta_f);
    result.predicted.gamma = Some(gamma);
    result.predicted.sigma = local.sigma_local;
    result.predicted.theta_f = local.theta_f;
    result.predicted.params = Some(params.clone());
    result.predicted.alpha_star = Some(opt.alpha_star);
    result.predicted.gamma_star = Some(opt.gamma_star);

    trace.attach_reference(&reference);
    if trace.steps() > 0 && trace.last().iter().any(|x| !x.is_finite()) {
        return Err(GapError::NonConvergence { iterations: trace.steps(), residual: f64::INFINITY });
    }
    let fit = if inst.isolated {
        estimate_rate(&trace, &reference, cfg.window_fraction)
    } else {
        estimate_rate_above(&trace, &reference, cfg.window_fraction, LIMIT_FLOOR)
    };
    let fit = fit_or_none(fit)?;
    result.checks.push(Check::flag(
        "converged",
        trace.converged,
        format!("{:?} after {} steps", trace.stop_reason, trace.steps()),
    ));
    rate_or_finite_check(&mut result, fit, gamma, cfg.rate_tolerance, trace.converged, trace.steps(), finite_steps);

    let st = tangent_gap_operator(&inst.a, &inst.b, &reference, &params)?;
    let jac = finite_difference_jacobian(&inst.a, &inst.b, &params, &reference, FD_STEP)?;
    let deviation = (jac - st).amax();
    result.checks.push(Check {
        name: "tangent_jacobian".into(),
        passed: deviation <= jacobian_tolerance,
        value: Some(deviation),
        expected: Some(0.0),
        tolerance: Some(jacobian_tolerance),
        detail: format!("max entry of |DS(x*) − S_T(x*)| = {deviation:.3e}"),
    });
    result.detail("regular", local.regular);
    result.detail("transversal", local.transversal);
    result.detail("reference", reference.as_slice());
    let d = trace.distances_to_solution.clone();
    result.record_trace(&trace, d.as_deref());
    Ok(result)
}

fn convex_instance(pair: &ConvexPair) -> Result<Instance> {
    Ok(match pair {
        ConvexPair::Discs { distance, radius } => {
            if !(*distance > 0.0 && *distance < 2.0 * radius) {
                return Err(GapError::Domain("disc centers must be closer than twice the radius".into()));
            }
            Instance {
                a: ProjectableSet::ball(v(&[0.0, 0.0]), *radius)?,
                b: ProjectableSet::ball(v(&[*distance, 0.0]), *radius)?,
                x_star: v(&[distance / 2.0, (radius * radius - distance * distance / 4.0).sqrt()]),
                cap_tangent: Subspace::trivial(2),
                direction: v(&[0.0, 1.0]),
                isolated: true,
            }
        }
        ConvexPair::DiscLine { theta } => {
            let x_star = v(&[theta.sin(), theta.cos()]);
            Instance {
                a: ProjectableSet::ball(v(&[0.0, 0.0]), 1.0)?,
                b: ProjectableSet::line_through(v(&[0.0, theta.cos()]), v(&[1.0, 0.0]))?,
                direction: x_star.clone(),
                x_star,
                cap_tangent: Subspace::trivial(2),
                isolated: true,
            }
        }
    })
}

pub(super) fn convex_rate(cfg: &ExperimentConfig, mut result: ExperimentResult, pair: &ConvexPair) -> Result<ExperimentResult> {
    let inst = convex_instance(pair)?;
    let (theta_f, classification) = match pair {
        ConvexPair::Discs { .. } => {
            let c = regularity_constants(&inst.a, &inst.b, &inst.x_star)?;
            result.detail("regularity_constants", &c);
            (Some(c.theta_f), Some(c.classification))
        }
        ConvexPair::DiscLine { .. } => (tangent_theta(&inst)?, None),
    };
    let params = cfg.params.resolve(theta_f)?;
    params.ensure_valid()?;
    let x0 = resolve_start(cfg.start.as_ref(), &inst.x_star, &inst.direction, START_DISTANCE, cfg.seed)?;
    let stop = cfg.stop_rule(StopSpec::new(1e-14, 10_000));
    let mut trace = run(&inst.a, &inst.b, &params, &x0, &stop).map_err(|e| run_error("convex run", e))?;
    trace.attach_reference(&inst.x_star);
    let local = predicted_local_rate(&inst.a, &inst.b, &inst.x_star, &params, Some(&inst.cap_tangent))?;
    let opt = optimal_params(local.theta_f);
    result.predicted.gamma = local.gamma_local;
    result.predicted.sigma = local.sigma_local;
    result.predicted.theta_f = local.theta_f;
    result.predicted.params = Some(params.clone());
    result.predicted.alpha_star = Some(opt.alpha_star);
    result.predicted.gamma_star = Some(opt.gamma_star);
    if let Some(c) = classification {
        result.detail("classification", c);
    }

    if classification == Some(Classification::Obtuse) {
        let feasible = trace.converged && inst.a.contains(trace.last(), 0.0) && inst.b.contains(trace.last(), 0.0);
        result.checks.push(
            Check::flag(
                "finite_termination",
                feasible && trace.stop_reason == StopReason::FiniteIdentification,
                format!("{:?} after {} steps; final iterate feasible: {feasible}", trace.stop_reason, trace.steps()),
            )
            .with_value(trace.steps() as f64),
        );
    } else {
        let gamma = local.gamma_local.ok_or_else(|| GapError::Precondition("regularity fails at the solution".into()))?;
        result.checks.push(Check::flag(
            "converged",
            trace.converged,
            format!("{:?} after {} steps", trace.stop_reason, trace.steps()),
        ));
        if matches!(pair, ConvexPair::Discs { .. }) {
            let boundary = (FaceLabel::Boundary, FaceLabel::Boundary);
            let last_other = trace.face_labels.iter().rposition(|l| (l.first, l.second) != boundary);
            let identified_at = last_other.map_or(0, |i| i + 1);
            let identified = identified_at < trace.face_labels.len();
            result.checks.push(
                Check::flag(
                    "boundary_identification",
                    identified,
                    format!("labels are boundary|boundary from step {identified_at} of {}", trace.face_labels.len()),
                )
                .with_value(identified_at as f64),
            );
        }
        match fit_or_none(estimate_rate(&trace, &inst.x_star, cfg.window_fraction))? {
            Some(f) => {
                result.checks.push(Check::close("rate", f.rate, gamma, cfg.rate_tolerance));
                result.measured = Some(f);
            }
            None => result.checks.push(Check::flag("rate", false, "too few iterates for a rate fit")),
        }
    }
    let d = trace.distances_to_solution.clone();
    result.record_trace(&trace, d.as_deref());
    Ok(result)
}

pub(super) fn adaptive_theta(
    cfg: &ExperimentConfig,
    mut result: ExperimentResult,
    target: &AdaptiveTarget,
    angle_tolerance: f64,
) -> Result<ExperimentResult> {
    let (a, b, x0, reference, theta_true) = match target {
        AdaptiveTarget::Lines { n, theta_f } => {
            let (u, w) = construct_pair_with_angles(*n, 1, 1, &[*theta_f], cfg.seed)?;
            let origin = DVector::zeros(*n);
            let x0 = match &cfg.start {
                None => random_unit(&mut ChaCha8Rng::seed_from_u64(cfg.seed), *n),
                spec => resolve_start(spec.as_ref(), &origin, &origin, 0.0, cfg.seed)?,
            };
            (ProjectableSet::LinearSubspace(u), ProjectableSet::LinearSubspace(w), x0, origin, *theta_f)
        }
        AdaptiveTarget::Discs { distance } => {
            let inst = convex_instance(&ConvexPair::Discs { distance: *distance, radius: 1.0 })?;
            let c = regularity_constants(&inst.a, &inst.b, &inst.x_star)?;
            let x0 = resolve_start(cfg.start.as_ref(), &inst.x_star, &inst.direction, START_DISTANCE, cfg.seed)?;
            (inst.a, inst.b, x0, inst.x_star, c.theta_f)
        }
    };
    let stop = cfg.stop_rule(StopSpec::new(1e-12, 10_000));
    let (mut trace, estimates) = adaptive_theta_run(&a, &b, &x0, &stop).map_err(|e| run_error("adaptive run", e))?;
    trace.attach_reference(&reference);
    result.predicted.theta_f = Some(theta_true);
    let opt = optimal_params(Some(theta_true));
    result.predicted.alpha_star = Some(opt.alpha_star);
    result.predicted.gamma_star = Some(opt.gamma_star);
    result.predicted.params = Some(opt.params);

    result.checks.push(Check::flag(
        "converged",
        trace.converged,
        format!("{:?} after {} steps", trace.stop_reason, trace.steps()),
    ));
    match estimates.last() {
        Some(&last) => result.checks.push(Check::close("theta_estimate", last, theta_true, angle_tolerance)),
        None => result.checks.push(Check::flag("theta_estimate", false, "no angle estimate was produced")),
    }
    let first_within = estimates.iter().position(|e| (e - theta_true).abs() <= angle_tolerance);
    result.detail("first_estimate_within_tolerance", first_within);
    result.detail("estimates", &estimates);
    let d = trace.distances_to_solution.clone();
    result.record_trace(&trace, d.as_deref());
    Ok(result)
}
