//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report is printed on success too; exits nonzero if any criterion fails.

use gap_core::engine::{classify_params, GapParams};
use gap_core::experiment::{
    run_experiment, AdaptiveTarget, ConvexPair, ExperimentConfig, ExperimentResult, ManifoldPair, ParamSpec, Problem,
};
use gap_core::local::{empirical_sr, regularity_constants};
use gap_core::sets::ProjectableSet;
use gap_core::spectral::{kappa_rate, optimal_params, spectral_report, t1_block, trdet_oracle};
use gap_core::subspace::{construct_pair_with_angles, DEFAULT_ZERO_TOL};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

const RATE_TOL: f64 = 0.02;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn experiment(cfg: ExperimentConfig) -> Result<ExperimentResult, String> {
    run_experiment(&cfg).map_err(|e| format!("{} errored: {e}", cfg.kind()))
}

fn failed_checks(r: &ExperimentResult) -> String {
    let names: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if names.is_empty() {
        String::new()
    } else {
        format!(" failed checks: {}", names.join(", "))
    }
}

fn rate_of(r: &ExperimentResult) -> f64 {
    r.measured.as_ref().map_or(f64::NAN, |m| m.rate)
}

fn c1_spectrum_equivalence() -> Result<Outcome, String> {
    let start = Instant::now();
    let r = experiment(ExperimentConfig::new(Problem::SpectrumCheck {
        instances: 100,
        max_dim: 40,
        eig_tolerance: 1e-8,
        bound_slack: 1e-10,
    }))?;
    let elapsed = start.elapsed();
    let worst = r.check("eigenvalues_match").and_then(|c| c.value).unwrap_or(f64::NAN);
    Ok(Outcome::new(
        r.passed() && elapsed < Duration::from_secs(10),
        format!(
            "100 instances, worst eigenvalue deviation {worst:.2e} (tol 1e-8), {:.2}s (limit 10s){}",
            elapsed.as_secs_f64(),
            failed_checks(&r)
        ),
    ))
}

fn c2_optimal_subspace_rate() -> Result<Outcome, String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (spec, expected) in [
        (ParamSpec::Explicit { alpha: 1.0, alpha1: 4.0 / 3.0, alpha2: 4.0 / 3.0 }, 1.0 / 3.0),
        (ParamSpec::AlternatingProjections, 0.75),
    ] {
        let cfg = ExperimentConfig::new(Problem::SubspaceRate {
            n: 20,
            p: 3,
            q: 4,
            angles: vec![FRAC_PI_6, 0.9, 1.3],
            finite_steps: 3,
        })
        .with_params(spec.clone())
        .with_seed(20);
        let start = Instant::now();
        let r = experiment(cfg)?;
        let elapsed = start.elapsed();
        let rate = rate_of(&r);
        ok &= r.passed() && (rate - expected).abs() <= RATE_TOL && elapsed < Duration::from_secs(1);
        parts.push(format!("{spec}: {rate:.4} vs {expected:.4} in {:.3}s{}", elapsed.as_secs_f64(), failed_checks(&r)));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn c3_optimality_witness() -> Result<Outcome, String> {
    let r = experiment(ExperimentConfig::new(Problem::ParamSweep {
        theta_f: FRAC_PI_6,
        n: 4,
        grid_step: 0.05,
        margin: 1e-10,
    }))?;
    let margin = r.check("strict_margin").and_then(|c| c.value).unwrap_or(f64::NAN);
    Ok(Outcome::new(
        r.passed(),
        format!("smallest excess over γ* away from (1, α*, α*): {margin:.3e} (need ≥ 1e-10){}", failed_checks(&r)),
    ))
}

fn c4_manifold_rate() -> Result<Outcome, String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in [ParamSpec::AlternatingProjections, ParamSpec::Optimal] {
        let r = experiment(
            ExperimentConfig::new(Problem::ManifoldRate {
                pair: ManifoldPair::CircleLine { theta: FRAC_PI_6 },
                finite_steps: 3,
                jacobian_tolerance: 1e-5,
            })
            .with_params(spec.clone()),
        )?;
        let predicted = r.predicted.gamma.unwrap_or(f64::NAN);
        let jac = r.check("tangent_jacobian").and_then(|c| c.value).unwrap_or(f64::NAN);
        ok &= r.passed() && (rate_of(&r) - predicted).abs() <= RATE_TOL && jac <= 1e-5;
        parts.push(format!(
            "{spec}: rate {:.4} vs {predicted:.4}, jacobian gap {jac:.1e}{}",
            rate_of(&r),
            failed_checks(&r)
        ));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn c5_contraction() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0, 0.0);
    let mut b2_points = 0;
    for i in 0..10 {
        let theta = (i + 1) as f64 * FRAC_PI_2 / 10.0;
        let (u, v) = construct_pair_with_angles(4, 1, 2, &[theta], 5).map_err(|e| e.to_string())?;
        for j in 0..10 {
            for k in 0..10 {
                let (a1, a2) = ((j + 1) as f64 * 0.2, (k + 1) as f64 * 0.2);
                let params: GapParams<f64> = classify_params(0.5, a1, a2);
                if a1 == 2.0 || a2 == 2.0 {
                    b2_points += 1;
                }
                let report = spectral_report(&u, &v, &params, DEFAULT_ZERO_TOL).map_err(|e| e.to_string())?;
                if report.sigma > worst {
                    worst = report.sigma;
                    worst_at = (theta, a1, a2);
                }
            }
        }
    }
    Ok(Outcome::new(
        worst < 1.0,
        format!(
            "max σ = {worst:.6} at (θ_F, α1, α2) = ({:.4}, {:.1}, {:.1}); margin {:.3e}; {b2_points} boundary points",
            worst_at.0,
            worst_at.1,
            worst_at.2,
            1.0 - worst
        ),
    ))
}

fn c6_counterexample() -> Result<Outcome, String> {
    let r = experiment(ExperimentConfig::new(Problem::Counterexample {
        iterations: 50,
        beta_tolerance: 1e-10,
        figure_tolerance: 1e-4,
    }))?;
    let beta = r.predicted.gamma.unwrap_or(f64::NAN);
    let steps = r.trace.as_ref().map_or(0, |t| t.iterations);
    Ok(Outcome::new(
        r.passed() && steps >= 50,
        format!("{steps} alternating steps, β = {beta:.6} exact and constant, p0 = (1, −γ){}", failed_checks(&r)),
    ))
}

fn c7_convex() -> Result<Outcome, String> {
    let acute = experiment(ExperimentConfig::new(Problem::ConvexRate {
        pair: ConvexPair::Discs { distance: 1.9, radius: 1.0 },
    }))?;
    let obtuse = experiment(
        ExperimentConfig::new(Problem::ConvexRate { pair: ConvexPair::Discs { distance: 1.0, radius: 1.0 } })
            .with_params(ParamSpec::Optimal),
    )?;
    let line = experiment(ExperimentConfig::new(Problem::ConvexRate { pair: ConvexPair::DiscLine { theta: FRAC_PI_3 } }))?;
    let obtuse_steps = obtuse.trace.as_ref().map_or(0, |t| t.iterations);
    Ok(Outcome::new(
        acute.passed() && obtuse.passed() && line.passed(),
        format!(
            "acute discs rate {:.4} vs {:.4}{}; obtuse discs feasible after {obtuse_steps} steps{}; disc/line rate {:.4} vs {:.4}{}",
            rate_of(&acute),
            acute.predicted.gamma.unwrap_or(f64::NAN),
            failed_checks(&acute),
            failed_checks(&obtuse),
            rate_of(&line),
            line.predicted.gamma.unwrap_or(f64::NAN),
            failed_checks(&line)
        ),
    ))
}

fn c8_regularity_constants() -> Result<Outcome, String> {
    let a = ProjectableSet::ball(DVector::from_vec(vec![0.0, 0.0]), 1.0).map_err(|e| e.to_string())?;
    let b = ProjectableSet::ball(DVector::from_vec(vec![1.9, 0.0]), 1.0).map_err(|e| e.to_string())?;
    let x_star = DVector::from_vec(vec![0.95, (1.0f64 - 0.95 * 0.95).sqrt()]);
    let c = regularity_constants(&a, &b, &x_star).map_err(|e| e.to_string())?;
    let sr = empirical_sr(&a, &b, &x_star, 1e-3, 100_000, 8).map_err(|e| e.to_string())?;
    let sr_gap = (sr - (c.theta_f / 2.0).sin()).abs();
    let mut kappa_gap = 0.0f64;
    for theta in [PI / 12.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
        let rate = kappa_rate(1.0 / (theta / 2.0).sin()).map_err(|e| e.to_string())?;
        kappa_gap = kappa_gap.max((rate - optimal_params(Some(theta)).gamma_star).abs());
    }
    Ok(Outcome::new(
        sr_gap <= 5e-3 && kappa_gap <= 1e-12,
        format!(
            "empirical sr {sr:.5} vs sin(θ_F/2) {:.5} (gap {sr_gap:.1e}, tol 5e-3); κ identity gap {kappa_gap:.1e} (tol 1e-12)",
            (c.theta_f / 2.0).sin()
        ),
    ))
}

fn c9_adaptive_theta() -> Result<Outcome, String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, target) in [
        ("lines", AdaptiveTarget::Lines { n: 6, theta_f: 0.4 }),
        ("acute discs", AdaptiveTarget::Discs { distance: 1.9 }),
    ] {
        let r = experiment(ExperimentConfig::new(Problem::AdaptiveTheta { target, angle_tolerance: 1e-3 }))?;
        let gap = r.check("theta_estimate").and_then(|c| c.value).map(|v| (v - r.predicted.theta_f.unwrap_or(f64::NAN)).abs());
        ok &= r.passed();
        parts.push(format!("{label}: |θ̂ − θ_F| = {:.1e}{}", gap.unwrap_or(f64::NAN), failed_checks(&r)));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn c10_trdet() -> Result<Outcome, String> {
    let id = DMatrix::<f64>::identity(2, 2);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let theta = (i as f64 + 0.5) * FRAC_PI_2 / 20.0;
        let a_star = optimal_params(Some(theta)).alpha_star;
        for j in 0..20 {
            for k in 0..20 {
                let (a1, a2) = ((j + 1) as f64 * 0.1, (k + 1) as f64 * 0.1);
                let m = &id * (2.0 - a_star) + (t1_block(theta, a1, a2) - &id) * (a_star / a1);
                let (tr, det) = trdet_oracle(theta, a1, a2);
                worst = worst.max((tr - m.trace()).abs()).max((det - m.determinant()).abs());
            }
        }
    }
    Ok(Outcome::new(worst <= 1e-12, format!("8000 grid points, worst deviation {worst:.2e} (tol 1e-12)")))
}

type Criterion = (&'static str, fn() -> Result<Outcome, String>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("spectrum equivalence", c1_spectrum_equivalence),
        ("optimal rate on subspaces", c2_optimal_subspace_rate),
        ("optimality witness", c3_optimality_witness),
        ("manifold local rate", c4_manifold_rate),
        ("contraction property", c5_contraction),
        ("counter-example reproduction", c6_counterexample),
        ("convex identification and rates", c7_convex),
        ("regularity constants", c8_regularity_constants),
        ("adaptive angle estimate", c9_adaptive_theta),
        ("trace/determinant oracle", c10_trdet),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, e));
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {}", i + 1, outcome.detail);
        failures += usize::from(!outcome.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
