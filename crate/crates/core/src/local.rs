//! Local behaviour of GAP near a point of `A ∩ B`: the tangent operator,
//! predicted local rates, regularity checks and the regularity constants of
//! solid convex pairs.

use crate::engine::{gap_step, GapParams};
use crate::error::{GapError, Result};
use crate::linalg::numerical_rank;
use crate::scalar::{lit, to_f64, Real};
use crate::sets::{Projectable, ProjectableSet, ON_SET_TOL};
use crate::spectral::{assemble_gap_matrix, fixed_subspace, sigma_norm, subdominant_magnitude, ONE_TOL};
use crate::subspace::{intersect, principal_angles, Subspace, DEFAULT_ZERO_TOL};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Inner products of unit normals within this distance of ±1 count as tangency.
pub const TANGENT_BAND: f64 = 1e-12;

/// Sample points closer than this to `A ∩ B` are skipped by [`empirical_sr`].
pub const MIN_INTERSECTION_DISTANCE: f64 = 1e-12;

/// `S_T(x) = (1−α)I + α Π^{α2}_{T_A(x)} Π^{α1}_{T_B(x)}`.
pub fn tangent_gap_operator<T: Real + Serialize>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x: &DVector<T>,
    params: &GapParams<T>,
) -> Result<DMatrix<T>> {
    let ta = set_a.tangent_space(x)?.subspace;
    let tb = set_b.tangent_space(x)?.subspace;
    assemble_gap_matrix(&ta, &tb, params)
}

/// Outcome of the regularity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegularityVerdict {
    pub regular: bool,
    /// Only the weak form was checked: both tangent spaces exist at the point.
    pub partial: bool,
}

/// Checks `T_{A∩B}(x) = T_A(x) ∩ T_B(x)` against a known tangent of the
/// intersection; without one, only that both tangent spaces exist.
pub fn check_regularity<T: Real + Serialize>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x: &DVector<T>,
    intersection_tangent: Option<&Subspace<T>>,
) -> RegularityVerdict {
    let tol = lit::<T>(ON_SET_TOL);
    let on_both = on_set_or_boundary(set_a, x, tol) && on_set_or_boundary(set_b, x, tol);
    let tangents = set_a.tangent_space(x).and_then(|ta| Ok((ta.subspace, set_b.tangent_space(x)?.subspace)));
    let (ta, tb) = match (on_both, tangents) {
        (true, Ok(t)) => t,
        _ => return RegularityVerdict { regular: false, partial: intersection_tangent.is_none() },
    };
    let Some(known) = intersection_tangent else {
        return RegularityVerdict { regular: true, partial: true };
    };
    let regular = intersect(&ta, &tb, lit(DEFAULT_ZERO_TOL))
        .ok()
        .filter(|cap| cap.dim() == known.dim())
        .and_then(|cap| cap.projector_distance(known).ok())
        .is_some_and(|d| d <= lit::<T>(1e-8));
    RegularityVerdict { regular, partial: false }
}

fn on_set_or_boundary<T: Real>(set: &ProjectableSet<T>, x: &DVector<T>, tol: T) -> bool {
    set.contains(x, tol) || set.boundary_normal(x).is_ok()
}

/// Whether `T_A(x) + T_B(x) = R^n`.
pub fn transversality_check<T: Real + Serialize>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x: &DVector<T>,
) -> Result<bool> {
    let ta = set_a.tangent_space(x)?.subspace;
    let tb = set_b.tangent_space(x)?.subspace;
    let n = x.len();
    if ta.dim() + tb.dim() < n {
        return Ok(false);
    }
    let joined = DMatrix::from_fn(n, ta.dim() + tb.dim(), |i, j| {
        if j < ta.dim() {
            ta.basis()[(i, j)]
        } else {
            tb.basis()[(i, j - ta.dim())]
        }
    });
    Ok(numerical_rank(&joined, 1e-10) == n)
}

/// Local rate prediction at a point of the intersection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalRateReport<T: Real + Serialize> {
    pub base_point: Vec<T>,
    pub tangent_a: Subspace<T>,
    pub tangent_b: Subspace<T>,
    pub theta_f: Option<T>,
    /// `γ(S_T(x*))`; absent when the regularity check fails.
    pub gamma_local: Option<T>,
    /// `σ(S_T(x*))`; absent when the regularity check fails.
    pub sigma_local: Option<T>,
    pub transversal: bool,
    pub regular: bool,
    pub regularity_partial: bool,
}

/// Predicted local rate of GAP at `x_star` from its tangent operator.
pub fn predicted_local_rate<T: Real + Serialize>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x_star: &DVector<T>,
    params: &GapParams<T>,
    intersection_tangent: Option<&Subspace<T>>,
) -> Result<LocalRateReport<T>> {
    let ta = set_a.tangent_space(x_star)?.subspace;
    let tb = set_b.tangent_space(x_star)?.subspace;
    let zero_tol = lit::<T>(DEFAULT_ZERO_TOL);
    let theta_f = if ta.dim().min(tb.dim()) == 0 {
        None
    } else {
        principal_angles(&ta, &tb, zero_tol)?.friedrichs
    };
    let verdict = check_regularity(set_a, set_b, x_star, intersection_tangent);
    let transversal = transversality_check(set_a, set_b, x_star)?;
    let (gamma_local, sigma_local) = if verdict.regular {
        let s = assemble_gap_matrix(&ta, &tb, params)?;
        let fix = fixed_subspace(&ta, &tb, params, zero_tol)?;
        (Some(subdominant_magnitude(&s, lit(ONE_TOL))?), Some(sigma_norm(&s, &fix)?))
    } else {
        (None, None)
    };
    Ok(LocalRateReport {
        base_point: x_star.iter().copied().collect(),
        tangent_a: ta,
        tangent_b: tb,
        theta_f,
        gamma_local,
        sigma_local,
        transversal,
        regular: verdict.regular,
        regularity_partial: verdict.partial,
    })
}

/// Central-difference Jacobian of one GAP step at `x`.
pub fn finite_difference_jacobian<T: Real>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    params: &GapParams<T>,
    x: &DVector<T>,
    h: T,
) -> Result<DMatrix<T>> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = h;
        let plus = gap_step(set_a, set_b, params, &(x + &e))?;
        let minus = gap_step(set_a, set_b, params, &(x - &e))?;
        j.set_column(i, &((plus - minus) / (h + h)));
    }
    Ok(j)
}

/// Shape of the intersection of two solid convex sets at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// `⟨v1, v2⟩ ≤ 0` for the outward unit normals.
    Acute,
    /// `⟨v1, v2⟩ > 0`.
    Obtuse,
    /// Normals parallel: the boundaries touch.
    Tangent,
}

fn normals<T: Real>(set_a: &ProjectableSet<T>, set_b: &ProjectableSet<T>, x: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
    Ok((set_a.boundary_normal(x)?, set_b.boundary_normal(x)?))
}

fn classify_inner<T: Real>(inner: T) -> Classification {
    if (inner.abs() - T::one()).abs() <= lit::<T>(TANGENT_BAND) {
        Classification::Tangent
    } else if inner <= T::zero() {
        Classification::Acute
    } else {
        Classification::Obtuse
    }
}

/// Acute/obtuse/tangent classification from the outward boundary normals.
pub fn classify_intersection<T: Real>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x_star: &DVector<T>,
) -> Result<Classification> {
    let (v1, v2) = normals(set_a, set_b, x_star)?;
    Ok(classify_inner(v1.dot(&v2)))
}

/// Subtransversality and transversality constants of a solid convex pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityConstants<T> {
    pub theta_f: T,
    /// Subtransversality constant.
    pub sr: T,
    /// Transversality constant `sin(θ_F/2)`.
    pub r: T,
    /// `1 − 2r² = cos θ_F`.
    pub r_a: T,
    pub classification: Classification,
}

/// Closed-form `sr`, `r` and `r_a` from the angle between the boundary
/// tangents at `x_star`.
pub fn regularity_constants<T: Real>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x_star: &DVector<T>,
) -> Result<RegularityConstants<T>> {
    let (v1, v2) = normals(set_a, set_b, x_star)?;
    let inner = v1.dot(&v2).clamp(-T::one(), T::one());
    let classification = classify_inner(inner);
    if classification == Classification::Tangent {
        return Err(GapError::TangentCase);
    }
    // The boundary tangents are the normals' orthogonal complements, so their
    // only nonzero principal angle is the folded angle between the normals.
    let theta_f = inner.abs().acos();
    let half = theta_f / lit::<T>(2.0);
    let r = half.sin();
    let sr = match classification {
        Classification::Acute => r,
        _ => half.cos(),
    };
    Ok(RegularityConstants { theta_f, sr, r, r_a: T::one() - lit::<T>(2.0) * r * r, classification })
}

/// Distance from `x` to `A ∩ B` for catalog pairs where it is computable:
/// identical sets, two balls, two halfspaces, and pairs of linear or affine
/// subspaces.
pub fn intersection_distance<T: Real>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x: &DVector<T>,
) -> Result<T> {
    if set_a == set_b {
        return set_a.distance(x);
    }
    if let (Some(fa), Some(fb)) = (as_affine(set_a), as_affine(set_b)) {
        return affine_intersection_distance(&fa, &fb, x);
    }
    let rim = match (set_a, set_b) {
        (ProjectableSet::Ball { center: c1, radius: r1 }, ProjectableSet::Ball { center: c2, radius: r2 }) => {
            ball_rim_point(c1, *r1, c2, *r2, x)?
        }
        (
            ProjectableSet::Halfspace { normal: a1, offset: b1 },
            ProjectableSet::Halfspace { normal: a2, offset: b2 },
        ) => halfspace_ridge_point(a1, *b1, a2, *b2, x),
        _ => {
            return Err(GapError::Precondition(
                "distance to the intersection is not available for this pair".into(),
            ))
        }
    };
    let tol = lit::<T>(1e-12);
    let mut candidates = vec![x.clone(), set_a.project(x)?, set_b.project(x)?];
    candidates.extend(rim);
    candidates
        .iter()
        .filter(|p| set_a.contains(p, tol) && set_b.contains(p, tol))
        .map(|p| (p - x).norm())
        .reduce(|a, b| a.min(b))
        .ok_or_else(|| GapError::Inconsistent("the sets do not intersect".into()))
}

fn as_affine<T: Real>(set: &ProjectableSet<T>) -> Option<(Subspace<T>, DVector<T>)> {
    match set {
        ProjectableSet::LinearSubspace(s) => Some((s.clone(), DVector::zeros(s.ambient_dim()))),
        ProjectableSet::AffineSubspace { direction, offset } => Some((direction.clone(), offset.clone())),
        ProjectableSet::LineR2 => Some((
            Subspace::span(&[DVector::from_vec(vec![T::one(), T::zero()])]),
            DVector::zeros(2),
        )),
        _ => None,
    }
}

fn affine_intersection_distance<T: Real>(
    (d1, o1): &(Subspace<T>, DVector<T>),
    (d2, o2): &(Subspace<T>, DVector<T>),
    x: &DVector<T>,
) -> Result<T> {
    // A point of both sets: o1 + D1 s = o2 + D2 t, by least squares.
    let (k1, k2) = (d1.dim(), d2.dim());
    let n = x.len();
    let m = DMatrix::from_fn(n, k1 + k2, |i, j| if j < k1 { d1.basis()[(i, j)] } else { -d2.basis()[(i, j - k1)] });
    let rhs = o2 - o1;
    let point = if k1 + k2 == 0 {
        o1.clone()
    } else {
        let st = m
            .clone()
            .svd(true, true)
            .solve(&rhs, lit(1e-12))
            .map_err(|e| GapError::Singularity(e.to_string()))?;
        o1 + d1.basis() * st.rows(0, k1)
    };
    if (&point - o2 - d2.project(&(&point - o2))).norm() > lit::<T>(ON_SET_TOL) {
        return Err(GapError::Inconsistent("the affine sets do not intersect".into()));
    }
    let dir = intersect(d1, d2, lit(DEFAULT_ZERO_TOL))?;
    let r = x - &point;
    Ok((&r - dir.project(&r)).norm())
}

/// Nearest point of `∂A ∩ ∂B` for two balls.
fn ball_rim_point<T: Real>(c1: &DVector<T>, r1: T, c2: &DVector<T>, r2: T, x: &DVector<T>) -> Result<Option<DVector<T>>> {
    let axis = c2 - c1;
    let d = axis.norm();
    if d == T::zero() {
        return Ok(None);
    }
    let u = axis / d;
    let a = (d * d + r1 * r1 - r2 * r2) / (lit::<T>(2.0) * d);
    let rho_sq = r1 * r1 - a * a;
    if rho_sq < T::zero() {
        return Ok(None);
    }
    let m = c1 + &u * a;
    let rel = x - &m;
    let mut w = &rel - &u * u.dot(&rel);
    if w.norm() <= lit::<T>(1e-300) {
        // Any rim point is nearest; take one orthogonal to the axis.
        let i = u.iamin();
        let mut e = DVector::zeros(x.len());
        e[i] = T::one();
        w = &e - &u * u.dot(&e);
    }
    let wn = w.norm();
    Ok(Some(m + w * (rho_sq.sqrt() / wn)))
}

/// Projection onto `{⟨a1, y⟩ = b1, ⟨a2, y⟩ = b2}` for unit normals.
fn halfspace_ridge_point<T: Real>(a1: &DVector<T>, b1: T, a2: &DVector<T>, b2: T, x: &DVector<T>) -> Option<DVector<T>> {
    let g = a1.dot(a2);
    let det = T::one() - g * g;
    if det <= lit::<T>(1e-14) {
        return None;
    }
    let (e1, e2) = (a1.dot(x) - b1, a2.dot(x) - b2);
    let l1 = (e1 - g * e2) / det;
    let l2 = (e2 - g * e1) / det;
    Some(x - a1 * l1 - a2 * l2)
}

/// Sampled estimate of the subtransversality constant: the minimum of
/// `max(d_A(x), d_B(x)) / d_{A∩B}(x)` over `samples` points drawn
/// uniformly from the ball of `radius` around `x_star`.
pub fn empirical_sr<T: Real>(
    set_a: &ProjectableSet<T>,
    set_b: &ProjectableSet<T>,
    x_star: &DVector<T>,
    radius: T,
    samples: usize,
    seed: u64,
) -> Result<T> {
    let n = x_star.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = to_f64(&radius);
    let mut best: Option<T> = None;
    for _ in 0..samples {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let scale = r * rng.random::<f64>().powf(1.0 / n as f64) / norm;
        let x = DVector::from_fn(n, |i, _| x_star[i] + lit::<T>(dir[i] * scale));
        let d_cap = intersection_distance(set_a, set_b, &x)?;
        if d_cap < lit::<T>(MIN_INTERSECTION_DISTANCE) {
            continue;
        }
        let ratio = set_a.distance(&x)?.max(set_b.distance(&x)?) / d_cap;
        best = Some(best.map_or(ratio, |b: T| b.min(ratio)));
    }
    best.ok_or_else(|| GapError::NoValidSamples(format!("all {samples} samples fell in the intersection")))
}
