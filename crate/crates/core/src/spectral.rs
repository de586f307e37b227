//! Spectral theory of the GAP operator on a pair of subspaces.

use crate::engine::{classify_params, GapParams, ParamCase};
use crate::error::{GapError, Result};
use crate::linalg::singular_values;
use crate::scalar::{lit, to_f64, Real};
use crate::subspace::{intersect, principal_angles, spectral_norm, Subspace};
use nalgebra::DMatrix;
use num_complex::Complex;
use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use serde::Serialize;

/// Tolerance for identifying an eigenvalue with 1.
pub const ONE_TOL: f64 = 1e-9;

/// `|z|` for a complex number over a generic real field.
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Numerically computed eigenvalues closer than this are treated as one
/// cluster when measuring moduli. A defective double eigenvalue is split
/// by roughly √ε by a dense eigensolver; the cluster mean is accurate.
pub const CLUSTER_TOL: f64 = 1e-6;

/// The 2×2 block of `T = Π_U^{α2} Π_V^{α1}` for a principal angle θ.
pub fn t1_block<T: Real>(theta: T, alpha1: T, alpha2: T) -> DMatrix<T> {
    let (s, c) = theta.sin_cos();
    let one = T::one();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            one - alpha1 * s * s,
            alpha1 * c * s,
            alpha1 * (one - alpha2) * c * s,
            (one - alpha2) * (one - alpha1 * c * c),
        ],
    )
}

/// Eigenvalues `f ± √(f² − (1−α1)(1−α2))` of the block for angle θ, where
/// `f = ½(2 − α1 − α2 + α1α2 cos²θ)`. The one with nonnegative imaginary
/// part (or the larger real one) comes first.
pub fn block_eigenvalues<T: Real>(theta: T, alpha1: T, alpha2: T) -> (Complex<T>, Complex<T>) {
    let one = T::one();
    let c = theta.cos();
    let f = (lit::<T>(2.0) - alpha1 - alpha2 + alpha1 * alpha2 * c * c) / lit::<T>(2.0);
    let disc = f * f - (one - alpha1) * (one - alpha2);
    if disc >= T::zero() {
        let g = disc.sqrt();
        (Complex::new(f + g, T::zero()), Complex::new(f - g, T::zero()))
    } else {
        let g = (-disc).sqrt();
        (Complex::new(f, g), Complex::new(f, -g))
    }
}

/// The eigenvalues of `T = Π_U^{α2} Π_V^{α1}` for subspaces with
/// `dim U = p`, `dim V = q`, `dim(U ∩ V) = s` in R^n and principal angles
/// `angles` (of which the first `s` are zero).
pub fn full_spectrum<T: Real>(
    n: usize,
    p: usize,
    q: usize,
    s: usize,
    angles: &[T],
    alpha1: T,
    alpha2: T,
) -> Result<Vec<Complex<T>>> {
    let k = p.min(q);
    if k > n || p.max(q) > n {
        return Err(GapError::Precondition(format!("dimensions p={p}, q={q} exceed n={n}")));
    }
    if s > k {
        return Err(GapError::Precondition(format!("s={s} exceeds min(p, q)={k}")));
    }
    if angles.len() != k {
        return Err(GapError::Precondition(format!("expected {k} angles, got {}", angles.len())));
    }
    if s + n < p + q {
        return Err(GapError::Precondition(format!(
            "multiplicity s+n−p−q = {} is negative",
            s as i64 + n as i64 - (p + q) as i64
        )));
    }
    let one = T::one();
    let real = |x: T| Complex::new(x, T::zero());
    let mut out = Vec::with_capacity(n);
    out.extend(std::iter::repeat_n(real(one), s));
    out.extend(std::iter::repeat_n(real((one - alpha1) * (one - alpha2)), s + n - p - q));
    out.extend(std::iter::repeat_n(real(one - alpha2), q.saturating_sub(p)));
    out.extend(std::iter::repeat_n(real(one - alpha1), p.saturating_sub(q)));
    for &theta in &angles[s..] {
        let (l1, l2) = block_eigenvalues(theta, alpha1, alpha2);
        out.push(l1);
        out.push(l2);
    }
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Maps an eigenvalue of `T` to the corresponding one of `S = (1−α)I + αT`.
pub fn map_through_alpha<T: Real>(lambda: Complex<T>, alpha: T) -> Complex<T> {
    Complex::new(T::one() + alpha * (lambda.re - T::one()), alpha * lambda.im)
}

/// `S = (1−α)I + α((1−α2)I + α2 P_U)((1−α1)I + α1 P_V)`.
pub fn assemble_gap_matrix<T: Real>(u: &Subspace<T>, v: &Subspace<T>, params: &GapParams<T>) -> Result<DMatrix<T>> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(GapError::DimensionMismatch { expected: u.ambient_dim(), found: v.ambient_dim() });
    }
    let n = u.ambient_dim();
    let id = DMatrix::<T>::identity(n, n);
    let one = T::one();
    let ra = &id * (one - params.alpha2) + u.projector() * params.alpha2;
    let rb = &id * (one - params.alpha1) + v.projector() * params.alpha1;
    Ok(&id * (one - params.alpha) + ra * rb * params.alpha)
}

/// Eigenvalues of a square matrix from its real Schur form.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    // The QR sweep can stall at machine precision; retry with looser
    // deflation thresholds before giving up.
    let max_iter = 30 * m.nrows().max(10);
    for factor in [1.0, 10.0, 100.0, 1000.0] {
        if let Some(schur) = m.clone().try_schur(T::default_epsilon() * lit(factor), max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(GapError::NonConvergence { iterations: max_iter, residual: f64::NAN })
}

/// Groups eigenvalues closer than `tol` (transitively) and returns the
/// cluster means with their sizes.
#[allow(clippy::type_complexity)]
fn cluster_means<T: Real>(eigs: &[Complex<T>], tol: T) -> Vec<(Complex<T>, usize)> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if modulus(eigs[i] - eigs[j]) <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    // (root, sum, size) per cluster.
    let mut groups: Vec<(usize, Complex<T>, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += eigs[i];
                g.2 += 1;
            }
            None => groups.push((r, eigs[i], 1)),
        }
    }
    groups
        .into_iter()
        .map(|(_, sum, k)| (sum / lit::<T>(k as f64), k))
        .collect()
}

/// `max{|λ| : λ ∈ {0} ∪ Λ ∖ {1}}` over a list of eigenvalues.
pub fn subdominant_of<T: Real>(eigs: &[Complex<T>], one_tol: T) -> T {
    cluster_means(eigs, lit(CLUSTER_TOL))
        .into_iter()
        .filter(|(l, _)| modulus(*l - Complex::new(T::one(), T::zero())) > one_tol)
        .map(|(l, _)| modulus(l))
        .fold(T::zero(), |a, b| a.max(b))
}

/// Subdominant eigenvalue magnitude `γ(A)` of a matrix with spectral
/// radius at most 1.
pub fn subdominant_magnitude<T: Real>(m: &DMatrix<T>, one_tol: T) -> Result<T> {
    let eigs = eigenvalues(m)?;
    let rho = eigs.iter().map(|l| modulus(*l)).fold(T::zero(), |a, b| a.max(b));
    if rho > T::one() + lit::<T>(1e-9) {
        return Err(GapError::NotConvergent { radius: to_f64(&rho) });
    }
    Ok(subdominant_of(&eigs, one_tol))
}

/// `σ(S) = ‖S − P_fix‖₂` with `P_fix` the projector onto the supplied
/// fixed-point subspace.
pub fn sigma_norm<T: Real>(s: &DMatrix<T>, fix: &Subspace<T>) -> Result<T> {
    if s.nrows() != fix.ambient_dim() || s.ncols() != fix.ambient_dim() {
        return Err(GapError::DimensionMismatch { expected: s.nrows(), found: fix.ambient_dim() });
    }
    let b = fix.basis();
    let drift = if b.ncols() == 0 { T::zero() } else { (s * b - b).amax() };
    if drift > lit::<T>(1e-8) {
        return Err(GapError::Inconsistent(format!(
            "supplied subspace is not fixed by S (deviation {:e})",
            to_f64(&drift)
        )));
    }
    Ok(spectral_norm(&(s - fix.projector())))
}

/// The fixed-point subspace of `S`: `U ∩ V`, enlarged by `U^⊥ ∩ V^⊥`
/// under case B3.
pub fn fixed_subspace<T: Real>(
    u: &Subspace<T>,
    v: &Subspace<T>,
    params: &GapParams<T>,
    zero_tol: T,
) -> Result<Subspace<T>> {
    let cap = intersect(u, v, zero_tol)?;
    if params.case == ParamCase::B3 {
        let perp = intersect(&u.complement(), &v.complement(), zero_tol)?;
        cap.sum(&perp)
    } else {
        Ok(cap)
    }
}

/// Contraction bound: the maximum of the block norms `‖S_{1,i} − S_{1,i}^∞‖`,
/// `|1 − αα2|` (or `|1 − αα1|` when `p > q`),
/// `|1 − α + α(1−α1)(1−α2)|` (zero when that value is 1, since the
/// corresponding directions are then fixed) and `|1 − α|`.
pub fn sigma_bound<T: Real>(p: usize, q: usize, angles: &[T], s: usize, params: &GapParams<T>) -> T {
    let one = T::one();
    let (a, a1, a2) = (params.alpha, params.alpha1, params.alpha2);
    let id = DMatrix::<T>::identity(2, 2);
    let mut bound = (one - a).abs();
    for &theta in angles.iter().skip(s) {
        let block = &id * (one - a) + t1_block(theta, a1, a2) * a;
        bound = bound.max(spectral_norm(&block));
    }
    let s3 = one - a + a * (one - a1) * (one - a2);
    if (s3 - one).abs() > lit::<T>(1e-12) {
        bound = bound.max(s3.abs());
    }
    if q > p {
        bound = bound.max((one - a * a2).abs());
    }
    if p > q {
        bound = bound.max((one - a * a1).abs());
    }
    bound
}

/// Spectral summary of `S` for a subspace pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport<T> {
    pub eigenvalues: Vec<Complex<T>>,
    pub gamma: T,
    pub sigma: T,
    /// `1 − α2` when `p ≤ q`, `1 − α1` otherwise.
    pub lambda3: T,
    /// `(1 − α1)(1 − α2)`.
    pub lambda4: T,
    pub fixed_multiplicity: usize,
}

/// Numerically evaluates the spectral quantities of `S` for `(U, V)`.
pub fn spectral_report<T: Real>(
    u: &Subspace<T>,
    v: &Subspace<T>,
    params: &GapParams<T>,
    zero_tol: T,
) -> Result<SpectralReport<T>> {
    params.ensure_valid()?;
    let s = assemble_gap_matrix(u, v, params)?;
    let eigs = eigenvalues(&s)?;
    let one_tol = lit::<T>(ONE_TOL);
    let gamma = subdominant_magnitude(&s, one_tol)?;
    let fix = fixed_subspace(u, v, params, zero_tol)?;
    let sigma = sigma_norm(&s, &fix)?;
    let one = T::one();
    let fixed_multiplicity = eigs
        .iter()
        .filter(|l| modulus(**l - Complex::new(one, T::zero())) <= one_tol)
        .count();
    Ok(SpectralReport {
        eigenvalues: eigs,
        gamma,
        sigma,
        lambda3: if u.dim() <= v.dim() { one - params.alpha2 } else { one - params.alpha1 },
        lambda4: (one - params.alpha1) * (one - params.alpha2),
        fixed_multiplicity,
    })
}

/// Eigenvalues of `S` predicted from the principal angles of `(U, V)`.
pub fn predicted_spectrum<T: Real>(
    u: &Subspace<T>,
    v: &Subspace<T>,
    params: &GapParams<T>,
    zero_tol: T,
) -> Result<Vec<Complex<T>>> {
    let n = u.ambient_dim();
    let (p, q) = (u.dim(), v.dim());
    let (angles, s) = if p.min(q) == 0 {
        (Vec::new(), 0)
    } else {
        let pa = principal_angles(u, v, zero_tol)?;
        (pa.angles, pa.intersection_dim)
    };
    Ok(full_spectrum(n, p, q, s, &angles, params.alpha1, params.alpha2)?
        .into_iter()
        .map(|l| map_through_alpha(l, params.alpha))
        .collect())
}

/// Optimal relaxation for a Friedrichs angle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalChoice<T> {
    /// `α* = 2 / (1 + sin θ_F)`.
    pub alpha_star: T,
    /// `γ* = (1 − sin θ_F) / (1 + sin θ_F)`.
    pub gamma_star: T,
    /// `(1, α*, α*)`.
    pub params: GapParams<T>,
}

/// `α*`, `γ*` and `(1, α*, α*)`; without a Friedrichs angle `α* = 1`, `γ* = 0`.
pub fn optimal_params<T: Real>(theta_f: Option<T>) -> OptimalChoice<T> {
    let one = T::one();
    let (alpha_star, gamma_star) = match theta_f {
        Some(t) => {
            let s = t.sin();
            (lit::<T>(2.0) / (one + s), (one - s) / (one + s))
        }
        None => (one, T::zero()),
    };
    OptimalChoice { alpha_star, gamma_star, params: classify_params(one, alpha_star, alpha_star) }
}

fn check_kappa<T: Real>(kappa: T) -> Result<T> {
    let sqrt2 = lit::<T>(2.0).sqrt();
    if !(kappa >= sqrt2 - lit::<T>(1e-12)) {
        return Err(GapError::Domain(format!("κ = {} is below √2", to_f64(&kappa))));
    }
    Ok((kappa * kappa - T::one()).max(T::zero()).sqrt())
}

/// `α1 = α2 = 2(κ / (√(κ²−1) + 1))²`, `α = 1`.
pub fn kappa_to_params<T: Real>(kappa: T) -> Result<GapParams<T>> {
    let w = check_kappa(kappa)?;
    let r = kappa / (w + T::one());
    let a = lit::<T>(2.0) * r * r;
    Ok(classify_params(T::one(), a, a))
}

/// `γ = ((√(κ²−1) − 1) / (√(κ²−1) + 1))²`.
pub fn kappa_rate<T: Real>(kappa: T) -> Result<T> {
    let w = check_kappa(kappa)?;
    let r = (w - T::one()) / (w + T::one());
    Ok(r * r)
}

/// Closed-form trace and determinant of
/// `M = (2 − α*)I + (α*/α1)(T_1(θ_F) − I)`, with `α*` the optimal
/// parameter of `θ_F`.
pub fn trdet_oracle<T: Real>(theta_f: T, alpha1: T, alpha2: T) -> (T, T) {
    let (s, c) = theta_f.sin_cos();
    let one = T::one();
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let tr = two / ((one + s) * alpha1) * (-alpha1 - alpha2 + alpha2 * alpha1 * c * c + two * alpha1 * s);
    let det = four * s * (one - s) / (alpha1 * (one + s) * (one + s)) * (-alpha1 - alpha2 + alpha1 * alpha2 * (one + s));
    (tr, det)
}

/// Largest deviation under the optimal one-to-one matching of two
/// eigenvalue multisets (Hungarian method on scaled distances).
pub fn match_multisets(a: &[Complex<f64>], b: &[Complex<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GapError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let scale = 1e12;
    let weights = Matrix::from_fn(a.len(), b.len(), |(i, j)| ((a[i] - b[j]).norm() * scale).round() as i64);
    let (_, assignment) = kuhn_munkres_min(&weights);
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| (a[i] - b[j]).norm())
        .fold(0.0, f64::max))
}

/// Converts a complex list to `f64` parts.
pub fn complex_to_f64<T: Real>(v: &[Complex<T>]) -> Vec<Complex<f64>> {
    v.iter().map(|l| Complex::new(to_f64(&l.re), to_f64(&l.im))).collect()
}

/// Singular values of `S − P_fix`, exposed for diagnostics.
pub fn deviation_singular_values<T: Real>(s: &DMatrix<T>, fix: &Subspace<T>) -> Vec<T> {
    singular_values(&(s - fix.projector()))
}
