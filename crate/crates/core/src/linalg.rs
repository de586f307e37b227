//! One-sided Jacobi singular value decomposition.
//!
//! nalgebra's bidiagonal SVD occasionally returns inaccurate factors for
//! rank-deficient inputs (for instance orthogonal projectors), and every
//! rank decision in this crate depends on those. Jacobi rotations are
//! slower but give singular values to high relative accuracy.

use crate::scalar::{lit, Real};
use nalgebra::DMatrix;

/// Thin SVD `A = U diag(σ) Vᵀ` with `r = min(m, n)` singular values sorted
/// in decreasing order.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    /// m×r.
    pub u: DMatrix<T>,
    pub singular_values: Vec<T>,
    /// n×r.
    ///
    /// The factor on the longer side (`u` when `m ≥ n`, `v` otherwise) has
    /// zero columns for zero singular values; the other factor is always
    /// orthogonal.
    pub v: DMatrix<T>,
}

const MAX_SWEEPS: usize = 80;

/// Computes the thin SVD of `a`.
pub fn svd<T: Real>(a: &DMatrix<T>) -> Svd<T> {
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(T, usize)> = (0..n).map(|j| (w.column(j).norm(), j)).collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = DMatrix::<T>::zeros(m, n);
    let mut vs = DMatrix::<T>::zeros(n, n);
    let mut sv = Vec::with_capacity(n);
    for (k, (sigma, j)) in order.into_iter().enumerate() {
        if sigma > T::zero() {
            u.set_column(k, &(w.column(j) / sigma));
        }
        vs.set_column(k, &v.column(j));
        sv.push(sigma);
    }
    Svd { u, singular_values: sv, v: vs }
}

fn rotate<T: Real>(m: &mut DMatrix<T>, p: usize, q: usize, c: T, s: T) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Singular values only, in decreasing order.
pub fn singular_values<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    svd(a).singular_values
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numerical_rank<T: Real>(a: &DMatrix<T>, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(T::zero());
    if smax == T::zero() {
        return 0;
    }
    sv.iter().filter(|s| **s > smax * lit::<T>(rel_tol)).count()
}
