//! Manifolds given as zero sets `{x : F(x) = 0}` of smooth maps with a
//! full-rank Jacobian, projected by Newton's method on the optimality
//! system of `min ½‖y − x‖²` subject to `F(y) = 0`.

use crate::error::{GapError, Result};
use crate::linalg::singular_values;
use crate::scalar::{lit, to_f64, Real};
use crate::subspace::{orthonormalize, Subspace, RANK_TOL};
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

/// A smooth map `F: R^n → R^d` with its Jacobian.
pub trait SmoothMap<T: Real>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &DVector<T>) -> DVector<T>;
    /// The d×n Jacobian.
    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T>;
    /// `Σ_i λ_i ∇²F_i(x)`, if available. Without it the projection solver
    /// drops the curvature term and converges linearly instead of
    /// quadratically.
    fn weighted_hessian(&self, _x: &DVector<T>, _lambda: &DVector<T>) -> Option<DMatrix<T>> {
        None
    }
    fn name(&self) -> &str;
}

/// `F(x, y, z) = (y, z − x²)`, whose zero set is the curve `{(t, 0, t²)}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParabolaCurve;

impl<T: Real> SmoothMap<T> for ParabolaCurve {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_vec(vec![x[1], x[2] - x[0] * x[0]])
    }
    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        let (z, o) = (T::zero(), T::one());
        DMatrix::from_row_slice(2, 3, &[z, o, z, -(x[0] + x[0]), z, o])
    }
    fn weighted_hessian(&self, _x: &DVector<T>, lambda: &DVector<T>) -> Option<DMatrix<T>> {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = -(lambda[1] + lambda[1]);
        Some(h)
    }
    fn name(&self) -> &str {
        "parabola_curve"
    }
}

/// `F(x) = ‖x − c‖² − r²`, the sphere written implicitly.
#[derive(Clone, Debug)]
pub struct SphereMap<T: Real> {
    pub center: DVector<T>,
    pub radius: T,
}

impl<T: Real> SmoothMap<T> for SphereMap<T> {
    fn input_dim(&self) -> usize {
        self.center.len()
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_element(1, (x - &self.center).norm_squared() - self.radius * self.radius)
    }
    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        let g = (x - &self.center) * lit::<T>(2.0);
        DMatrix::from_row_slice(1, g.len(), g.as_slice())
    }
    fn weighted_hessian(&self, x: &DVector<T>, lambda: &DVector<T>) -> Option<DMatrix<T>> {
        let n = x.len();
        Some(DMatrix::identity(n, n) * (lambda[0] * lit::<T>(2.0)))
    }
    fn name(&self) -> &str {
        "sphere"
    }
}

/// Newton solver settings for the projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100 }
    }
}

/// `{x : F(x) = 0}` for a map with full row rank Jacobian.
#[derive(Clone)]
pub struct ImplicitManifold<T: Real> {
    map: Arc<dyn SmoothMap<T>>,
    hint: Option<DVector<T>>,
    settings: NewtonSettings,
}

impl<T: Real> fmt::Debug for ImplicitManifold<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitManifold")
            .field("map", &self.map.name())
            .field("hint", &self.hint)
            .field("settings", &self.settings)
            .finish()
    }
}

impl<T: Real> PartialEq for ImplicitManifold<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.map, &other.map) && self.hint == other.hint
    }
}

impl<T: Real> ImplicitManifold<T> {
    pub fn new(map: Arc<dyn SmoothMap<T>>) -> Self {
        Self { map, hint: None, settings: NewtonSettings::default() }
    }

    /// Starting point tried when Newton from the query point fails.
    pub fn with_hint(mut self, hint: DVector<T>) -> Self {
        self.hint = Some(hint);
        self
    }

    pub fn with_settings(mut self, settings: NewtonSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn map(&self) -> &dyn SmoothMap<T> {
        self.map.as_ref()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn codim(&self) -> usize {
        self.map.output_dim()
    }

    /// The Jacobian at `x`, checked for full row rank.
    pub fn checked_jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        let j = self.map.jacobian(x);
        let sv = singular_values(&j);
        let smax = sv.first().copied().unwrap_or(T::zero());
        let smin = sv.last().copied().unwrap_or(T::zero());
        if sv.len() < self.codim() || smax == T::zero() || smin <= smax * lit::<T>(RANK_TOL) {
            return Err(GapError::DegenerateManifold(format!(
                "Jacobian of {} is rank deficient at {:?}",
                self.map.name(),
                x.as_slice()
            )));
        }
        Ok(j)
    }

    /// Tangent space `ker DF(x)`.
    pub fn tangent(&self, x: &DVector<T>) -> Result<Subspace<T>> {
        let j = self.checked_jacobian(x)?;
        Ok(orthonormalize(&j.transpose()).complement())
    }

    pub fn residual_norm(&self, x: &DVector<T>) -> T {
        self.map.eval(x).norm()
    }

    /// Nearest point of the manifold to `x`.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.ambient_dim() {
            return Err(GapError::DimensionMismatch { expected: self.ambient_dim(), found: x.len() });
        }
        match self.newton(x, x.clone()) {
            Ok(y) => Ok(y),
            Err(e) => match &self.hint {
                Some(h) => self.newton(x, h.clone()).map_err(|_| e),
                None => Err(e),
            },
        }
    }

    fn newton(&self, x: &DVector<T>, start: DVector<T>) -> Result<DVector<T>> {
        let n = self.ambient_dim();
        let d = self.codim();
        let tol = lit::<T>(self.settings.tol) * x.norm().max(T::one());
        let mut y = start;
        let mut lambda = DVector::<T>::zeros(d);
        let mut residual = T::zero();
        for _ in 0..self.settings.max_iter {
            let j = self.checked_jacobian(&y)?;
            let f = self.map.eval(&y);
            let stationarity = &y - x + j.transpose() * &lambda;
            residual = (stationarity.norm_squared() + f.norm_squared()).sqrt();
            if residual <= tol {
                return Ok(y);
            }
            let mut kkt = DMatrix::<T>::zeros(n + d, n + d);
            let mut top = DMatrix::<T>::identity(n, n);
            if let Some(h) = self.map.weighted_hessian(&y, &lambda) {
                top += h;
            }
            kkt.view_mut((0, 0), (n, n)).copy_from(&top);
            kkt.view_mut((0, n), (n, d)).copy_from(&j.transpose());
            kkt.view_mut((n, 0), (d, n)).copy_from(&j);
            let mut rhs = DVector::<T>::zeros(n + d);
            rhs.rows_mut(0, n).copy_from(&(-stationarity));
            rhs.rows_mut(n, d).copy_from(&(-f));
            let step = kkt.lu().solve(&rhs).ok_or_else(|| {
                GapError::DegenerateManifold("singular optimality system".into())
            })?;
            y += step.rows(0, n);
            lambda += step.rows(n, d);
        }
        Err(GapError::NonConvergence {
            iterations: self.settings.max_iter,
            residual: to_f64(&residual),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn finite_difference_jacobian(m: &dyn SmoothMap<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-6;
        let mut j = DMatrix::zeros(m.output_dim(), m.input_dim());
        for k in 0..m.input_dim() {
            let mut e = DVector::zeros(m.input_dim());
            e[k] = h;
            let col = (m.eval(&(x + &e)) - m.eval(&(x - &e))) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }

    #[test]
    fn supplied_jacobians_match_finite_differences() {
        let x = v(&[0.3, -0.7, 1.1]);
        let par = ParabolaCurve;
        assert_abs_diff_eq!(
            SmoothMap::<f64>::jacobian(&par, &x),
            finite_difference_jacobian(&par, &x),
            epsilon = 1e-5
        );
        let s = SphereMap { center: v(&[1.0, 0.0, -1.0]), radius: 2.0 };
        assert_abs_diff_eq!(s.jacobian(&x), finite_difference_jacobian(&s, &x), epsilon = 1e-5);
    }

    #[test]
    fn sphere_projection_matches_radial_formula() {
        let c = v(&[1.0, 0.0, -1.0]);
        let m = ImplicitManifold::new(Arc::new(SphereMap { center: c.clone(), radius: 2.0 }));
        let x = v(&[2.0, 1.5, 0.2]);
        let expected = &c + (&x - &c).normalize() * 2.0;
        assert_abs_diff_eq!(m.project(&x).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn parabola_projection_is_stationary() {
        let m = ImplicitManifold::new(Arc::new(ParabolaCurve));
        let x = v(&[0.4, 0.2, 0.5]);
        let y = m.project(&x).unwrap();
        assert!(m.residual_norm(&y) < 1e-12);
        // x − y is normal to the curve at y: orthogonal to the tangent (1, 0, 2t).
        let t = DVector::from_vec(vec![1.0, 0.0, 2.0 * y[0]]);
        assert!((&x - &y).dot(&t).abs() < 1e-12);
        // Compare with a dense search over the curve.
        let best = (0..200_001)
            .map(|i| -1.0 + 2.0 * i as f64 / 200_000.0)
            .map(|s| (v(&[s, 0.0, s * s]) - &x).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(((&x - &y).norm() - best).abs() < 1e-8);
    }

    #[test]
    fn tangent_at_origin_is_first_axis() {
        let m = ImplicitManifold::new(Arc::new(ParabolaCurve));
        let t = m.tangent(&v(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(t.dim(), 1);
        assert_abs_diff_eq!(t.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    struct Degenerate;
    impl SmoothMap<f64> for Degenerate {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, x[0] * x[0])
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 0.0])
        }
        fn name(&self) -> &str {
            "degenerate"
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let m = ImplicitManifold::new(Arc::new(Degenerate));
        assert!(matches!(m.tangent(&v(&[0.0, 1.0])), Err(GapError::DegenerateManifold(_))));
    }

    struct NoHessianCircle;
    impl SmoothMap<f64> for NoHessianCircle {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, x.norm_squared() - 1.0)
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]])
        }
        fn name(&self) -> &str {
            "circle_without_hessian"
        }
    }

    #[test]
    fn solver_without_curvature_still_converges_nearby() {
        let m = ImplicitManifold::new(Arc::new(NoHessianCircle));
        let y = m.project(&v(&[1.01, 0.02])).unwrap();
        assert_abs_diff_eq!(y, v(&[1.01, 0.02]).normalize(), epsilon = 1e-10);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let m = ImplicitManifold::new(Arc::new(NoHessianCircle))
            .with_settings(NewtonSettings { tol: 1e-15, max_iter: 1 });
        match m.project(&v(&[3.0, 1.0])) {
            Err(GapError::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
