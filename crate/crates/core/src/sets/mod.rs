//! Catalog of sets with exact or Newton-computed projections.

mod implicit;
mod planar;

pub use implicit::{ImplicitManifold, NewtonSettings, ParabolaCurve, SmoothMap, SphereMap};
pub use planar::PlanarPolyhedron;

use crate::error::{GapError, Result};
use crate::scalar::{dist_sq, lit, Field, Real};
use crate::subspace::{orthonormalize, Subspace};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default membership tolerance.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-10;

/// Tolerance for "the point lies on the set/boundary" preconditions of the
/// local queries.
pub const ON_SET_TOL: f64 = 1e-8;

/// Which smooth piece of a set a projection landed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceLabel {
    /// The query point already belonged to the set.
    Inside,
    /// Boundary of a solid set with smooth boundary.
    Boundary,
    /// Face `{y = −x, x < 0}` of the absolute-value cone.
    LeftFace,
    /// Face `{y = x, x > 0}` of the absolute-value cone.
    RightFace,
    /// The cone apex.
    Apex,
    /// A set without interior (subspace, sphere, implicit manifold).
    Manifold,
}

impl FaceLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaceLabel::Inside => "inside",
            FaceLabel::Boundary => "boundary",
            FaceLabel::LeftFace => "left_face",
            FaceLabel::RightFace => "right_face",
            FaceLabel::Apex => "apex",
            FaceLabel::Manifold => "manifold",
        }
    }
}

/// `(1 − α) x + α p`, computed entrywise.
pub fn relax<T: Field>(x: &DVector<T>, p: &DVector<T>, alpha: &T) -> DVector<T> {
    let beta = T::one() - alpha.clone();
    x.zip_map(p, |a, b| beta.clone() * a + alpha.clone() * b)
}

/// A closed set with a computable (unique) projection.
pub trait Projectable<T: Field> {
    fn ambient_dim(&self) -> usize;

    /// Projection together with the label of the piece it landed on.
    fn project_labeled(&self, x: &DVector<T>) -> Result<(DVector<T>, FaceLabel)>;

    fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        Ok(self.project_labeled(x)?.0)
    }

    /// `(1 − α) x + α Π(x)`.
    fn relaxed_project(&self, x: &DVector<T>, alpha: &T) -> Result<DVector<T>> {
        let p = self.project(x)?;
        Ok(relax(x, &p, alpha))
    }

    /// Squared distance from `x` to the set.
    fn dist_sq(&self, x: &DVector<T>) -> Result<T> {
        let p = self.project(x)?;
        Ok(dist_sq(x.as_slice(), p.as_slice()))
    }
}

/// Tangent space of a manifold (or of the boundary of a solid set) at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentSpaceResult<T: Real + Serialize> {
    pub subspace: Subspace<T>,
    pub base_point: Vec<T>,
}

/// The set catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectableSet<T: Real> {
    LinearSubspace(Subspace<T>),
    AffineSubspace { direction: Subspace<T>, offset: DVector<T> },
    /// `{x : ⟨a, x⟩ ≤ b}` with `‖a‖ = 1`.
    Halfspace { normal: DVector<T>, offset: T },
    Ball { center: DVector<T>, radius: T },
    /// `{(x, y) : y ≥ |x|}`.
    AbsConeR2,
    /// `{(x, y) : y = 0}`.
    LineR2,
    Sphere { center: DVector<T>, radius: T },
    Implicit(ImplicitManifold<T>),
}

impl<T: Real> ProjectableSet<T> {
    /// Halfspace `{x : ⟨a, x⟩ ≤ b}`; `a` is normalized and `b` rescaled.
    pub fn halfspace(a: DVector<T>, b: T) -> Result<Self> {
        let norm = a.norm();
        if norm == T::zero() {
            return Err(GapError::Precondition("halfspace normal must be nonzero".into()));
        }
        Ok(Self::Halfspace { normal: a / norm, offset: b / norm })
    }

    pub fn ball(center: DVector<T>, radius: T) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::Ball { center, radius })
    }

    pub fn sphere(center: DVector<T>, radius: T) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::Sphere { center, radius })
    }

    pub fn affine(direction: Subspace<T>, offset: DVector<T>) -> Result<Self> {
        if direction.ambient_dim() != offset.len() {
            return Err(GapError::DimensionMismatch {
                expected: direction.ambient_dim(),
                found: offset.len(),
            });
        }
        Ok(Self::AffineSubspace { direction, offset })
    }

    /// The line `{point + t·direction}`.
    pub fn line_through(point: DVector<T>, direction: DVector<T>) -> Result<Self> {
        Self::affine(Subspace::span(&[direction]), point)
    }

    /// Whether the set has nonempty interior and a boundary in the catalog sense.
    pub fn is_solid(&self) -> bool {
        matches!(self, Self::Halfspace { .. } | Self::Ball { .. } | Self::AbsConeR2)
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Self::Sphere { .. } | Self::Implicit(_))
    }

    fn check_dim(&self, x: &DVector<T>) -> Result<()> {
        let n = Projectable::<T>::ambient_dim(self);
        if x.len() != n {
            return Err(GapError::DimensionMismatch { expected: n, found: x.len() });
        }
        Ok(())
    }

    /// Euclidean distance to the set.
    pub fn distance(&self, x: &DVector<T>) -> Result<T> {
        Ok(self.dist_sq(x)?.sqrt())
    }

    /// Whether the distance from `x` to the set is at most `tol`. Implicit
    /// manifolds use `‖F(x)‖ ≤ tol·‖DF(x)‖`.
    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        if self.check_dim(x).is_err() {
            return false;
        }
        match self {
            Self::Implicit(m) => {
                let jn = crate::subspace::spectral_norm(&m.map().jacobian(x));
                m.residual_norm(x) <= tol * jn
            }
            _ => self.distance(x).map(|d| d <= tol).unwrap_or(false),
        }
    }

    /// Tangent space of the set at `x`, or of its boundary for solid sets.
    pub fn tangent_space(&self, x: &DVector<T>) -> Result<TangentSpaceResult<T>>
    where
        T: Serialize,
    {
        self.check_dim(x)?;
        let tol = lit::<T>(ON_SET_TOL);
        let not_on = || GapError::Precondition("point is not on the set or its boundary".into());
        let n = x.len();
        let subspace = match self {
            Self::LinearSubspace(s) => {
                if !s.contains_vector(x, tol) {
                    return Err(not_on());
                }
                s.clone()
            }
            Self::AffineSubspace { direction, offset } => {
                if !direction.contains_vector(&(x - offset), tol) {
                    return Err(not_on());
                }
                direction.clone()
            }
            Self::LineR2 => {
                if x[1].abs() > tol {
                    return Err(not_on());
                }
                Subspace::span(&[DVector::from_vec(vec![T::one(), T::zero()])])
            }
            Self::Sphere { .. } | Self::Ball { .. } | Self::Halfspace { .. } | Self::AbsConeR2 => {
                let normal = self.boundary_normal(x)?;
                orthonormalize(&DMatrix::from_column_slice(n, 1, normal.as_slice())).complement()
            }
            Self::Implicit(m) => {
                if !self.contains(x, tol) {
                    return Err(not_on());
                }
                m.tangent(x)?
            }
        };
        Ok(TangentSpaceResult { subspace, base_point: x.iter().copied().collect() })
    }

    /// Outward unit normal of a solid set (or sphere) at a boundary point.
    pub fn boundary_normal(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x)?;
        let tol = lit::<T>(ON_SET_TOL);
        let not_on = || GapError::Precondition("point is not on the boundary".into());
        match self {
            Self::Ball { center, radius } | Self::Sphere { center, radius } => {
                let d = x - center;
                if (d.norm() - *radius).abs() > tol {
                    return Err(not_on());
                }
                let r = d.norm();
                Ok(d / r)
            }
            Self::Halfspace { normal, offset } => {
                if (normal.dot(x) - *offset).abs() > tol {
                    return Err(not_on());
                }
                Ok(normal.clone())
            }
            Self::AbsConeR2 => {
                let (a, b) = (x[0], x[1]);
                if (b - a.abs()).abs() > tol {
                    return Err(not_on());
                }
                if a.abs() <= tol {
                    return Err(GapError::NonsmoothPoint("apex of the cone".into()));
                }
                let s = T::one() / lit::<T>(2.0).sqrt();
                let sign = if a > T::zero() { T::one() } else { -T::one() };
                Ok(DVector::from_vec(vec![sign * s, -s]))
            }
            _ => Err(GapError::Precondition("set has no interior; boundary normal undefined".into())),
        }
    }
}

fn check_radius<T: Real>(r: T) -> Result<()> {
    if !(r > T::zero()) {
        return Err(GapError::Precondition("radius must be strictly positive".into()));
    }
    Ok(())
}

impl<T: Real> Projectable<T> for ProjectableSet<T> {
    fn ambient_dim(&self) -> usize {
        match self {
            Self::LinearSubspace(s) => s.ambient_dim(),
            Self::AffineSubspace { direction, .. } => direction.ambient_dim(),
            Self::Halfspace { normal, .. } => normal.len(),
            Self::Ball { center, .. } | Self::Sphere { center, .. } => center.len(),
            Self::AbsConeR2 | Self::LineR2 => 2,
            Self::Implicit(m) => m.ambient_dim(),
        }
    }

    fn project_labeled(&self, x: &DVector<T>) -> Result<(DVector<T>, FaceLabel)> {
        self.check_dim(x)?;
        Ok(match self {
            Self::LinearSubspace(s) => (s.project(x), FaceLabel::Manifold),
            Self::AffineSubspace { direction, offset } => {
                (offset + direction.project(&(x - offset)), FaceLabel::Manifold)
            }
            Self::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - *offset;
                if excess <= T::zero() {
                    (x.clone(), FaceLabel::Inside)
                } else {
                    (x - normal * excess, FaceLabel::Boundary)
                }
            }
            Self::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= *radius {
                    (x.clone(), FaceLabel::Inside)
                } else {
                    (center + d * (*radius / r), FaceLabel::Boundary)
                }
            }
            Self::Sphere { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= T::default_epsilon() * *radius {
                    return Err(GapError::Singularity(
                        "every sphere point is nearest to the center".into(),
                    ));
                }
                (center + d * (*radius / r), FaceLabel::Manifold)
            }
            Self::AbsConeR2 => PlanarPolyhedron::AbsCone.project_labeled(x)?,
            Self::LineR2 => PlanarPolyhedron::Line.project_labeled(x)?,
            Self::Implicit(m) => (m.project(x)?, FaceLabel::Manifold),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn catalog() -> Vec<ProjectableSet<f64>> {
        vec![
            ProjectableSet::LinearSubspace(Subspace::span(&[v(&[1.0, 2.0, 0.0]), v(&[0.0, 1.0, 1.0])])),
            ProjectableSet::affine(Subspace::span(&[v(&[1.0, -1.0, 0.5])]), v(&[0.3, 0.0, 2.0])).unwrap(),
            ProjectableSet::halfspace(v(&[1.0, 2.0, -1.0]), 0.5).unwrap(),
            ProjectableSet::ball(v(&[0.5, -0.5, 1.0]), 1.3).unwrap(),
            ProjectableSet::sphere(v(&[0.0, 0.0, 0.0]), 2.0).unwrap(),
            ProjectableSet::Implicit(ImplicitManifold::new(Arc::new(SphereMap {
                center: v(&[0.0, 1.0, 0.0]),
                radius: 1.5,
            }))),
        ]
    }

    fn planar_catalog() -> Vec<ProjectableSet<f64>> {
        vec![ProjectableSet::AbsConeR2, ProjectableSet::LineR2]
    }

    #[test]
    fn projection_examples() {
        let h = ProjectableSet::halfspace(v(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(h.project(&v(&[3.0, 2.0])).unwrap(), v(&[3.0, 0.0]));
        let b = ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(b.project(&v(&[2.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        let g = (1.0 + 73f64.sqrt()) / 12.0;
        let p = ProjectableSet::AbsConeR2.project(&v(&[1.0, -g])).unwrap();
        assert_abs_diff_eq!(p, v(&[(1.0 - g) / 2.0, (1.0 - g) / 2.0]), epsilon = 1e-15);
    }

    #[test]
    fn relaxed_projection_examples() {
        let g = (1.0 + 73f64.sqrt()) / 12.0;
        let p0 = v(&[1.0, -g]);
        let r = ProjectableSet::AbsConeR2.relaxed_project(&p0, &1.5).unwrap();
        assert_abs_diff_eq!(r, v(&[1.0 - 3.0 * g, 3.0 - g]) / 4.0, epsilon = 1e-15);
        let p1 = ProjectableSet::LineR2.relaxed_project(&r, &1.5).unwrap();
        assert_abs_diff_eq!(p1, v(&[2.0 - 6.0 * g, -3.0 + g]) / 8.0, epsilon = 1e-15);
        for s in catalog() {
            let x = v(&[0.7, -0.2, 1.9]);
            assert_eq!(s.relaxed_project(&x, &0.0).unwrap(), x);
            assert_eq!(s.relaxed_project(&x, &1.0).unwrap(), s.project(&x).unwrap());
        }
    }

    #[test]
    fn tangent_space_examples() {
        let circle = ProjectableSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        let t = circle.tangent_space(&v(&[1.0, 0.0])).unwrap().subspace;
        assert_abs_diff_eq!(t.projector(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), epsilon = 1e-14);
        let curve = ProjectableSet::Implicit(ImplicitManifold::new(Arc::new(ParabolaCurve)));
        let t = curve.tangent_space(&v(&[0.0, 0.0, 0.0])).unwrap().subspace;
        assert_eq!(t.dim(), 1);
        assert_abs_diff_eq!(t.projector()[(0, 0)], 1.0, epsilon = 1e-14);
        let dir = Subspace::span(&[v(&[1.0, 1.0, 0.0])]);
        let aff = ProjectableSet::affine(dir.clone(), v(&[0.0, 0.0, 3.0])).unwrap();
        let t = aff.tangent_space(&v(&[2.0, 2.0, 3.0])).unwrap().subspace;
        assert_abs_diff_eq!(t.projector(), dir.projector(), epsilon = 1e-14);
        assert!(aff.tangent_space(&v(&[2.0, 2.0, 2.0])).is_err());
        assert!(matches!(
            ProjectableSet::<f64>::AbsConeR2.tangent_space(&v(&[0.0, 0.0])),
            Err(GapError::NonsmoothPoint(_))
        ));
    }

    #[test]
    fn boundary_normal_examples() {
        let b = ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_abs_diff_eq!(b.boundary_normal(&v(&[0.0, 1.0])).unwrap(), v(&[0.0, 1.0]), epsilon = 1e-15);
        let h = ProjectableSet::halfspace(v(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(h.boundary_normal(&v(&[5.0, 0.0])).unwrap(), v(&[0.0, 1.0]));
        let x = v(&[0.0, 2.0]);
        let px = b.project(&x).unwrap();
        let identity = (&x - &px) / (&x - &px).norm();
        assert_abs_diff_eq!(b.boundary_normal(&px).unwrap(), identity, epsilon = 1e-15);
        assert!(ProjectableSet::<f64>::LineR2.boundary_normal(&v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn membership_examples() {
        assert!(ProjectableSet::AbsConeR2.contains(&v(&[0.0, 1.0]), 1e-10));
        assert!(!ProjectableSet::AbsConeR2.contains(&v(&[1.0, 0.5]), 1e-10));
        let b = ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(b.contains(&v(&[1.0 + 1e-12, 0.0]), 1e-10));
        assert!(!b.contains(&v(&[1.0, 0.0, 0.0]), 1e-10));
    }

    #[test]
    fn constructor_validation() {
        assert!(ProjectableSet::ball(v(&[0.0]), 0.0).is_err());
        assert!(ProjectableSet::sphere(v(&[0.0]), -1.0).is_err());
        assert!(ProjectableSet::halfspace(v(&[0.0, 0.0]), 1.0).is_err());
        let h = ProjectableSet::halfspace(v(&[3.0, 4.0]), 10.0).unwrap();
        if let ProjectableSet::Halfspace { normal, offset } = h {
            assert_abs_diff_eq!(normal.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(offset, 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sphere_center_is_singular() {
        let s = ProjectableSet::sphere(v(&[1.0, 1.0]), 1.0).unwrap();
        assert!(matches!(s.project(&v(&[1.0, 1.0])), Err(GapError::Singularity(_))));
    }

    fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-6;
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = h;
            j.set_column(k, &((f(&(x + &e)) - f(&(x - &e))) / (2.0 * h)));
        }
        j
    }

    #[test]
    fn manifold_projection_jacobian_is_tangent_projector() {
        let manifolds = vec![
            (ProjectableSet::sphere(v(&[0.0, 0.0, 0.0]), 1.0).unwrap(), v(&[0.6, 0.0, 0.8])),
            (
                ProjectableSet::Implicit(ImplicitManifold::new(Arc::new(ParabolaCurve))),
                v(&[0.5, 0.0, 0.25]),
            ),
            (
                ProjectableSet::Implicit(ImplicitManifold::new(Arc::new(SphereMap {
                    center: v(&[0.0, 0.0]),
                    radius: 2.0,
                }))),
                v(&[2.0f64.sqrt(), 2.0f64.sqrt()]),
            ),
        ];
        for (m, xbar) in manifolds {
            let t = m.tangent_space(&xbar).unwrap().subspace.projector();
            let j = fd_jacobian(|y| m.project(y).unwrap(), &xbar);
            assert_abs_diff_eq!(j, t, epsilon = 1e-5);
            for alpha in [0.5, 1.5, 2.0] {
                let j = fd_jacobian(|y| m.relaxed_project(y, &alpha).unwrap(), &xbar);
                let n = xbar.len();
                let expected = DMatrix::identity(n, n) * (1.0 - alpha) + &t * alpha;
                assert_abs_diff_eq!(j, expected, epsilon = 1e-5);
            }
        }
    }

    fn point3() -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-3.0..3.0f64, 3).prop_map(DVector::from_vec)
    }

    fn point2() -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-3.0..3.0f64, 2).prop_map(DVector::from_vec)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn projection_is_idempotent(x in point3(), y in point2()) {
            for s in catalog() {
                let p = s.project(&x).unwrap();
                let pp = s.project(&p).unwrap();
                prop_assert!((&pp - &p).norm() <= 1e-9);
                prop_assert!(s.contains(&p, 1e-10));
            }
            for s in planar_catalog() {
                let p = s.project(&y).unwrap();
                prop_assert!((s.project(&p).unwrap() - &p).norm() <= 1e-9);
            }
        }

        #[test]
        fn convex_projection_is_nonexpansive(x in point3(), y in point3(), a in point2(), b in point2()) {
            for s in catalog().into_iter().filter(|s| s.is_convex()) {
                let d = (s.project(&x).unwrap() - s.project(&y).unwrap()).norm();
                prop_assert!(d <= (&x - &y).norm() + 1e-12);
            }
            for s in planar_catalog() {
                let d = (s.project(&a).unwrap() - s.project(&b).unwrap()).norm();
                prop_assert!(d <= (&a - &b).norm() + 1e-12);
            }
        }

        #[test]
        fn variational_inequality(x in point3(), y in point3(), a in point2(), b in point2()) {
            for s in catalog().into_iter().filter(|s| s.is_convex()) {
                let px = s.project(&x).unwrap();
                let member = s.project(&y).unwrap();
                prop_assert!((&x - &px).dot(&(member - &px)) <= 1e-10);
            }
            for s in planar_catalog() {
                let pa = s.project(&a).unwrap();
                let member = s.project(&b).unwrap();
                prop_assert!((&a - &pa).dot(&(member - &pa)) <= 1e-10);
            }
        }

        #[test]
        fn over_relaxed_ball_projection_lands_inside(
            theta in 0.0..std::f64::consts::TAU,
            delta in 1e-6..1e-2f64,
            alpha in 1.01..2.0f64,
        ) {
            let b = ProjectableSet::ball(v(&[0.3, -0.2]), 1.0).unwrap();
            let x = v(&[0.3 + (1.0 + delta) * theta.cos(), -0.2 + (1.0 + delta) * theta.sin()]);
            let r = b.relaxed_project(&x, &alpha).unwrap();
            prop_assert!((&r - v(&[0.3, -0.2])).norm() < 1.0);
        }
    }
}
