//! The two planar polyhedra of the nonidentification example: the cone
//! `C = {(x, y) : y ≥ |x|}` and the line `D = {(x, y) : y = 0}`.
//!
//! Their projections use only field operations, so they run unchanged on
//! exact scalars.

use super::{FaceLabel, Projectable};
use crate::error::{GapError, Result};
use crate::scalar::{abs, Field};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanarPolyhedron {
    /// `{(x, y) : y ≥ |x|}`.
    AbsCone,
    /// `{(x, y) : y = 0}`.
    Line,
}

fn half<T: Field>() -> T {
    T::one() / (T::one() + T::one())
}

fn check_planar<T: Field>(x: &DVector<T>) -> Result<()> {
    if x.len() != 2 {
        return Err(GapError::DimensionMismatch { expected: 2, found: x.len() });
    }
    Ok(())
}

impl<T: Field> Projectable<T> for PlanarPolyhedron {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn project_labeled(&self, x: &DVector<T>) -> Result<(DVector<T>, FaceLabel)> {
        check_planar(x)?;
        let (a, b) = (x[0].clone(), x[1].clone());
        match self {
            PlanarPolyhedron::Line => {
                if b == T::zero() {
                    Ok((x.clone(), FaceLabel::Inside))
                } else {
                    Ok((DVector::from_vec(vec![a, T::zero()]), FaceLabel::Manifold))
                }
            }
            PlanarPolyhedron::AbsCone => {
                let m = abs(&a);
                if b >= m {
                    Ok((x.clone(), FaceLabel::Inside))
                } else if b <= -m {
                    Ok((DVector::from_vec(vec![T::zero(), T::zero()]), FaceLabel::Apex))
                } else if a > T::zero() {
                    let t = (a + b) * half();
                    Ok((DVector::from_vec(vec![t.clone(), t]), FaceLabel::RightFace))
                } else {
                    let t = (a - b.clone()) * half();
                    Ok((DVector::from_vec(vec![t.clone(), -t]), FaceLabel::LeftFace))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::QuadSurd;
    use num_traits::Zero;

    type Q = QuadSurd<73>;

    fn gamma() -> Q {
        (Q::ratio(1, 1) + Q::sqrt_d()) / Q::ratio(12, 1)
    }

    #[test]
    fn cone_regions() {
        let c = PlanarPolyhedron::AbsCone;
        let p = |x: f64, y: f64| c.project_labeled(&DVector::from_vec(vec![x, y])).unwrap();
        assert_eq!(p(0.0, 1.0).1, FaceLabel::Inside);
        assert_eq!(p(1.0, 0.5).0, DVector::from_vec(vec![0.75, 0.75]));
        assert_eq!(p(-1.0, 0.5).0, DVector::from_vec(vec![-0.75, 0.75]));
        assert_eq!(p(0.0, -1.0), (DVector::from_vec(vec![0.0, 0.0]), FaceLabel::Apex));
        assert_eq!(p(1.0, -1.0).1, FaceLabel::Apex);
    }

    #[test]
    fn exact_projection_of_start_point() {
        let g = gamma();
        let p0 = DVector::from_vec(vec![Q::ratio(1, 1), -g.clone()]);
        let (y, label) = PlanarPolyhedron::AbsCone.project_labeled(&p0).unwrap();
        assert_eq!(label, FaceLabel::RightFace);
        let expected = (Q::ratio(1, 1) - g.clone()) / Q::ratio(2, 1);
        assert_eq!(y, DVector::from_vec(vec![expected.clone(), expected]));
        let r = PlanarPolyhedron::AbsCone.relaxed_project(&p0, &Q::ratio(3, 2)).unwrap();
        let quarter = Q::ratio(1, 4);
        assert_eq!(r[0], quarter.clone() * (Q::ratio(1, 1) - Q::ratio(3, 1) * g.clone()));
        assert_eq!(r[1], quarter * (Q::ratio(3, 1) - g.clone()));
        let p1 = PlanarPolyhedron::Line.relaxed_project(&r, &Q::ratio(3, 2)).unwrap();
        let eighth = Q::ratio(1, 8);
        assert_eq!(p1[0], eighth.clone() * (Q::ratio(2, 1) - Q::ratio(6, 1) * g.clone()));
        assert_eq!(p1[1], eighth * (Q::ratio(-3, 1) + g));
    }

    #[test]
    fn line_projection() {
        let (y, l) = PlanarPolyhedron::Line
            .project_labeled(&DVector::from_vec(vec![2.0, -3.0]))
            .unwrap();
        assert_eq!(y, DVector::from_vec(vec![2.0, 0.0]));
        assert_eq!(l, FaceLabel::Manifold);
        assert!(PlanarPolyhedron::Line
            .dist_sq(&DVector::from_vec(vec![Q::ratio(5, 1), Q::zero()]))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn wrong_dimension() {
        assert!(PlanarPolyhedron::Line
            .project_labeled(&DVector::from_vec(vec![1.0, 2.0, 3.0]))
            .is_err());
    }
}
