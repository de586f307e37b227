//! Linear subspaces of R^n held as orthonormal bases, together with
//! principal angles, intersections and a generator for pairs with
//! prescribed angles.

use crate::error::{GapError, Result};
use crate::linalg::{singular_values, svd};
use crate::scalar::{lit, Real};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// Default threshold below which a principal angle counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-10;

/// A subspace of R^n represented by an n×k matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T: Real> {
    basis: DMatrix<T>,
}

impl<T: Real> Subspace<T> {
    /// Wraps a basis that is already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<T>) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::<T>::identity(k, k)).amax();
        let tol = lit::<T>(1e3) * T::default_epsilon() * lit::<T>((k.max(1)) as f64);
        if dev > tol {
            return Err(GapError::Precondition(format!(
                "basis is not orthonormal (deviation {dev:?})"
            )));
        }
        Ok(Self { basis })
    }

    /// The zero subspace of R^n.
    pub fn trivial(n: usize) -> Self {
        Self { basis: DMatrix::zeros(n, 0) }
    }

    /// The whole space R^n.
    pub fn full(n: usize) -> Self {
        Self { basis: DMatrix::identity(n, n) }
    }

    /// Span of the given vectors.
    pub fn span(vectors: &[DVector<T>]) -> Self {
        let n = vectors.first().map_or(0, |v| v.len());
        orthonormalize(&DMatrix::from_columns(vectors).resize(n, vectors.len(), T::zero()))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> DMatrix<T> {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, x: &DVector<T>) -> DVector<T> {
        &self.basis * (self.basis.transpose() * x)
    }

    /// Orthogonal complement in R^n.
    pub fn complement(&self) -> Self {
        let n = self.ambient_dim();
        if self.dim() == n {
            return Self::trivial(n);
        }
        orthonormalize(&(DMatrix::identity(n, n) - self.projector()))
    }

    /// The sum `self + other`.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        check_same_ambient(self, other)?;
        let n = self.ambient_dim();
        let mut m = DMatrix::zeros(n, self.dim() + other.dim());
        m.columns_mut(0, self.dim()).copy_from(&self.basis);
        m.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Ok(orthonormalize(&m))
    }

    /// Spectral norm of the difference of the two projectors.
    pub fn projector_distance(&self, other: &Self) -> Result<T> {
        check_same_ambient(self, other)?;
        let d = self.projector() - other.projector();
        Ok(spectral_norm(&d))
    }

    pub fn contains_vector(&self, v: &DVector<T>, tol: T) -> bool {
        (v - self.project(v)).norm() <= tol
    }
}

impl<T: Real + Serialize> Serialize for Subspace<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let columns: Vec<Vec<T>> = self
            .basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        let mut st = s.serialize_struct("Subspace", 3)?;
        st.serialize_field("ambient_dim", &self.ambient_dim())?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("basis", &columns)?;
        st.end()
    }
}

/// Largest singular value of `m` (zero for empty matrices).
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    singular_values(m).first().copied().unwrap_or(T::zero())
}

fn check_same_ambient<T: Real>(u: &Subspace<T>, v: &Subspace<T>) -> Result<()> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(GapError::DimensionMismatch {
            expected: u.ambient_dim(),
            found: v.ambient_dim(),
        });
    }
    Ok(())
}

/// Orthonormal basis of the column space of `vectors`.
///
/// Columns of the left singular factor are kept while their singular value
/// exceeds `1e-10` times the largest one.
pub fn orthonormalize<T: Real>(vectors: &DMatrix<T>) -> Subspace<T> {
    let n = vectors.nrows();
    if n == 0 || vectors.ncols() == 0 {
        return Subspace::trivial(n);
    }
    let d = svd(vectors);
    let sv = &d.singular_values;
    let smax = sv.first().copied().unwrap_or(T::zero());
    if smax == T::zero() {
        return Subspace::trivial(n);
    }
    let thresh = smax * lit::<T>(RANK_TOL);
    let u = d.u;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thresh).collect();
    let cols: Vec<DVector<T>> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    Subspace {
        basis: DMatrix::from_columns(&cols),
    }
}

/// Principal angles between two subspaces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrincipalAngleSet<T> {
    /// Nondecreasing angles in `[0, π/2]`, `min(p, q)` of them.
    pub angles: Vec<T>,
    /// Number of angles at or below the zero tolerance, i.e. `dim(U ∩ V)`.
    pub intersection_dim: usize,
    /// Smallest angle above the zero tolerance.
    pub friedrichs: Option<T>,
}

impl<T: Real> PrincipalAngleSet<T> {
    /// Angles strictly above the zero tolerance.
    pub fn nonzero(&self) -> &[T] {
        &self.angles[self.intersection_dim..]
    }
}

/// Orders the pair so the first subspace has the smaller dimension.
fn smaller_first<'a, T: Real>(
    u: &'a Subspace<T>,
    v: &'a Subspace<T>,
) -> (&'a Subspace<T>, &'a Subspace<T>) {
    if u.dim() <= v.dim() {
        (u, v)
    } else {
        (v, u)
    }
}

/// Principal angles of `(U, V)`.
///
/// Cosines are the singular values of `UᵀV`. Angles below π/4 are taken
/// instead from the sines, the singular values of `(I − P_V)U`, which keeps
/// small angles accurate to machine precision.
pub fn principal_angles<T: Real>(
    u: &Subspace<T>,
    v: &Subspace<T>,
    zero_tol: T,
) -> Result<PrincipalAngleSet<T>> {
    check_same_ambient(u, v)?;
    if u.dim().min(v.dim()) == 0 {
        return Err(GapError::Precondition(
            "principal angles need two nontrivial subspaces".into(),
        ));
    }
    let (a, b) = smaller_first(u, v);
    let k = a.dim();
    let one = T::one();
    let cosines: Vec<T> = singular_values(&(a.basis.transpose() * &b.basis))
        .iter()
        .map(|c| c.clamp(T::zero(), one))
        .collect();
    let residual = &a.basis - &b.basis * (b.basis.transpose() * &a.basis);
    let mut sines: Vec<T> = singular_values(&residual)
        .iter()
        .map(|s| s.clamp(T::zero(), one))
        .collect();
    sines.reverse();
    let quarter = T::frac_pi_4();
    let mut angles = Vec::with_capacity(k);
    for i in 0..k {
        let from_cos = cosines[i].acos();
        let theta = if from_cos < quarter { sines[i].asin() } else { from_cos };
        let prev = angles.last().copied().unwrap_or(T::zero());
        angles.push(theta.max(prev));
    }
    let intersection_dim = angles.iter().filter(|t| **t <= zero_tol).count();
    let friedrichs = angles.get(intersection_dim).copied();
    Ok(PrincipalAngleSet {
        angles,
        intersection_dim,
        friedrichs,
    })
}

/// `cos θ_F`, absent when every angle is within `zero_tol` of zero.
pub fn friedrichs_cosine<T: Real>(
    u: &Subspace<T>,
    v: &Subspace<T>,
    zero_tol: T,
) -> Result<Option<T>> {
    Ok(principal_angles(u, v, zero_tol)?.friedrichs.map(|t| t.cos()))
}

/// `U ∩ V`, spanned by the principal vectors whose angle is at most `zero_tol`.
pub fn intersect<T: Real>(u: &Subspace<T>, v: &Subspace<T>, zero_tol: T) -> Result<Subspace<T>> {
    check_same_ambient(u, v)?;
    let n = u.ambient_dim();
    if u.dim().min(v.dim()) == 0 {
        return Ok(Subspace::trivial(n));
    }
    let (a, b) = smaller_first(u, v);
    let residual = &a.basis - &b.basis * (b.basis.transpose() * &a.basis);
    let d = svd(&residual);
    let cols: Vec<DVector<T>> = (0..d.singular_values.len())
        .filter(|&i| d.singular_values[i].min(T::one()).asin() <= zero_tol)
        .map(|i| &a.basis * d.v.column(i))
        .collect();
    if cols.is_empty() {
        return Ok(Subspace::trivial(n));
    }
    Ok(orthonormalize(&DMatrix::from_columns(&cols)))
}

/// A seeded Haar-like random orthogonal n×n matrix: the Q factor of a
/// standard normal matrix.
pub fn random_orthogonal<T: Real>(n: usize, seed: u64) -> DMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<T>::from_fn(n, n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        lit(z)
    });
    g.qr().q()
}

/// A seeded random k-dimensional subspace of R^n.
pub fn random_subspace<T: Real>(n: usize, k: usize, seed: u64) -> Subspace<T> {
    let d = random_orthogonal::<T>(n, seed);
    Subspace {
        basis: d.columns(0, k).into_owned(),
    }
}

/// Builds `(U, V)` with `dim U = p`, `dim V = q` and the given principal
/// angles, rotated by a seeded random orthogonal matrix `D`.
///
/// With `p ≤ q`, `u_i = d_i` and `v_i = cos θ_i d_i + sin θ_i d'_i` where a
/// fresh column `d'_i` is used only for nonzero angles; the remaining
/// `q − p` vectors of `V` take further fresh columns. This needs
/// `p + q − #{θ_i = 0} ≤ n`. When `p > q` the roles are swapped.
pub fn construct_pair_with_angles<T: Real>(
    n: usize,
    p: usize,
    q: usize,
    angles: &[T],
    seed: u64,
) -> Result<(Subspace<T>, Subspace<T>)> {
    if p > q {
        let (v, u) = construct_pair_with_angles(n, q, p, angles, seed)?;
        return Ok((u, v));
    }
    if n == 0 || q > n {
        return Err(GapError::Precondition(format!(
            "subspace dimensions p={p}, q={q} do not fit in R^{n}"
        )));
    }
    if angles.len() != p {
        return Err(GapError::Precondition(format!(
            "expected {p} angles, got {}",
            angles.len()
        )));
    }
    let half_pi = T::frac_pi_2();
    if angles.iter().any(|t| *t < T::zero() || *t > half_pi) {
        return Err(GapError::Precondition("angles must lie in [0, π/2]".into()));
    }
    if angles.windows(2).any(|w| w[1] < w[0]) {
        return Err(GapError::Precondition("angles must be nondecreasing".into()));
    }
    let zeros = angles.iter().filter(|t| **t == T::zero()).count();
    let needed = p + q - zeros;
    if needed > n {
        return Err(GapError::Precondition(format!(
            "p + q − #zero angles = {needed} exceeds n = {n}"
        )));
    }
    let d = random_orthogonal::<T>(n, seed);
    let mut next = p;
    let mut u_cols = Vec::with_capacity(p);
    let mut v_cols = Vec::with_capacity(q);
    for (i, &theta) in angles.iter().enumerate() {
        let di = d.column(i).into_owned();
        if theta == T::zero() {
            v_cols.push(di.clone());
        } else {
            let fresh = d.column(next);
            next += 1;
            v_cols.push(&di * theta.cos() + fresh * theta.sin());
        }
        u_cols.push(di);
    }
    for _ in p..q {
        v_cols.push(d.column(next).into_owned());
        next += 1;
    }
    let basis_of = |cols: &[DVector<T>]| {
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    Ok((
        Subspace { basis: basis_of(&u_cols) },
        Subspace { basis: basis_of(&v_cols) },
    ))
}
