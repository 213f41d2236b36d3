//! Grassmannian primitives: orthonormal frames, projection matrices,
//! Hilbert-Schmidt distance, Haar sampling and complements.
//!
//! Subspaces are compared through their projection matrices only; two
//! [`Subspace`] values with different bases may describe the same point of
//! the Grassmannian.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Gram deviation accepted when a caller hands in an orthonormal frame.
pub const FRAME_TOL: f64 = 1e-10;
/// Relative residual below which Gram-Schmidt declares a vector dependent.
pub const RANK_TOL: f64 = 1e-10;

/// A `d`-dimensional subspace of `R^N`, stored as an `N x d` orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

/// Orthogonal projection onto some subspace, as a dense `N x N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    entries: DMatrix<f64>,
}

/// Largest entrywise deviation of `QᵀQ` from the identity.
pub fn gram_deviation(frame: &DMatrix<f64>) -> f64 {
    let gram = frame.transpose() * frame;
    let k = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthonormalizes the columns of `m` by Householder QR, fixing signs so that
/// the triangular factor has a nonnegative diagonal.
pub fn orthonormalize_frame(m: DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

impl Subspace {
    /// Wraps an orthonormal frame, rejecting frames whose Gram deviation
    /// exceeds [`FRAME_TOL`].
    pub fn from_frame(basis: DMatrix<f64>) -> Result<Self> {
        let (n, d) = basis.shape();
        if d == 0 || d > n {
            return Err(Error::InvalidDimension(format!(
                "subspace dimension {d} in ambient dimension {n}"
            )));
        }
        let dev = gram_deviation(&basis);
        if dev > FRAME_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self { basis })
    }

    /// Span of arbitrary linearly independent vectors.
    pub fn span_of(vectors: &[DVector<f64>]) -> Result<Self> {
        let ortho = gram_schmidt(vectors)?;
        Self::from_frame(DMatrix::from_columns(&ortho))
    }

    pub(crate) fn from_frame_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// The full space `R^n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::from_frame(DMatrix::identity(n, n))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projection_matrix(&self) -> ProjectionMatrix {
        ProjectionMatrix {
            entries: &self.basis * self.basis.transpose(),
        }
    }

    /// `‖Px‖²`, computed through the frame as `‖Bᵀx‖²`.
    pub fn project_norm_sq(&self, x: &DVector<f64>) -> f64 {
        (self.basis.transpose() * x).norm_squared()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * x)
    }

    pub fn hs_distance(&self, other: &Subspace) -> Result<f64> {
        hs_distance(&self.projection_matrix(), &other.projection_matrix())
    }
}

impl ProjectionMatrix {
    /// Wraps a matrix without checking the projection invariants; use
    /// [`ProjectionMatrix::invariant_violation`] to audit it.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidDimension(format!(
                "projection matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Rank implied by the trace, rounded to the nearest integer.
    pub fn rank(&self) -> usize {
        self.trace().round().max(0.0) as usize
    }

    /// `I - P`.
    pub fn complement(&self) -> ProjectionMatrix {
        let n = self.ambient_dim();
        ProjectionMatrix {
            entries: DMatrix::identity(n, n) - &self.entries,
        }
    }

    /// Largest of: asymmetry, idempotency defect, and distance of the trace
    /// from the nearest integer.
    pub fn invariant_violation(&self) -> f64 {
        let p = &self.entries;
        let asym = (p - p.transpose()).amax();
        let idem = (p * p - p).amax();
        let tr = p.trace();
        asym.max(idem).max((tr - tr.round()).abs())
    }

    /// `xᵀ P x`, equal to `‖Px‖²` for a projection.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.entries * x))
    }

    /// Orthonormal frame of the range, recovered from the columns with
    /// largest diagonal entries.
    pub fn to_subspace(&self) -> Result<Subspace> {
        let n = self.ambient_dim();
        let rank = self.rank();
        if rank == 0 {
            return Err(Error::InvalidDimension("projection of rank 0".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.entries[(b, b)].total_cmp(&self.entries[(a, a)]));
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rank);
        for &col in &order {
            if basis.len() == rank {
                break;
            }
            let mut v = self.entries.column(col).into_owned();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&v);
                    v -= q * c;
                }
            }
            let norm = v.norm();
            if norm > 1e-8 {
                basis.push(v / norm);
            }
        }
        if basis.len() < rank {
            return Err(Error::Degenerate(
                "columns of the projection do not span a space of the traced rank".into(),
            ));
        }
        Subspace::from_frame(DMatrix::from_columns(&basis))
    }
}

/// Haar-distributed `d`-dimensional subspace of `R^n`.
pub fn random_subspace<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<Subspace> {
    if d == 0 || d > n {
        return Err(Error::InvalidDimension(format!(
            "cannot draw a {d}-dimensional subspace of R^{n}"
        )));
    }
    let g = rng::gaussian_matrix(n, d, rng);
    Ok(Subspace::from_frame_unchecked(orthonormalize_frame(g)))
}

/// Hilbert-Schmidt (Frobenius) distance between two projections.
pub fn hs_distance(p: &ProjectionMatrix, q: &ProjectionMatrix) -> Result<f64> {
    if p.ambient_dim() != q.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.ambient_dim(),
            got: q.ambient_dim(),
        });
    }
    Ok((p.matrix() - q.matrix()).norm())
}

pub fn orth_complement(s: &Subspace) -> Result<Subspace> {
    let (n, d) = (s.ambient_dim(), s.dim());
    if d == n {
        return Err(Error::EmptyComplement);
    }
    let full = extend_to_onb(&s.basis_vectors(), n)?;
    Ok(Subspace::from_frame_unchecked(DMatrix::from_columns(
        &full[d..],
    )))
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
pub fn gram_schmidt(vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for (idx, v) in vectors.iter().enumerate() {
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
        }
        let scale = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if scale == 0.0 || norm <= RANK_TOL * scale {
            return Err(Error::LinearDependence { index: idx + 1 });
        }
        out.push(w / norm);
    }
    Ok(out)
}

/// Completes `partial` (orthonormal) to an orthonormal basis of `R^n`,
/// leaving the given vectors in front and unchanged.
pub fn extend_to_onb(partial: &[DVector<f64>], n: usize) -> Result<Vec<DVector<f64>>> {
    if partial.len() > n {
        return Err(Error::InvalidDimension(format!(
            "{} vectors cannot be part of a basis of R^{n}",
            partial.len()
        )));
    }
    if let Some(v) = partial.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let mut out: Vec<DVector<f64>> = partial.to_vec();
    while out.len() < n {
        // Greedy: the coordinate axis with the largest residual is always
        // well-conditioned, since the residual norms² sum to n - k.
        let best = (0..n)
            .map(|j| {
                let mut r = DVector::zeros(n);
                r[j] = 1.0;
                for _ in 0..2 {
                    for q in &out {
                        let c = q.dot(&r);
                        r.axpy(-c, q, 1.0);
                    }
                }
                r
            })
            .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
            .expect("n > 0 here");
        let norm = best.norm();
        out.push(best / norm);
    }
    Ok(out)
}

/// Largest principal angle the rotation sampler may use for a given nominal
/// rotation angle, chosen so that `‖P - H‖_HS ≤ √(2d(1 - cos angle))`.
pub fn max_principal_angle(angle: f64) -> f64 {
    (1.0 - angle.cos()).max(0.0).sqrt().min(1.0).asin()
}

/// Random subspace near `s`: moves along a Grassmann geodesic in a Gaussian
/// tangent direction, scaled so the largest principal angle is uniform on
/// `[0, max_principal_angle(angle)]`.
pub fn random_rotation_within<R: Rng + ?Sized>(
    s: &Subspace,
    angle: f64,
    rng: &mut R,
) -> Result<Subspace> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&angle) {
        return Err(Error::InvalidParameter(format!(
            "rotation angle {angle} outside [0, pi/2]"
        )));
    }
    let (n, d) = (s.ambient_dim(), s.dim());
    let y = s.basis();
    if d == n || angle == 0.0 {
        return Ok(s.clone());
    }
    let g = rng::gaussian_matrix(n, d, rng);
    let tangent = &g - y * (y.transpose() * &g);
    let svd = tangent.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sigma = svd.singular_values;
    let sigma_max = sigma.max();
    if sigma_max <= 1e-14 {
        return Ok(s.clone());
    }
    let top = max_principal_angle(angle) * rng.random::<f64>();
    let k = sigma.len();
    let thetas: Vec<f64> = sigma.iter().map(|&sv| top * sv / sigma_max).collect();
    let cos = DMatrix::from_diagonal(&DVector::from_iterator(k, thetas.iter().map(|t| t.cos())));
    let sin = DMatrix::from_diagonal(&DVector::from_iterator(k, thetas.iter().map(|t| t.sin())));
    let v = v_t.transpose();
    let moved = y * &v * cos * &v_t + u * sin * &v_t;
    Ok(Subspace::from_frame_unchecked(orthonormalize_frame(moved)))
}
