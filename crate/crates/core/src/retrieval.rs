//! Projection retrieval: measurement designs whose squared projection norms
//! `‖Px_i‖²` determine `P`, and the matching reconstructions.
//!
//! * The full design `{e_j} ∪ {e_j + e_k : j < k}` determines `P` outright:
//!   diagonal entries are read off and off-diagonals follow from
//!   `2 P_jk = ‖P(e_j + e_k)‖² - P_jj - P_kk`.
//! * The reduced design keeps `N - 1` diagonal probes, the pairs touching the
//!   first `d` coordinates, and one random unit vector. The first `d - 1`
//!   columns then fix all but one basis vector, whose entries are known up to
//!   sign; the random probe selects among the finitely many sign patterns.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::unit_vector;
use crate::subspace::{gram_schmidt, ProjectionMatrix};

/// Tolerance for treating two measurement vectors as equal.
pub const INJECTIVITY_TOL: f64 = 1e-10;
/// Tolerance for accepting a sign candidate in the reduced reconstruction.
pub const CANDIDATE_TOL: f64 = 1e-8;
/// Orthogonality slack during sign enumeration. Magnitudes recovered through
/// square roots carry errors near `√ε`, so the search is looser than the final
/// consistency check.
const SEARCH_TOL: f64 = 1e-6;
/// Upper bound on enumerated sign patterns.
pub const SIGN_ENUMERATION_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Full,
    /// Reduced design for subspaces of dimension `d`; the probes are built
    /// for `min(d, N - d)` (larger subspaces go through their complement).
    Reduced { d: usize },
    Custom,
}

/// Ordered sampling points `x_i` in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDesign {
    n: usize,
    points: Vec<DVector<f64>>,
    kind: DesignKind,
}

/// Squared projection norms `‖Hx_i‖²`, aligned with a design's points.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
}

fn axis(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn axis_pair(n: usize, j: usize, k: usize) -> DVector<f64> {
    let mut v = axis(n, j);
    v[k] += 1.0;
    v
}

impl MeasurementDesign {
    pub fn custom(n: usize, points: Vec<DVector<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        Ok(Self {
            n,
            points,
            kind: DesignKind::Custom,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    /// Points as the columns of an `N x n` matrix.
    pub fn point_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.points)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Index of pair `(j, k)`, `j <= k`, in the full design's row-major order.
pub fn full_design_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < n);
    j * n - j * j.saturating_sub(1) / 2 + (k - j)
}

/// All `N(N+1)/2` points `e_j` (`j = k`) and `e_j + e_k` (`j < k`), row-major
/// over pairs `(j, k)` with `j <= k`.
pub fn full_design(n: usize) -> MeasurementDesign {
    let mut points = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        points.push(axis(n, j));
        for k in (j + 1)..n {
            points.push(axis_pair(n, j, k));
        }
    }
    MeasurementDesign {
        n,
        points,
        kind: DesignKind::Full,
    }
}

/// Number of points of the reduced design for `(N, d)`.
pub fn reduced_design_len(n: usize, d: usize) -> usize {
    let k = d.min(n - d);
    (n - 1) + (1..=k).map(|j| n - j).sum::<usize>() + 1
}

/// `e_i` for `i < N - 1`, `e_j + e_k` for `j < min(d, N-d)`, `k > j`, and one
/// uniformly random unit vector.
pub fn reduced_design<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<MeasurementDesign> {
    if d == 0 || d >= n {
        return Err(Error::InvalidDimension(format!(
            "reduced design needs 1 <= d < N, got d = {d}, N = {n}"
        )));
    }
    let k = d.min(n - d);
    let mut points = Vec::with_capacity(reduced_design_len(n, d));
    points.extend((0..n - 1).map(|i| axis(n, i)));
    for j in 0..k {
        for l in (j + 1)..n {
            points.push(axis_pair(n, j, l));
        }
    }
    points.push(unit_vector(n, rng));
    Ok(MeasurementDesign {
        n,
        points,
        kind: DesignKind::Reduced { d },
    })
}

/// `‖P x_i‖² = x_iᵀ P x_i` for every design point.
pub fn measure(p: &ProjectionMatrix, design: &MeasurementDesign) -> Result<MeasurementVector> {
    if p.ambient_dim() != design.n {
        return Err(Error::DimensionMismatch {
            expected: design.n,
            got: p.ambient_dim(),
        });
    }
    Ok(MeasurementVector {
        values: design.points.iter().map(|x| p.quadratic_form(x)).collect(),
    })
}

/// Reads `P` off full-design measurements.
pub fn reconstruct_from_full(m: &MeasurementVector, n: usize) -> Result<ProjectionMatrix> {
    let expected = n * (n + 1) / 2;
    if m.values.len() != expected {
        return Err(Error::Arity {
            needed: expected,
            got: m.values.len(),
        });
    }
    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        p[(j, j)] = m.values[full_design_index(n, j, j)];
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let pair = m.values[full_design_index(n, j, k)];
            let v = 0.5 * (pair - p[(j, j)] - p[(k, k)]);
            p[(j, k)] = v;
            p[(k, j)] = v;
        }
    }
    ProjectionMatrix::from_matrix(p)
}

/// Reconstructs a `d`-dimensional projection from reduced-design
/// measurements. Subspaces with `d > N/2` are recovered through their
/// complement.
pub fn reconstruct_from_reduced(
    m: &MeasurementVector,
    design: &MeasurementDesign,
    n: usize,
    d: usize,
) -> Result<ProjectionMatrix> {
    if d == 0 || d >= n {
        return Err(Error::InvalidDimension(format!("d = {d}, N = {n}")));
    }
    match design.kind {
        DesignKind::Reduced { d: design_d } if design_d == d || design_d == n - d => {}
        _ => {
            return Err(Error::InvalidParameter(
                "design was not built by reduced_design for this dimension".into(),
            ))
        }
    }
    if design.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: design.n,
        });
    }
    let expected = reduced_design_len(n, d);
    if m.values.len() != expected || design.len() != expected {
        return Err(Error::Arity {
            needed: expected,
            got: m.values.len(),
        });
    }
    if 2 * d > n {
        let complement_values: Vec<f64> = design
            .points
            .iter()
            .zip(&m.values)
            .map(|(x, v)| x.norm_squared() - v)
            .collect();
        let q = reconstruct_low_rank(&complement_values, design, n, n - d)?;
        return Ok(q.complement());
    }
    reconstruct_low_rank(&m.values, design, n, d)
}

fn reconstruct_low_rank(
    values: &[f64],
    design: &MeasurementDesign,
    n: usize,
    k: usize,
) -> Result<ProjectionMatrix> {
    // Diagonal: N - 1 probes, the last entry from trace(P) = k.
    let mut diag: Vec<f64> = values[..n - 1].to_vec();
    diag.push(k as f64 - diag.iter().sum::<f64>());

    // First k columns from the pair probes.
    let mut pair_offset = vec![0usize; k];
    let mut idx = n - 1;
    for (j, off) in pair_offset.iter_mut().enumerate() {
        *off = idx;
        idx += n - j - 1;
    }
    let entry = |row: usize, col: usize| -> f64 {
        if row == col {
            return diag[row];
        }
        let (j, l) = if col < row { (col, row) } else { (row, col) };
        0.5 * (values[pair_offset[j] + (l - j - 1)] - diag[j] - diag[l])
    };
    let columns: Vec<DVector<f64>> = (0..k)
        .map(|c| DVector::from_fn(n, |r, _| entry(r, c)))
        .collect();

    let known = if k > 1 {
        gram_schmidt(&columns[..k - 1]).map_err(|_| {
            Error::Degenerate("leading columns of the projection are linearly dependent".into())
        })?
    } else {
        Vec::new()
    };

    // |u_k|² entries: P_ii minus the mass already explained.
    let mut magnitude = Vec::with_capacity(n);
    for (i, &pii) in diag.iter().enumerate() {
        let rest: f64 = known.iter().map(|u| u[i] * u[i]).sum();
        let sq = pii - rest;
        if sq < -CANDIDATE_TOL {
            return Err(Error::Inconsistent);
        }
        magnitude.push(sq.max(0.0).sqrt());
    }

    let base: DMatrix<f64> = known
        .iter()
        .fold(DMatrix::zeros(n, n), |acc, u| acc + u * u.transpose());
    let probe = design.points.last().expect("reduced design is non-empty");
    let probe_value = *values.last().expect("aligned with the design");

    // The leading columns minus the known part form the rank-one block
    // u_k u_k[..k]ᵀ. Projecting a sign candidate onto its range recovers u_k
    // to working precision; square roots of tiny magnitudes alone cannot.
    let residual = DMatrix::from_fn(n, k, |r, c| columns[c][r] - base[(r, c)]);
    let polish = residual.norm() > 1e-6;

    let candidates = enumerate_sign_patterns(&magnitude, &known)?;
    let mut survivors: Vec<DMatrix<f64>> = Vec::new();
    for mut v in candidates {
        if polish {
            let w = &residual * (residual.transpose() * &v);
            let norm = w.norm();
            if norm > 0.0 {
                v = w / norm;
            }
        }
        let c = &base + &v * v.transpose();
        let fit = (probe.dot(&(&c * probe)) - probe_value).abs();
        if fit <= CANDIDATE_TOL {
            survivors.push(c);
        }
    }
    // Every measurement, not just the probe, must be reproduced.
    survivors.retain(|c| {
        design
            .points
            .iter()
            .zip(values)
            .all(|(x, &v)| (x.dot(&(c * x)) - v).abs() <= CANDIDATE_TOL)
    });
    let mut distinct: Vec<DMatrix<f64>> = Vec::new();
    for c in survivors {
        if !distinct.iter().any(|o| (o - &c).norm() <= CANDIDATE_TOL) {
            distinct.push(c);
        }
    }
    match distinct.len() {
        0 => Err(Error::Inconsistent),
        1 => ProjectionMatrix::from_matrix(distinct.pop().expect("one element")),
        _ => Err(Error::Ambiguous {
            candidates: distinct,
        }),
    }
}

/// All unit vectors with the given entry magnitudes that are orthogonal to
/// `known` (within `SEARCH_TOL`), up to a global sign. Depth-first over
/// the nonzero entries, pruning any branch whose partial inner products can
/// no longer return to zero.
fn enumerate_sign_patterns(magnitude: &[f64], known: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let n = magnitude.len();
    let support: Vec<usize> = (0..n).filter(|&i| magnitude[i] > 0.1 * SEARCH_TOL).collect();
    if support.is_empty() {
        return Err(Error::Inconsistent);
    }
    // remaining[t][j]: Σ over support[t..] of |v_i u_j,i|.
    let kk = known.len();
    let mut remaining = vec![vec![0.0; kk]; support.len() + 1];
    for t in (0..support.len()).rev() {
        let i = support[t];
        for j in 0..kk {
            remaining[t][j] = remaining[t + 1][j] + (magnitude[i] * known[j][i]).abs();
        }
    }

    struct Search<'a> {
        magnitude: &'a [f64],
        known: &'a [DVector<f64>],
        support: &'a [usize],
        remaining: &'a [Vec<f64>],
        signs: Vec<f64>,
        partial: Vec<f64>,
        visited: u64,
        found: Vec<DVector<f64>>,
    }

    impl Search<'_> {
        fn go(&mut self, t: usize) -> Result<()> {
            self.visited += 1;
            if self.visited > SIGN_ENUMERATION_CAP {
                return Err(Error::EnumerationCap(SIGN_ENUMERATION_CAP));
            }
            let feasible = self
                .partial
                .iter()
                .zip(&self.remaining[t])
                .all(|(p, r)| p.abs() <= r + SEARCH_TOL);
            if !feasible {
                return Ok(());
            }
            if t == self.support.len() {
                let n = self.magnitude.len();
                let mut v = DVector::zeros(n);
                for (s, &i) in self.signs.iter().zip(self.support) {
                    v[i] = s * self.magnitude[i];
                }
                self.found.push(v);
                return Ok(());
            }
            let i = self.support[t];
            let choices: &[f64] = if t == 0 { &[1.0] } else { &[1.0, -1.0] };
            for &s in choices {
                for (j, u) in self.known.iter().enumerate() {
                    self.partial[j] += s * self.magnitude[i] * u[i];
                }
                self.signs.push(s);
                self.go(t + 1)?;
                self.signs.pop();
                for (j, u) in self.known.iter().enumerate() {
                    self.partial[j] -= s * self.magnitude[i] * u[i];
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        magnitude,
        known,
        support: &support,
        remaining: &remaining,
        signs: Vec::with_capacity(support.len()),
        partial: vec![0.0; kk],
        visited: 0,
        found: Vec::new(),
    };
    search.go(0)?;
    Ok(search.found)
}

/// Whether `P` and `H` produce the same measurements on `design`.
pub fn check_injectivity_pair(
    design: &MeasurementDesign,
    p: &ProjectionMatrix,
    h: &ProjectionMatrix,
) -> Result<bool> {
    let a = measure(p, design)?;
    let b = measure(h, design)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .all(|(x, y)| (x - y).abs() <= INJECTIVITY_TOL))
}
