//! Adaptive tangent-plane recovery of the sleeve core `L`.
//!
//! Starting from `T = R^N`, each step picks a random unit point of the
//! current plane `T`, takes the gradient of `f` restricted to `T`, and
//! replaces `T` by the orthogonal complement of that gradient inside `T`.
//! Restricted gradients are normal to `L`, so after `N - d` steps `T = L`.
//!
//! [`atpc_exact`] uses exact gradients; [`atpe`] replaces them by forward
//! divided differences taken in the coordinates of the current plane, which
//! costs `i + 1` queries on an `i`-dimensional plane.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::{divided_difference_gradient, SleeveOracle};
use crate::profile::{min_samples, profile_from_direction, Profile1D, DEFAULT_DEGREE};
use crate::report::RecoveryReport;
use crate::rng::unit_vector;
use crate::subspace::{gram_deviation, orth_complement, Subspace};

/// Attempts per step before a vanishing gradient is reported as degenerate.
pub const MAX_RESAMPLES: usize = 16;
/// Gradient norm treated as zero (the measure-zero event `Px = 0`).
pub const VANISHING_GRADIENT: f64 = 1e-12;

/// Working state of the tangent-plane iteration.
#[derive(Debug, Clone)]
pub struct AtpeState {
    /// Orthonormal frame of the current plane `T^i` (`N x i`).
    basis: DMatrix<f64>,
    /// Accepted normals, in the order they were found.
    normals: Vec<DVector<f64>>,
}

impl AtpeState {
    pub fn new(n: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, n),
            normals: Vec::new(),
        }
    }

    /// Dimension `i` of the current plane.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    /// Uniform unit point of the current plane, in plane coordinates.
    pub fn sample_coords<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        unit_vector(self.dim(), rng)
    }

    pub fn to_ambient(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.basis * coords
    }

    /// Accepts the restricted gradient (in plane coordinates) as the next
    /// normal and shrinks the plane to its orthogonal complement.
    pub fn split(&mut self, coord_gradient: &DVector<f64>) -> Result<()> {
        let i = self.dim();
        if coord_gradient.len() != i {
            return Err(Error::DimensionMismatch {
                expected: i,
                got: coord_gradient.len(),
            });
        }
        let norm = coord_gradient.norm();
        if norm < VANISHING_GRADIENT {
            return Err(Error::Degenerate("restricted gradient vanishes".into()));
        }
        let w = coord_gradient / norm;
        // Householder reflection swapping w with ±e_k; its other columns span w⊥.
        let k = w.iamax();
        let mut v = w.clone();
        v[k] += w[k].signum();
        let scale = 2.0 / v.norm_squared();
        let reflector = DMatrix::identity(i, i) - (&v * v.transpose()) * scale;
        let keep: Vec<usize> = (0..i).filter(|&c| c != k).collect();
        let complement = reflector.select_columns(&keep);
        self.normals.push(&self.basis * &w);
        self.basis = &self.basis * complement;
        Ok(())
    }

    /// Gram deviation of the current frame together with all normals.
    pub fn gram_deviation(&self) -> f64 {
        let mut cols: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(self.normals.iter().cloned());
        gram_deviation(&DMatrix::from_columns(&cols))
    }

    pub fn plane(&self) -> Subspace {
        Subspace::from_frame_unchecked(self.basis.clone())
    }
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    if d == 0 || d >= n {
        return Err(Error::InvalidDimension(format!(
            "tangent-plane recovery needs 1 <= d < N, got d = {d}, N = {n}"
        )));
    }
    Ok(())
}

/// Runs the shrinking loop; `coord_gradient` returns the restricted gradient
/// at a plane point (given in plane coordinates).
fn shrink_until<R, G>(n: usize, d: usize, rng: &mut R, mut coord_gradient: G) -> Result<AtpeState>
where
    R: Rng + ?Sized,
    G: FnMut(&AtpeState, &DVector<f64>) -> DVector<f64>,
{
    let mut state = AtpeState::new(n);
    while state.dim() > d {
        let mut accepted = false;
        for _ in 0..MAX_RESAMPLES {
            let coords = state.sample_coords(rng);
            let grad = coord_gradient(&state, &coords);
            if grad.norm() >= VANISHING_GRADIENT {
                state.split(&grad)?;
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Degenerate(format!(
                "restricted gradient vanished {MAX_RESAMPLES} times on a {}-dimensional plane",
                state.dim()
            )));
        }
    }
    Ok(state)
}

/// Exact-gradient tangent-plane computation. `grad` must return `∇f`.
pub fn atpc_exact<R, G>(mut grad: G, n: usize, d: usize, rng: &mut R) -> Result<Subspace>
where
    R: Rng + ?Sized,
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    check_dims(n, d)?;
    let state = shrink_until(n, d, rng, |state, coords| {
        // ∇f^i = V_i V_iᵀ ∇f, expressed in plane coordinates.
        state.basis().transpose() * grad(&state.to_ambient(coords))
    })?;
    Ok(state.plane())
}

/// Closed-form query count of [`atpe`]: `Σ_{i=d+1..N} (i + 1)`.
pub fn atpe_query_budget(n: usize, d: usize) -> u64 {
    ((d + 1)..=n).map(|i| (i + 1) as u64).sum()
}

/// Query-only tangent-plane estimation of the `d`-dimensional core `L`.
///
/// The oracle's hidden subspace must be `L^⊥` (dimension `N - d`); it is
/// used only to score the result.
pub fn atpe<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    d: usize,
    h: f64,
    rng: &mut R,
) -> Result<RecoveryReport> {
    let n = oracle.ambient_dim();
    check_dims(n, d)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!("step size {h} outside (0, 1)")));
    }
    if oracle.hidden().dim() != n - d {
        return Err(Error::DimensionMismatch {
            expected: n - d,
            got: oracle.hidden().dim(),
        });
    }
    let started = Instant::now();
    let before = oracle.query_count();
    let state = shrink_until(n, d, rng, |state, coords| {
        let basis = state.basis();
        divided_difference_gradient(|c| oracle.evaluate(&(basis * c)), coords, h)
    })?;
    let estimate = state.plane();
    let truth = orth_complement(oracle.hidden())?;
    Ok(RecoveryReport {
        hs_error: estimate.hs_distance(&truth)?,
        estimate: estimate.projection_matrix(),
        queries: oracle.query_count() - before,
        iterations: 0,
        wall_ms: started.elapsed().as_millis() as u64,
        stalled: false,
    })
}

/// Recovers the profile after the core has been estimated.
///
/// Takes the divided-difference gradient at a random unit point of the
/// estimated normal space `L̃^⊥`, projects it back onto `L̃^⊥` and
/// normalizes it to `a`; then `f(t·a) ≈ g(t²)`, sampled on `t = i/m`.
/// Costs `(N + 1) + (m + 1)` queries.
pub fn recover_profile_after_atpe<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    core_estimate: &Subspace,
    m: usize,
    h: f64,
    rng: &mut R,
) -> Result<Profile1D> {
    let needed = min_samples(DEFAULT_DEGREE);
    if m + 1 < needed {
        return Err(Error::Arity { needed, got: m + 1 });
    }
    if core_estimate.ambient_dim() != oracle.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.ambient_dim(),
            got: core_estimate.ambient_dim(),
        });
    }
    let normal_space = orth_complement(core_estimate)?;
    for _ in 0..MAX_RESAMPLES {
        let eta = normal_space.basis() * unit_vector(normal_space.dim(), rng);
        let grad = divided_difference_gradient(|x| oracle.evaluate(x), &eta, h);
        let a = normal_space.project(&grad);
        let norm = a.norm();
        if norm >= VANISHING_GRADIENT {
            return profile_from_direction(oracle, &(a / norm), m);
        }
    }
    Err(Error::Degenerate(
        "gradient vanished at every sampled point".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::BuiltinProfile;
    use crate::rng::seeded;
    use crate::subspace::random_subspace;
    use nalgebra::dvector;

    fn oracle_with_core(core: &Subspace, profile: BuiltinProfile) -> SleeveOracle {
        SleeveOracle::new(orth_complement(core).unwrap(), profile)
    }

    #[test]
    fn recovers_the_axis_in_three_dimensions() {
        let core = Subspace::span_of(&[dvector![1.0, 0.0, 0.0]]).unwrap();
        let o = oracle_with_core(&core, BuiltinProfile::Identity);
        let est = atpc_exact(|x| o.analytic_gradient(x), 3, 1, &mut seeded(1)).unwrap();
        assert!(est.hs_distance(&core).unwrap() < 1e-10);
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn single_step_case() {
        let mut rng = seeded(2);
        let core = random_subspace(6, 7, &mut rng).unwrap();
        let o = oracle_with_core(&core, BuiltinProfile::Tanh);
        let est = atpc_exact(|x| o.analytic_gradient(x), 7, 6, &mut rng).unwrap();
        assert!(est.hs_distance(&core).unwrap() < 1e-8);
    }

    #[test]
    fn exact_recovery_on_random_instances() {
        let mut rng = seeded(3);
        for &d in &[1usize, 8] {
            for _ in 0..100 {
                let core = random_subspace(d, 10, &mut rng).unwrap();
                let o = oracle_with_core(&core, BuiltinProfile::Tanh);
                let est = atpc_exact(|x| o.analytic_gradient(x), 10, d, &mut rng).unwrap();
                assert!(est.hs_distance(&core).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn exact_normals_are_orthogonal_to_the_core_and_bookkeeping_stays_orthonormal() {
        let mut rng = seeded(4);
        let core = random_subspace(3, 9, &mut rng).unwrap();
        let o = oracle_with_core(&core, BuiltinProfile::Sin5);
        let mut state = AtpeState::new(9);
        while state.dim() > 3 {
            let x = state.to_ambient(&state.sample_coords(&mut rng));
            let g = state.basis().transpose() * o.analytic_gradient(&x);
            state.split(&g).unwrap();
            assert!(state.gram_deviation() <= 1e-10);
            let u = state.normals().last().unwrap();
            assert!(core.project(u).norm() <= 1e-9);
        }
    }

    #[test]
    fn divided_difference_bookkeeping_stays_orthonormal() {
        let mut rng = seeded(5);
        let mut o = SleeveOracle::random(12, 9, BuiltinProfile::Tanh, &mut rng).unwrap();
        let mut state = AtpeState::new(12);
        while state.dim() > 3 {
            let coords = state.sample_coords(&mut rng);
            let basis = state.basis().clone();
            let g = divided_difference_gradient(|c| o.evaluate(&(&basis * c)), &coords, 1e-2);
            state.split(&g).unwrap();
            assert_eq!(state.normals().len() + state.dim(), 12);
            assert!(state.gram_deviation() <= 1e-10);
        }
    }

    #[test]
    fn split_rejects_zero_gradient() {
        let mut state = AtpeState::new(3);
        assert!(matches!(
            state.split(&DVector::zeros(3)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn vanishing_gradient_everywhere_is_degenerate() {
        let err = atpc_exact(|x| DVector::zeros(x.len()), 2, 1, &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn query_budget_matches_the_closed_form() {
        let mut rng = seeded(6);
        for (n, d) in [(3usize, 1usize), (10, 1), (10, 8), (15, 4)] {
            let mut o = SleeveOracle::random(n, n - d, BuiltinProfile::Tanh, &mut rng).unwrap();
            let report = atpe(&mut o, d, 1e-3, &mut rng).unwrap();
            assert_eq!(report.queries, atpe_query_budget(n, d));
            assert!(report.queries <= ((n - d) * (n + 1)) as u64);
            let independent: u64 = (d + 1..=n).map(|i| i as u64 + 1).sum();
            assert_eq!(report.queries, independent);
        }
    }

    #[test]
    fn identity_profile_with_tiny_step_is_accurate() {
        let mut rng = seeded(7);
        for (n, d) in [(4usize, 1usize), (10, 3), (12, 11)] {
            let mut o = SleeveOracle::random(n, n - d, BuiltinProfile::Identity, &mut rng).unwrap();
            let report = atpe(&mut o, d, 1e-6, &mut rng).unwrap();
            assert!(report.hs_error < 1e-4, "({n},{d}): {}", report.hs_error);
        }
    }

    #[test]
    fn error_shrinks_with_step_size() {
        let mean_err = |h: f64| {
            (0..20)
                .map(|t| {
                    let mut rng = seeded(1000 + t);
                    let mut o = SleeveOracle::random(10, 9, BuiltinProfile::Tanh, &mut rng).unwrap();
                    atpe(&mut o, 1, h, &mut rng).unwrap().hs_error
                })
                .sum::<f64>()
                / 20.0
        };
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&h| mean_err(h)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] <= errs[0] / 10.0, "{errs:?}");
    }

    #[test]
    fn atpe_rejects_bad_inputs() {
        let mut rng = seeded(8);
        let mut o = SleeveOracle::random(5, 4, BuiltinProfile::Tanh, &mut rng).unwrap();
        assert!(atpe(&mut o, 1, 0.0, &mut rng).is_err());
        assert!(atpe(&mut o, 1, 1.5, &mut rng).is_err());
        assert!(atpe(&mut o, 5, 0.1, &mut rng).is_err());
        assert!(matches!(
            atpe(&mut o, 2, 0.1, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn profile_after_exact_core_is_the_identity() {
        let mut rng = seeded(9);
        let mut o = SleeveOracle::random(8, 5, BuiltinProfile::Identity, &mut rng).unwrap();
        let core = orth_complement(o.hidden()).unwrap();
        let p = recover_profile_after_atpe(&mut o, &core, 16, 1e-6, &mut rng).unwrap();
        assert_eq!(o.query_count(), 9 + 17);
        for k in 0..=1000 {
            let s = k as f64 / 1000.0;
            assert!((p.eval(s) - s).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_after_exact_core_converges_for_tanh() {
        let errs: Vec<f64> = [16usize, 32]
            .iter()
            .map(|&m| {
                let mut rng = seeded(10);
                let mut o = SleeveOracle::random(6, 2, BuiltinProfile::Tanh, &mut rng).unwrap();
                let core = orth_complement(o.hidden()).unwrap();
                let p = recover_profile_after_atpe(&mut o, &core, m, 1e-7, &mut rng).unwrap();
                (0..=10_000)
                    .map(|k| {
                        let s = k as f64 / 10_000.0;
                        (p.eval(s) - s.tanh()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] / errs[1] >= 3.5, "{errs:?}");
    }

    #[test]
    fn profile_after_atpe_propagates_arity_error() {
        let mut rng = seeded(11);
        let mut o = SleeveOracle::random(4, 2, BuiltinProfile::Tanh, &mut rng).unwrap();
        let core = orth_complement(o.hidden()).unwrap();
        assert!(matches!(
            recover_profile_after_atpe(&mut o, &core, 2, 1e-4, &mut rng),
            Err(Error::Arity { .. })
        ));
    }
}
