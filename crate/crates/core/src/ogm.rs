//! Recovery by optimization over the Grassmannian.
//!
//! The pipeline spends its whole query budget up front:
//!
//! 1. a divided-difference gradient at a random point gives a direction
//!    `θ̂` with `‖Pθ̂‖² ≈ 1` (`N + 1` queries);
//! 2. `f` sampled along the ray `t·θ̂` gives a surrogate profile `ĝ`
//!    (`M + 1` queries);
//! 3. `f` is evaluated on a projection-retrieval design (`n` queries).
//!
//! The surrogate objective `F̂(H) = (Σ_k |f(x_k) - ĝ(‖Hx_k‖²/p̂)|²)^½` is then
//! minimized by Riemannian steepest descent without further queries.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::atpe::{MAX_RESAMPLES, VANISHING_GRADIENT};
use crate::error::{Error, Result};
use crate::oracle::{divided_difference_gradient, SleeveOracle};
use crate::profile::{min_samples, profile_along_ray, Profile1D, DEFAULT_DEGREE};
use crate::report::RecoveryReport;
use crate::retrieval::{full_design, MeasurementDesign};
use crate::rng::unit_vector;
use crate::subspace::{gram_deviation, orthonormalize_frame, Subspace, FRAME_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Stop once the Riemannian gradient's Frobenius norm drops below this.
    pub gradient_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor during backtracking, in `(0, 1)`.
    pub backtrack: f64,
    pub initial_step: f64,
    /// Upper bound on `t·‖ξ‖` for a single step.
    pub max_displacement: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tol: 1e-12,
            armijo: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_displacement: 0.5,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_iterations > 0
            && self.gradient_tol > 0.0
            && self.armijo > 0.0
            && self.initial_step > 0.0
            && self.max_displacement > 0.0;
        if !positive || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!("solver parameters {self:?}")));
        }
        Ok(())
    }
}

/// Frozen surrogate problem. Objective and gradient evaluations are pure.
#[derive(Debug, Clone)]
pub struct OgmProblem {
    d: usize,
    design: MeasurementDesign,
    points: DMatrix<f64>,
    direction: DVector<f64>,
    p_hat: f64,
    profile: Profile1D,
    values: Vec<f64>,
}

/// Normalized divided-difference gradient at a random unit point, and the
/// assumed value `p̂ = 1` of `‖Pθ̂‖²`. Costs `N + 1` queries per attempt.
pub fn choose_direction<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    h: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {h}")));
    }
    let n = oracle.ambient_dim();
    for _ in 0..MAX_RESAMPLES {
        let eta = unit_vector(n, rng);
        let grad = divided_difference_gradient(|x| oracle.evaluate(x), &eta, h);
        let norm = grad.norm();
        if norm >= VANISHING_GRADIENT {
            return Ok((grad / norm, 1.0));
        }
    }
    Err(Error::Degenerate(
        "divided-difference gradient vanished at every sampled point".into(),
    ))
}

/// Forward-difference step for the direction estimate. Kept independent of
/// the profile spacing `1/M`: with step `1/M` the truncation error swamps
/// the gradient wherever `g'` is small at the random base point.
pub const DIRECTION_STEP: f64 = 1e-6;

/// Runs the query phase and freezes the surrogate problem for a
/// `d`-dimensional `P`. Total cost `(N + 1) + (M + 1) + n` queries.
///
/// The ray is sampled far enough that the profile covers every squared
/// design-point norm.
pub fn build_problem<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    d: usize,
    m: usize,
    design: MeasurementDesign,
    rng: &mut R,
) -> Result<OgmProblem> {
    let n = oracle.ambient_dim();
    if d == 0 || d >= n {
        return Err(Error::InvalidDimension(format!(
            "target dimension {d} in ambient dimension {n}"
        )));
    }
    if design.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: design.ambient_dim(),
        });
    }
    let needed = min_samples(DEFAULT_DEGREE);
    if m + 1 < needed {
        return Err(Error::Arity { needed, got: m + 1 });
    }
    let (direction, p_hat) = choose_direction(oracle, DIRECTION_STEP, rng)?;
    build_problem_with_direction(oracle, d, m, design, direction, p_hat)
}

/// [`build_problem`] with a caller-supplied direction and `p̂`; skips the
/// gradient step, so it costs `(M + 1) + n` queries.
pub fn build_problem_with_direction(
    oracle: &mut SleeveOracle,
    d: usize,
    m: usize,
    design: MeasurementDesign,
    direction: DVector<f64>,
    p_hat: f64,
) -> Result<OgmProblem> {
    let n = oracle.ambient_dim();
    if d == 0 || d >= n {
        return Err(Error::InvalidDimension(format!(
            "target dimension {d} in ambient dimension {n}"
        )));
    }
    if design.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: design.ambient_dim(),
        });
    }
    if !(p_hat > 0.0 && p_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!("p_hat {p_hat}")));
    }
    let extent = design.max_norm().max(1.0);
    let profile = profile_along_ray(oracle, &direction, m, extent)?;
    let values: Vec<f64> = design.points().iter().map(|x| oracle.evaluate(x)).collect();
    Ok(OgmProblem {
        d,
        points: design.point_matrix(),
        design,
        direction,
        p_hat,
        profile,
        values,
    })
}

impl OgmProblem {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn design(&self) -> &MeasurementDesign {
        &self.design
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    pub fn profile(&self) -> &Profile1D {
        &self.profile
    }

    /// Frozen oracle values `f(x_k)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_frame(&self, frame: &DMatrix<f64>) -> Result<()> {
        if frame.nrows() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: frame.nrows(),
            });
        }
        if frame.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: frame.ncols(),
            });
        }
        Ok(())
    }

    /// Squared norms `‖Yᵀx_k‖²` scaled by `1/p̂`, with the projected points.
    fn scaled_norms(&self, frame: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let projected = frame.transpose() * &self.points;
        let s = projected
            .column_iter()
            .map(|c| c.norm_squared() / self.p_hat)
            .collect();
        (projected, s)
    }

    /// Residuals `f(x_k) - ĝ(‖Yᵀx_k‖²/p̂)`.
    pub fn residuals(&self, frame: &DMatrix<f64>) -> Vec<f64> {
        let (_, s) = self.scaled_norms(frame);
        self.values
            .iter()
            .zip(&s)
            .map(|(f, &sk)| f - self.profile.eval(sk))
            .collect()
    }

    /// `F̂(H)`, the root of the summed squared residuals.
    pub fn objective(&self, h: &Subspace) -> Result<f64> {
        self.check_frame(h.basis())?;
        Ok(self.objective_frame(h.basis()))
    }

    pub fn objective_frame(&self, frame: &DMatrix<f64>) -> f64 {
        self.residuals(frame).iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    /// `½ F̂²`, the quantity the solver minimizes.
    pub fn half_squared(&self, frame: &DMatrix<f64>) -> f64 {
        0.5 * self.residuals(frame).iter().map(|r| r * r).sum::<f64>()
    }

    /// Gradient of `½ F̂²` with respect to the frame entries:
    /// `-2 Σ_k r_k ĝ'(s_k) p̂⁻¹ x_k x_kᵀ Y`.
    pub fn euclidean_gradient(&self, frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_frame(frame)?;
        Ok(self.euclidean_gradient_unchecked(frame))
    }

    fn euclidean_gradient_unchecked(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        let (mut projected, s) = self.scaled_norms(frame);
        for (k, mut col) in projected.column_iter_mut().enumerate() {
            let r = self.values[k] - self.profile.eval(s[k]);
            let w = r * self.profile.eval_derivative(s[k]) / self.p_hat;
            col *= -2.0 * w;
        }
        &self.points * projected.transpose()
    }
}

/// Result of [`grassmann_steepest_descent`].
#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub subspace: Subspace,
    /// Cost at the start and after every accepted step.
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// The line search could not find an acceptable step.
    pub stalled: bool,
}

fn retract(frame: &DMatrix<f64>, direction: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    orthonormalize_frame(frame + direction * t)
}

/// Steepest descent on the Grassmannian with Armijo backtracking and a
/// QR retraction. `egrad` returns the Euclidean gradient with respect to the
/// frame; it is projected onto the horizontal space `(I - YYᵀ)`.
pub fn grassmann_steepest_descent<C, G>(
    cost: C,
    egrad: G,
    start: &Subspace,
    params: &SolverParams,
) -> Result<DescentOutcome>
where
    C: Fn(&DMatrix<f64>) -> f64,
    G: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    params.validate()?;
    let deviation = gram_deviation(start.basis());
    if deviation > FRAME_TOL {
        return Err(Error::NotOrthonormal(deviation));
    }
    let mut y = start.basis().clone();
    let mut value = cost(&y);
    let mut costs = vec![value];
    let mut step = params.initial_step;
    let mut iterations = 0;
    let mut stalled = false;
    let mut gradient_norm = f64::INFINITY;

    while iterations < params.max_iterations {
        let g = egrad(&y);
        let xi = &g - &y * (y.transpose() * &g);
        let gn2 = xi.norm_squared();
        gradient_norm = gn2.sqrt();
        if gradient_norm <= params.gradient_tol {
            break;
        }
        let descent = -xi;
        let mut t = step.min(params.max_displacement / gradient_norm);
        let mut first_try = true;
        let accepted = loop {
            let candidate = retract(&y, &descent, t);
            let c = cost(&candidate);
            if c.is_finite() && c <= value - params.armijo * t * gn2 {
                break Some((candidate, c));
            }
            t *= params.backtrack;
            first_try = false;
            if t * gradient_norm < 1e-16 {
                break None;
            }
        };
        match accepted {
            Some((candidate, c)) => {
                y = candidate;
                value = c;
                costs.push(c);
                iterations += 1;
                step = if first_try { 2.0 * t } else { t };
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok(DescentOutcome {
        subspace: Subspace::from_frame_unchecked(y),
        costs,
        iterations,
        gradient_norm,
        stalled,
    })
}

/// Full pipeline on the full measurement design.
pub fn ogm_recover<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    d: usize,
    m: usize,
    init: &Subspace,
    params: &SolverParams,
    rng: &mut R,
) -> Result<RecoveryReport> {
    let design = full_design(oracle.ambient_dim());
    ogm_recover_with_design(oracle, d, m, design, init, params, rng)
}

/// Full pipeline on a caller-supplied design. The estimate targets `P`
/// itself (dimension `d`), scored against the oracle's hidden subspace.
pub fn ogm_recover_with_design<R: Rng + ?Sized>(
    oracle: &mut SleeveOracle,
    d: usize,
    m: usize,
    design: MeasurementDesign,
    init: &Subspace,
    params: &SolverParams,
    rng: &mut R,
) -> Result<RecoveryReport> {
    if oracle.hidden().dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: oracle.hidden().dim(),
        });
    }
    if init.dim() != d || init.ambient_dim() != oracle.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: init.dim(),
        });
    }
    let started = Instant::now();
    let before = oracle.query_count();
    let problem = build_problem(oracle, d, m, design, rng)?;
    let queries = oracle.query_count() - before;
    let outcome = grassmann_steepest_descent(
        |y| problem.half_squared(y),
        |y| problem.euclidean_gradient_unchecked(y),
        init,
        params,
    )?;
    Ok(RecoveryReport {
        hs_error: outcome.subspace.hs_distance(oracle.hidden())?,
        estimate: outcome.subspace.projection_matrix(),
        queries,
        iterations: outcome.iterations,
        wall_ms: started.elapsed().as_millis() as u64,
        stalled: outcome.stalled,
    })
}
