use crate::subspace::ProjectionMatrix;

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// Estimated subspace, as a projection matrix.
    pub estimate: ProjectionMatrix,
    /// Hilbert-Schmidt distance to the ground truth.
    pub hs_error: f64,
    /// Oracle queries spent by the run.
    pub queries: u64,
    /// Solver iterations (0 for the tangent-plane algorithms).
    pub iterations: usize,
    pub wall_ms: u64,
    /// The solver stopped on a failed line search rather than convergence.
    pub stalled: bool,
}
