//! Recovery of linear-sleeve functions `f(x) = g(dist(x, L)^2)` from point
//! queries.
//!
//! Two recovery pipelines are provided:
//!
//! * [`atpe`]: adaptive tangent-plane estimation. Repeatedly restricts `f` to
//!   the hyperplane orthogonal to an (estimated) gradient until the remaining
//!   plane is `L`.
//! * [`ogm`]: minimization of a sampled surrogate objective over the
//!   Grassmannian, using the measurement designs in [`retrieval`] to make the
//!   minimizer unique.
//!
//! [`harness`] drives batches of seeded trials, writes CSV and renders SVG
//! plots; the `linsleeve` binary exposes it on the command line.

pub mod atpe;
pub mod error;
pub mod exec;
pub mod harness;
pub mod ogm;
pub mod oracle;
pub mod profile;
pub mod report;
pub mod retrieval;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};
pub use oracle::{BuiltinProfile, SleeveOracle};
pub use profile::Profile1D;
pub use report::RecoveryReport;
pub use subspace::{ProjectionMatrix, Subspace};
