//! Point-query access to a linear-sleeve function `f(x) = g(‖Px‖²)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::subspace::{random_subspace, Subspace};

/// Built-in sleeve profiles. All are smooth on the whole real line, so the
/// oracle can be queried beyond the unit tube (design points have squared
/// norm up to 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinProfile {
    Identity,
    Tanh,
    /// `sin(5t)`: not monotone, used as a stress case.
    Sin5,
}

impl BuiltinProfile {
    pub const ALL: [BuiltinProfile; 3] = [Self::Identity, Self::Tanh, Self::Sin5];

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Tanh => "tanh",
            Self::Sin5 => "sin5",
        }
    }

    pub fn value(self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::Tanh => t.tanh(),
            Self::Sin5 => (5.0 * t).sin(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Tanh => {
                let c = t.cosh();
                1.0 / (c * c)
            }
            Self::Sin5 => 5.0 * (5.0 * t).cos(),
        }
    }
}

impl fmt::Display for BuiltinProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" => Ok(Self::Identity),
            "tanh" => Ok(Self::Tanh),
            "sin5" | "sin(5)" => Ok(Self::Sin5),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

/// Black-box linear-sleeve function with hidden ground truth.
///
/// `hidden` is the subspace whose projection norm feeds the profile, i.e. the
/// orthogonal complement of the sleeve's core `L`. Every [`evaluate`] call is
/// counted; nothing resets the counter implicitly.
///
/// [`evaluate`]: SleeveOracle::evaluate
#[derive(Debug)]
pub struct SleeveOracle {
    hidden: Subspace,
    profile: BuiltinProfile,
    domain_radius: f64,
    queries: u64,
}

impl SleeveOracle {
    pub fn new(hidden: Subspace, profile: BuiltinProfile) -> Self {
        Self {
            hidden,
            profile,
            domain_radius: 1.0,
            queries: 0,
        }
    }

    /// Oracle with a Haar-random hidden subspace of dimension `hidden_dim`.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        hidden_dim: usize,
        profile: BuiltinProfile,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self::new(random_subspace(hidden_dim, n, rng)?, profile))
    }

    pub fn with_domain_radius(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("domain radius {r}")));
        }
        self.domain_radius = r;
        Ok(self)
    }

    pub fn ambient_dim(&self) -> usize {
        self.hidden.ambient_dim()
    }

    pub fn hidden(&self) -> &Subspace {
        &self.hidden
    }

    pub fn profile(&self) -> BuiltinProfile {
        self.profile
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    /// Copy of this oracle with the counter at zero, for handing to another
    /// trial or thread.
    pub fn fork(&self) -> Self {
        Self {
            hidden: self.hidden.clone(),
            profile: self.profile,
            domain_radius: self.domain_radius,
            queries: 0,
        }
    }

    /// `g(‖Px‖²)`; costs one query.
    pub fn evaluate(&mut self, x: &DVector<f64>) -> f64 {
        self.queries += 1;
        self.profile.value(self.hidden.project_norm_sq(x))
    }

    /// Exact gradient `2 g'(‖Px‖²) Px`. Privileged access for the
    /// exact-gradient algorithm and for tests: not counted as a query.
    pub fn analytic_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let px = self.hidden.project(x);
        let s = px.norm_squared();
        px * (2.0 * self.profile.derivative(s))
    }
}

/// Forward divided differences `[(f(x + h e_i) - f(x)) / h]_i`, using exactly
/// `n + 1` evaluations of `f`.
pub fn divided_difference_gradient<F>(mut f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let base = f(x);
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        probe[i] += h;
        let v = f(&probe);
        probe[i] = x[i];
        (v - base) / h
    })
}
