//! One-dimensional profile estimation from equispaced samples.
//!
//! The quasi-interpolant is an interpolating cubic spline with not-a-knot end
//! conditions (or a piecewise-linear interpolant for degree 1). It reproduces
//! polynomials up to its degree and converges at `O(h^4)` for smooth inputs.
//!
//! Profiles sampled along a ray `t ↦ f(tθ)` are stored as functions of the
//! *squared* radius: sampling `f` at `t_i = i·h` gives an even function of
//! `t`, which is interpolated on the mirrored grid `-Mh..Mh` and evaluated at
//! `t = √s`. The consumer passes squared projection norms `s = ‖Hx‖²`
//! directly.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::oracle::SleeveOracle;

pub const DEFAULT_DEGREE: usize = 3;

/// Argument convention of a [`Profile1D`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// Evaluated directly at the sample abscissa.
    Linear,
    /// Built from samples at radii `i·h`, evaluated at squared radius.
    SquaredRadius,
}

/// Piecewise-polynomial interpolant on an equispaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    start: f64,
    spacing: f64,
    values: Vec<f64>,
    /// Second derivatives at the knots (cubic only).
    curvature: Vec<f64>,
    degree: usize,
    abscissa: Abscissa,
}

fn check_degree(degree: usize) -> Result<()> {
    match degree {
        1 | 3 => Ok(()),
        d => Err(Error::UnsupportedDegree(d)),
    }
}

/// Minimum sample count for a polynomial degree `S - 1`: `S + 1`.
pub fn min_samples(degree: usize) -> usize {
    degree + 2
}

/// Builds the quasi-interpolant of equispaced samples `(t_i, y_i)`.
pub fn quasi_interpolant(samples: &[(f64, f64)], degree: usize) -> Result<Profile1D> {
    check_degree(degree)?;
    let needed = min_samples(degree);
    if samples.len() < needed {
        return Err(Error::Arity {
            needed,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let start = samples[0].0;
    let end = samples[n - 1].0;
    let spacing = (end - start) / (n - 1) as f64;
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Spacing {
            index: 1,
            offset: spacing,
        });
    }
    let tol = 1e-12 * start.abs().max(end.abs()).max(1.0);
    for (i, &(t, _)) in samples.iter().enumerate() {
        let offset = t - (start + i as f64 * spacing);
        if offset.abs() > tol {
            return Err(Error::Spacing { index: i, offset });
        }
    }
    let values: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    Ok(Profile1D::on_grid(start, spacing, values, degree, Abscissa::Linear))
}

/// Second derivatives of the not-a-knot cubic spline through equispaced
/// values. Requires at least four values.
fn not_a_knot_curvature(values: &[f64], spacing: f64) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 4);
    let h2 = spacing * spacing;
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                0.0
            } else {
                6.0 * (values[i - 1] - 2.0 * values[i] + values[i + 1]) / h2
            }
        })
        .collect();
    let mut m = vec![0.0; n];
    // Continuity of the third derivative at t_1 and t_{n-2} turns the first
    // and last interior rows into 6 M_1 = r_1 and 6 M_{n-2} = r_{n-2}.
    m[1] = rhs[1] / 6.0;
    m[n - 2] = rhs[n - 2] / 6.0;
    if n > 4 {
        // Interior unknowns M_2..M_{n-3}: tridiagonal (1, 4, 1), Thomas sweep.
        let lo = 2;
        let hi = n - 3;
        let k = hi + 1 - lo;
        let mut diag = vec![4.0; k];
        let mut r: Vec<f64> = (lo..=hi).map(|i| rhs[i]).collect();
        r[0] -= m[1];
        r[k - 1] -= m[n - 2];
        for j in 1..k {
            let w = 1.0 / diag[j - 1];
            diag[j] -= w;
            r[j] -= w * r[j - 1];
        }
        m[hi] = r[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[lo + j] = (r[j] - m[lo + j + 1]) / diag[j];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

impl Profile1D {
    fn on_grid(start: f64, spacing: f64, values: Vec<f64>, degree: usize, abscissa: Abscissa) -> Self {
        let curvature = if degree == 3 {
            not_a_knot_curvature(&values, spacing)
        } else {
            Vec::new()
        };
        Self {
            start,
            spacing,
            values,
            curvature,
            degree,
            abscissa,
        }
    }

    /// Profile of squared radius from samples `values[i] = φ(i·spacing)` of
    /// an even function `φ`. Cubic only.
    pub fn from_radial_samples(spacing: f64, values: &[f64]) -> Result<Self> {
        let needed = min_samples(DEFAULT_DEGREE);
        if values.len() < needed {
            return Err(Error::Arity {
                needed,
                got: values.len(),
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample spacing {spacing}")));
        }
        let m = values.len() - 1;
        let mirrored: Vec<f64> = values[1..]
            .iter()
            .rev()
            .chain(values.iter())
            .copied()
            .collect();
        Ok(Self::on_grid(
            -(m as f64) * spacing,
            spacing,
            mirrored,
            DEFAULT_DEGREE,
            Abscissa::SquaredRadius,
        ))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn abscissa(&self) -> Abscissa {
        self.abscissa
    }

    /// Grid spacing of the underlying interpolant (in radius for
    /// [`Abscissa::SquaredRadius`]).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn grid_end(&self) -> f64 {
        self.start + self.spacing * (self.values.len() - 1) as f64
    }

    /// Evaluation domain `[t_min, t_max]` in the profile's argument.
    pub fn domain(&self) -> (f64, f64) {
        match self.abscissa {
            Abscissa::Linear => (self.start, self.grid_end()),
            Abscissa::SquaredRadius => (0.0, self.grid_end() * self.grid_end()),
        }
    }

    /// Sample abscissae in the profile's argument, with their values.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let first = match self.abscissa {
            Abscissa::Linear => 0,
            Abscissa::SquaredRadius => (self.values.len() - 1) / 2,
        };
        (first..self.values.len())
            .map(|i| {
                let t = self.start + self.spacing * i as f64;
                let arg = match self.abscissa {
                    Abscissa::Linear => t,
                    Abscissa::SquaredRadius => t * t,
                };
                (arg, self.values[i])
            })
            .collect()
    }

    fn piece(&self, t: f64) -> usize {
        let last = self.values.len() - 2;
        let raw = ((t - self.start) / self.spacing).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(last)
        }
    }

    fn grid_value(&self, t: f64) -> f64 {
        let i = self.piece(t);
        let h = self.spacing;
        let left = self.start + h * i as f64;
        let a = t - left;
        let b = h - a;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        if self.degree == 1 {
            return y0 + (y1 - y0) * a / h;
        }
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        m0 * b * b * b / (6.0 * h) + m1 * a * a * a / (6.0 * h) + (y0 / h - m0 * h / 6.0) * b
            + (y1 / h - m1 * h / 6.0) * a
    }

    fn grid_slope(&self, t: f64) -> f64 {
        let i = self.piece(t);
        let h = self.spacing;
        let left = self.start + h * i as f64;
        let a = t - left;
        let b = h - a;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        if self.degree == 1 {
            return (y1 - y0) / h;
        }
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        -m0 * b * b / (2.0 * h) + m1 * a * a / (2.0 * h) + (y1 - y0) / h - (m1 - m0) * h / 6.0
    }

    fn grid_curvature(&self, t: f64) -> f64 {
        if self.degree == 1 {
            return 0.0;
        }
        let i = self.piece(t);
        let h = self.spacing;
        let a = t - (self.start + h * i as f64);
        (self.curvature[i] * (h - a) + self.curvature[i + 1] * a) / h
    }

    /// Value at `t`; arguments outside the domain are clamped to the nearest
    /// endpoint.
    pub fn eval(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        match self.abscissa {
            Abscissa::Linear => self.grid_value(t),
            Abscissa::SquaredRadius => self.grid_value(t.sqrt()),
        }
    }

    /// Derivative with respect to the profile's argument; zero outside the
    /// domain, consistent with clamping.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return 0.0;
        }
        match self.abscissa {
            Abscissa::Linear => self.grid_slope(t),
            Abscissa::SquaredRadius => {
                // d/ds φ(√s) = φ'(r) / 2r, with limit φ''(0) / 2 at the origin
                // (φ is even, so φ'(0) = 0).
                let r = t.sqrt();
                if r < 1e-6 * self.spacing {
                    0.5 * self.grid_curvature(0.0)
                } else {
                    self.grid_slope(r) / (2.0 * r)
                }
            }
        }
    }
}

/// Samples `f(i·h·θ)` for `i = 0..=m`, `h = extent / m`, and returns the
/// squared-radius profile approximating `s ↦ g(s·‖Pθ‖²)` on `[0, extent²]`.
/// Costs `m + 1` queries.
pub fn profile_along_ray(
    oracle: &mut SleeveOracle,
    theta: &DVector<f64>,
    m: usize,
    extent: f64,
) -> Result<Profile1D> {
    let norm = theta.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(norm));
    }
    let needed = min_samples(DEFAULT_DEGREE);
    if m + 1 < needed {
        return Err(Error::Arity { needed, got: m + 1 });
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::InvalidParameter(format!("ray extent {extent}")));
    }
    let h = extent / m as f64;
    let values: Vec<f64> = (0..=m)
        .map(|i| oracle.evaluate(&(theta * (i as f64 * h))))
        .collect();
    Profile1D::from_radial_samples(h, &values)
}

/// [`profile_along_ray`] on the unit ray, `h = 1/m`: the profile covers
/// squared radii `[0, 1]`.
pub fn profile_from_direction(
    oracle: &mut SleeveOracle,
    theta: &DVector<f64>,
    m: usize,
) -> Result<Profile1D> {
    profile_along_ray(oracle, theta, m, 1.0)
}
