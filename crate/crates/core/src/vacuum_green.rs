//! Harmonic potential on the flat vacuum strip `-1 <= x1 <= 0` and a
//! quadrature check of the energy identity
//! `int_Gamma xi calH_N dx' = int_Omega |grad xi|^2 dx`.
//!
//! Only the flat state is treated, where the coefficient matrix is the
//! identity. The normal field is `calH_N = +d1 xi`, the sign that agrees with
//! `h = A grad xi`, `h_1 = calH_N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `xi = c sinh(k (x1 + 1)) exp(i k x2)`: harmonic, zero on `x1 = -1`, with
/// Neumann data `d1 xi(0, x2) = c k cosh(k) exp(i k x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripPotential {
    pub k: f64,
    pub c: Complex64,
}

/// Potential whose normal derivative on `x1 = 0` has amplitude `neumann_amp`.
pub fn strip_potential(k: f64, neumann_amp: Complex64) -> Result<StripPotential> {
    if k == 0.0 {
        return Err(Error::Degenerate(
            "k = 0: constant Neumann data is incompatible with the Dirichlet bottom".into(),
        ));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Degenerate(format!(
            "tangential wavenumber must be positive, got {k}"
        )));
    }
    Ok(StripPotential {
        k,
        c: neumann_amp / (k * k.cosh()),
    })
}

impl StripPotential {
    fn phase(&self, x2: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.k * x2)
    }

    pub fn value(&self, x1: f64, x2: f64) -> Complex64 {
        self.c * (self.k * (x1 + 1.0)).sinh() * self.phase(x2)
    }

    /// `(d1 xi, d2 xi)`.
    pub fn gradient(&self, x1: f64, x2: f64) -> [Complex64; 2] {
        let y = self.k * (x1 + 1.0);
        let e = self.phase(x2);
        [
            self.c * self.k * y.cosh() * e,
            self.c * Complex64::new(0.0, self.k) * y.sinh() * e,
        ]
    }

    /// `calH_N = d1 xi` on `x1 = 0`.
    pub fn neumann_trace(&self, x2: f64) -> Complex64 {
        self.gradient(0.0, x2)[0]
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// Sup of the five-point Laplacian over the sampled strip (one
    /// wavelength, spacing close to `h`), relative to `k^2 sup |xi|`.
    pub fn laplacian_residual_fd(&self, h: f64) -> f64 {
        let n1 = (1.0 / h).ceil().max(2.0) as usize;
        let n2 = (self.wavelength() / h).ceil().max(3.0) as usize;
        let h1 = 1.0 / n1 as f64;
        let h2 = self.wavelength() / n2 as f64;
        let at = |i: usize, j: usize| self.value(-1.0 + i as f64 * h1, (j % n2) as f64 * h2);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 1..n1 {
            for j in 0..n2 {
                let centre = at(i, j);
                let lap = (at(i + 1, j) - 2.0 * centre + at(i - 1, j)) / (h1 * h1)
                    + (at(i, j + 1) - 2.0 * centre + at(i, j + n2 - 1)) / (h2 * h2);
                worst = worst.max(lap.norm());
                scale = scale.max(self.k * self.k * centre.norm());
            }
        }
        worst / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenIdentity {
    /// `int_Gamma xi calH_N` over one wavelength.
    pub lhs: f64,
    /// `int |grad xi|^2` over the strip, one wavelength wide.
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Minimum quadrature resolution in `x1`, in points per tangential wavelength.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 16.0;

/// Evaluates both sides of the identity for the real mode
/// `c sinh(k (x1 + 1)) cos(k x2)` with `c = 1`.
///
/// The tangential integrals are exact (`cos^2` and `sin^2` average to one
/// half over a wavelength); the `x1` integral uses the trapezoid rule on
/// `quadrature_points` equally spaced nodes, so the gap is second order.
pub fn green_identity_check(k: f64, quadrature_points: usize) -> Result<GreenIdentity> {
    let pot = strip_potential(k, Complex64::new(k * k.cosh(), 0.0))?;
    let c = pot.c.re;
    let intervals = quadrature_points.saturating_sub(1);
    let per_wavelength = intervals as f64 * pot.wavelength();
    if intervals < 2 || per_wavelength < MIN_POINTS_PER_WAVELENGTH {
        return Err(Error::InvalidGrid(format!(
            "{quadrature_points} radial points resolve {per_wavelength:.1} per wavelength at k = {k}, \
             need at least {MIN_POINTS_PER_WAVELENGTH}"
        )));
    }
    let half_period = pot.wavelength() / 2.0;

    // xi(0, x2) d1 xi(0, x2) = c^2 k sinh(k) cosh(k) cos^2(k x2)
    let lhs = c * c * k * k.sinh() * k.cosh() * half_period;

    // |grad xi|^2 averaged over x2: c^2 k^2 (cosh^2 + sinh^2) / 2
    let integrand = |x1: f64| {
        let y = k * (x1 + 1.0);
        c * c * k * k * (y.cosh().powi(2) + y.sinh().powi(2)) * half_period
    };
    let h = 1.0 / intervals as f64;
    let mut sum = 0.5 * (integrand(-1.0) + integrand(0.0));
    for i in 1..intervals {
        sum += integrand(-1.0 + i as f64 * h);
    }
    let rhs = sum * h;
    Ok(GreenIdentity {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / lhs.abs(),
    })
}

/// Radial points for which the trapezoid gap, about `(k h)^2 / 3`, is below
/// `gap`.
pub fn points_for_gap(k: f64, gap: f64) -> usize {
    let h = (3.0 * gap).sqrt() / k;
    (1.0 / h).ceil() as usize + 1
}
