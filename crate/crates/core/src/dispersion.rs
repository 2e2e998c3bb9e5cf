//! Spatial exponents, amplitude relations and interface determinants of the
//! four frozen problems.
//!
//! Every quantity is written for the unit wavevector: the mode index `n`
//! carries the scale, so the ansatz is `exp{n (s t + lambda x1 + i omega'.x')}`
//! with `|omega'| = 1`. All complex square roots are principal, hence
//! `lambda+ = -sqrt(..)` has nonpositive real part automatically.
//!
//! The determinant equations share one shape. With the plasma radical
//! `L(s) = -lambda+(s)`:
//!
//! * Euler: `E(s) = n s^2 - a0 s - (a / rho) L(s)`
//! * MHD:   `E(s) = s { n (rho s^2 + w+^2 + w-^2 L) - (a + i w- a1) L } - a0 (rho s^2 + w+^2)`
//!
//! with `L = 1` for the incompressible models. At `rho = 1` these are the
//! printed relations; for general `rho` they are the `c -> infinity` limits of
//! the compressible ones.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::domain::{w_pair, BasicState, ModelKind, Wavevector};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Value of a determinant equation and its analytic `s`-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantValue {
    pub value: Complex64,
    pub jacobian_ds: Complex64,
    /// Sum of the magnitudes of the additive terms; `|value| / scale` is the
    /// relative residual.
    pub scale: f64,
}

impl DeterminantValue {
    pub fn relative_residual(&self) -> f64 {
        let r = self.value.norm();
        if self.scale > 0.0 {
            r / self.scale
        } else {
            r
        }
    }
}

/// Frozen symbol of one model at one unit wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbol {
    pub model: ModelKind,
    pub rho: f64,
    pub c: f64,
    /// `c^2 + c_A^2`.
    pub fast2: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub a: f64,
    pub a0: f64,
    pub a1: f64,
}

impl Symbol {
    pub fn new(model: ModelKind, state: &BasicState, omega: &Wavevector) -> Result<Self> {
        state.validate(model)?;
        let (w_plus, w_minus) = w_pair(state, omega);
        let ca = state.alfven_speed();
        Ok(Symbol {
            model,
            rho: state.rho_hat,
            c: state.c_hat,
            fast2: state.c_hat * state.c_hat + ca * ca,
            w_plus,
            w_minus,
            a: state.a_hat,
            a0: state.a0_hat,
            a1: state.a1_hat,
        })
    }

    /// `W = w+^2 + w-^2`.
    pub fn big_w(&self) -> f64 {
        self.w_plus * self.w_plus + self.w_minus * self.w_minus
    }

    /// `a + i w- a1`, the effective interface forcing of the MHD models.
    pub fn forcing(&self) -> Complex64 {
        Complex64::new(self.a, self.w_minus * self.a1)
    }

    /// `rho s^2 + w+^2`, the Alfven resonance denominator.
    pub fn alfven_denominator(&self, s: Complex64) -> Complex64 {
        self.rho * s * s + self.w_plus * self.w_plus
    }

    /// The plasma radical `L(s) = -lambda+(s)` and its derivative.
    pub fn radical(&self, s: Complex64) -> Result<(Complex64, Complex64)> {
        match self.model {
            ModelKind::IncompressibleEuler | ModelKind::IncompressibleMHD => {
                Ok((Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)))
            }
            ModelKind::CompressibleEuler => Ok(simple_radical(s, self.c * self.c)),
            ModelKind::CompressibleMHD => {
                if self.w_plus == 0.0 {
                    // s^4 / (K s^2) reduces to s^2 / K; the form stays regular at s = 0.
                    return Ok(simple_radical(s, self.fast2));
                }
                let m = self.fast2 * s * s + self.c * self.c * self.w_plus * self.w_plus / self.rho;
                if m.norm() == 0.0 {
                    return Err(Error::BranchPoint { s });
                }
                let s2 = s * s;
                let s4 = s2 * s2;
                let l = (1.0 + s4 / m).sqrt();
                let dm = 2.0 * self.fast2 * s;
                let d_inner = (4.0 * s2 * s * m - s4 * dm) / (m * m);
                Ok((l, d_inner / (2.0 * l)))
            }
        }
    }

    /// Argument of the principal square root in `L(s)`; `None` for the
    /// incompressible models, where `L = 1`.
    pub fn radicand(&self, s: Complex64) -> Option<Complex64> {
        match self.model {
            ModelKind::IncompressibleEuler | ModelKind::IncompressibleMHD => None,
            ModelKind::CompressibleEuler => Some(1.0 + s * s / (self.c * self.c)),
            ModelKind::CompressibleMHD if self.w_plus == 0.0 => Some(1.0 + s * s / self.fast2),
            ModelKind::CompressibleMHD => {
                let m = self.fast2 * s * s + self.c * self.c * self.w_plus * self.w_plus / self.rho;
                (m.norm() > 0.0).then(|| 1.0 + s * s * s * s / m)
            }
        }
    }

    pub fn lambda_plus(&self, s: Complex64) -> Result<Complex64> {
        Ok(-self.radical(s)?.0)
    }

    pub fn lambda_minus(&self) -> Result<Complex64> {
        if self.model.is_mhd() {
            Ok(Complex64::new(1.0, 0.0))
        } else {
            Err(Error::UnsupportedModel {
                model: self.model,
                op: "lambda_minus",
            })
        }
    }

    /// Ratio `v1 / q` of normal velocity to (total) pressure amplitude at the
    /// interface.
    pub fn velocity_coupling(&self, s: Complex64) -> Result<Complex64> {
        let (l, _) = self.radical(s)?;
        if self.model.is_mhd() {
            let d = self.alfven_denominator(s);
            if d.norm() == 0.0 {
                return Err(Error::Resonance {
                    s,
                    what: "rho s^2 + w+^2",
                });
            }
            Ok(s * l / d)
        } else {
            if s.norm() == 0.0 {
                return Err(Error::Resonance { s, what: "s" });
            }
            Ok(l / (self.rho * s))
        }
    }

    /// Left-hand side of the determinant equation with its `s`-derivative.
    pub fn eval(&self, s: Complex64, n: u64) -> Result<DeterminantValue> {
        let nf = n as f64;
        let (l, dl) = self.radical(s)?;
        if self.model.is_mhd() {
            let wp2 = self.w_plus * self.w_plus;
            let wm2 = self.w_minus * self.w_minus;
            let f = self.forcing();
            let inner = nf * (self.rho * s * s + wp2 + wm2 * l) - f * l;
            let d_inner = nf * (2.0 * self.rho * s + wm2 * dl) - f * dl;
            let value = s * inner - self.a0 * self.alfven_denominator(s);
            let jacobian_ds = inner + s * d_inner - 2.0 * self.a0 * self.rho * s;
            let sa = s.norm();
            let scale = sa * (nf * (self.rho * sa * sa + wp2 + wm2 * l.norm()) + f.norm() * l.norm())
                + self.a0.abs() * (self.rho * sa * sa + wp2);
            Ok(DeterminantValue {
                value,
                jacobian_ds,
                scale,
            })
        } else {
            let ar = self.a / self.rho;
            let value = nf * s * s - self.a0 * s - ar * l;
            let jacobian_ds = 2.0 * nf * s - self.a0 - ar * dl;
            let sa = s.norm();
            let scale = nf * sa * sa + self.a0.abs() * sa + ar.abs() * l.norm();
            Ok(DeterminantValue {
                value,
                jacobian_ds,
                scale,
            })
        }
    }

    /// Interface system in the printed layout.
    ///
    /// The unknowns are `(phi, -q)` for the Euler models and `(phi, -q, xi)`
    /// for the MHD models: the printed systems carry the pressure amplitude
    /// with the opposite sign, which leaves the determinant unchanged.
    pub fn boundary_matrix(&self, s: Complex64, n: u64) -> Result<DMatrix<Complex64>> {
        let nf = n as f64;
        let kin = nf * s - self.a0;
        let coupling = self.velocity_coupling(s)?;
        let c = |x: f64| Complex64::new(x, 0.0);
        if self.model.is_mhd() {
            let inw = I * (nf * self.w_minus);
            Ok(DMatrix::from_row_slice(
                3,
                3,
                &[
                    kin,
                    coupling,
                    c(0.0),
                    c(self.a),
                    c(1.0),
                    inw,
                    self.a1 + inw,
                    c(0.0),
                    c(-nf),
                ],
            ))
        } else {
            Ok(DMatrix::from_row_slice(2, 2, &[kin, coupling, c(self.a), c(1.0)]))
        }
    }

    /// Factor `p` with `det(boundary_matrix) = p * E(s)`: `1/s` for the Euler
    /// models and `-n / (rho s^2 + w+^2)` for the MHD models.
    pub fn determinant_prefactor(&self, s: Complex64, n: u64) -> Result<Complex64> {
        if self.model.is_mhd() {
            let d = self.alfven_denominator(s);
            if d.norm() == 0.0 {
                return Err(Error::Resonance {
                    s,
                    what: "rho s^2 + w+^2",
                });
            }
            Ok(-(n as f64) / d)
        } else {
            if s.norm() == 0.0 {
                return Err(Error::Resonance { s, what: "s" });
            }
            Ok(1.0 / s)
        }
    }
}

/// `sqrt(1 + s^2 / k)` and its derivative `s / (k L)`.
fn simple_radical(s: Complex64, k: f64) -> (Complex64, Complex64) {
    let l = (1.0 + s * s / k).sqrt();
    (l, s / (k * l))
}

/// Decaying plasma-side exponent `lambda+` at frequency `s`.
pub fn lambda_plus(model: ModelKind, state: &BasicState, omega: &Wavevector, s: Complex64) -> Result<Complex64> {
    Symbol::new(model, state, omega)?.lambda_plus(s)
}

/// Growing (into the vacuum) exponent `lambda- = 1` of the MHD models.
pub fn lambda_minus(model: ModelKind) -> Result<Complex64> {
    if model.is_mhd() {
        Ok(Complex64::new(1.0, 0.0))
    } else {
        Err(Error::UnsupportedModel {
            model,
            op: "lambda_minus",
        })
    }
}

/// Normal velocity amplitude `v1` implied by the pressure amplitude `q_amp`.
pub fn normal_velocity_amplitude(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    s: Complex64,
    q_amp: Complex64,
) -> Result<Complex64> {
    Ok(Symbol::new(model, state, omega)?.velocity_coupling(s)? * q_amp)
}

pub fn dispersion_eval(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    s: Complex64,
    n: u64,
) -> Result<DeterminantValue> {
    Symbol::new(model, state, omega)?.eval(s, n)
}

pub fn boundary_matrix(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    s: Complex64,
    n: u64,
) -> Result<DMatrix<Complex64>> {
    Symbol::new(model, state, omega)?.boundary_matrix(s, n)
}
