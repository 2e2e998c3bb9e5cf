//! Value types shared by every analysis: the frozen basic state, the four
//! frozen-coefficient model problems, tangential wavevectors, and the records
//! produced by root finding, mode construction and classification.
//!
//! All frozen problems are posed on the flat interface `x1 = 0` with the
//! plasma in `x1 > 0` and the vacuum in `x1 < 0`. The basic velocity is
//! removed by a Galilean shift and the entropy perturbation is identically
//! zero, so neither appears here.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which frozen-coefficient problem is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Incompressible Euler flow with the vacuum condition `p = 0` on the free surface.
    IncompressibleEuler,
    /// Compressible Euler flow (liquid with positive surface density) in vacuum.
    CompressibleEuler,
    /// Incompressible plasma bounded by a vacuum magnetic field.
    IncompressibleMHD,
    /// Compressible plasma bounded by a vacuum magnetic field.
    CompressibleMHD,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::IncompressibleEuler,
        ModelKind::CompressibleEuler,
        ModelKind::IncompressibleMHD,
        ModelKind::CompressibleMHD,
    ];

    pub fn is_mhd(self) -> bool {
        matches!(self, ModelKind::IncompressibleMHD | ModelKind::CompressibleMHD)
    }

    pub fn is_compressible(self) -> bool {
        matches!(self, ModelKind::CompressibleEuler | ModelKind::CompressibleMHD)
    }

    /// Short snake-case name used in configuration files and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::IncompressibleEuler => "incompressible_euler",
            ModelKind::CompressibleEuler => "compressible_euler",
            ModelKind::IncompressibleMHD => "incompressible_mhd",
            ModelKind::CompressibleMHD => "compressible_mhd",
        }
    }

    /// Accepts both the snake-case name and the variant name.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == t || format!("{m:?}") == t)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Frozen unperturbed data at one point of the flat interface.
///
/// `a_hat` is minus the jump of the normal derivative of the total pressure,
/// so the Rayleigh-Taylor sign condition holds exactly when `a_hat < 0`.
/// `a0_hat` is the normal derivative of the normal basic velocity and
/// `a1_hat` minus the normal derivative of the normal vacuum field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicState {
    pub rho_hat: f64,
    pub c_hat: f64,
    /// Tangential plasma field `(H2, H3)`.
    pub h_plasma: [f64; 2],
    /// Tangential vacuum field `(calH2, calH3)`.
    pub h_vacuum: [f64; 2],
    pub a_hat: f64,
    pub a0_hat: f64,
    pub a1_hat: f64,
}

impl Default for BasicState {
    fn default() -> Self {
        BasicState {
            rho_hat: 1.0,
            c_hat: 1.0,
            h_plasma: [0.0; 2],
            h_vacuum: [0.0; 2],
            a_hat: 0.0,
            a0_hat: 0.0,
            a1_hat: 0.0,
        }
    }
}

impl BasicState {
    /// Alfven speed `|H'| / sqrt(rho)`. The frozen plasma field has no normal
    /// component, so `|H| = |H'|`.
    pub fn alfven_speed(&self) -> f64 {
        norm2(self.h_plasma) / self.rho_hat.sqrt()
    }

    /// Checks the hyperbolicity conditions and, for the Euler models, that the
    /// magnetic data they do not use are zero.
    pub fn validate(&self, model: ModelKind) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Error::InvalidState {
            model,
            field,
            reason: reason.to_string(),
        };
        let finite = [
            ("rho_hat", self.rho_hat),
            ("c_hat", self.c_hat),
            ("H_plasma_2", self.h_plasma[0]),
            ("H_plasma_3", self.h_plasma[1]),
            ("H_vacuum_2", self.h_vacuum[0]),
            ("H_vacuum_3", self.h_vacuum[1]),
            ("a_hat", self.a_hat),
            ("a0_hat", self.a0_hat),
            ("a1_hat", self.a1_hat),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(bad(name, "must be finite"));
            }
        }
        if self.rho_hat <= 0.0 {
            return Err(bad("rho_hat", "must be positive"));
        }
        if self.c_hat <= 0.0 {
            return Err(bad("c_hat", "must be positive"));
        }
        if !model.is_mhd() {
            if self.h_plasma != [0.0; 2] {
                return Err(bad("H_plasma", "must be zero for an Euler model"));
            }
            if self.h_vacuum != [0.0; 2] {
                return Err(bad("H_vacuum", "must be zero for an Euler model"));
            }
            if self.a1_hat != 0.0 {
                return Err(bad("a1_hat", "must be zero for an Euler model"));
            }
        }
        Ok(())
    }

    /// `H2 calH3 - H3 calH2`.
    pub fn cross(&self) -> f64 {
        self.h_plasma[0] * self.h_vacuum[1] - self.h_plasma[1] * self.h_vacuum[0]
    }
}

/// Tangential wavevector `omega' = (omega2, omega3)`, stored at user scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavevector {
    omega2: f64,
    omega3: f64,
}

impl Wavevector {
    pub fn new(omega2: f64, omega3: f64) -> Result<Self> {
        let norm = omega2.hypot(omega3);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroWavevector(omega2, omega3));
        }
        Ok(Wavevector { omega2, omega3 })
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn omega3(&self) -> f64 {
        self.omega3
    }

    pub fn norm(&self) -> f64 {
        self.omega2.hypot(self.omega3)
    }

    /// The direction `omega' / |omega'|`; every analysis works with this.
    pub fn unit(&self) -> [f64; 2] {
        let r = self.norm();
        [self.omega2 / r, self.omega3 / r]
    }
}

/// Projections `(w+, w-)` of the tangential plasma and vacuum fields on the
/// unit wavevector.
///
/// Projections below rounding level relative to the field magnitude are
/// returned as exact zeros, so that a wavevector built orthogonal to a field
/// lands on the `W = 0` family.
pub fn w_pair(state: &BasicState, omega: &Wavevector) -> (f64, f64) {
    let u = omega.unit();
    let project = |h: [f64; 2]| {
        let w = h[0] * u[0] + h[1] * u[1];
        if w.abs() <= 1e-14 * norm2(h) {
            0.0
        } else {
            w
        }
    };
    (project(state.h_plasma), project(state.h_vacuum))
}

/// Alfven speed of the frozen plasma field.
pub fn alfven_speed(state: &BasicState) -> f64 {
    state.alfven_speed()
}

pub(crate) fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// A temporal frequency `s` of the normal-mode ansatz
/// `exp{n (s t + lambda x1 + i omega'.x')}` together with its spatial exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRoot {
    pub s: Complex64,
    pub lambda_plus: Complex64,
    /// Vacuum-side exponent; absent for the Euler models.
    pub lambda_minus: Option<Complex64>,
    /// Relative residual of the dispersion relation at `s`.
    pub residual: f64,
    /// `Re s > 0`, `Re lambda+ < 0` and (MHD) `Re lambda- > 0`.
    pub admissible: bool,
    /// The `s = 0` root, reported but never counted as growth.
    pub neutral: bool,
    pub n: u64,
}

/// Which amplitude was pinned when normalizing a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// The interface displacement amplitude is one.
    InterfaceUnit,
    /// The boundary unknowns have unit Euclidean norm.
    UnitNorm,
}

/// Complex amplitudes of one exponential solution.
///
/// Vector amplitudes are in the `(x1, x2, x3)` frame. `q` is the pressure for
/// the Euler models and the total pressure for the MHD models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitudes {
    pub phi: Complex64,
    pub q: Complex64,
    pub v: [Complex64; 3],
    pub h: Option<[Complex64; 3]>,
    pub xi: Option<Complex64>,
}

/// A fully determined member of a Hadamard sequence at mode index `root.n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardMode {
    pub model: ModelKind,
    pub state: BasicState,
    pub omega: Wavevector,
    pub root: ModeRoot,
    pub amplitudes: ModeAmplitudes,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Growth `exp(C sqrt(n) t)` unbounded in `n` at every fixed `t > 0`.
    IllPosed,
    /// An unstable root `s = a0/n`: exponential growth bounded uniformly in `n`.
    ExponentiallyUnstable,
    NoHadamardGrowth,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::IllPosed => "IllPosed",
            Verdict::ExponentiallyUnstable => "ExponentiallyUnstable",
            Verdict::NoHadamardGrowth => "NoHadamardGrowth",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Least-squares fit `Re s ~ coefficient * n^(-exponent)` in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub n_range: (u64, u64),
    pub rms_log_error: f64,
    /// The `(n, max admissible Re s)` samples that were fitted.
    pub samples: Vec<(u64, f64)>,
}

/// Well-posedness verdict for one frozen state with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub collinear: bool,
    /// `[d1 q] > 0`, i.e. `a_hat < 0`.
    pub rt_sign_ok: bool,
    /// `a_hat` was within the zero tolerance and treated as exactly zero.
    pub a_hat_near_zero: bool,
    /// Wavevector with `w+ = w- = 0` (MHD models with collinear fields).
    pub witness: Option<Wavevector>,
    pub evidence: Option<ScalingFit>,
}
