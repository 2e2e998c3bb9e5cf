use num_complex::Complex64;
use thiserror::Error;

use crate::domain::{ModelKind, Verdict};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("wavevector must be nonzero and finite, got ({0}, {1})")]
    ZeroWavevector(f64, f64),

    #[error("invalid basic state for {model:?}: {field} {reason}")]
    InvalidState {
        model: ModelKind,
        field: &'static str,
        reason: String,
    },

    #[error("{op} is not defined for {model:?}")]
    UnsupportedModel { model: ModelKind, op: &'static str },

    #[error("branch point of the plasma spatial exponent at s = {s}")]
    BranchPoint { s: Complex64 },

    #[error("resonance at s = {s}: {what} vanishes")]
    Resonance { s: Complex64, what: &'static str },

    #[error("root finder did not converge after {iterations} iterations (best iterate {best}, residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        best: Complex64,
        residual: f64,
    },

    #[error("boundary matrix is numerically full rank (relative smallest singular value {sigma_min:e})")]
    NotARoot { sigma_min: f64 },

    #[error("invalid mode-index grid: {0}")]
    InvalidGrid(String),

    #[error("no admissible root at n = {failing:?}")]
    PartialFit { failing: Vec<u64> },

    #[error("grid too coarse: {points} points per wavelength in {direction}, need at least {required}")]
    GridTooCoarse {
        direction: &'static str,
        points: usize,
        required: usize,
    },

    #[error("degenerate mode: {0}")]
    Degenerate(String),

    #[error("analytic verdict {analytic:?} disagrees with numeric verdict {numeric:?}\n{evidence}")]
    Conflict {
        analytic: Verdict,
        numeric: Verdict,
        evidence: String,
    },

    #[error("sweep configuration: {0}")]
    Sweep(String),
}
