//! Frozen-coefficient normal-mode analysis of the linearized plasma-vacuum
//! interface problem and of its Euler counterparts.

pub mod classifier;
pub mod dispersion;
pub mod domain;
pub mod error;
pub mod hadamard;
pub mod poly;
pub mod roots;
pub mod vacuum_green;

pub use classifier::{classify_frozen, is_collinear, numeric_classify, sweep, SweepGrid, SweepOptions, SweepRow};
pub use dispersion::{
    boundary_matrix, dispersion_eval, lambda_minus, lambda_plus, normal_velocity_amplitude, DeterminantValue, Symbol,
};
pub use domain::{
    w_pair, BasicState, Classification, HadamardMode, ModeAmplitudes, ModeRoot, ModelKind, Normalization, ScalingFit,
    Verdict, Wavevector,
};
pub use error::{Error, Result};
pub use hadamard::{
    boundary_flux_check, build_mode, evaluate_field, growth_ratio, pde_residual_fd, GridSpec, ResidualReport,
};
pub use roots::{asymptotic_root, fit_scaling, scan_s0, solve_dispersion, AsymptoticRoot, RootOptions};
pub use vacuum_green::{green_identity_check, strip_potential, GreenIdentity, StripPotential};
