//! Fixtures shared by the benchmarks.

use mhdlab_core::{BasicState, ModelKind, Wavevector};

/// Collinear compressible plasma with `a_hat > 0`.
pub fn ill_posed_mhd() -> (ModelKind, BasicState, Wavevector) {
    let state = BasicState {
        rho_hat: 1.5,
        c_hat: 1.2,
        h_plasma: [1.0, 0.0],
        h_vacuum: [2.0, 0.0],
        a_hat: 1.0,
        a0_hat: 0.2,
        a1_hat: 0.5,
    };
    (ModelKind::CompressibleMHD, state, Wavevector::new(0.0, 1.0).unwrap())
}

/// Same state with the vacuum field turned off the plasma direction.
pub fn non_collinear_mhd() -> (ModelKind, BasicState, Wavevector) {
    let (model, mut state, _) = ill_posed_mhd();
    state.h_vacuum = [0.5, 1.5];
    (model, state, Wavevector::new(0.6, 0.8).unwrap())
}
