//! Explicit exponential solutions of the frozen problems, their sampling on
//! truncated grids, finite-difference verification and norm growth.
//!
//! A mode is `exp{n (s t + lambda x1 + i zeta)}` with `zeta = omega_hat . x'`,
//! so every field depends on `x'` only through `zeta` and `d_j = omega_hat_j d_zeta`.
//! Grids cover one tangential wavelength `2 pi / n` with periodic wrap.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::Symbol;
use crate::domain::{BasicState, HadamardMode, ModeAmplitudes, ModeRoot, ModelKind, Normalization, Wavevector};
use crate::error::{Error, Result};
use crate::roots::solve_dispersion;

/// Relative smallest singular value below which the boundary matrix counts
/// as singular.
pub const NULLSPACE_TOLERANCE: f64 = 1e-8;
/// Bound on `exp(n Re(lambda) L)` at the truncation depth.
pub const TRUNCATION_EPSILON: f64 = 1e-16;
/// Decay lengths kept on each side: `exp(-40)` is below the truncation bound.
const DECAY_LENGTHS: f64 = 40.0;
/// Past this exponent fields are reported as log-magnitudes.
pub const LOG_THRESHOLD: f64 = 700.0;
pub const MIN_POINTS_PER_WAVELENGTH: usize = 8;
const MAX_GRID_POINTS: usize = 20_000_000;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Builds the mode with unit interface amplitude.
pub fn build_mode(model: ModelKind, state: &BasicState, omega: &Wavevector, root: &ModeRoot) -> Result<HadamardMode> {
    build_mode_with(model, state, omega, root, Normalization::InterfaceUnit)
}

pub fn build_mode_with(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    root: &ModeRoot,
    normalization: Normalization,
) -> Result<HadamardMode> {
    if !(root.admissible || root.neutral) {
        return Err(Error::Degenerate(format!(
            "root s = {} is neither admissible nor neutral",
            root.s
        )));
    }
    let sym = Symbol::new(model, state, omega)?;
    let s = root.s;
    let n = root.n;
    let m = sym.boundary_matrix(s, n)?;
    let x = null_vector(&m)?;

    // The printed systems carry -q as the second unknown.
    let phi = x[0];
    let q = -x[1];
    let xi = model.is_mhd().then(|| x[2]);
    let (v, h) = interior_amplitudes(&sym, state, omega, s, q)?;
    let mut amplitudes = ModeAmplitudes { phi, q, v, h, xi };

    let factor = match normalization {
        Normalization::InterfaceUnit => {
            if phi.norm() <= 1e-12 {
                return Err(Error::Degenerate(
                    "interface amplitude vanishes; use unit-norm normalization".into(),
                ));
            }
            1.0 / phi
        }
        Normalization::UnitNorm => {
            // x has unit norm already; fix the phase for determinism
            let pivot = x.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            pivot.conj() / pivot.norm()
        }
    };
    scale_amplitudes(&mut amplitudes, factor);
    let root = ModeRoot {
        lambda_plus: sym.lambda_plus(s)?,
        lambda_minus: model.is_mhd().then(|| Complex64::new(1.0, 0.0)),
        ..*root
    };
    Ok(HadamardMode {
        model,
        state: *state,
        omega: *omega,
        root,
        amplitudes,
        normalization,
    })
}

fn scale_amplitudes(a: &mut ModeAmplitudes, f: Complex64) {
    a.phi *= f;
    a.q *= f;
    for v in a.v.iter_mut() {
        *v *= f;
    }
    if let Some(h) = a.h.as_mut() {
        for x in h.iter_mut() {
            *x *= f;
        }
    }
    if let Some(xi) = a.xi.as_mut() {
        *xi *= f;
    }
}

/// Right singular vector of the smallest singular value.
fn null_vector(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (k, smin) = sv
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rel = if smax > 0.0 { smin / smax } else { 0.0 };
    if rel > NULLSPACE_TOLERANCE {
        return Err(Error::NotARoot { sigma_min: rel });
    }
    let v_t = svd.v_t.expect("requested V^H");
    Ok(v_t.row(k).iter().map(|z| z.conj()).collect())
}

/// Velocity and magnetic amplitudes in the plasma from the pressure
/// amplitude, by the interior equations.
fn interior_amplitudes(
    sym: &Symbol,
    state: &BasicState,
    omega: &Wavevector,
    s: Complex64,
    q: Complex64,
) -> Result<([Complex64; 3], Option<[Complex64; 3]>)> {
    let u = omega.unit();
    let lambda = sym.lambda_plus(s)?;
    let k = [lambda, I * u[0], I * u[1]];
    let rho = sym.rho;
    match sym.model {
        ModelKind::IncompressibleEuler | ModelKind::CompressibleEuler => {
            if s.norm() == 0.0 {
                return Err(Error::Resonance { s, what: "s" });
            }
            let f = -q / (rho * s);
            Ok(([k[0] * f, k[1] * f, k[2] * f], None))
        }
        ModelKind::IncompressibleMHD | ModelKind::CompressibleMHD => {
            let d_res = sym.alfven_denominator(s);
            if d_res.norm() == 0.0 {
                return Err(Error::Resonance {
                    s,
                    what: "rho s^2 + w+^2",
                });
            }
            let w = sym.w_plus;
            let hh = [0.0, state.h_plasma[0], state.h_plasma[1]];
            // divergence amplitude k . v
            let d = if sym.model == ModelKind::IncompressibleMHD {
                zero()
            } else if w == 0.0 {
                -s * q / (rho * sym.fast2)
            } else {
                let m = sym.fast2 * s * s + sym.c * sym.c * w * w / rho;
                -s * s * s * q / (rho * m)
            };
            let mut v = [zero(); 3];
            let mut h = [zero(); 3];
            for j in 0..3 {
                v[j] = -(I * w * hh[j] * d + s * k[j] * q) / d_res;
                h[j] = -(rho * s * hh[j] * d + I * w * k[j] * q) / d_res;
            }
            Ok((v, Some(h)))
        }
    }
}

/// Relative size of `lambda+ H1 + i omega_hat . H'` for the magnetic amplitude.
pub fn divergence_constraint(mode: &HadamardMode) -> Option<f64> {
    let h = mode.amplitudes.h?;
    let u = mode.omega.unit();
    let terms = [mode.root.lambda_plus * h[0], I * u[0] * h[1], I * u[1] * h[2]];
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let sum: Complex64 = terms.iter().sum();
    Some(if scale > 0.0 { sum.norm() / scale } else { 0.0 })
}

/// Truncated tensor grid `(x1, zeta)` on both sides of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Truncation depth of the plasma side `0 <= x1 <= L+`.
    pub x1_extent_plus: f64,
    /// Truncation depth of the vacuum side `-L- <= x1 <= 0`.
    pub x1_extent_minus: f64,
    /// Intervals in `x1` on the plasma side.
    pub points_plus: usize,
    /// Intervals in `x1` on the vacuum side.
    pub points_minus: usize,
    /// Points per tangential period.
    pub points_tangential: usize,
    pub tangential_period: f64,
}

impl GridSpec {
    /// Grid with `points_per_wavelength` tangential points, equal spacing in
    /// `x1`, and depths of 40 decay lengths on each side.
    pub fn for_mode(mode: &HadamardMode, points_per_wavelength: usize) -> Result<Self> {
        let n = mode.root.n as f64;
        let period = 2.0 * std::f64::consts::PI / n;
        if points_per_wavelength == 0 {
            return Err(Error::InvalidGrid("need at least one tangential point".into()));
        }
        let h = period / points_per_wavelength as f64;
        let decay = -mode.root.lambda_plus.re;
        if !(decay > 0.0) {
            return Err(Error::Degenerate("plasma exponent does not decay".into()));
        }
        let intervals = |depth: f64| -> Result<usize> {
            let k = (depth / h).ceil() as usize;
            if k.saturating_mul(points_per_wavelength) > MAX_GRID_POINTS {
                return Err(Error::InvalidGrid(format!("{k} x1 intervals exceed the size cap")));
            }
            Ok(k.max(3))
        };
        let np = intervals(DECAY_LENGTHS / (n * decay))?;
        let nm = intervals(DECAY_LENGTHS / n)?;
        Ok(GridSpec {
            x1_extent_plus: np as f64 * h,
            x1_extent_minus: nm as f64 * h,
            points_plus: np,
            points_minus: nm,
            points_tangential: points_per_wavelength,
            tangential_period: period,
        })
    }

    pub fn h_tangential(&self) -> f64 {
        self.tangential_period / self.points_tangential as f64
    }

    pub fn h_plus(&self) -> f64 {
        self.x1_extent_plus / self.points_plus as f64
    }

    pub fn h_minus(&self) -> f64 {
        self.x1_extent_minus / self.points_minus as f64
    }

    /// Whether the mode has decayed below `eps` at both truncation depths.
    pub fn truncation_ok(&self, mode: &HadamardMode, eps: f64) -> bool {
        let n = mode.root.n as f64;
        let plus = (n * mode.root.lambda_plus.re * self.x1_extent_plus).exp() <= eps;
        let minus = mode
            .root
            .lambda_minus
            .is_none_or(|l| (-n * l.re * self.x1_extent_minus).exp() <= eps);
        plus && minus
    }

    /// Checks sizes and that each direction has at least eight points per
    /// wavelength (or per `2 pi` decay lengths in `x1`).
    pub fn validate(&self, mode: &HadamardMode) -> Result<()> {
        let finite = [self.x1_extent_plus, self.x1_extent_minus, self.tangential_period]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !finite || self.points_plus < 3 || (mode.model.is_mhd() && self.points_minus < 3) {
            return Err(Error::InvalidGrid(
                "extents must be positive and each side needs at least 3 intervals".into(),
            ));
        }
        let n = mode.root.n as f64;
        let required = MIN_POINTS_PER_WAVELENGTH;
        if self.points_tangential < required {
            return Err(Error::GridTooCoarse {
                direction: "tangential",
                points: self.points_tangential,
                required,
            });
        }
        let check = |lambda: Complex64, h: f64, direction: &'static str| -> Result<()> {
            let per = 2.0 * std::f64::consts::PI / (n * lambda.norm() * h);
            if per < required as f64 {
                return Err(Error::GridTooCoarse {
                    direction,
                    points: per.floor() as usize,
                    required,
                });
            }
            Ok(())
        };
        check(mode.root.lambda_plus, self.h_plus(), "x1 (plasma)")?;
        if let Some(l) = mode.root.lambda_minus {
            check(l, self.h_minus(), "x1 (vacuum)")?;
        }
        Ok(())
    }

    pub fn x1_plus(&self) -> Vec<f64> {
        let h = self.h_plus();
        (0..=self.points_plus).map(|i| i as f64 * h).collect()
    }

    pub fn x1_minus(&self) -> Vec<f64> {
        let h = self.h_minus();
        (0..=self.points_minus).map(|i| -(i as f64) * h).collect()
    }

    pub fn zeta(&self) -> Vec<f64> {
        let h = self.h_tangential();
        (0..self.points_tangential).map(|j| j as f64 * h).collect()
    }
}

/// One sampled field, row-major over `(x1, zeta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub values: Vec<Complex64>,
}

/// Fields of a mode on a grid at one time. The physical value is
/// `stored * exp(log_scale)`; `log_scale` is nonzero only in log-magnitude
/// mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFields {
    pub t: f64,
    pub log_scale: f64,
    pub log_magnitude: bool,
    pub direction: [f64; 2],
    pub x1_plus: Vec<f64>,
    pub x1_minus: Vec<f64>,
    pub zeta: Vec<f64>,
    pub plasma: Vec<Field>,
    /// Empty for the Euler models.
    pub vacuum: Vec<Field>,
    /// The front `phi`, one row.
    pub interface: Vec<Field>,
}

impl SampledFields {
    /// `ln |f|` of entry `k`.
    pub fn log_abs(&self, field: &Field, k: usize) -> f64 {
        field.values[k].norm().ln() + self.log_scale
    }

    /// Real part of entry `k`; infinite when it overflows.
    pub fn real(&self, field: &Field, k: usize) -> f64 {
        field.values[k].re * self.log_scale.exp()
    }

    /// `ln` of the largest modulus over every sampled field.
    pub fn sup_log(&self) -> f64 {
        let m = self
            .plasma
            .iter()
            .chain(&self.vacuum)
            .chain(&self.interface)
            .flat_map(|f| f.values.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        m.ln() + self.log_scale
    }
}

fn plasma_names(model: ModelKind) -> Vec<&'static str> {
    if model.is_mhd() {
        vec!["q", "v1", "v2", "v3", "H1", "H2", "H3"]
    } else {
        vec!["p", "v1", "v2", "v3"]
    }
}

const VACUUM_NAMES: [&str; 4] = ["xi", "calH1", "calH2", "calH3"];

fn plasma_amplitudes(mode: &HadamardMode) -> Vec<Complex64> {
    let a = &mode.amplitudes;
    let mut out = vec![a.q, a.v[0], a.v[1], a.v[2]];
    if let Some(h) = a.h {
        out.extend_from_slice(&h);
    }
    out
}

fn vacuum_amplitudes(mode: &HadamardMode) -> Vec<Complex64> {
    let (Some(xi), Some(lm)) = (mode.amplitudes.xi, mode.root.lambda_minus) else {
        return Vec::new();
    };
    let u = mode.omega.unit();
    let n = mode.root.n as f64;
    // calH = grad xi
    vec![xi, n * lm * xi, n * I * u[0] * xi, n * I * u[1] * xi]
}

/// Samples `amps * exp{n (s t + lambda x1 + i zeta) - log_scale}`.
fn sample_block(
    mode: &HadamardMode,
    lambda: Complex64,
    amps: &[Complex64],
    x1: &[f64],
    zeta: &[f64],
    t: f64,
    log_scale: f64,
) -> Vec<Vec<Complex64>> {
    let n = mode.root.n as f64;
    let s = mode.root.s;
    let nz = zeta.len();
    let tangential: Vec<Complex64> = zeta.iter().map(|z| (I * n * z).exp()).collect();
    let rows: Vec<Vec<Complex64>> = x1
        .par_iter()
        .map(|&x| {
            let e = (n * (s * t + lambda * x) - log_scale).exp();
            tangential.iter().map(|tz| e * tz).collect()
        })
        .collect();
    amps.iter()
        .map(|&a| {
            let mut v = Vec::with_capacity(x1.len() * nz);
            for row in &rows {
                v.extend(row.iter().map(|p| a * p));
            }
            v
        })
        .collect()
}

fn log_scale_for(mode: &HadamardMode, t: f64) -> f64 {
    let e = mode.root.n as f64 * mode.root.s.re * t;
    if e > LOG_THRESHOLD {
        e
    } else {
        0.0
    }
}

pub fn evaluate_field(mode: &HadamardMode, grid: &GridSpec, t: f64) -> Result<SampledFields> {
    grid.validate(mode)?;
    Ok(sample(mode, grid, t, log_scale_for(mode, t)))
}

fn sample(mode: &HadamardMode, grid: &GridSpec, t: f64, log_scale: f64) -> SampledFields {
    let x1_plus = grid.x1_plus();
    let zeta = grid.zeta();
    let named = |names: &[&str], vals: Vec<Vec<Complex64>>| -> Vec<Field> {
        names
            .iter()
            .zip(vals)
            .map(|(n, v)| Field {
                name: n.to_string(),
                values: v,
            })
            .collect()
    };
    let plasma = named(
        &plasma_names(mode.model),
        sample_block(
            mode,
            mode.root.lambda_plus,
            &plasma_amplitudes(mode),
            &x1_plus,
            &zeta,
            t,
            log_scale,
        ),
    );
    let (x1_minus, vacuum) = match mode.root.lambda_minus {
        Some(lm) => {
            let x = grid.x1_minus();
            let v = sample_block(mode, lm, &vacuum_amplitudes(mode), &x, &zeta, t, log_scale);
            (x, named(&VACUUM_NAMES, v))
        }
        None => (Vec::new(), Vec::new()),
    };
    let interface = named(
        &["phi"],
        sample_block(mode, zero(), &[mode.amplitudes.phi], &[0.0], &zeta, t, log_scale),
    );
    SampledFields {
        t,
        log_scale,
        log_magnitude: log_scale > 0.0,
        direction: mode.omega.unit(),
        x1_plus,
        x1_minus,
        zeta,
        plasma,
        vacuum,
        interface,
    }
}

/// Relative residual of one equation: sup of the residual over sup of the
/// largest individual term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub name: String,
    pub residual: f64,
    pub scale: f64,
    /// Every term is negligible, so the equation holds trivially and has no
    /// convergence order.
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub model: ModelKind,
    pub n: u64,
    pub t: f64,
    /// Grid spacing, equal in `x1`, `zeta` and `t`.
    pub h: f64,
    pub interior: Vec<EquationResidual>,
    /// Boundary conditions with exact modal derivatives.
    pub boundary: Vec<EquationResidual>,
    /// Boundary conditions with finite differences (one-sided in `x1`).
    pub boundary_fd: Vec<EquationResidual>,
    pub constraints: Vec<EquationResidual>,
}

impl ResidualReport {
    pub fn max_interior(&self) -> f64 {
        max_residual(&self.interior)
    }

    pub fn max_boundary(&self) -> f64 {
        max_residual(&self.boundary)
    }
}

fn max_residual(list: &[EquationResidual]) -> f64 {
    list.iter().map(|e| e.residual).fold(0.0, f64::max)
}

/// `log2(coarse / fine)` per interior equation; `None` for trivial ones.
pub fn convergence_orders(coarse: &ResidualReport, fine: &ResidualReport) -> Vec<(String, Option<f64>)> {
    coarse
        .interior
        .iter()
        .zip(&fine.interior)
        .map(|(c, f)| {
            let order = (!c.trivial && !f.trivial && f.residual > 0.0).then(|| (c.residual / f.residual).log2());
            (c.name.clone(), order)
        })
        .collect()
}

/// Running sup of residual and term size.
#[derive(Clone, Copy, Default)]
struct Acc {
    num: f64,
    den: f64,
}

impl Acc {
    fn add(&mut self, terms: &[Complex64]) {
        let sum: Complex64 = terms.iter().sum();
        self.num = self.num.max(sum.norm());
        self.den = terms.iter().fold(self.den, |d, t| d.max(t.norm()));
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.num = self.num.max(o.num);
        self.den = self.den.max(o.den);
        self
    }
}

fn finish(names: &[String], accs: &[Acc]) -> Vec<EquationResidual> {
    let global = accs.iter().map(|a| a.den).fold(0.0, f64::max);
    names
        .iter()
        .zip(accs)
        .map(|(name, a)| {
            let trivial = a.den <= 1e-12 * global;
            EquationResidual {
                name: name.clone(),
                residual: if a.den > 0.0 { a.num / a.den } else { 0.0 },
                scale: a.den,
                trivial,
            }
        })
        .collect()
}

/// Field arrays at `t - dt`, `t`, `t + dt` with centered differences.
struct Stencil<'a> {
    before: &'a [Field],
    now: &'a [Field],
    after: &'a [Field],
    nz: usize,
    h1: f64,
    hz: f64,
    dt: f64,
}

impl Stencil<'_> {
    fn at(&self, f: usize, i: usize, j: usize) -> Complex64 {
        self.now[f].values[i * self.nz + j]
    }

    fn dt(&self, f: usize, i: usize, j: usize) -> Complex64 {
        let k = i * self.nz + j;
        (self.after[f].values[k] - self.before[f].values[k]) / (2.0 * self.dt)
    }

    fn d1(&self, f: usize, i: usize, j: usize) -> Complex64 {
        (self.at(f, i + 1, j) - self.at(f, i - 1, j)) / (2.0 * self.h1)
    }

    fn dz(&self, f: usize, i: usize, j: usize) -> Complex64 {
        let jp = (j + 1) % self.nz;
        let jm = (j + self.nz - 1) % self.nz;
        (self.at(f, i, jp) - self.at(f, i, jm)) / (2.0 * self.hz)
    }

    fn d11(&self, f: usize, i: usize, j: usize) -> Complex64 {
        (self.at(f, i + 1, j) - 2.0 * self.at(f, i, j) + self.at(f, i - 1, j)) / (self.h1 * self.h1)
    }

    fn dzz(&self, f: usize, i: usize, j: usize) -> Complex64 {
        let jp = (j + 1) % self.nz;
        let jm = (j + self.nz - 1) % self.nz;
        (self.at(f, i, jp) - 2.0 * self.at(f, i, j) + self.at(f, i, jm)) / (self.hz * self.hz)
    }
}

/// Accumulates `eqs` over interior rows `1..rows-1` in parallel.
fn sweep_rows<F>(rows: usize, nz: usize, count: usize, eqs: F) -> Vec<Acc>
where
    F: Fn(usize, usize, &mut [Acc]) + Sync,
{
    (1..rows - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![Acc::default(); count];
            for j in 0..nz {
                eqs(i, j, &mut acc);
            }
            acc
        })
        .reduce(
            || vec![Acc::default(); count],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        )
}

/// Finite-difference residuals of every interior equation, boundary
/// condition and constraint of the model, evaluated on the sampled mode.
pub fn pde_residual_fd(mode: &HadamardMode, grid: &GridSpec, t: f64) -> Result<ResidualReport> {
    grid.validate(mode)?;
    let model = mode.model;
    let st = &mode.state;
    let n = mode.root.n as f64;
    let s = mode.root.s;
    let u = mode.omega.unit();
    let sym = Symbol::new(model, st, &mode.omega)?;
    let (wp, wm) = (sym.w_plus, sym.w_minus);
    let rho = st.rho_hat;
    let rc2 = rho * st.c_hat * st.c_hat;
    let hh = [0.0, st.h_plasma[0], st.h_plasma[1]];

    let h = grid.h_tangential();
    let ls = log_scale_for(mode, t);
    let before = sample(mode, grid, t - h, ls);
    let now = sample(mode, grid, t, ls);
    let after = sample(mode, grid, t + h, ls);
    let nz = grid.points_tangential;

    let plasma = Stencil {
        before: &before.plasma,
        now: &now.plasma,
        after: &after.plasma,
        nz,
        h1: grid.h_plus(),
        hz: h,
        dt: h,
    };
    // derivative along x_{k+1} for the 0-based component k in {1, 2}
    let dtan = |p: &Stencil, f, i, j, k: usize| u[k - 1] * p.dz(f, i, j);

    let mut names: Vec<String> = Vec::new();
    let has_mass = model.is_compressible();
    let has_div = !model.is_compressible();
    if has_mass {
        names.push("mass".into());
    }
    for k in 1..=3 {
        names.push(format!("momentum_{k}"));
    }
    if has_div {
        names.push("div_v".into());
    }
    if model.is_mhd() {
        for k in 1..=3 {
            names.push(format!("induction_{k}"));
        }
    }
    let mhd = model.is_mhd();
    let rows = grid.points_plus + 1;
    let count = names.len();
    let plasma_accs = sweep_rows(rows, nz, count + usize::from(mhd), |i, j, acc| {
        let p = &plasma;
        let div_terms = [p.d1(1, i, j), dtan(p, 2, i, j, 1), dtan(p, 3, i, j, 2)];
        let mut e = 0;
        if has_mass {
            let mut terms = vec![p.dt(0, i, j)];
            if mhd {
                terms.push(-hh[1] * p.dt(5, i, j));
                terms.push(-hh[2] * p.dt(6, i, j));
            }
            terms.extend(div_terms.iter().map(|d| rc2 * d));
            acc[e].add(&terms);
            e += 1;
        }
        for k in 0..3 {
            let grad = if k == 0 { p.d1(0, i, j) } else { dtan(p, 0, i, j, k) };
            let mut terms = vec![rho * p.dt(1 + k, i, j), grad];
            if mhd {
                terms.push(-wp * p.dz(4 + k, i, j));
            }
            acc[e].add(&terms);
            e += 1;
        }
        if has_div {
            acc[e].add(&div_terms);
            e += 1;
        }
        if mhd {
            for k in 0..3 {
                let mut terms = vec![p.dt(4 + k, i, j), -wp * p.dz(1 + k, i, j)];
                if model.is_compressible() {
                    terms.extend(div_terms.iter().map(|d| hh[k] * d));
                }
                acc[e].add(&terms);
                e += 1;
            }
            // div H as a constraint
            acc[e].add(&[p.d1(4, i, j), dtan(p, 5, i, j, 1), dtan(p, 6, i, j, 2)]);
        }
    });
    let mut interior_names = names.clone();
    let mut interior_accs: Vec<Acc> = plasma_accs[..count].to_vec();
    let mut constraint_names: Vec<String> = Vec::new();
    let mut constraint_accs: Vec<Acc> = Vec::new();
    if mhd {
        constraint_names.push("div_h".into());
        constraint_accs.push(plasma_accs[count]);
    }

    let mut boundary = vec![Acc::default(); 3];
    let mut boundary_fd = vec![Acc::default(); 3];
    let phi_now = &now.interface[0].values;
    let phi_before = &before.interface[0].values;
    let phi_after = &after.interface[0].values;
    let a = st.a_hat;
    let a0 = st.a0_hat;
    let a1 = st.a1_hat;

    if mhd {
        let vac = Stencil {
            before: &before.vacuum,
            now: &now.vacuum,
            after: &after.vacuum,
            nz,
            h1: grid.h_minus(),
            hz: h,
            dt: h,
        };
        // x1 decreases with the vacuum row index, so d/dx1 = -d/di.
        let vac_accs = sweep_rows(grid.points_minus + 1, nz, 5, |i, j, acc| {
            let v = &vac;
            acc[0].add(&[v.d11(0, i, j), v.dzz(0, i, j)]);
            acc[1].add(&[-v.d1(1, i, j), u[0] * v.dz(2, i, j), u[1] * v.dz(3, i, j)]);
            acc[2].add(&[u[0] * v.dz(3, i, j), -u[1] * v.dz(2, i, j)]);
            acc[3].add(&[u[1] * v.dz(1, i, j), v.d1(3, i, j)]);
            acc[4].add(&[-v.d1(2, i, j), -u[0] * v.dz(1, i, j)]);
        });
        interior_names.push("laplace".into());
        interior_accs.push(vac_accs[0]);
        for (k, name) in ["div_calh", "curl_calh_1", "curl_calh_2", "curl_calh_3"]
            .iter()
            .enumerate()
        {
            constraint_names.push(name.to_string());
            constraint_accs.push(vac_accs[k + 1]);
        }

        let lm = mode.root.lambda_minus.unwrap_or(Complex64::new(1.0, 0.0));
        let hm = grid.h_minus();
        for j in 0..nz {
            let phi = phi_now[j];
            let v1 = plasma.at(1, 0, j);
            let q = plasma.at(0, 0, j);
            let xi = vac.at(0, 0, j);
            boundary[0].add(&[n * s * phi, -v1, -a0 * phi]);
            boundary[1].add(&[q, -I * n * wm * xi, -a * phi]);
            boundary[2].add(&[n * lm * xi, -I * n * wm * phi, -a1 * phi]);

            let dphi = (phi_after[j] - phi_before[j]) / (2.0 * h);
            let jp = (j + 1) % nz;
            let jm = (j + nz - 1) % nz;
            let dz_xi = (vac.at(0, 0, jp) - vac.at(0, 0, jm)) / (2.0 * h);
            let dz_phi = (phi_now[jp] - phi_now[jm]) / (2.0 * h);
            let d1_xi = (3.0 * xi - 4.0 * vac.at(0, 1, j) + vac.at(0, 2, j)) / (2.0 * hm);
            boundary_fd[0].add(&[dphi, -v1, -a0 * phi]);
            boundary_fd[1].add(&[q, -wm * dz_xi, -a * phi]);
            boundary_fd[2].add(&[d1_xi, -wm * dz_phi, -a1 * phi]);
        }
    } else {
        for j in 0..nz {
            let phi = phi_now[j];
            let v1 = plasma.at(1, 0, j);
            let p = plasma.at(0, 0, j);
            boundary[0].add(&[n * s * phi, -v1, -a0 * phi]);
            boundary[1].add(&[p, -a * phi]);
            let dphi = (phi_after[j] - phi_before[j]) / (2.0 * h);
            boundary_fd[0].add(&[dphi, -v1, -a0 * phi]);
            boundary_fd[1].add(&[p, -a * phi]);
        }
        boundary.truncate(2);
        boundary_fd.truncate(2);
    }
    let bnames: Vec<String> = ["kinematic", "pressure", "neumann"]
        .iter()
        .take(boundary.len())
        .map(|s| s.to_string())
        .collect();

    let mut constraints = finish(&constraint_names, &constraint_accs);
    if let Some(r) = divergence_constraint(mode) {
        constraints.push(EquationResidual {
            name: "div_h_amplitude".into(),
            residual: r,
            scale: 1.0,
            trivial: false,
        });
    }

    Ok(ResidualReport {
        model,
        n: mode.root.n,
        t,
        h,
        interior: finish(&interior_names, &interior_accs),
        boundary: finish(&bnames, &boundary),
        boundary_fd: finish(&bnames, &boundary_fd),
        constraints,
    })
}

/// Growth of the dominant admissible mode at one mode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: u64,
    pub s: Option<Complex64>,
    /// `ln(sup |u(t)| / sup |u(0)|)` from the sampled fields.
    pub log_ratio: f64,
    /// `exp(log_ratio)`; infinite past the double range.
    pub ratio: f64,
    /// `n Re(s) t`.
    pub expected_log_ratio: f64,
    /// No admissible root at this `n`; the ratio is reported as 1.
    pub no_admissible_root: bool,
}

/// Default tangential resolution of growth measurements.
pub const GROWTH_POINTS_PER_WAVELENGTH: usize = 16;

pub fn growth_ratio(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    n_list: &[u64],
    t: f64,
) -> Result<Vec<GrowthRow>> {
    if n_list.contains(&0) || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "mode indices must be positive and increasing".into(),
        ));
    }
    n_list
        .par_iter()
        .map(|&n| {
            let roots = solve_dispersion(model, state, omega, n)?;
            let Some(root) = roots.iter().find(|r| r.admissible) else {
                return Ok(GrowthRow {
                    n,
                    s: None,
                    log_ratio: 0.0,
                    ratio: 1.0,
                    expected_log_ratio: 0.0,
                    no_admissible_root: true,
                });
            };
            let mode = build_mode(model, state, omega, root)?;
            let grid = GridSpec::for_mode(&mode, GROWTH_POINTS_PER_WAVELENGTH)?;
            let start = evaluate_field(&mode, &grid, 0.0)?.sup_log();
            let end = evaluate_field(&mode, &grid, t)?.sup_log();
            let log_ratio = end - start;
            Ok(GrowthRow {
                n,
                s: Some(root.s),
                log_ratio,
                ratio: log_ratio.exp(),
                expected_log_ratio: n as f64 * root.s.re * t,
                no_admissible_root: false,
            })
        })
        .collect()
}

/// Both sides of `-q v1 = -a phi v1 - (calH_hat . calH) v1` on the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    /// Period average of `-q v1`.
    pub lhs: f64,
    /// Period average of `-a phi v1 - (calH_hat . calH) v1`.
    pub rhs: f64,
    /// Pointwise discrepancy relative to the largest term.
    pub discrepancy: f64,
}

/// Samples per period of the flux identity.
const FLUX_SAMPLES: usize = 64;

/// Checks the interface flux identity on real parts over one tangential
/// period. Fields are rescaled by `exp(-n Re(s) t)`, which leaves the
/// relative discrepancy unchanged.
pub fn boundary_flux_check(mode: &HadamardMode, t: f64) -> Result<FluxReport> {
    if !mode.model.is_mhd() {
        return Err(Error::UnsupportedModel {
            model: mode.model,
            op: "boundary_flux_check",
        });
    }
    let a = &mode.amplitudes;
    let xi = a.xi.unwrap_or_default();
    let n = mode.root.n as f64;
    let s = mode.root.s;
    let (_, wm) = crate::domain::w_pair(&mode.state, &mode.omega);
    let mut lhs_sum = 0.0;
    let mut rhs_sum = 0.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..FLUX_SAMPLES {
        let zeta = 2.0 * std::f64::consts::PI / n * k as f64 / FLUX_SAMPLES as f64;
        let e = (n * (s * t + I * zeta) - n * s.re * t).exp();
        let q = (a.q * e).re;
        let v1 = (a.v[0] * e).re;
        let phi = (a.phi * e).re;
        // calH_hat . grad xi = l- xi
        let hdot = (I * n * wm * xi * e).re;
        let lhs = -q * v1;
        let t1 = -mode.state.a_hat * phi * v1;
        let t2 = -hdot * v1;
        lhs_sum += lhs;
        rhs_sum += t1 + t2;
        worst = worst.max((lhs - t1 - t2).abs());
        scale = scale.max(lhs.abs()).max(t1.abs()).max(t2.abs());
    }
    let m = FLUX_SAMPLES as f64;
    Ok(FluxReport {
        lhs: lhs_sum / m,
        rhs: rhs_sum / m,
        discrepancy: if scale > 0.0 { worst / scale } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::solve_dispersion;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dominant(model: ModelKind, st: &BasicState, om: &Wavevector, n: u64) -> ModeRoot {
        *solve_dispersion(model, st, om, n)
            .unwrap()
            .iter()
            .find(|r| r.admissible)
            .expect("admissible root")
    }

    fn ill_state(model: ModelKind) -> (BasicState, Wavevector) {
        if model.is_mhd() {
            (
                BasicState {
                    rho_hat: 1.5,
                    c_hat: 1.2,
                    h_plasma: [0.6, 0.8],
                    h_vacuum: [-0.3, -0.4],
                    a_hat: 1.0,
                    a0_hat: 0.2,
                    a1_hat: 0.5,
                },
                Wavevector::new(-0.8, 0.6).unwrap(),
            )
        } else {
            (
                BasicState {
                    rho_hat: 1.5,
                    c_hat: 1.2,
                    a_hat: 1.0,
                    a0_hat: 0.2,
                    ..BasicState::default()
                },
                Wavevector::new(0.6, 0.8).unwrap(),
            )
        }
    }

    #[test]
    fn euler_amplitudes() {
        let st = BasicState {
            a_hat: 2.0,
            ..BasicState::default()
        };
        let om = Wavevector::new(1.0, 0.0).unwrap();
        let root = dominant(ModelKind::IncompressibleEuler, &st, &om, 50);
        assert!((root.s - c(0.2, 0.0)).norm() < 1e-15);
        let mode = build_mode(ModelKind::IncompressibleEuler, &st, &om, &root).unwrap();
        assert!((mode.amplitudes.phi - c(1.0, 0.0)).norm() < 1e-14);
        assert!((mode.amplitudes.q - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn witness_vacuum_amplitude() {
        let st = BasicState {
            h_plasma: [1.0, 0.0],
            h_vacuum: [2.0, 0.0],
            a_hat: 1.0,
            a1_hat: 0.7,
            ..BasicState::default()
        };
        let om = Wavevector::new(0.0, 1.0).unwrap();
        let root = dominant(ModelKind::IncompressibleMHD, &st, &om, 100);
        let mode = build_mode(ModelKind::IncompressibleMHD, &st, &om, &root).unwrap();
        let xi = mode.amplitudes.xi.unwrap();
        assert!((xi - c(0.007, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn nullspace_residual_small() {
        for model in ModelKind::ALL {
            let (st, om) = ill_state(model);
            for n in [10, 100, 1000] {
                let root = dominant(model, &st, &om, n);
                let mode = build_mode_with(model, &st, &om, &root, Normalization::UnitNorm).unwrap();
                let m = Symbol::new(model, &st, &om)
                    .unwrap()
                    .boundary_matrix(root.s, n)
                    .unwrap();
                let a = mode.amplitudes;
                let mut x = vec![a.phi, -a.q];
                if let Some(xi) = a.xi {
                    x.push(xi);
                }
                let x = nalgebra::DVector::from_vec(x);
                let r = (&m * &x).norm();
                assert!(r <= 1e-12 * m.norm(), "{model:?} n={n}: {r:e}");
            }
        }
    }

    #[test]
    fn not_a_root_rejected() {
        let (st, om) = ill_state(ModelKind::CompressibleMHD);
        let mut root = dominant(ModelKind::CompressibleMHD, &st, &om, 100);
        root.s *= 1.01;
        assert!(matches!(
            build_mode(ModelKind::CompressibleMHD, &st, &om, &root),
            Err(Error::NotARoot { .. })
        ));
    }

    #[test]
    fn euler_neutral_mode_is_resonant() {
        let st = BasicState::default();
        let om = Wavevector::new(1.0, 0.0).unwrap();
        let root = solve_dispersion(ModelKind::IncompressibleEuler, &st, &om, 10).unwrap()[0];
        assert!(root.neutral);
        assert!(matches!(
            build_mode(ModelKind::IncompressibleEuler, &st, &om, &root),
            Err(Error::Resonance { .. })
        ));
    }

    #[test]
    fn neutral_mhd_mode_is_steady() {
        let st = BasicState {
            h_plasma: [1.0, 0.0],
            h_vacuum: [0.0, 1.0],
            a_hat: 0.5,
            ..BasicState::default()
        };
        let om = Wavevector::new(0.8, 0.6).unwrap();
        let roots = solve_dispersion(ModelKind::CompressibleMHD, &st, &om, 20).unwrap();
        let root = roots.iter().find(|r| r.neutral).unwrap();
        let mode = build_mode(ModelKind::CompressibleMHD, &st, &om, root).unwrap();
        let grid = GridSpec::for_mode(&mode, 16).unwrap();
        let a = evaluate_field(&mode, &grid, 0.0).unwrap();
        let b = evaluate_field(&mode, &grid, 3.0).unwrap();
        assert_eq!(a.plasma, b.plasma);
        assert_eq!(a.vacuum, b.vacuum);
    }

    #[test]
    fn field_at_interface_matches_amplitudes() {
        let (st, om) = ill_state(ModelKind::CompressibleMHD);
        let root = dominant(ModelKind::CompressibleMHD, &st, &om, 100);
        let mode = build_mode(ModelKind::CompressibleMHD, &st, &om, &root).unwrap();
        let grid = GridSpec::for_mode(&mode, 16).unwrap();
        let f = evaluate_field(&mode, &grid, 0.0).unwrap();
        let amps = plasma_amplitudes(&mode);
        for (field, a) in f.plasma.iter().zip(amps) {
            for j in 0..grid.points_tangential {
                assert!((field.values[j].norm() - a.norm()).abs() <= 1e-14 * (1.0 + a.norm()));
            }
        }
        assert!((f.interface[0].values[3].norm() - 1.0).abs() < 1e-14);
        assert!(grid.truncation_ok(&mode, TRUNCATION_EPSILON));
    }

    #[test]
    fn interface_growth_e10() {
        let st = BasicState {
            a_hat: 1.0,
            ..BasicState::default()
        };
        let om = Wavevector::new(1.0, 0.0).unwrap();
        let root = dominant(ModelKind::IncompressibleEuler, &st, &om, 100);
        let mode = build_mode(ModelKind::IncompressibleEuler, &st, &om, &root).unwrap();
        let grid = GridSpec::for_mode(&mode, 16).unwrap();
        let f0 = evaluate_field(&mode, &grid, 0.0).unwrap();
        let f1 = evaluate_field(&mode, &grid, 1.0).unwrap();
        let ratio = f1.interface[0].values[0].norm() / f0.interface[0].values[0].norm();
        assert!((ratio / 10f64.exp() - 1.0).abs() < 1e-13);
        assert!((ratio - 2.2026e4).abs() < 1.0);
    }

    #[test]
    fn overflow_switches_to_log_magnitude() {
        let st = BasicState {
            a_hat: 1.0,
            ..BasicState::default()
        };
        let om = Wavevector::new(1.0, 0.0).unwrap();
        let root = dominant(ModelKind::IncompressibleEuler, &st, &om, 100);
        let mode = build_mode(ModelKind::IncompressibleEuler, &st, &om, &root).unwrap();
        let grid = GridSpec::for_mode(&mode, 16).unwrap();
        let f = evaluate_field(&mode, &grid, 100.0).unwrap();
        assert!(f.log_magnitude);
        assert!((f.log_abs(&f.interface[0], 0) - 1000.0).abs() < 1e-9);
        assert!(f.real(&f.interface[0], 0).is_infinite());
        let rep = pde_residual_fd(&mode, &grid, 100.0).unwrap();
        assert!(rep.max_boundary() < 1e-12);
    }

    #[test]
    fn coarse_grid_refused() {
        let (st, om) = ill_state(ModelKind::IncompressibleMHD);
        let root = dominant(ModelKind::IncompressibleMHD, &st, &om, 100);
        let mode = build_mode(ModelKind::IncompressibleMHD, &st, &om, &root).unwrap();
        let grid = GridSpec::for_mode(&mode, 6).unwrap();
        assert!(matches!(
            pde_residual_fd(&mode, &grid, 0.0),
            Err(Error::GridTooCoarse { points: 6, .. })
        ));
        let mut grid = GridSpec::for_mode(&mode, 16).unwrap();
        grid.points_plus = 4;
        assert!(matches!(
            evaluate_field(&mode, &grid, 0.0),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn second_order_all_models() {
        for model in ModelKind::ALL {
            let (st, om) = ill_state(model);
            let root = dominant(model, &st, &om, 40);
            let mode = build_mode(model, &st, &om, &root).unwrap();
            let coarse = pde_residual_fd(&mode, &GridSpec::for_mode(&mode, 16).unwrap(), 0.3).unwrap();
            let fine = pde_residual_fd(&mode, &GridSpec::for_mode(&mode, 32).unwrap(), 0.3).unwrap();
            for (name, order) in convergence_orders(&coarse, &fine) {
                if let Some(p) = order {
                    assert!((1.7..=2.3).contains(&p), "{model:?} {name}: {p}");
                }
            }
            assert!(coarse.interior.iter().any(|e| !e.trivial));
            assert!(coarse.max_boundary() < 1e-12, "{model:?}: {:?}", coarse.boundary);
            for e in &coarse.constraints {
                if e.name == "div_h_amplitude" {
                    assert!(e.residual < 1e-12);
                } else {
                    assert!(e.residual < 0.1, "{model:?} {}: {}", e.name, e.residual);
                }
            }
            let orders_fd: Vec<f64> = coarse
                .boundary_fd
                .iter()
                .zip(&fine.boundary_fd)
                .filter(|(c, _)| c.residual > 1e-10)
                .map(|(c, f)| (c.residual / f.residual).log2())
                .collect();
            for p in orders_fd {
                assert!((1.7..=2.3).contains(&p), "{model:?} boundary fd order {p}");
            }
        }
    }

    #[test]
    fn mutation_detected() {
        for model in ModelKind::ALL {
            let (st, om) = ill_state(model);
            let root = dominant(model, &st, &om, 40);
            let mut mode = build_mode(model, &st, &om, &root).unwrap();
            let grid = GridSpec::for_mode(&mode, 16).unwrap();
            mode.amplitudes.v[0] *= 1.0 + 1e-3;
            let rep = pde_residual_fd(&mode, &grid, 0.0).unwrap();
            assert!(rep.max_boundary() > 1e-4, "{model:?}");
        }
    }

    #[test]
    fn growth_log_ratio_is_exact() {
        let st = BasicState {
            a_hat: 1.0,
            ..BasicState::default()
        };
        let om = Wavevector::new(1.0, 0.0).unwrap();
        let rows = growth_ratio(ModelKind::IncompressibleEuler, &st, &om, &[100, 400], 1.0).unwrap();
        assert!((rows[0].log_ratio - 10.0).abs() < 1e-12);
        assert!((rows[1].log_ratio - 20.0).abs() < 1e-12);
        assert!((rows[0].ratio / 10f64.exp() - 1.0).abs() < 1e-12);

        let stable = BasicState {
            a_hat: -1.0,
            ..BasicState::default()
        };
        let rows = growth_ratio(ModelKind::IncompressibleEuler, &stable, &om, &[100], 1.0).unwrap();
        assert!(rows[0].no_admissible_root && rows[0].ratio == 1.0);
    }

    #[test]
    fn flux_identity() {
        let (st, om) = ill_state(ModelKind::CompressibleMHD);
        let root = dominant(ModelKind::CompressibleMHD, &st, &om, 100);
        let mode = build_mode(ModelKind::CompressibleMHD, &st, &om, &root).unwrap();
        assert!(boundary_flux_check(&mode, 0.5).unwrap().discrepancy < 1e-10);

        let mut bad = mode;
        bad.amplitudes.q *= 1.0 + 1e-3;
        let d = boundary_flux_check(&bad, 0.5).unwrap().discrepancy;
        assert!(d > 1e-5 && d < 1e-2, "{d}");

        let euler = BasicState {
            a_hat: 1.0,
            ..BasicState::default()
        };
        let e_root = dominant(ModelKind::IncompressibleEuler, &euler, &om, 100);
        let e_mode = build_mode(ModelKind::IncompressibleEuler, &euler, &om, &e_root).unwrap();
        assert!(boundary_flux_check(&e_mode, 0.0).is_err());
    }

    #[test]
    fn flux_without_vacuum_field() {
        let st = BasicState {
            h_plasma: [1.0, 0.0],
            a_hat: 1.0,
            ..BasicState::default()
        };
        let om = Wavevector::new(0.6, 0.8).unwrap();
        let Some(root) = solve_dispersion(ModelKind::IncompressibleMHD, &st, &om, 50)
            .unwrap()
            .into_iter()
            .find(|r| r.admissible || r.neutral)
        else {
            panic!("no mode")
        };
        let mode = build_mode(ModelKind::IncompressibleMHD, &st, &om, &root).unwrap();
        let rep = boundary_flux_check(&mode, 0.0).unwrap();
        assert!(rep.discrepancy < 1e-10);
        assert!((rep.lhs - rep.rhs).abs() <= 1e-10 * rep.lhs.abs().max(1e-300) + 1e-14);
    }
}
