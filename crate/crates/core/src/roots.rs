//! Roots of the determinant equations, their large-`n` expansions and
//! growth-rate scaling fits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::Symbol;
use crate::domain::{BasicState, ModeRoot, ModelKind, ScalingFit, Wavevector};
use crate::error::{Error, Result};
use crate::poly::{self, Poly};

/// Tolerances of the root finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Bound on the relative residual of a reported root.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Newton stops once `|ds| < step_tolerance * (1 + |s|)`.
    pub step_tolerance: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            residual_tolerance: 1e-10,
            max_iterations: 100,
            step_tolerance: 1e-14,
        }
    }
}

/// Roots closer than this (relative) are the same root.
const DEDUP_TOL: f64 = 1e-8;
/// `Re s` must exceed this fraction of `1 + |s|` to count as growth.
const GROWTH_FLOOR: f64 = 1e-11;
const NEUTRAL_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Result of one Newton run on the determinant equation.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome {
    /// Iterate with the smallest relative residual.
    pub s: Complex64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Newton iteration on `E(s) = 0` that refuses to step across the branch cut
/// of the plasma radical.
pub fn newton(sym: &Symbol, n: u64, start: Complex64, opts: &RootOptions) -> NewtonOutcome {
    let mut s = start;
    let mut best = NewtonOutcome {
        s,
        residual: f64::INFINITY,
        converged: false,
        iterations: 0,
    };
    for it in 0..opts.max_iterations {
        let Ok(v) = sym.eval(s, n) else { break };
        let r = v.relative_residual();
        if r < best.residual {
            best.s = s;
            best.residual = r;
        }
        best.iterations = it + 1;
        if v.value == c(0.0) {
            best.converged = true;
            break;
        }
        let step = v.value / v.jacobian_ds;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let next = s - step;
        if crosses_cut(sym, s, next) {
            break;
        }
        s = next;
        if step.norm() < opts.step_tolerance * (1.0 + s.norm()) {
            if let Ok(v) = sym.eval(s, n) {
                let r = v.relative_residual();
                if r <= best.residual {
                    best.s = s;
                    best.residual = r;
                }
            }
            best.converged = true;
            break;
        }
    }
    best
}

/// Whether the straight step `from -> to` carries the radicand across the
/// negative real axis.
fn crosses_cut(sym: &Symbol, from: Complex64, to: Complex64) -> bool {
    let (Some(a), Some(b)) = (sym.radicand(from), sym.radicand(to)) else {
        return false;
    };
    if a.im == 0.0 || b.im == 0.0 || (a.im > 0.0) == (b.im > 0.0) {
        return false;
    }
    let x = a.re - a.im * (b.re - a.re) / (b.im - a.im);
    x < 0.0
}

/// Splits `E = A + B L` into polynomials, with `L^2 = num / den`. The
/// incompressible models return `B = 0` and no radical.
fn split(sym: &Symbol, n: u64) -> (Poly, Poly, Option<(Poly, Poly)>) {
    let nf = n as f64;
    let rho = sym.rho;
    let wp2 = sym.w_plus * sym.w_plus;
    let wm2 = sym.w_minus * sym.w_minus;
    match sym.model {
        ModelKind::IncompressibleEuler => (Poly::real(&[-sym.a / rho, -sym.a0, nf]), Poly::real(&[0.0]), None),
        ModelKind::CompressibleEuler => {
            let c2 = sym.c * sym.c;
            (
                Poly::real(&[0.0, -sym.a0, nf]),
                Poly::real(&[-sym.a / rho]),
                Some((Poly::real(&[c2, 0.0, 1.0]), Poly::real(&[c2]))),
            )
        }
        ModelKind::IncompressibleMHD => {
            let f = sym.forcing();
            let a = Poly::new(vec![
                c(-sym.a0 * wp2),
                nf * (wp2 + wm2) - f,
                c(-sym.a0 * rho),
                c(nf * rho),
            ]);
            (a, Poly::real(&[0.0]), None)
        }
        ModelKind::CompressibleMHD => {
            let a = Poly::real(&[-sym.a0, nf]).mul(&Poly::real(&[wp2, 0.0, rho]));
            let b = Poly::new(vec![c(0.0), nf * wm2 - sym.forcing()]);
            let radical = if sym.w_plus == 0.0 {
                (Poly::real(&[sym.fast2, 0.0, 1.0]), Poly::real(&[sym.fast2]))
            } else {
                let m = Poly::real(&[sym.c * sym.c * wp2 / rho, 0.0, sym.fast2]);
                (m.add(&Poly::real(&[0.0, 0.0, 0.0, 0.0, 1.0])), m)
            };
            (a, b, Some(radical))
        }
    }
}

/// Polynomial whose roots contain every root of `E`. One squaring clears the
/// radical; the spurious roots it adds are filtered later.
fn polynomialize(sym: &Symbol, n: u64) -> Poly {
    let (a, b, radical) = split(sym, n);
    match radical {
        Some((num, den)) if !b.is_zero() => a.mul(&a).mul(&den).sub(&b.mul(&b).mul(&num)),
        _ => a.add(&b),
    }
}

fn annotate(sym: &Symbol, s: Complex64, n: u64, residual: f64) -> Result<ModeRoot> {
    let lambda_plus = sym.lambda_plus(s)?;
    let lambda_minus = sym.model.is_mhd().then(|| c(1.0));
    let neutral = s.norm() <= NEUTRAL_TOL;
    let admissible = !neutral
        && s.re > GROWTH_FLOOR * (1.0 + s.norm())
        && lambda_plus.re < 0.0
        && lambda_minus.is_none_or(|l| l.re > 0.0);
    Ok(ModeRoot {
        s,
        lambda_plus,
        lambda_minus,
        residual,
        admissible,
        neutral,
        n,
    })
}

/// Deterministic order: largest `Re s` first, then larger `|Im s|`, then
/// lexicographic `(Re, Im)`.
pub fn sort_roots(roots: &mut [ModeRoot]) {
    roots.sort_by(|x, y| {
        let tol = 1e-12 * (1.0 + x.s.norm().max(y.s.norm()));
        if (x.s.re - y.s.re).abs() > tol {
            return y.s.re.total_cmp(&x.s.re);
        }
        let (ix, iy) = (x.s.im.abs(), y.s.im.abs());
        if (ix - iy).abs() > tol {
            return iy.total_cmp(&ix);
        }
        x.s.re.total_cmp(&y.s.re).then(x.s.im.total_cmp(&y.s.im))
    });
}

pub fn solve_dispersion(model: ModelKind, state: &BasicState, omega: &Wavevector, n: u64) -> Result<Vec<ModeRoot>> {
    solve_dispersion_with(model, state, omega, n, &RootOptions::default())
}

pub fn solve_dispersion_with(
    model: ModelKind,
    state: &BasicState,
    omega: &Wavevector,
    n: u64,
    opts: &RootOptions,
) -> Result<Vec<ModeRoot>> {
    if n == 0 {
        return Err(Error::InvalidGrid("mode index n must be at least 1".into()));
    }
    let sym = Symbol::new(model, state, omega)?;
    let p = polynomialize(&sym, n);

    let mut candidates: Vec<Complex64> = Vec::new();
    if !p.is_zero() {
        let found = poly::roots(&p).ok_or_else(|| Error::NonConvergence {
            iterations: 1000,
            best: c(f64::NAN),
            residual: f64::NAN,
        })?;
        for z in found {
            if z == c(0.0) {
                candidates.push(z);
                continue;
            }
            let polished = newton(&sym, n, z, opts);
            let keep = polished.residual.is_finite() && (polished.s - z).norm() <= 1e-6 * (1.0 + z.norm());
            candidates.push(if keep { polished.s } else { z });
        }
    }
    // Multistart from the large-n expansions catches anything the squared
    // polynomial lost to cancellation.
    if model == ModelKind::CompressibleMHD {
        for family in asymptotic_root(model, state, omega)? {
            let out = newton(&sym, n, family.truncated(n), opts);
            if out.converged {
                candidates.push(out.s);
            }
        }
    }

    let mut roots: Vec<ModeRoot> = Vec::new();
    for s in candidates {
        let Ok(v) = sym.eval(s, n) else { continue };
        let r = v.relative_residual();
        if !(r <= opts.residual_tolerance) {
            continue;
        }
        if roots.iter().any(|m| (m.s - s).norm() <= DEDUP_TOL * (1.0 + s.norm())) {
            continue;
        }
        roots.push(annotate(&sym, s, n, r)?);
    }
    sort_roots(&mut roots);
    Ok(roots)
}

/// Largest `Re s` over admissible roots, if any.
pub fn max_admissible_growth(roots: &[ModeRoot]) -> Option<f64> {
    roots
        .iter()
        .filter(|r| r.admissible)
        .map(|r| r.s.re)
        .max_by(f64::total_cmp)
}

/// Coefficients of `s = s0 + s1 / sqrt(n) + s2 / n + ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRoot {
    pub s0: Complex64,
    pub s1: Complex64,
    pub s2: Complex64,
}

impl AsymptoticRoot {
    pub fn truncated(&self, n: u64) -> Complex64 {
        let nf = n as f64;
        self.s0 + self.s1 / nf.sqrt() + self.s2 / nf
    }

    /// Size of the Newton correction `|E / E'|` at the truncated series,
    /// which tracks the distance to the nearby exact root.
    pub fn series_residual(&self, model: ModelKind, state: &BasicState, omega: &Wavevector, n: u64) -> Result<f64> {
        let v = Symbol::new(model, state, omega)?.eval(self.truncated(n), n)?;
        Ok((v.value / v.jacobian_ds).norm())
    }
}

/// Large-`n` expansions of the nonneutral root families.
pub fn asymptotic_root(model: ModelKind, state: &BasicState, omega: &Wavevector) -> Result<Vec<AsymptoticRoot>> {
    let sym = Symbol::new(model, state, omega)?;
    let zero = c(0.0);
    let w = sym.big_w();
    let mut out = Vec::new();

    if !model.is_mhd() || w == 0.0 {
        if sym.a != 0.0 {
            let s1 = c(sym.a / sym.rho).sqrt();
            for s1 in [s1, -s1] {
                out.push(AsymptoticRoot {
                    s0: zero,
                    s1,
                    s2: c(sym.a0 / 2.0),
                });
            }
        } else if sym.a0 != 0.0 {
            out.push(AsymptoticRoot {
                s0: zero,
                s1: zero,
                s2: c(sym.a0),
            });
        }
        return Ok(out);
    }

    // E = n F(s) + G(s); the O(1) roots solve F(s0) / s0 = 0.
    let wp2 = sym.w_plus * sym.w_plus;
    let wm2 = sym.w_minus * sym.w_minus;
    let f = sym.forcing();
    for s0 in leading_roots(&sym)? {
        let (l, dl) = sym.radical(s0)?;
        let df = (sym.rho * s0 * s0 + wp2 + wm2 * l) + s0 * (2.0 * sym.rho * s0 + wm2 * dl);
        let g = -f * l * s0 - sym.a0 * sym.alfven_denominator(s0);
        out.push(AsymptoticRoot {
            s0,
            s1: zero,
            s2: -g / df,
        });
    }
    if sym.a0 * wp2 != 0.0 {
        out.push(AsymptoticRoot {
            s0: zero,
            s1: zero,
            s2: c(sym.a0 * wp2 / w),
        });
    }
    Ok(out)
}

/// Nonzero roots of `rho s^2 + w+^2 + w-^2 L(s) = 0`.
fn leading_roots(sym: &Symbol) -> Result<Vec<Complex64>> {
    let wp2 = sym.w_plus * sym.w_plus;
    let wm2 = sym.w_minus * sym.w_minus;
    if sym.model == ModelKind::IncompressibleMHD {
        let s0 = Complex64::new(0.0, ((wp2 + wm2) / sym.rho).sqrt());
        return Ok(vec![s0, -s0]);
    }
    // Cubic in u = s^2 obtained by squaring away the radical.
    let rho = sym.rho;
    let lin = Poly::real(&[wp2, rho]);
    let cubic = if wm2 == 0.0 {
        lin
    } else {
        let m = Poly::real(&[sym.c * sym.c * wp2 / rho, sym.fast2]);
        lin.mul(&lin)
            .mul(&m)
            .sub(&m.add(&Poly::real(&[0.0, 0.0, 1.0])).scale(c(wm2 * wm2)))
    };
    let us = poly::roots(&cubic).ok_or(Error::NonConvergence {
        iterations: 1000,
        best: c(f64::NAN),
        residual: f64::NAN,
    })?;
    let mut out: Vec<Complex64> = Vec::new();
    for u in us {
        if u.norm() <= 1e-14 * (1.0 + wp2 + wm2) {
            continue;
        }
        for s in [u.sqrt(), -u.sqrt()] {
            let Some(s) = polish_leading(sym, s) else { continue };
            if !out.iter().any(|t| (t - s).norm() <= DEDUP_TOL * (1.0 + s.norm())) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Newton on the leading-order equation; `None` if the candidate is a
/// spurious root introduced by squaring.
fn polish_leading(sym: &Symbol, start: Complex64) -> Option<Complex64> {
    let wp2 = sym.w_plus * sym.w_plus;
    let wm2 = sym.w_minus * sym.w_minus;
    let eval = |s: Complex64| -> Option<(Complex64, Complex64, f64)> {
        let (l, dl) = sym.radical(s).ok()?;
        let v = sym.rho * s * s + wp2 + wm2 * l;
        let dv = 2.0 * sym.rho * s + wm2 * dl;
        let scale = sym.rho * s.norm_sqr() + wp2 + wm2 * l.norm();
        Some((v, dv, v.norm() / scale))
    };
    let mut s = start;
    let (mut best, mut best_r) = (s, eval(s)?.2);
    for _ in 0..50 {
        let (v, dv, r) = eval(s)?;
        if r < best_r {
            best = s;
            best_r = r;
        }
        let step = v / dv;
        if !step.re.is_finite() || !step.im.is_finite() || crosses_cut(sym, s, s - step) {
            break;
        }
        s -= step;
        if step.norm() < 1e-15 * (1.0 + s.norm()) {
            if let Some((_, _, r)) = eval(s) {
                if r < best_r {
                    best = s;
                    best_r = r;
                }
            }
            break;
        }
    }
    (best_r <= 1e-10 && (best - start).norm() <= 1e-6 * (1.0 + start.norm())).then_some(best)
}

fn check_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two mode indices".into()));
    }
    if n_grid[0] == 0 {
        return Err(Error::InvalidGrid("mode indices must be positive".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("mode indices must be strictly increasing".into()));
    }
    if (n_grid[n_grid.len() - 1] as f64) < 10.0 * n_grid[0] as f64 {
        return Err(Error::InvalidGrid("mode indices must span at least one decade".into()));
    }
    Ok(())
}

/// Ordinary least squares of `log(max admissible Re s)` on `log n`.
pub fn fit_scaling(model: ModelKind, state: &BasicState, omega: &Wavevector, n_grid: &[u64]) -> Result<ScalingFit> {
    check_grid(n_grid)?;
    let growth: Vec<Result<Option<f64>>> = n_grid
        .par_iter()
        .map(|&n| Ok(max_admissible_growth(&solve_dispersion(model, state, omega, n)?)))
        .collect();
    let mut samples = Vec::with_capacity(n_grid.len());
    let mut failing = Vec::new();
    for (&n, g) in n_grid.iter().zip(growth) {
        match g? {
            Some(re) => samples.push((n, re)),
            None => failing.push(n),
        }
    }
    if !failing.is_empty() {
        return Err(Error::PartialFit { failing });
    }
    Ok(log_log_fit(&samples))
}

/// Fit `y = C n^(-p)` through positive samples.
pub fn log_log_fit(samples: &[(u64, f64)]) -> ScalingFit {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(n, y)| ((n as f64).ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    ScalingFit {
        exponent: -slope,
        coefficient: intercept.exp(),
        n_range: (samples[0].0, samples[samples.len() - 1].0),
        rms_log_error: rms,
        samples: samples.to_vec(),
    }
}

/// Leading-order roots found for one wavevector sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S0Sample {
    pub omega: Wavevector,
    pub roots: Vec<Complex64>,
    /// `None` when no root survives the branch filter.
    pub max_re: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S0Report {
    pub samples: Vec<S0Sample>,
    pub max_re: f64,
    pub tolerance: f64,
    /// `max_re <= tolerance` and no sample failed.
    pub passed: bool,
}

/// Roots of the leading-order interface equation
/// `rho s0^2 + w+^2 + w-^2 L(s0) = 0` of the compressible MHD problem.
pub fn scan_s0(state: &BasicState, omega_samples: &[Wavevector], tolerance: f64) -> Result<S0Report> {
    state.validate(ModelKind::CompressibleMHD)?;
    let samples: Vec<S0Sample> = omega_samples
        .par_iter()
        .map(|omega| {
            let sym = match Symbol::new(ModelKind::CompressibleMHD, state, omega) {
                Ok(s) => s,
                Err(e) => return failed(*omega, e.to_string()),
            };
            if sym.big_w() == 0.0 {
                return failed(*omega, "w+ and w- both vanish; no leading-order root".into());
            }
            match leading_roots(&sym) {
                Ok(roots) => S0Sample {
                    omega: *omega,
                    max_re: roots.iter().map(|s| s.re).max_by(f64::total_cmp),
                    roots,
                    error: None,
                },
                Err(e) => failed(*omega, e.to_string()),
            }
        })
        .collect();
    let max_re = samples
        .iter()
        .filter_map(|s| s.max_re)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = samples.iter().all(|s| s.error.is_none()) && max_re <= tolerance;
    Ok(S0Report {
        samples,
        max_re,
        tolerance,
        passed,
    })
}

fn failed(omega: Wavevector, msg: String) -> S0Sample {
    S0Sample {
        omega,
        roots: Vec::new(),
        max_re: None,
        error: Some(msg),
    }
}
