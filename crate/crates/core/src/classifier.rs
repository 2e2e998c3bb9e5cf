//! Well-posedness verdicts for frozen states, their numerical confirmation
//! from root scaling, and parameter sweeps.
//!
//! For the MHD models the frozen problem is ill-posed exactly when the
//! tangential fields are collinear and `a_hat > 0`. With `a_hat = 0` and
//! `a0_hat > 0` the growth is `exp(a0_hat t)` for every mode: exponential
//! instability but not ill-posedness, which is why it is a separate verdict.
//! The Euler models follow the same table without the collinearity clause.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{norm2, BasicState, Classification, ModelKind, ScalingFit, Verdict, Wavevector};
use crate::error::{Error, Result};
use crate::roots::{log_log_fit, solve_dispersion};

/// Default relative tolerance of the collinearity test.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// `|H2 calH3 - H3 calH2| <= rel_tol * max(1, |H'| |calH'|)`. Zero fields are
/// collinear with everything.
pub fn is_collinear(state: &BasicState, rel_tol: f64) -> bool {
    let scale = (norm2(state.h_plasma) * norm2(state.h_vacuum)).max(1.0);
    state.cross().abs() <= rel_tol * scale
}

/// Unit wavevector orthogonal to the common field direction.
fn witness(state: &BasicState) -> Wavevector {
    let h = if norm2(state.h_plasma) > 0.0 {
        state.h_plasma
    } else {
        state.h_vacuum
    };
    let r = norm2(h);
    if r == 0.0 {
        return Wavevector::new(1.0, 0.0).unwrap();
    }
    Wavevector::new(-h[1] / r, h[0] / r).unwrap()
}

fn a_hat_near_zero(state: &BasicState) -> bool {
    state.a_hat.abs() <= 1e-12 * (1.0 + state.a0_hat.abs())
}

pub fn classify_frozen(model: ModelKind, state: &BasicState, rel_tol: f64) -> Result<Classification> {
    state.validate(model)?;
    let collinear = !model.is_mhd() || is_collinear(state, rel_tol);
    let near_zero = a_hat_near_zero(state);
    if near_zero && state.a_hat != 0.0 {
        log::warn!("a_hat = {:e} is within rounding of zero; treated as 0", state.a_hat);
    }
    let verdict = if !collinear {
        Verdict::NoHadamardGrowth
    } else if near_zero {
        if state.a0_hat > 0.0 {
            Verdict::ExponentiallyUnstable
        } else {
            Verdict::NoHadamardGrowth
        }
    } else if state.a_hat > 0.0 {
        Verdict::IllPosed
    } else {
        Verdict::NoHadamardGrowth
    };
    Ok(Classification {
        verdict,
        collinear: model.is_mhd() && collinear,
        rt_sign_ok: !near_zero && state.a_hat < 0.0,
        a_hat_near_zero: near_zero,
        witness: (model.is_mhd() && collinear).then(|| witness(state)),
        evidence: None,
    })
}

/// Default mode-index grid of the numerical classification.
pub const DEFAULT_N_GRID: [u64; 4] = [100, 1_000, 10_000, 100_000];

/// `count` unit wavevectors at evenly spaced angles in `[0, pi)`, offset so
/// that none lies on a coordinate axis.
pub fn default_omega_samples(count: usize) -> Vec<Wavevector> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + 0.37) / count as f64;
            Wavevector::new(theta.cos(), theta.sin()).unwrap()
        })
        .collect()
}

/// Scaling of the dominant admissible root along one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionFit {
    pub omega: Wavevector,
    /// Fit of `max Re s`; `None` when some `n` has no admissible root.
    pub growth: Option<ScalingFit>,
    /// Fit of `|s|` for the same roots.
    pub magnitude: Option<ScalingFit>,
    pub witness: bool,
}

fn direction_fit(
    model: ModelKind,
    state: &BasicState,
    omega: Wavevector,
    n_grid: &[u64],
    witness: bool,
) -> Result<DirectionFit> {
    let mut growth = Vec::new();
    let mut magnitude = Vec::new();
    for &n in n_grid {
        let roots = solve_dispersion(model, state, &omega, n)?;
        // roots are sorted by decreasing Re s
        let Some(top) = roots.iter().find(|r| r.admissible) else {
            return Ok(DirectionFit {
                omega,
                growth: None,
                magnitude: None,
                witness,
            });
        };
        growth.push((n, top.s.re));
        magnitude.push((n, Complex64::norm(top.s)));
    }
    Ok(DirectionFit {
        omega,
        growth: Some(log_log_fit(&growth)),
        magnitude: Some(log_log_fit(&magnitude)),
        witness,
    })
}

fn check_n_grid(n_grid: &[u64]) -> Result<()> {
    let ok = n_grid.len() >= 2
        && n_grid[0] > 0
        && n_grid.windows(2).all(|w| w[1] > w[0])
        && n_grid[n_grid.len() - 1] as f64 >= 10.0 * n_grid[0] as f64;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidGrid(
            "mode indices must be positive, strictly increasing and span a decade".into(),
        ))
    }
}

/// Verdict read off root scaling, cross-checked against [`classify_frozen`].
pub fn numeric_classify(
    model: ModelKind,
    state: &BasicState,
    n_grid: &[u64],
    omega_samples: &[Wavevector],
) -> Result<Classification> {
    check_n_grid(n_grid)?;
    let analytic = classify_frozen(model, state, DEFAULT_REL_TOL)?;
    let mut directions: Vec<(Wavevector, bool)> = omega_samples.iter().map(|o| (*o, false)).collect();
    let witness = match analytic.witness {
        Some(w) => Some(w),
        None if !model.is_mhd() => Some(Wavevector::new(1.0, 0.0).unwrap()),
        None => None,
    };
    if let Some(w) = witness {
        directions.push((w, true));
    }
    let fits: Vec<DirectionFit> = directions
        .par_iter()
        .map(|&(o, is_witness)| direction_fit(model, state, o, n_grid, is_witness))
        .collect::<Result<_>>()?;

    let half = |f: &ScalingFit| (f.exponent - 0.5).abs() <= 0.05 && f.coefficient > 0.0;
    let one = |f: &ScalingFit| (f.exponent - 1.0).abs() <= 0.05 && f.coefficient > 0.0;

    let ill = fits
        .iter()
        .filter_map(|d| d.growth.as_ref())
        .filter(|f| half(f))
        .min_by(|a, b| (a.exponent - 0.5).abs().total_cmp(&(b.exponent - 0.5).abs()));
    let exp_unstable = fits
        .iter()
        .filter(|d| d.witness)
        .find(|d| matches!((&d.growth, &d.magnitude), (Some(g), Some(m)) if one(g) && one(m)));

    let (verdict, evidence) = if let Some(f) = ill {
        (Verdict::IllPosed, Some(f.clone()))
    } else if let Some(d) = exp_unstable {
        (Verdict::ExponentiallyUnstable, d.growth.clone())
    } else {
        let strongest = fits.iter().filter_map(|d| d.growth.as_ref()).max_by(|a, b| {
            let last = |f: &ScalingFit| f.samples.last().map_or(f64::NEG_INFINITY, |s| s.1);
            last(a).total_cmp(&last(b))
        });
        (Verdict::NoHadamardGrowth, strongest.cloned())
    };

    if verdict != analytic.verdict {
        return Err(Error::Conflict {
            analytic: analytic.verdict,
            numeric: verdict,
            evidence: evidence_dump(model, state, &fits),
        });
    }
    Ok(Classification { evidence, ..analytic })
}

fn evidence_dump(model: ModelKind, state: &BasicState, fits: &[DirectionFit]) -> String {
    let mut out = format!("model {model}, state {state:?}\n");
    for d in fits {
        let _ = write!(
            out,
            "  omega ({:.6}, {:.6}){}: ",
            d.omega.omega2(),
            d.omega.omega3(),
            if d.witness { " [witness]" } else { "" }
        );
        match (&d.growth, &d.magnitude) {
            (Some(g), Some(m)) => {
                let _ = writeln!(
                    out,
                    "Re s ~ {:.6e} n^-{:.4} (rms {:.2e}), |s| ~ n^-{:.4}, samples {:?}",
                    g.coefficient, g.exponent, g.rms_log_error, m.exponent, g.samples
                );
            }
            _ => {
                let _ = writeln!(out, "no admissible root at some n");
            }
        }
    }
    out
}

/// A state parameter that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepField {
    RhoHat,
    CHat,
    HPlasma2,
    HPlasma3,
    HVacuum2,
    HVacuum3,
    AHat,
    A0Hat,
    A1Hat,
    /// Adds `(value / |H'|^2) (-H3, H2)` to the vacuum field, so that the
    /// cross product `H2 calH3 - H3 calH2` grows by `value`.
    Cross,
}

impl SweepField {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "rho_hat" => SweepField::RhoHat,
            "c_hat" => SweepField::CHat,
            "H_plasma_2" => SweepField::HPlasma2,
            "H_plasma_3" => SweepField::HPlasma3,
            "H_vacuum_2" => SweepField::HVacuum2,
            "H_vacuum_3" => SweepField::HVacuum3,
            "a_hat" => SweepField::AHat,
            "a0_hat" => SweepField::A0Hat,
            "a1_hat" => SweepField::A1Hat,
            "cross" => SweepField::Cross,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepField::RhoHat => "rho_hat",
            SweepField::CHat => "c_hat",
            SweepField::HPlasma2 => "H_plasma_2",
            SweepField::HPlasma3 => "H_plasma_3",
            SweepField::HVacuum2 => "H_vacuum_2",
            SweepField::HVacuum3 => "H_vacuum_3",
            SweepField::AHat => "a_hat",
            SweepField::A0Hat => "a0_hat",
            SweepField::A1Hat => "a1_hat",
            SweepField::Cross => "cross",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub field: SweepField,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(field: SweepField, start: f64, stop: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|k| {
                    if k == count - 1 {
                        stop
                    } else {
                        start + (stop - start) * k as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        };
        SweepAxis { field, values }
    }

    /// Parses `name=start:stop:count` or `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| Error::Sweep(format!("axis `{spec}` is not of the form name=values")))?;
        let name = name.trim();
        let field = SweepField::parse(name).ok_or_else(|| Error::Sweep(format!("unknown axis field `{name}`")))?;
        let number = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Sweep(format!("axis `{name}`: `{}` is not a number", t.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Sweep(format!("axis `{name}`: value must be finite")))
            }
        };
        let range = range.trim();
        if range.contains(':') {
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Sweep(format!("axis `{name}`: expected start:stop:count")));
            }
            let count: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::Sweep(format!("axis `{name}`: count `{}` is not an integer", parts[2].trim())))?;
            Ok(SweepAxis::linspace(field, number(parts[0])?, number(parts[1])?, count))
        } else if range.is_empty() {
            Ok(SweepAxis {
                field,
                values: Vec::new(),
            })
        } else {
            let values = range.split(',').map(number).collect::<Result<Vec<_>>>()?;
            Ok(SweepAxis { field, values })
        }
    }
}

/// Tensor grid over state parameters; rows run in row-major order with the
/// first axis outermost.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<SweepAxis>,
}

impl SweepGrid {
    /// Parses `;`-separated axis specs, e.g. `a_hat=-1:1:11;cross=0:1:11`.
    pub fn parse(spec: &str) -> Result<Self> {
        let axes = spec
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(SweepAxis::parse)
            .collect::<Result<Vec<_>>>()?;
        for (k, a) in axes.iter().enumerate() {
            if axes[..k].iter().any(|b| b.field == a.field) {
                return Err(Error::Sweep(format!("axis `{}` given twice", a.field.name())));
            }
        }
        Ok(SweepGrid { axes })
    }

    /// Number of grid points; an empty grid has none.
    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|a| a.values.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of point `index` in row-major order.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let m = axis.values.len();
            coords[k] = axis.values[index % m];
            index /= m;
        }
        coords
    }

    /// The base state with the coordinates applied; `cross` acts last, on
    /// the resulting fields.
    pub fn apply(&self, base: &BasicState, coords: &[f64]) -> Result<BasicState> {
        let mut st = *base;
        let mut cross = None;
        for (axis, &v) in self.axes.iter().zip(coords) {
            match axis.field {
                SweepField::RhoHat => st.rho_hat = v,
                SweepField::CHat => st.c_hat = v,
                SweepField::HPlasma2 => st.h_plasma[0] = v,
                SweepField::HPlasma3 => st.h_plasma[1] = v,
                SweepField::HVacuum2 => st.h_vacuum[0] = v,
                SweepField::HVacuum3 => st.h_vacuum[1] = v,
                SweepField::AHat => st.a_hat = v,
                SweepField::A0Hat => st.a0_hat = v,
                SweepField::A1Hat => st.a1_hat = v,
                SweepField::Cross => cross = Some(v),
            }
        }
        if let Some(v) = cross {
            if v != 0.0 {
                let h = st.h_plasma;
                let r2 = h[0] * h[0] + h[1] * h[1];
                if r2 == 0.0 {
                    return Err(Error::Sweep("the cross axis needs a nonzero plasma field".into()));
                }
                st.h_vacuum[0] -= v / r2 * h[1];
                st.h_vacuum[1] += v / r2 * h[0];
            }
        }
        Ok(st)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub rel_tol: f64,
    /// Refuse grids with more points than this.
    pub max_points: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Also run [`numeric_classify`] at every point.
    pub numeric: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            rel_tol: DEFAULT_REL_TOL,
            max_points: None,
            jobs: None,
            numeric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub state: BasicState,
    pub classification: Classification,
}

/// Classifies every grid point. All states are built and validated before
/// any classification runs; rows come back in grid order regardless of
/// scheduling.
pub fn sweep(model: ModelKind, base: &BasicState, grid: &SweepGrid, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let total = grid.len();
    if let Some(cap) = opts.max_points {
        if total > cap {
            return Err(Error::Sweep(format!(
                "grid has {total} points, more than the cap of {cap}"
            )));
        }
    }
    let mut points = Vec::with_capacity(total);
    for k in 0..total {
        let coords = grid.point(k);
        let state = grid.apply(base, &coords)?;
        state.validate(model)?;
        points.push((coords, state));
    }
    let run = || -> Result<Vec<SweepRow>> {
        points
            .into_par_iter()
            .map(|(coords, state)| {
                let classification = if opts.numeric {
                    numeric_classify(model, &state, &DEFAULT_N_GRID, &default_omega_samples(8))?
                } else {
                    classify_frozen(model, &state, opts.rel_tol)?
                };
                Ok(SweepRow {
                    coords,
                    state,
                    classification,
                })
            })
            .collect()
    };
    match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Sweep(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}
