//! Acceptance suite. Prints one line per criterion and a summary naming the
//! failed criteria. With `MHDLAB_ACCEPTANCE_STRICT=1` the process also exits
//! nonzero when any criterion fails; by default it exits zero so that a
//! workspace test run goes on to the remaining test targets.

use std::time::{Duration, Instant};

use mhdlab_core::classifier::DEFAULT_REL_TOL;
use mhdlab_core::hadamard::{convergence_orders, GROWTH_POINTS_PER_WAVELENGTH};
use mhdlab_core::roots::log_log_fit;
use mhdlab_core::{
    build_mode, classify_frozen, fit_scaling, green_identity_check, growth_ratio, pde_residual_fd, scan_s0,
    solve_dispersion, w_pair, BasicState, GridSpec, ModelKind, Symbol, Verdict, Wavevector,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} {}: {title}; {}; {:.2} s (limit {} s{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn random_omega(rng: &mut ChaCha8Rng) -> Wavevector {
    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Wavevector::new(th.cos(), th.sin()).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]
}

fn truth_table() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut total = 0;
    let mut wrong = 0;
    let mut ill = 0;
    for model in ModelKind::ALL {
        for _ in 0..1000 {
            let collinear = rng.gen_bool(0.5);
            let mut state = BasicState {
                rho_hat: rng.gen_range(0.1..10.0),
                c_hat: rng.gen_range(0.1..10.0),
                a_hat: rng.gen_range(0.05..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                a0_hat: rng.gen_range(0.05..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                ..BasicState::default()
            };
            if model.is_mhd() {
                let hp = random_field(&mut rng);
                let t: f64 = rng.gen_range(-3.0..3.0);
                state.h_plasma = hp;
                state.h_vacuum = if collinear {
                    [t * hp[0], t * hp[1]]
                } else {
                    random_field(&mut rng)
                };
                state.a1_hat = rng.gen_range(-1.0..1.0);
            }
            let cross = state.h_plasma[0] * state.h_vacuum[1] - state.h_plasma[1] * state.h_vacuum[0];
            let geometric =
                !model.is_mhd() || cross.abs() <= 1e-12 * (1.0f64).max(norm(state.h_plasma) * norm(state.h_vacuum));
            let expect_ill = geometric && state.a_hat > 0.0;
            let got = classify_frozen(model, &state, DEFAULT_REL_TOL).unwrap().verdict;
            total += 1;
            ill += expect_ill as usize;
            if (got == Verdict::IllPosed) != expect_ill {
                wrong += 1;
            }
        }
    }
    Outcome {
        pass: wrong == 0,
        detail: format!("{wrong} misclassified of {total} states ({ill} ill-posed)"),
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

const N_GRID: [u64; 4] = [100, 1_000, 10_000, 100_000];

fn scaling_state(model: ModelKind, a: f64, rho: f64, a0: f64) -> BasicState {
    if model.is_mhd() {
        BasicState {
            rho_hat: rho,
            c_hat: 2.0,
            h_plasma: [1.0, 0.5],
            h_vacuum: [-2.0, -1.0],
            a_hat: a,
            a0_hat: a0,
            a1_hat: 0.5,
        }
    } else {
        BasicState {
            rho_hat: rho,
            c_hat: 2.0,
            a_hat: a,
            a0_hat: a0,
            ..BasicState::default()
        }
    }
}

fn fitted_coefficient_error(model: ModelKind, a: f64, rho: f64, a0: f64) -> Result<(f64, f64), String> {
    let state = scaling_state(model, a, rho, a0);
    let omega = classify_frozen(model, &state, DEFAULT_REL_TOL)
        .unwrap()
        .witness
        .unwrap_or(Wavevector::new(1.0, 0.0).unwrap());
    let fit = fit_scaling(model, &state, &omega, &N_GRID).map_err(|e| e.to_string())?;
    Ok((
        (fit.exponent - 0.5).abs(),
        (fit.coefficient / (a / rho).sqrt() - 1.0).abs(),
    ))
}

// a0 = 0 isolates the sqrt(n) family; a nonzero a0 adds a0 / (2n) to Re s,
// whose bias on the four-point fit is reported alongside.
fn ill_posed_scaling() -> Outcome {
    let mut worst_exp: f64 = 0.0;
    let mut worst_coef: f64 = 0.0;
    let mut failures = Vec::new();
    for model in ModelKind::ALL {
        for a in [0.25, 1.0, 4.0] {
            for rho in [1.0, 4.0] {
                match fitted_coefficient_error(model, a, rho, 0.0) {
                    Ok((de, dc)) => {
                        worst_exp = worst_exp.max(de);
                        worst_coef = worst_coef.max(dc);
                        if de > 0.01 || dc > 0.01 {
                            failures.push(format!("{model} a={a} rho={rho}"));
                        }
                    }
                    Err(e) => failures.push(format!("{model} a={a} rho={rho}: {e}")),
                }
            }
        }
    }
    let biased = ModelKind::ALL
        .iter()
        .filter_map(|&m| fitted_coefficient_error(m, 0.25, 4.0, 0.2).ok())
        .map(|e| e.1)
        .fold(0.0, f64::max);
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "a0 = 0: max |p - 0.5| = {worst_exp:.2e}, max relative coefficient error = {worst_coef:.2e} \
             (a0 = 0.2, a = 0.25, rho = 4: {biased:.2e}){}",
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", failures.join(", "))
            }
        ),
    }
}

fn stable_side_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut tested = 0;
    let mut min_exp = f64::INFINITY;
    let mut failures = 0;
    let mut attempts = 0;
    while tested < 40 && attempts < 2000 {
        attempts += 1;
        let model = if rng.gen_bool(0.5) {
            ModelKind::IncompressibleMHD
        } else {
            ModelKind::CompressibleMHD
        };
        let state = BasicState {
            rho_hat: rng.gen_range(0.5..4.0),
            c_hat: rng.gen_range(0.5..3.0),
            h_plasma: random_field(&mut rng),
            h_vacuum: random_field(&mut rng),
            a_hat: rng.gen_range(-2.0..2.0),
            a0_hat: rng.gen_range(-1.0..1.0),
            a1_hat: rng.gen_range(-1.0..1.0),
        };
        let omega = random_omega(&mut rng);
        let (wp, wm) = w_pair(&state, &omega);
        if wp * wp + wm * wm < 0.1 || classify_frozen(model, &state, DEFAULT_REL_TOL).unwrap().collinear {
            continue;
        }
        let mut samples = Vec::new();
        for n in N_GRID {
            let roots = solve_dispersion(model, &state, &omega, n).unwrap();
            if let Some(re) = roots
                .iter()
                .filter(|r| r.admissible)
                .map(|r| r.s.re)
                .max_by(f64::total_cmp)
            {
                samples.push((n, re));
            }
        }
        if samples.len() < N_GRID.len() {
            continue;
        }
        tested += 1;
        let fit = log_log_fit(&samples);
        min_exp = min_exp.min(fit.exponent);
        if fit.exponent < 0.9 {
            failures += 1;
        }
    }
    Outcome {
        pass: tested >= 20 && failures == 0,
        detail: format!(
            "{tested} states with admissible roots, min fitted exponent {min_exp:.4}, {failures} below 0.9"
        ),
    }
}

fn lopatinskii_scan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut max_re = f64::NEG_INFINITY;
    let mut samples = 0;
    let mut errors = 0;
    while samples < 256 {
        let state = BasicState {
            rho_hat: rng.gen_range(0.1..10.0),
            c_hat: rng.gen_range(0.1..10.0),
            h_plasma: random_field(&mut rng),
            h_vacuum: random_field(&mut rng),
            a_hat: rng.gen_range(-5.0..5.0),
            a0_hat: rng.gen_range(-5.0..5.0),
            a1_hat: rng.gen_range(-5.0..5.0),
        };
        let omega = random_omega(&mut rng);
        let (wp, wm) = w_pair(&state, &omega);
        if wp == 0.0 && wm == 0.0 {
            continue;
        }
        samples += 1;
        let report = scan_s0(&state, &[omega], 1e-8).unwrap();
        errors += report.samples.iter().filter(|s| s.error.is_some()).count();
        max_re = max_re.max(report.max_re);
    }
    Outcome {
        pass: errors == 0 && max_re <= 1e-8,
        detail: format!("{samples} samples, max Re s0 = {max_re:.3e}, {errors} failed samples"),
    }
}

fn hadamard_verification() -> Outcome {
    let model = ModelKind::CompressibleMHD;
    let state = BasicState {
        rho_hat: 1.5,
        c_hat: 1.2,
        h_plasma: [1.0, 0.0],
        h_vacuum: [2.0, 0.0],
        a_hat: 1.0,
        a0_hat: 0.2,
        a1_hat: 0.5,
    };
    let omega = classify_frozen(model, &state, DEFAULT_REL_TOL)
        .unwrap()
        .witness
        .unwrap();
    let n_list = [25u64, 100, 400];
    let mut ok = true;
    let mut order_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst_boundary: f64 = 0.0;
    for n in n_list {
        let roots = solve_dispersion(model, &state, &omega, n).unwrap();
        let root = roots.iter().find(|r| r.admissible).unwrap();
        let mode = build_mode(model, &state, &omega, root).unwrap();
        let coarse = pde_residual_fd(
            &mode,
            &GridSpec::for_mode(&mode, GROWTH_POINTS_PER_WAVELENGTH).unwrap(),
            1.0,
        )
        .unwrap();
        let fine = pde_residual_fd(
            &mode,
            &GridSpec::for_mode(&mode, 2 * GROWTH_POINTS_PER_WAVELENGTH).unwrap(),
            1.0,
        )
        .unwrap();
        for (_, order) in convergence_orders(&coarse, &fine) {
            if let Some(p) = order {
                order_range = (order_range.0.min(p), order_range.1.max(p));
                ok &= (p - 2.0).abs() <= 0.3;
            }
        }
        worst_boundary = worst_boundary.max(coarse.max_boundary()).max(fine.max_boundary());
    }
    ok &= worst_boundary <= 1e-10;

    let growth = growth_ratio(model, &state, &omega, &n_list, 1.0).unwrap();
    let worst_log = growth
        .iter()
        .map(|g| (g.log_ratio - g.expected_log_ratio).abs() / g.expected_log_ratio.abs().max(1.0))
        .fold(0.0, f64::max);
    let monotone = growth.windows(2).all(|w| w[1].log_ratio > w[0].log_ratio);
    ok &= worst_log <= 1e-12 && monotone && growth.iter().all(|g| !g.no_admissible_root);
    Outcome {
        pass: ok,
        detail: format!(
            "interior orders in [{:.3}, {:.3}], max boundary residual {worst_boundary:.2e}, \
             max log-ratio error {worst_log:.2e}, monotone {monotone}",
            order_range.0, order_range.1
        ),
    }
}

fn incompressible_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = Complex64::new(rng.gen_range(0.05..3.0), rng.gen_range(-3.0..3.0));
        let n = rng.gen_range(1..1000);
        let mhd = BasicState {
            rho_hat: rng.gen_range(0.2..5.0),
            c_hat: 1e6,
            h_plasma: random_field(&mut rng),
            h_vacuum: random_field(&mut rng),
            a_hat: rng.gen_range(-3.0..3.0),
            a0_hat: rng.gen_range(-3.0..3.0),
            a1_hat: rng.gen_range(-3.0..3.0),
        };
        let euler = BasicState {
            h_plasma: [0.0; 2],
            h_vacuum: [0.0; 2],
            a1_hat: 0.0,
            ..mhd
        };
        let omega = random_omega(&mut rng);
        for (comp, inc, st) in [
            (ModelKind::CompressibleEuler, ModelKind::IncompressibleEuler, euler),
            (ModelKind::CompressibleMHD, ModelKind::IncompressibleMHD, mhd),
        ] {
            let a = Symbol::new(comp, &st, &omega).unwrap().eval(s, n).unwrap().value;
            let b = Symbol::new(inc, &st, &omega).unwrap().eval(s, n).unwrap().value;
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    Outcome {
        pass: worst < 1e-4,
        detail: format!("100 draws per model pair, max relative error {worst:.2e}"),
    }
}

fn green_identity() -> Outcome {
    let k = 2.0 * std::f64::consts::PI;
    let g = green_identity_check(k, 256).unwrap();
    let fine = green_identity_check(k, 512).unwrap();
    let ratio = g.relative_gap / fine.relative_gap;
    let gap_ok = g.relative_gap <= 1e-8;
    let ratio_ok = (ratio - 4.0).abs() <= 0.8;
    Outcome {
        pass: gap_ok && ratio_ok,
        detail: format!(
            "gap at 256 points {:.3e} (needs <= 1e-8: {}), reduction on doubling {ratio:.3} (needs 4 +- 20%: {})",
            g.relative_gap,
            if gap_ok { "met" } else { "not met" },
            if ratio_ok { "met" } else { "not met" }
        ),
    }
}

fn sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.ini");
    std::fs::write(
        &path,
        "model = compressible_mhd\nrho_hat = 1.5\nc_hat = 1.2\nH_plasma_2 = 1\nH_vacuum_2 = 2\na0_hat = 0.3\n",
    )
    .unwrap();
    let run = |jobs: &str| {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = mhdlab_cli::run(
            [
                "mhdlab",
                "sweep",
                path.to_str().unwrap(),
                "--grid",
                "a_hat=-1:1:11;cross=0:1:11",
                "--jobs",
                jobs,
            ],
            &mut out,
            &mut err,
        );
        (code, out)
    };
    let (c1, one) = run("1");
    let (c8, eight) = run("8");
    let rows = one.iter().filter(|&&b| b == b'\n').count();
    Outcome {
        pass: c1 == 0 && c8 == 0 && one == eight && rows == 122,
        detail: format!(
            "{} bytes, {rows} lines, exit codes {c1}/{c8}, identical {}",
            one.len(),
            one == eight
        ),
    }
}

fn main() {
    let results = [
        check(
            1,
            "truth table of the analytic classifier",
            Duration::from_secs(1),
            truth_table,
        ),
        check(2, "ill-posed root scaling", Duration::from_secs(10), ill_posed_scaling),
        check(
            3,
            "stable-side root scaling",
            Duration::from_secs(10),
            stable_side_scaling,
        ),
        check(
            4,
            "Lopatinskii scan of the leading-order roots",
            Duration::from_secs(5),
            lopatinskii_scan,
        ),
        check(
            5,
            "Hadamard mode verification",
            Duration::from_secs(30),
            hadamard_verification,
        ),
        check(6, "incompressible limit", Duration::from_secs(1), incompressible_limit),
        check(7, "vacuum Green identity", Duration::from_secs(1), green_identity),
        check(
            8,
            "sweep determinism across job counts",
            Duration::from_secs(5),
            sweep_determinism,
        ),
    ];
    let failed: Vec<String> = results
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; FAILED: {}", failed.join(", "))
        }
    );
    let strict = std::env::var("MHDLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
