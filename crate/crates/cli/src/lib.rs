//! Command-line front end of `mhdlab`.
//!
//! Every command writes to caller-supplied sinks so that it can be driven
//! in-process. Exit codes: 0 success, 1 configuration, usage or computation
//! error, 2 analytic/numeric conflict.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mhdlab_core::classifier::{SweepGrid, SweepOptions, DEFAULT_N_GRID, DEFAULT_REL_TOL};
use mhdlab_core::hadamard::{SampledFields, GROWTH_POINTS_PER_WAVELENGTH};
use mhdlab_core::{
    build_mode, classify_frozen, evaluate_field, green_identity_check, growth_ratio, numeric_classify, pde_residual_fd,
    solve_dispersion, sweep, BasicState, Error, GridSpec, ModelKind, Wavevector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::{Config, Section};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFLICT: i32 = 2;

/// Mode indices used by `roots` when neither the flag nor the config sets them.
pub const DEFAULT_ROOTS_N: [u64; 3] = [100, 1_000, 10_000];
pub const DEFAULT_HADAMARD_N: [u64; 3] = [25, 100, 400];
pub const DEFAULT_MAX_POINTS: usize = 1_000_000;
pub const JOBS_ENV: &str = "MHDLAB_JOBS";

#[derive(Debug, Parser)]
#[command(
    name = "mhdlab",
    version,
    about = "Normal-mode stability analysis of frozen plasma-vacuum interfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic verdict, optionally cross-checked by root scaling.
    Classify(ClassifyArgs),
    /// Roots of the dispersion relation as CSV.
    Roots(RootsArgs),
    /// Stability map over a parameter grid as CSV.
    Sweep(SweepArgs),
    /// Growth table, residual report and optional field dumps.
    Hadamard(HadamardArgs),
    /// Energy identity of the vacuum potential on the flat strip.
    Green(GreenArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub numeric: bool,
    /// Seed of the random wavevector directions used by --numeric.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub omega_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    pub config: PathBuf,
    /// Mode indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,
    #[arg(long, num_args = 2, value_names = ["OMEGA2", "OMEGA3"], allow_negative_numbers = true)]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    /// Axes such as `a_hat=-1:1:11;cross=0:1:11` or `a0_hat=0,0.5,1`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Worker threads; defaults to $MHDLAB_JOBS.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub numeric: bool,
    #[arg(long)]
    pub max_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct HadamardArgs {
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Vec<u64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["OMEGA2", "OMEGA3"], allow_negative_numbers = true)]
    pub omega: Option<Vec<f64>>,
    /// Also dump sampled fields at time t.
    #[arg(long)]
    pub fields: bool,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
    pub k: f64,
    #[arg(long, default_value_t = 256)]
    pub points: usize,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Conflict { .. }) {
            EXIT_CONFLICT
        } else {
            EXIT_ERROR
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Classify(a) => cmd_classify(a, out),
        Command::Roots(a) => cmd_roots(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Hadamard(a) => cmd_hadamard(a, out),
        Command::Green(a) => cmd_green(a, out),
    }
}

fn load(path: &Path) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn cfg<T>(r: Result<T, config::ConfigError>) -> Result<T, Failure> {
    r.map_err(|e| Failure::usage(format!("config {e}")))
}

/// Round-trip representation of a double. Negative zero prints as zero.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

fn omega_from(flag: &Option<Vec<f64>>, section: &Section) -> Result<Option<Wavevector>, Failure> {
    let pair = match flag {
        Some(v) => Some(v.clone()),
        None => cfg(section.get_list::<f64>("omega"))?,
    };
    match pair {
        None => Ok(None),
        Some(v) if v.len() == 2 => Ok(Some(Wavevector::new(v[0], v[1])?)),
        Some(v) => Err(Failure::usage(format!("omega needs two components, got {}", v.len()))),
    }
}

/// The collinear witness direction when there is one, else `(1, 0)`.
fn default_omega(model: ModelKind, state: &BasicState) -> Result<Wavevector, Failure> {
    let cls = classify_frozen(model, state, DEFAULT_REL_TOL)?;
    Ok(cls.witness.unwrap_or(Wavevector::new(1.0, 0.0)?))
}

fn seeded_directions(seed: u64, count: usize) -> Vec<Wavevector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            Wavevector::new(th.cos(), th.sin()).unwrap()
        })
        .collect()
}

pub fn cmd_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Outcome {
    let conf = load(&a.config)?;
    let sec = conf.section("classify");
    let numeric = a.numeric || cfg(sec.get_bool("numeric"))?.unwrap_or(false);
    let seed = match a.seed {
        Some(s) => s,
        None => cfg(sec.get::<u64>("seed"))?.unwrap_or(0),
    };
    let count = match a.omega_samples {
        Some(c) => c,
        None => cfg(sec.get::<usize>("omega_samples"))?.unwrap_or(8),
    };

    let cls = if numeric {
        numeric_classify(
            conf.model,
            &conf.state,
            &DEFAULT_N_GRID,
            &seeded_directions(seed, count),
        )?
    } else {
        classify_frozen(conf.model, &conf.state, DEFAULT_REL_TOL)?
    };
    writeln!(out, "model {}", conf.model)?;
    writeln!(out, "verdict {}", cls.verdict)?;
    writeln!(out, "collinear {}", cls.collinear)?;
    writeln!(out, "rt_sign_ok {}", cls.rt_sign_ok)?;
    writeln!(out, "a_hat_near_zero {}", cls.a_hat_near_zero)?;
    if let Some(w) = cls.witness {
        writeln!(out, "witness {} {}", fmt_f64(w.omega2()), fmt_f64(w.omega3()))?;
    }
    if let Some(f) = &cls.evidence {
        writeln!(
            out,
            "fit exponent {} coefficient {} rms_log_error {} n {}..{}",
            fmt_f64(f.exponent),
            fmt_f64(f.coefficient),
            fmt_f64(f.rms_log_error),
            f.n_range.0,
            f.n_range.1
        )?;
    }
    Ok(EXIT_OK)
}

pub const ROOTS_HEADER: [&str; 12] = [
    "n",
    "omega2",
    "omega3",
    "re_s",
    "im_s",
    "re_lambda_plus",
    "im_lambda_plus",
    "re_lambda_minus",
    "im_lambda_minus",
    "residual",
    "admissible",
    "neutral",
];

pub fn cmd_roots(a: &RootsArgs, out: &mut dyn Write) -> Outcome {
    let conf = load(&a.config)?;
    let sec = conf.section("roots");
    let n_list = if !a.n.is_empty() {
        a.n.clone()
    } else {
        cfg(sec.get_list::<u64>("n"))?.unwrap_or(DEFAULT_ROOTS_N.to_vec())
    };
    if n_list.contains(&0) {
        return Err(Failure::usage("mode indices must be positive"));
    }
    let omega = match omega_from(&a.omega, &sec)? {
        Some(o) => o,
        None => default_omega(conf.model, &conf.state)?,
    };

    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROOTS_HEADER)?;
    let (o2, o3) = (fmt_f64(omega.omega2()), fmt_f64(omega.omega3()));
    let mut failed = Vec::new();
    for &n in &n_list {
        match solve_dispersion(conf.model, &conf.state, &omega, n) {
            Ok(roots) => {
                for r in roots {
                    let (lm_re, lm_im) = match r.lambda_minus {
                        Some(l) => (fmt_f64(l.re), fmt_f64(l.im)),
                        None => (String::new(), String::new()),
                    };
                    w.write_record([
                        n.to_string(),
                        o2.clone(),
                        o3.clone(),
                        fmt_f64(r.s.re),
                        fmt_f64(r.s.im),
                        fmt_f64(r.lambda_plus.re),
                        fmt_f64(r.lambda_plus.im),
                        lm_re,
                        lm_im,
                        fmt_f64(r.residual),
                        r.admissible.to_string(),
                        r.neutral.to_string(),
                    ])?;
                }
            }
            Err(e) => {
                let mut row = vec![n.to_string(), o2.clone(), o3.clone()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.extend(["error".to_string(), "error".to_string()]);
                w.write_record(&row)?;
                failed.push(format!("n = {n}: {e}"));
            }
        }
    }
    w.flush()?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::usage(failed.join("; ")))
    }
}

fn resolve_jobs(flag: Option<usize>, section: &Section) -> Result<Option<usize>, Failure> {
    if let Some(j) = flag {
        return Ok(Some(j));
    }
    if let Ok(v) = std::env::var(JOBS_ENV) {
        let j = v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::usage(format!("{JOBS_ENV} = `{v}` is not a thread count")))?;
        return Ok(Some(j));
    }
    cfg(section.get::<usize>("jobs"))
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Outcome {
    let conf = load(&a.config)?;
    let sec = conf.section("sweep");
    let spec = match &a.grid {
        Some(g) => g.clone(),
        None => sec
            .raw("grid")
            .map(|e| e.value.clone())
            .ok_or_else(|| Failure::usage("no grid given (use --grid or [sweep] grid)"))?,
    };
    let grid = SweepGrid::parse(&spec)?;
    let max_points = match a.max_points {
        Some(m) => m,
        None => cfg(sec.get::<usize>("max_points"))?.unwrap_or(DEFAULT_MAX_POINTS),
    };
    let numeric = a.numeric || cfg(sec.get_bool("numeric"))?.unwrap_or(false);
    let opts = SweepOptions {
        rel_tol: DEFAULT_REL_TOL,
        max_points: Some(max_points),
        jobs: resolve_jobs(a.jobs, &sec)?,
        numeric,
    };
    let rows = sweep(conf.model, &conf.state, &grid, &opts)?;

    let mut w = csv::Writer::from_writer(out);
    // An axis named like a fixed column is prefixed with `grid_`.
    let mut header: Vec<String> = grid
        .axes
        .iter()
        .map(|ax| match ax.field.name() {
            name @ ("a_hat" | "verdict" | "collinear") => format!("grid_{name}"),
            name => name.to_string(),
        })
        .collect();
    header.extend(["verdict", "collinear", "a_hat"].map(String::from));
    if numeric {
        header.push("fitted_exponent".into());
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec: Vec<String> = row.coords.iter().map(|&c| fmt_f64(c)).collect();
        rec.push(row.classification.verdict.name().to_string());
        rec.push(row.classification.collinear.to_string());
        rec.push(fmt_f64(row.state.a_hat));
        if numeric {
            rec.push(
                row.classification
                    .evidence
                    .as_ref()
                    .map(|f| fmt_f64(f.exponent))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

pub const GROWTH_HEADER: [&str; 8] = [
    "n",
    "re_s",
    "im_s",
    "t",
    "log_ratio",
    "ratio",
    "expected_log_ratio",
    "no_admissible_root",
];

pub fn cmd_hadamard(a: &HadamardArgs, out: &mut dyn Write) -> Outcome {
    let conf = load(&a.config)?;
    let sec = conf.section("hadamard");
    let n_list = if !a.n_list.is_empty() {
        a.n_list.clone()
    } else {
        cfg(sec.get_list::<u64>("n_list"))?.unwrap_or(DEFAULT_HADAMARD_N.to_vec())
    };
    let t = match a.t {
        Some(t) => t,
        None => cfg(sec.get::<f64>("t"))?.unwrap_or(1.0),
    };
    if !(t.is_finite() && t >= 0.0) {
        return Err(Failure::usage(format!("t must be finite and nonnegative, got {t}")));
    }
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => sec
            .raw("out")
            .map(|e| PathBuf::from(&e.value))
            .ok_or_else(|| Failure::usage("no output directory given (use --out or [hadamard] out)"))?,
    };
    let fields = a.fields || cfg(sec.get_bool("fields"))?.unwrap_or(false);
    let omega = match omega_from(&a.omega, &sec)? {
        Some(o) => o,
        None => default_omega(conf.model, &conf.state)?,
    };
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    let create = |name: &str| {
        fs::File::create(dir.join(name))
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", dir.join(name).display())))
    };

    let growth = growth_ratio(conf.model, &conf.state, &omega, &n_list, t)?;
    let mut w = csv::Writer::from_writer(create("growth.csv")?);
    w.write_record(GROWTH_HEADER)?;
    for g in &growth {
        let (re, im) =
            g.s.map_or((String::new(), String::new()), |s| (fmt_f64(s.re), fmt_f64(s.im)));
        w.write_record([
            g.n.to_string(),
            re,
            im,
            fmt_f64(t),
            fmt_f64(g.log_ratio),
            fmt_f64(g.ratio),
            fmt_f64(g.expected_log_ratio),
            g.no_admissible_root.to_string(),
        ])?;
    }
    w.flush()?;

    let mut jsonl = std::io::BufWriter::new(create("residuals.jsonl")?);
    for &n in &n_list {
        let roots = solve_dispersion(conf.model, &conf.state, &omega, n)?;
        let Some(root) = roots.iter().find(|r| r.admissible) else {
            writeln!(out, "n = {n}: no admissible root, no residual report")?;
            continue;
        };
        let mode = build_mode(conf.model, &conf.state, &omega, root)?;
        let grid = GridSpec::for_mode(&mode, GROWTH_POINTS_PER_WAVELENGTH)?;
        let report = pde_residual_fd(&mode, &grid, t)?;
        serde_json::to_writer(&mut jsonl, &report).map_err(|e| Failure::usage(e.to_string()))?;
        writeln!(jsonl)?;
        if fields {
            let sampled = evaluate_field(&mode, &grid, t)?;
            dump_fields(&sampled, &dir, n)?;
        }
    }
    jsonl.flush()?;

    for g in &growth {
        writeln!(
            out,
            "n {} log_ratio {} expected {}",
            g.n,
            fmt_f64(g.log_ratio),
            fmt_f64(g.expected_log_ratio)
        )?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(EXIT_OK)
}

/// Writes one CSV per region with columns `x1, x2, x3` followed by the real
/// part of every field, or `log_abs_<name>` once the fields have left the
/// double range.
fn dump_fields(f: &SampledFields, dir: &Path, n: u64) -> Result<(), Failure> {
    let blocks = [
        ("plasma", &f.x1_plus[..], &f.plasma),
        ("vacuum", &f.x1_minus[..], &f.vacuum),
        ("interface", &[0.0][..], &f.interface),
    ];
    for (region, x1, list) in blocks {
        if list.is_empty() {
            continue;
        }
        let path = dir.join(format!("fields_n{n}_{region}.csv"));
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        let mut header = vec!["x1".to_string(), "x2".into(), "x3".into()];
        for fld in list.iter() {
            header.push(if f.log_magnitude {
                format!("log_abs_{}", fld.name)
            } else {
                format!("re_{}", fld.name)
            });
        }
        w.write_record(&header)?;
        let nz = f.zeta.len();
        for (i, &x) in x1.iter().enumerate() {
            for (j, &z) in f.zeta.iter().enumerate() {
                let k = i * nz + j;
                let mut rec = vec![fmt_f64(x), fmt_f64(z * f.direction[0]), fmt_f64(z * f.direction[1])];
                for fld in list.iter() {
                    rec.push(fmt_f64(if f.log_magnitude {
                        f.log_abs(fld, k)
                    } else {
                        f.real(fld, k)
                    }));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_green(a: &GreenArgs, out: &mut dyn Write) -> Outcome {
    let g = green_identity_check(a.k, a.points)?;
    writeln!(out, "k {}", fmt_f64(a.k))?;
    writeln!(out, "points {}", a.points)?;
    writeln!(out, "lhs {}", fmt_f64(g.lhs))?;
    writeln!(out, "rhs {}", fmt_f64(g.rhs))?;
    writeln!(out, "relative_gap {}", fmt_f64(g.relative_gap))?;
    Ok(EXIT_OK)
}
