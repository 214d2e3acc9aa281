//! The `escapelab` command line.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on bad
//! usage or unreadable input.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::algebra::StratifiedAlgebra;
use crate::config::{ConfigFile, CovectorSource, ExperimentConfig, NormField};
use crate::control::NormSpec;
use crate::error::{Error, Result};
use crate::escape::{
    example_filiform, example_heisenberg, growth_ratio, heisenberg_circle, run_escape, run_growth_bound, RunStatus,
};
use crate::group::{CarnotGroup, GroupElement};
use crate::integrator::{integrate_normal, pmp_identity_residual};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Relative residual accepted by `pmp-check` and `integrate`.
pub const PMP_TOL: f64 = 1e-5;

/// CSV series are decimated to about this many rows per co-vector.
const ROWS_PER_SERIES: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "escapelab",
    version,
    about = "Normal curves on Carnot groups and their escape rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structure constants of an algebra file (or built-in name).
    Validate {
        algebra: String,
        /// Also write validation.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Integrate normal curves and write one trace CSV per co-vector.
    Integrate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Base point in exponential coordinates, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Option<Vec<f64>>,
    },
    /// Fit escape exponents of D(t) along normal curves from the identity.
    Escape {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Tabulate λ(Vec δ(γ(t))) / (N(λ) max(D, D^s)) along normal curves.
    GrowthBound {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Check the energy identity λ(dEnd_u u) = ‖u‖² on normal curves.
    PmpCheck {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Worked examples.
    Example {
        #[command(subcommand)]
        which: ExampleCommand,
    },
}

#[derive(Debug, Subcommand)]
enum ExampleCommand {
    /// Circle lifts travelled N times in the Heisenberg group.
    Heisenberg {
        #[arg(long = "N", default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Central translations and slope scan in the filiform group of step s.
    Filiform {
        #[arg(long, default_value_t = 3)]
        s: usize,
        #[arg(long = "m-max", default_value_t = 3)]
        m_max: u32,
        #[arg(long, default_value_t = 20)]
        covectors: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "T", default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in algebra name or algebra file.
    #[arg(long)]
    algebra: Option<String>,
    /// euclidean, l1, linfty or a JSON norm document.
    #[arg(long)]
    norm: Option<String>,
    /// Explicit co-vector, comma separated; repeatable.
    #[arg(long = "covector", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    covector: Vec<String>,
    /// Number of co-vectors to sample with N(λ) = 1.
    #[arg(long)]
    covectors: Option<usize>,
    /// Sampling seed; required with --covectors.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon T.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// RK4 step.
    #[arg(long)]
    h: Option<f64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self, default_horizon: f64) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let covectors = if !self.covector.is_empty() {
            Some(CovectorSource::List(parse_covector_groups(&self.covector)?))
        } else if let Some(count) = self.covectors {
            Some(CovectorSource::Sample { count, seed: self.seed })
        } else if let Some(seed) = self.seed {
            match &file.covectors {
                Some(CovectorSource::Sample { count, .. }) => Some(CovectorSource::Sample {
                    count: *count,
                    seed: Some(seed),
                }),
                _ => None,
            }
        } else {
            None
        };
        let flags = ConfigFile {
            algebra: self.algebra.clone(),
            norm: self.norm.clone().map(NormField::Name),
            covectors,
            horizon: self.horizon,
            h: self.h,
            out_dir: self.out_dir.clone(),
        };
        ExperimentConfig::resolve(file.merged(flags), default_horizon)
    }
}

/// `--covector` values arrive flattened; each occurrence is one group
/// separated by a `;` marker inserted by [`split_covector_flags`].
fn parse_covector_groups(raw: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new()];
    for item in raw {
        if item == ";" {
            out.push(Vec::new());
            continue;
        }
        let v: f64 = item
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad co-vector entry '{item}'")))?;
        out.last_mut().expect("nonempty").push(v);
    }
    out.retain(|v| !v.is_empty());
    Ok(out)
}

/// Turns repeated `--covector a,b,c` into one delimited list so that each
/// occurrence stays a separate co-vector.
fn split_covector_flags(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut seen = false;
    let mut it = argv.iter().peekable();
    while let Some(a) = it.next() {
        if a == "--covector" || a.starts_with("--covector=") {
            let value = match a.strip_prefix("--covector=") {
                Some(v) => Some(v.to_string()),
                None => it.next().cloned(),
            };
            if let Some(v) = value {
                let v = if seen { format!(";,{v}") } else { v };
                seen = true;
                out.push(format!("--covector={v}"));
            } else {
                out.push(a.clone());
            }
        } else {
            out.push(a.clone());
        }
    }
    out
}

/// Runs the command line `argv` (including the program name) and returns
/// the exit status.
pub fn cli_main(argv: &[String]) -> i32 {
    let argv = split_covector_flags(argv);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let mut out = std::io::stdout().lock();
    match run(cli.command, &mut out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("escapelab: {e}");
            EXIT_USAGE
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn stride_for(len: usize) -> usize {
    len.div_ceil(ROWS_PER_SERIES).max(1)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<bool> {
    match command {
        Command::Validate { algebra, out_dir } => validate(&algebra, out_dir.as_deref(), out),
        Command::Integrate { exp, start } => integrate(&exp.resolve(1.0)?, start, out),
        Command::Escape { exp } => escape(&exp.resolve(100.0)?, out),
        Command::GrowthBound { exp } => growth(&exp.resolve(50.0)?, out),
        Command::PmpCheck { exp } => pmp_check(&exp.resolve(1.0)?, out),
        Command::Example { which } => match which {
            ExampleCommand::Heisenberg { n, h, out_dir } => heisenberg(n, h, out_dir, out),
            ExampleCommand::Filiform {
                s,
                m_max,
                covectors,
                seed,
                horizon,
                h,
                out_dir,
            } => filiform(s, m_max, covectors, seed, horizon, h, out_dir, out),
        },
    }
}

fn validate(source: &str, out_dir: Option<&Path>, out: &mut impl Write) -> Result<bool> {
    let algebra = StratifiedAlgebra::resolve(source)?;
    let report = algebra.validate();
    writeln!(
        out,
        "algebra {} (dim {}, strata {:?})",
        algebra.name(),
        algebra.dim(),
        algebra.strata()
    )?;
    write!(out, "{report}")?;
    if let Some(dir) = out_dir {
        let mut w = create(dir, "validation.csv")?;
        writeln!(w, "invariant,passed,i,j,k")?;
        for c in &report.checks {
            let [i, j, k] = c
                .counterexample
                .map_or([String::new(), String::new(), String::new()], |t| {
                    t.map(|x| x.to_string())
                });
            writeln!(w, "{},{},{i},{j},{k}", c.invariant, c.passed)?;
        }
        w.flush()?;
    }
    Ok(report.all_passed())
}

fn integrate(cfg: &ExperimentConfig, start: Option<Vec<f64>>, out: &mut impl Write) -> Result<bool> {
    let group = CarnotGroup::new(cfg.algebra.clone());
    let g0 = match start {
        Some(v) => {
            crate::error::check_dim(group.dim(), v.len())?;
            GroupElement(v)
        }
        None => group.identity(),
    };
    let mut ok = true;
    for (idx, lam) in cfg.covectors.iter().enumerate() {
        match integrate_normal(&group, &cfg.norm, lam, &g0, cfg.horizon, cfg.step) {
            Ok(trace) => {
                let residual = pmp_identity_residual(&group, &cfg.norm, lam, &trace)?;
                let speeds = trace.speeds();
                let spread = speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - speeds.iter().cloned().fold(f64::INFINITY, f64::min);
                let pass = residual < PMP_TOL;
                ok &= pass;
                let mut w = create(&cfg.out_dir, &format!("trace_{idx}.csv"))?;
                trace.write_csv(&group, &mut w)?;
                w.flush()?;
                writeln!(
                    out,
                    "[{}] covector {idx}: end {:?} energy {:.6e} pmp residual {:.3e} speed spread {:.3e}",
                    mark(pass),
                    trace.end().0,
                    trace.control_energy(),
                    residual,
                    spread
                )?;
            }
            Err(Error::Integration { last_valid_time }) => {
                ok = false;
                writeln!(out, "[FAIL] covector {idx}: overflow after t = {last_valid_time}")?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ok)
}

fn escape(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<bool> {
    let group = CarnotGroup::new(cfg.algebra.clone());
    let report = run_escape(&group, &cfg.norm, &cfg.covectors, cfg.horizon, cfg.step)?;
    let len = report.runs.iter().map(|r| r.times.len()).max().unwrap_or(1);
    let mut w = create(&cfg.out_dir, "escape.csv")?;
    report.write_series_csv(&mut w, stride_for(len))?;
    w.flush()?;
    let mut w = create(&cfg.out_dir, "escape_slopes.csv")?;
    report.write_slopes_csv(&mut w)?;
    w.flush()?;

    let floor = report.slope_floor();
    writeln!(
        out,
        "escape: {} (step {}), norm {}, {} co-vectors, T = {}, h = {}",
        report.algebra,
        report.step,
        cfg.norm.label(),
        report.runs.len(),
        cfg.horizon,
        cfg.step
    )?;
    for r in &report.runs {
        let slope = r.slope.map_or("-".to_string(), |k| format!("{k:.4}"));
        let flag = if r.slope_ok(report.step) { "" } else { "  below floor" };
        writeln!(out, "  {:>3} {:<9} slope {slope}{flag}", r.cov_idx, r.status.label())?;
    }
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    writeln!(
        out,
        "slopes: min {} median {} (floor {floor:.4}); min c_emp·N^(1/s) {}",
        fmt(report.min_slope),
        fmt(report.median_slope),
        fmt(report.min_scaled_constant)
    )?;
    let overflow = report
        .runs
        .iter()
        .filter(|r| matches!(r.status, RunStatus::Overflow { .. }))
        .count();
    if overflow > 0 {
        writeln!(out, "{overflow} co-vector(s) overflowed and were excluded")?;
    }
    if !report.retreat_ok() {
        writeln!(
            out,
            "note: some traces fell below half their running maximum of D after leaving the unit ball"
        )?;
    }
    writeln!(out, "[{}] every fitted slope >= 1/s - 0.05", mark(report.slopes_ok()))?;
    Ok(report.slopes_ok())
}

fn growth(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<bool> {
    let group = CarnotGroup::new(cfg.algebra.clone());
    let report = run_growth_bound(&group, &cfg.norm, &cfg.covectors, cfg.horizon, cfg.step)?;
    let len = report.series.iter().map(|s| s.times.len()).max().unwrap_or(1);
    let mut w = create(&cfg.out_dir, "growth.csv")?;
    report.write_csv(&mut w, stride_for(len))?;
    w.flush()?;
    writeln!(out, "growth bound: {} over T = {}", report.algebra, report.horizon)?;
    for s in &report.series {
        writeln!(
            out,
            "  {:>3} sup {:.6} (first half {:.6})",
            s.cov_idx, s.sup, s.sup_first_half
        )?;
    }
    writeln!(out, "empirical constant C' = {:.6}", report.sup)?;
    let ok = report.stabilised();
    writeln!(
        out,
        "[{}] ratio sup grows by at most 10% over the second half",
        mark(ok)
    )?;
    Ok(ok)
}

fn pmp_check(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<bool> {
    let group = CarnotGroup::new(cfg.algebra.clone());
    let mut w = create(&cfg.out_dir, "pmp.csv")?;
    writeln!(w, "cov_idx,energy,residual")?;
    let mut worst = 0.0f64;
    let mut ok = true;
    for (idx, lam) in cfg.covectors.iter().enumerate() {
        match integrate_normal(&group, &cfg.norm, lam, &group.identity(), cfg.horizon, cfg.step) {
            Ok(trace) => {
                let r = pmp_identity_residual(&group, &cfg.norm, lam, &trace)?;
                writeln!(w, "{idx},{},{r}", trace.control_energy())?;
                worst = worst.max(r);
                ok &= r < PMP_TOL;
            }
            Err(Error::Integration { last_valid_time }) => {
                writeln!(out, "covector {idx}: overflow after t = {last_valid_time}")?;
                ok = false;
            }
            Err(e) => return Err(e),
        }
    }
    w.flush()?;
    writeln!(
        out,
        "[{}] energy identity on {} co-vectors in {}: max relative residual {worst:.3e} (tol {PMP_TOL:e})",
        mark(ok),
        cfg.covectors.len(),
        group.algebra().name()
    )?;
    Ok(ok)
}

fn heisenberg(n: u32, h: f64, out_dir: Option<PathBuf>, out: &mut impl Write) -> Result<bool> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidInput(format!("h must be positive, got {h}")));
    }
    let cmp = example_heisenberg(n, h)?;
    if let Some(dir) = out_dir {
        let group = CarnotGroup::new(StratifiedAlgebra::heisenberg());
        let lam = crate::escape::heisenberg_circle_covector(n as f64);
        let trace = integrate_normal(&group, &NormSpec::Euclidean, &lam, &group.identity(), 1.0, h)?;
        let mut w = create(&dir, &format!("heisenberg_N{n}.csv"))?;
        writeln!(w, "t,x,y,z,x_exact,y_exact,z_exact")?;
        let stride = stride_for(trace.len());
        for (k, (t, g)) in trace.times.iter().zip(&trace.points).enumerate() {
            if k % stride == 0 || k + 1 == trace.len() {
                let e = heisenberg_circle(n as f64, *t);
                writeln!(w, "{t},{},{},{},{},{},{}", g.0[0], g.0[1], g.0[2], e[0], e[1], e[2])?;
            }
        }
        w.flush()?;
    }
    writeln!(out, "Heisenberg circle lift, N = {n}, h = {}", cmp.h)?;
    writeln!(out, "  closed-form endpoint  {:?}", cmp.closed_endpoint)?;
    writeln!(out, "  integrated endpoint   {:?}", cmp.integrated_endpoint)?;
    writeln!(out, "  max deviation on [0,1] {:.3e}", cmp.max_deviation)?;
    writeln!(out, "  max |speed - 1|        {:.3e}", cmp.max_speed_deviation)?;
    writeln!(out, "  energy identity residual {:.3e}", cmp.pmp_residual)?;
    writeln!(out, "[{}] deviation < 1e-6", mark(cmp.passes()))?;
    Ok(cmp.passes())
}

#[allow(clippy::too_many_arguments)]
fn filiform(
    s: usize,
    m_max: u32,
    count: usize,
    seed: u64,
    horizon: f64,
    h: f64,
    out_dir: Option<PathBuf>,
    out: &mut impl Write,
) -> Result<bool> {
    if !(horizon > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput("T and h must be positive".into()));
    }
    let report = example_filiform(s, m_max, count, seed, horizon, h)?;
    if let Some(dir) = out_dir {
        let len = report.scan.runs.iter().map(|r| r.times.len()).max().unwrap_or(1);
        let mut w = create(&dir, &format!("filiform{s}_escape.csv"))?;
        report.scan.write_series_csv(&mut w, stride_for(len))?;
        w.flush()?;
        let mut w = create(&dir, &format!("filiform{s}_slopes.csv"))?;
        report.scan.write_slopes_csv(&mut w)?;
        w.flush()?;
    }
    let group = CarnotGroup::new(StratifiedAlgebra::filiform(s)?);
    writeln!(
        out,
        "filiform step {s}: central translations exp(m Y_top), m = 1..{m_max}"
    )?;
    writeln!(out, "  max residual {:.3e}", report.central_residual)?;
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    writeln!(
        out,
        "  slope scan over {} top-heavy co-vectors: min {} median {} (floor {:.4})",
        report.scan.runs.len(),
        fmt(report.scan.min_slope),
        fmt(report.scan.median_slope),
        report.scan.slope_floor()
    )?;
    for (k, slope) in &report.winding {
        writeln!(out, "  winding K = {k:8.4}: slope {}", fmt(*slope))?;
    }
    let lam = &report.scan.runs.first().map(|r| r.covector.clone());
    if let Some(lam) = lam {
        let p = GroupElement(vec![1.0; group.dim()]);
        let a = growth_ratio(&group, lam, &p)?;
        let b = growth_ratio(&group, &lam.scaled(2.0), &p)?;
        if let (Some(a), Some(b)) = (a, b) {
            writeln!(out, "  growth ratio at (1,..,1): {a:.6} (λ doubled: {b:.6})")?;
        }
    }
    writeln!(
        out,
        "[{}] central residual < 1e-9 and slopes >= 1/s - 0.05",
        mark(report.passes())
    )?;
    Ok(report.passes())
}
