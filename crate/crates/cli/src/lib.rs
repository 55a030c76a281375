//! Runs configured experiments and writes their tables.
//!
//! Every command writes into the output directory:
//! - `config.toml`: the resolved configuration,
//! - `summary.csv`: one line per run,
//! - `timing.csv`: wall-clock time per run (kept apart so the other files
//!   are byte-for-byte reproducible),
//! - command-specific tables (trajectories, fits, histograms, gaps).

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cdanneal::dynamics::{minimal_gap, propagate, uniform_lambda_grid, Ansatz, RunRecord};
use cdanneal::experiments::{fit_exponential, FitResult, Histogram};
use cdanneal::model::Variant;
use rayon::prelude::*;

pub use config::{Command, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(cdanneal::Error),
    #[error("{0}")]
    Run(cdanneal::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Run(_) | AppError::Io { .. } => 1,
        }
    }
}

impl From<cdanneal::Error> for AppError {
    fn from(e: cdanneal::Error) -> Self {
        use cdanneal::Error as E;
        match e {
            E::NormDrift { .. } | E::NotHermitian { .. } | E::Eigendecomposition | E::DegenerateSpectrum { .. } => {
                AppError::Numerical(e)
            }
            other => AppError::Run(other),
        }
    }
}

/// Fixed scientific format with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, AppError> {
        fs::create_dir_all(dir).map_err(|source| AppError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), AppError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| AppError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, contents).map_err(|source| AppError::Io { path, source })
    }
}

const SUMMARY_HEADER: &str = "n,p,variant,nu,pj,ansatz,l,eta,T,dt,seed,F,min_gap";

fn summary_line(rec: &RunRecord, min_gap: Option<f64>) -> String {
    let (nu, pj) = match rec.spec.variant {
        Variant::Uniform => (String::new(), String::new()),
        Variant::FiniteRange { nu } => (fmt_float(nu), String::new()),
        Variant::Random { pj, .. } => (String::new(), fmt_float(pj)),
    };
    let l = match rec.ansatz.ansatz {
        Ansatz::Nested { order } => order.to_string(),
        _ => String::new(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        rec.spec.n,
        rec.spec.p,
        rec.spec.variant.name(),
        nu,
        pj,
        rec.ansatz.ansatz.label(),
        l,
        fmt_float(rec.ansatz.eta),
        fmt_float(rec.total_time),
        fmt_float(rec.dt),
        rec.seed.map_or(String::new(), |s| s.to_string()),
        fmt_float(rec.fidelity),
        min_gap.map_or(String::new(), fmt_float),
    )
}

fn trajectory_table(rec: &RunRecord) -> String {
    let mut s = String::from("t,lambda,pgs\n");
    for ((t, l), p) in rec.times.iter().zip(&rec.lambdas).zip(&rec.pgs) {
        let _ = writeln!(s, "{},{},{}", fmt_float(*t), fmt_float(*l), fmt_float(*p));
    }
    s
}

fn alphas_table(rec: &RunRecord) -> Option<String> {
    let trace = rec.alphas_trace.as_ref()?;
    let width = trace.first().map_or(0, Vec::len);
    let mut s = String::from("step");
    (1..=width).for_each(|k| {
        let _ = write!(s, ",alpha_{k}");
    });
    s.push('\n');
    for (i, alphas) in trace.iter().enumerate() {
        s.push_str(&i.to_string());
        for a in alphas {
            s.push(',');
            s.push_str(&fmt_float(*a));
        }
        s.push('\n');
    }
    Some(s)
}

fn fit_table(fit: &FitResult) -> String {
    let excluded: Vec<String> = fit.excluded.iter().map(usize::to_string).collect();
    format!(
        "phi,gamma,residual,n_min,n_max,excluded\n{},{},{},{},{},{}\n",
        fmt_float(fit.phi),
        fmt_float(fit.gamma),
        fmt_float(fit.residual),
        fit.n_range.0,
        fit.n_range.1,
        excluded.join(" ")
    )
}

fn histogram_table(h: &Histogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(k);
        let _ = writeln!(s, "{},{},{}", fmt_float(lo), fmt_float(hi), c);
    }
    s
}

/// A labelled run, timed.
struct Done {
    label: String,
    record: RunRecord,
    min_gap: Option<f64>,
    seconds: f64,
}

/// Files written and headline numbers, for the caller to report.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub runs: usize,
    pub files: Vec<String>,
    pub fidelities: Vec<f64>,
}

struct Job {
    label: String,
    spec: cdanneal::ModelSpec,
    ansatz: cdanneal::AnsatzSpec,
}

fn execute(cfg: &ExperimentConfig, jobs: Vec<Job>) -> Result<Vec<Done>, AppError> {
    let sched = cfg.schedule()?;
    let opts = cfg.propagation();
    let grid = uniform_lambda_grid(cfg.gap.grid);
    jobs.into_par_iter()
        .map(|job| {
            let start = Instant::now();
            let record = propagate(&job.spec, &job.ansatz, &sched, &opts)?;
            let min_gap = if cfg.gap.in_summary {
                Some(minimal_gap(&job.spec.build()?, &grid, cfg.gap_kind())?.delta)
            } else {
                None
            };
            Ok(Done {
                label: job.label,
                record,
                min_gap,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn persist_runs(out: &Output, done: &[Done], trajectories: bool, summary: &mut RunSummary) -> Result<(), AppError> {
    let mut table = format!("{SUMMARY_HEADER}\n");
    let mut timing = String::from("run,runtime_s\n");
    for d in done {
        table.push_str(&summary_line(&d.record, d.min_gap));
        table.push('\n');
        let _ = writeln!(timing, "{},{:.3}", d.label, d.seconds);
        if trajectories {
            let name = if done.len() == 1 {
                "trajectory.csv".to_string()
            } else {
                format!("trajectories/{}.csv", d.label)
            };
            out.write(&name, &trajectory_table(&d.record))?;
            summary.files.push(name);
            if let Some(alphas) = alphas_table(&d.record) {
                let name = if done.len() == 1 {
                    "alphas.csv".to_string()
                } else {
                    format!("alphas/{}.csv", d.label)
                };
                out.write(&name, &alphas)?;
                summary.files.push(name);
            }
        }
        summary.fidelities.push(d.record.fidelity);
    }
    out.write("summary.csv", &table)?;
    out.write("timing.csv", &timing)?;
    summary.files.push("summary.csv".into());
    summary.files.push("timing.csv".into());
    summary.runs += done.len();
    Ok(())
}

fn nu_label(nu: f64) -> String {
    format!("nu{nu}")
}

fn kind_label(kind: config::AnsatzKind, cfg: &ExperimentConfig) -> String {
    match kind {
        config::AnsatzKind::Nc => format!("nc{}", cfg.ansatz.l),
        config::AnsatzKind::Ca => "ca".into(),
        config::AnsatzKind::None => "none".into(),
        config::AnsatzKind::Exact => "exact".into(),
    }
}

/// Validates `cfg`, runs it, and writes every artifact.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, AppError> {
    cfg.validate().map_err(AppError::Config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    pool.install(|| run_validated(cfg))
}

fn run_validated(cfg: &ExperimentConfig) -> Result<RunSummary, AppError> {
    let out = Output::create(&cfg.output)?;
    out.write("config.toml", &cfg.to_toml())?;
    let mut summary = RunSummary {
        files: vec!["config.toml".into()],
        ..RunSummary::default()
    };
    let seed = cfg.ensemble.seed0;
    match cfg.command {
        Command::Anneal => {
            let jobs = vec![Job {
                label: "run".into(),
                spec: cfg.spec()?,
                ansatz: cfg.ansatz(),
            }];
            let done = execute(cfg, jobs)?;
            persist_runs(&out, &done, true, &mut summary)?;
        }
        Command::SweepSize => {
            let jobs = cfg
                .sweep
                .n_list
                .iter()
                .map(|&n| {
                    Ok(Job {
                        label: format!("n{n}"),
                        spec: cfg.spec_at(n, seed)?,
                        ansatz: cfg.ansatz(),
                    })
                })
                .collect::<Result<Vec<_>, cdanneal::Error>>()?;
            let done = execute(cfg, jobs)?;
            persist_runs(&out, &done, true, &mut summary)?;
            let points: Vec<(usize, f64)> = done.iter().map(|d| (d.record.spec.n, d.record.fidelity)).collect();
            match fit_exponential(&points) {
                Ok(fit) => {
                    out.write("fit.csv", &fit_table(&fit))?;
                    summary.files.push("fit.csv".into());
                }
                Err(e) => log::warn!("no exponential fit: {e}"),
            }
        }
        Command::SweepOrder => {
            let spec = cfg.spec()?;
            let jobs = cfg
                .sweep
                .orders
                .iter()
                .map(|&l| Job {
                    label: format!("l{l}"),
                    spec,
                    ansatz: cdanneal::AnsatzSpec::nested(l, cfg.ansatz.eta),
                })
                .collect();
            let done = execute(cfg, jobs)?;
            persist_runs(&out, &done, true, &mut summary)?;
        }
        Command::Ensemble => {
            let jobs = (0..cfg.ensemble.m as u64)
                .map(|i| {
                    Ok(Job {
                        label: format!("seed{}", seed + i),
                        spec: cfg.spec_at(cfg.model.n, seed + i)?,
                        ansatz: cfg.ansatz(),
                    })
                })
                .collect::<Result<Vec<_>, cdanneal::Error>>()?;
            let mut done = execute(cfg, jobs)?;
            done.sort_by_key(|d| d.record.seed);
            persist_runs(&out, &done, false, &mut summary)?;
            let e = &cfg.ensemble;
            let fids: Vec<f64> = done.iter().map(|d| d.record.fidelity).collect();
            let hist = Histogram::from_values(e.lo, e.hi, e.bins, &fids)?;
            out.write("histogram.csv", &histogram_table(&hist))?;
            let stats = format!(
                "M,mean,variance,dropped\n{},{},{},{}\n",
                fids.len(),
                fmt_float(cdanneal::experiments::mean(&fids)),
                fmt_float(cdanneal::experiments::variance(&fids)),
                hist.dropped
            );
            out.write("ensemble.csv", &stats)?;
            summary.files.push("histogram.csv".into());
            summary.files.push("ensemble.csv".into());
        }
        Command::FiniteRange => {
            let mut jobs = vec![];
            for &nu in &cfg.sweep.nus {
                for kind in cfg.compare_ansatze() {
                    let mut ansatz = cfg.ansatz_of(kind);
                    ansatz.eta = 0.5;
                    jobs.push(Job {
                        label: format!("{}_{}", nu_label(nu), kind_label(kind, cfg)),
                        spec: cdanneal::ModelSpec::finite_range(cfg.model.n, cfg.model.p, nu)?,
                        ansatz,
                    });
                }
            }
            let done = execute(cfg, jobs)?;
            persist_runs(&out, &done, true, &mut summary)?;
        }
        Command::EtaCompare => {
            let spec = cfg.spec()?;
            let mut jobs = vec![];
            for kind in cfg.compare_ansatze() {
                for (tag, eta) in [("eta0", 0.0), ("eta_half", 0.5)] {
                    let mut ansatz = cfg.ansatz_of(kind);
                    ansatz.eta = eta;
                    jobs.push(Job {
                        label: format!("{}_{tag}", kind_label(kind, cfg)),
                        spec,
                        ansatz,
                    });
                }
            }
            let done = execute(cfg, jobs)?;
            persist_runs(&out, &done, true, &mut summary)?;
            let mut table = String::from("ansatz,l,F_eta0,F_eta_half,delta_F\n");
            for pair in done.chunks(2) {
                let (a, b) = (&pair[0].record, &pair[1].record);
                let l = match a.ansatz.ansatz {
                    Ansatz::Nested { order } => order.to_string(),
                    _ => String::new(),
                };
                let _ = writeln!(
                    table,
                    "{},{},{},{},{}",
                    a.ansatz.ansatz.label(),
                    l,
                    fmt_float(a.fidelity),
                    fmt_float(b.fidelity),
                    fmt_float(b.fidelity - a.fidelity)
                );
            }
            out.write("comparison.csv", &table)?;
            summary.files.push("comparison.csv".into());
        }
        Command::Fit => {
            let input = cfg.fit.input.as_ref().expect("validated");
            let points = read_points(input, &cfg.fit.n_column, &cfg.fit.f_column)?;
            let fit = fit_exponential(&points).map_err(|e| AppError::Config(e.to_string()))?;
            out.write("fit.csv", &fit_table(&fit))?;
            summary.files.push("fit.csv".into());
        }
        Command::GapScan => {
            let grid = uniform_lambda_grid(cfg.gap.grid);
            let instances: Vec<(usize, u64)> = if cfg.model.variant == config::VariantKind::Random {
                cfg.sizes()
                    .into_iter()
                    .flat_map(|n| (0..cfg.ensemble.m as u64).map(move |i| (n, seed + i)))
                    .collect()
            } else {
                cfg.sizes().into_iter().map(|n| (n, seed)).collect()
            };
            let rows = instances
                .par_iter()
                .map(|&(n, s)| {
                    let spec = cfg.spec_at(n, s)?;
                    let gap = minimal_gap(&spec.build()?, &grid, cfg.gap_kind())?;
                    Ok((spec, gap))
                })
                .collect::<Result<Vec<_>, cdanneal::Error>>()?;
            let mut table = String::from("n,p,variant,nu,pj,seed,lambda_min,min_gap\n");
            for (spec, gap) in &rows {
                let (nu, pj) = match spec.variant {
                    Variant::Uniform => (String::new(), String::new()),
                    Variant::FiniteRange { nu } => (fmt_float(nu), String::new()),
                    Variant::Random { pj, .. } => (String::new(), fmt_float(pj)),
                };
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{},{}",
                    spec.n,
                    spec.p,
                    spec.variant.name(),
                    nu,
                    pj,
                    spec.seed().map_or(String::new(), |s| s.to_string()),
                    fmt_float(gap.lambda_min),
                    fmt_float(gap.delta)
                );
            }
            out.write("gaps.csv", &table)?;
            summary.files.push("gaps.csv".into());
        }
    }
    Ok(summary)
}

/// Reads `(n, F)` pairs from a comma-separated table with a header line.
pub fn read_points(path: &Path, n_column: &str, f_column: &str) -> Result<Vec<(usize, f64)>, AppError> {
    let text = fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| AppError::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| AppError::Config(format!("{} has no column '{name}'", path.display())))
    };
    let (ni, fi) = (column(n_column)?, column(f_column)?);
    lines
        .enumerate()
        .map(|(row, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || AppError::Config(format!("{} line {}: cannot parse '{line}'", path.display(), row + 2));
            let n = cells.get(ni).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let f = cells.get(fi).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            Ok((n, f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn numerical_errors_get_their_own_code() {
        let e: AppError = cdanneal::Error::NormDrift { drift: 1e-3, time: 0.5 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: AppError = cdanneal::Error::InvalidInput("x".into()).into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(AppError::Config("x".into()).exit_code(), 2);
    }
}
