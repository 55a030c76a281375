use std::path::PathBuf;
use std::process::ExitCode;

use cdanneal_cli::config::{AnsatzKind, Command, GapChoice, RepChoice, VariantKind};
use cdanneal_cli::{run, AppError, ExperimentConfig};
use clap::Parser;

/// Counterdiabatic annealing experiments for the p-spin model.
///
/// Settings come from an optional TOML file (`--config`); every flag given
/// on the command line overrides the file.
#[derive(Parser, Debug)]
#[command(name = "cdanneal", version)]
struct Cli {
    /// Command to run; may instead be given as `command` in the config.
    #[arg(value_enum)]
    command: Option<Command>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps and ensembles.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    verbose: bool,

    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long, value_enum)]
    variant: Option<VariantKind>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    pj: Option<f64>,
    #[arg(long, value_enum)]
    rep: Option<RepChoice>,

    #[arg(long, value_enum)]
    ansatz: Option<AnsatzKind>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,

    #[arg(long = "T")]
    total_time: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    record_alphas: bool,
    #[arg(long)]
    lambda_cache: Option<f64>,

    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    nus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    ansatze: Option<Vec<AnsatzKind>>,

    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    n_column: Option<String>,
    #[arg(long)]
    f_column: Option<String>,

    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    gap_kind: Option<GapChoice>,
    /// Add the minimal gap of each run to the summary.
    #[arg(long)]
    with_gap: bool,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl Cli {
    fn resolve(self) -> Result<ExperimentConfig, AppError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| AppError::Io {
                    path: path.clone(),
                    source,
                })?;
                ExperimentConfig::parse(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?
            }
            None => {
                let command = self
                    .command
                    .ok_or_else(|| AppError::Config("no command given and no --config file".into()))?;
                ExperimentConfig::new(command)
            }
        };
        set!(cfg.command, self.command);
        set!(cfg.output, self.output);
        set!(cfg.jobs, self.jobs);
        set!(cfg.model.n, self.n);
        set!(cfg.model.p, self.p);
        set!(cfg.model.variant, self.variant);
        set!(cfg.model.nu, self.nu);
        set!(cfg.model.pj, self.pj);
        if self.rep.is_some() {
            cfg.model.rep = self.rep;
        }
        set!(cfg.ansatz.kind, self.ansatz);
        set!(cfg.ansatz.l, self.l);
        set!(cfg.ansatz.eta, self.eta);
        set!(cfg.schedule.total_time, self.total_time);
        set!(cfg.schedule.dt, self.dt);
        set!(cfg.schedule.stride, self.stride);
        cfg.schedule.record_alphas |= self.record_alphas;
        if self.lambda_cache.is_some() {
            cfg.schedule.lambda_cache = self.lambda_cache;
        }
        set!(cfg.ensemble.m, self.m);
        set!(cfg.ensemble.seed0, self.seed0);
        set!(cfg.ensemble.bins, self.bins);
        set!(cfg.ensemble.lo, self.lo);
        set!(cfg.ensemble.hi, self.hi);
        set!(cfg.sweep.n_list, self.n_list);
        set!(cfg.sweep.orders, self.orders);
        set!(cfg.sweep.nus, self.nus);
        set!(cfg.sweep.ansatze, self.ansatze);
        if self.input.is_some() {
            cfg.fit.input = self.input;
        }
        set!(cfg.fit.n_column, self.n_column);
        set!(cfg.fit.f_column, self.f_column);
        set!(cfg.gap.grid, self.grid);
        set!(cfg.gap.kind, self.gap_kind);
        cfg.gap.in_summary |= self.with_gap;
        Ok(cfg)
    }
}

struct StderrLogger;

static LOGGER: StderrLogger = StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(level);
    }
    let dry_run = cli.dry_run;
    let result = cli.resolve().and_then(|cfg| {
        if dry_run {
            cfg.validate().map_err(AppError::Config)?;
            print!("{}", cfg.to_toml());
            return Ok(None);
        }
        run(&cfg).map(|s| Some((cfg, s)))
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some((cfg, summary))) => {
            match summary.runs {
                0 => println!("output in {}", cfg.output.display()),
                runs => println!("{runs} run(s), output in {}", cfg.output.display()),
            }
            if summary.fidelities.len() == 1 {
                println!("F = {:.6}", summary.fidelities[0]);
            }
            for f in &summary.files {
                log::info!("wrote {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
