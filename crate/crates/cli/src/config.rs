//! Experiment configuration: a TOML file with one table per concern, plus
//! command-line overrides.

use std::path::PathBuf;

use cdanneal::dynamics::{Ansatz, AnsatzSpec, GapKind, PropagationOptions};
use cdanneal::model::{ModelSpec, Schedule, Variant};
use cdanneal::Representation;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Anneal,
    SweepSize,
    SweepOrder,
    Ensemble,
    FiniteRange,
    EtaCompare,
    Fit,
    GapScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Uniform,
    FiniteRange,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RepChoice {
    Subspace,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    None,
    Nc,
    Ca,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GapChoice {
    Adjacent,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n: usize,
    pub p: u32,
    pub variant: VariantKind,
    pub nu: f64,
    pub pj: f64,
    /// Defaults to the subspace for the uniform model, the full space otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep: Option<RepChoice>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 10,
            p: 3,
            variant: VariantKind::Uniform,
            nu: 0.0,
            pj: 1.0,
            rep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzConfig {
    pub kind: AnsatzKind,
    pub l: usize,
    pub eta: f64,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            kind: AnsatzKind::None,
            l: 1,
            eta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub dt: f64,
    pub stride: usize,
    pub record_alphas: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_cache: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_time: 1.0,
            dt: cdanneal::dynamics::DEFAULT_DT,
            stride: cdanneal::dynamics::DEFAULT_STRIDE,
            record_alphas: false,
            lambda_cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    #[serde(rename = "M")]
    pub m: usize,
    /// Instance `i` uses seed `seed0 + i`; single random runs use `seed0`.
    pub seed0: u64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            m: 100,
            seed0: 0,
            bins: 100,
            lo: 0.0,
            hi: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub orders: Vec<usize>,
    pub nus: Vec<f64>,
    pub ansatze: Vec<AnsatzKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Delimited table with a header line, e.g. a previous `summary.csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub n_column: String,
    pub f_column: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            n_column: "n".into(),
            f_column: "F".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapConfig {
    pub grid: usize,
    pub kind: GapChoice,
    /// Also compute the minimal gap for every run in the summary.
    pub in_summary: bool,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            grid: 101,
            kind: GapChoice::Adjacent,
            in_summary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub gap: GapConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            output: default_output(),
            jobs: default_jobs(),
            model: ModelConfig::default(),
            ansatz: AnsatzConfig::default(),
            schedule: ScheduleConfig::default(),
            ensemble: EnsembleConfig::default(),
            sweep: SweepConfig::default(),
            fit: FitConfig::default(),
            gap: GapConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn rep_choice(&self) -> RepChoice {
        self.model.rep.unwrap_or(match self.model.variant {
            VariantKind::Uniform => RepChoice::Subspace,
            _ => RepChoice::Full,
        })
    }

    /// Model at size `n` with the configured variant; `seed` is used only
    /// by the random variant.
    pub fn spec_at(&self, n: usize, seed: u64) -> Result<ModelSpec, cdanneal::Error> {
        let variant = match self.model.variant {
            VariantKind::Uniform => Variant::Uniform,
            VariantKind::FiniteRange => Variant::FiniteRange { nu: self.model.nu },
            VariantKind::Random => Variant::Random {
                pj: self.model.pj,
                seed,
            },
        };
        let rep = match self.rep_choice() {
            RepChoice::Subspace => Representation::max_spin(n)?,
            RepChoice::Full => Representation::full(n)?,
        };
        ModelSpec::new(n, self.model.p, variant, rep)
    }

    pub fn spec(&self) -> Result<ModelSpec, cdanneal::Error> {
        self.spec_at(self.model.n, self.ensemble.seed0)
    }

    pub fn ansatz_of(&self, kind: AnsatzKind) -> AnsatzSpec {
        let ansatz = match kind {
            AnsatzKind::None => Ansatz::None,
            AnsatzKind::Nc => Ansatz::Nested { order: self.ansatz.l },
            AnsatzKind::Ca => Ansatz::Cyclic,
            AnsatzKind::Exact => Ansatz::Exact,
        };
        AnsatzSpec::new(ansatz, self.ansatz.eta)
    }

    pub fn ansatz(&self) -> AnsatzSpec {
        self.ansatz_of(self.ansatz.kind)
    }

    pub fn schedule(&self) -> Result<Schedule, cdanneal::Error> {
        Schedule::new(self.schedule.total_time)
    }

    pub fn propagation(&self) -> PropagationOptions {
        PropagationOptions {
            dt: self.schedule.dt,
            stride: self.schedule.stride,
            record_alphas: self.schedule.record_alphas,
            lambda_cache: self.schedule.lambda_cache,
            degenerate_sum: true,
        }
    }

    pub fn gap_kind(&self) -> GapKind {
        match self.gap.kind {
            GapChoice::Adjacent => GapKind::Adjacent,
            GapChoice::Coupled => GapKind::Coupled,
        }
    }

    /// Sizes for the sweep and scan commands: the list if given, else `n`.
    pub fn sizes(&self) -> Vec<usize> {
        if self.sweep.n_list.is_empty() {
            vec![self.model.n]
        } else {
            self.sweep.n_list.clone()
        }
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<(), String> {
        let fail = |msg: String| Err(msg);
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        let s = &self.schedule;
        if !(s.total_time > 0.0 && s.total_time.is_finite()) {
            return fail(format!("schedule.T = {} must be positive", s.total_time));
        }
        if !(s.dt > 0.0 && s.dt <= s.total_time) {
            return fail(format!("schedule.dt = {} must lie in (0, T]", s.dt));
        }
        let steps = (s.total_time / s.dt).round();
        if (steps * s.dt - s.total_time).abs() > 1e-9 * s.total_time {
            return fail(format!("schedule.T = {} is not a multiple of dt = {}", s.total_time, s.dt));
        }
        if s.stride == 0 {
            return fail("schedule.stride must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.ansatz.eta) {
            return fail(format!("ansatz.eta = {} must lie in [0, 1]", self.ansatz.eta));
        }
        if self.ansatz.l == 0 {
            return fail("ansatz.l must be at least 1".into());
        }
        if self.gap.grid < 2 {
            return fail("gap.grid must be at least 2".into());
        }
        let e = &self.ensemble;
        if e.bins == 0 || !(e.lo < e.hi) {
            return fail(format!("ensemble histogram needs lo < hi and bins >= 1 (got [{}, {}), {})", e.lo, e.hi, e.bins));
        }
        let model_err = |e: cdanneal::Error| e.to_string();
        match self.command {
            Command::Anneal | Command::GapScan => {
                for n in self.sizes() {
                    self.spec_at(n, self.ensemble.seed0).map_err(model_err)?;
                }
            }
            Command::SweepSize => {
                let sizes = &self.sweep.n_list;
                if sizes.len() < 4 {
                    return fail("sweep-size needs at least 4 sizes in sweep.n_list".into());
                }
                if sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return fail("sweep.n_list must be strictly ascending".into());
                }
                for &n in sizes {
                    self.spec_at(n, self.ensemble.seed0).map_err(model_err)?;
                }
            }
            Command::SweepOrder => {
                if self.sweep.orders.is_empty() || self.sweep.orders.contains(&0) {
                    return fail("sweep-order needs positive orders in sweep.orders".into());
                }
                self.spec().map_err(model_err)?;
            }
            Command::Ensemble => {
                if self.model.variant != VariantKind::Random {
                    return fail("ensemble needs model.variant = \"random\"".into());
                }
                if e.m == 0 {
                    return fail("ensemble.M must be at least 1".into());
                }
                self.spec().map_err(model_err)?;
            }
            Command::FiniteRange => {
                if self.model.variant != VariantKind::FiniteRange {
                    return fail("finite-range needs model.variant = \"finite-range\"".into());
                }
                if self.sweep.nus.is_empty() {
                    return fail("finite-range needs exponents in sweep.nus".into());
                }
                for &nu in &self.sweep.nus {
                    ModelSpec::finite_range(self.model.n, self.model.p, nu).map_err(model_err)?;
                }
            }
            Command::EtaCompare => {
                if self.rep_choice() != RepChoice::Full {
                    return fail("eta-compare needs model.rep = \"full\"".into());
                }
                if self.compare_ansatze().iter().any(|k| matches!(k, AnsatzKind::None | AnsatzKind::Exact)) {
                    return fail("eta-compare needs variational ansatze (nc or ca)".into());
                }
                self.spec().map_err(model_err)?;
            }
            Command::Fit => {
                if self.fit.input.is_none() {
                    return fail("fit needs fit.input".into());
                }
            }
        }
        if self.schedule.lambda_cache.is_some() && self.ansatz.kind != AnsatzKind::Ca {
            return fail("schedule.lambda_cache is only available for the ca ansatz".into());
        }
        Ok(())
    }

    /// Ansatz kinds compared by `finite-range` and `eta-compare`.
    pub fn compare_ansatze(&self) -> Vec<AnsatzKind> {
        if self.sweep.ansatze.is_empty() {
            vec![self.ansatz.kind]
        } else {
            self.sweep.ansatze.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_tables() {
        let cfg = ExperimentConfig::parse("command = \"anneal\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Command::Anneal));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("command = \"anneal\"\n[model]\nq = 3\n").is_err());
        assert!(ExperimentConfig::parse("command = \"bake\"\n").is_err());
        let cfg = ExperimentConfig::parse("command = \"anneal\"\n[model]\nn = 7\n").unwrap();
        assert_eq!((cfg.model.n, cfg.model.p), (7, 3));
    }

    #[test]
    fn validation_catches_bad_schedules() {
        let mut cfg = ExperimentConfig::new(Command::Anneal);
        cfg.schedule.dt = 0.3;
        assert!(cfg.validate().unwrap_err().contains("multiple"));
        cfg.schedule.dt = 1e-3;
        cfg.model.n = 20;
        cfg.model.rep = Some(RepChoice::Full);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn representation_follows_variant() {
        let mut cfg = ExperimentConfig::new(Command::Anneal);
        assert_eq!(cfg.rep_choice(), RepChoice::Subspace);
        cfg.model.variant = VariantKind::Random;
        assert_eq!(cfg.rep_choice(), RepChoice::Full);
    }
}
