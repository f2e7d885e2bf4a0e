//! Run configuration.
//!
//! A run is described by one TOML file (or the `config` object of a
//! `manifest.json` written by an earlier run). Command-line flags override
//! values from the file; anything given in neither place takes the defaults
//! below. Relative paths inside a config file are resolved against the
//! file's directory, relative paths given as flags against the working
//! directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dsa_core::data::{uniform_schedule, validate_schedule};
use dsa_core::inference::{DataGenerator, LikelihoodKind, ParamName, ParamPrior, PriorSpec, SamplerConfig, Scenario};
use dsa_core::{ModelParams, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Default prior on every sampled parameter: `Gamma(0.1, 0.1)`, with `rho`
/// truncated to `(0, 1)`.
pub const DEFAULT_PRIOR_SHAPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodChoice {
    #[default]
    Counts,
    InfectionTimes,
    InfectionTimesWithN,
    Complete,
}

impl LikelihoodChoice {
    pub fn kind(self) -> LikelihoodKind {
        match self {
            LikelihoodChoice::Counts => LikelihoodKind::Counts,
            LikelihoodChoice::InfectionTimes => LikelihoodKind::InfectionTimes { use_n: false },
            LikelihoodChoice::InfectionTimesWithN => LikelihoodKind::InfectionTimes { use_n: true },
            LikelihoodChoice::Complete => LikelihoodKind::Complete,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorEntry {
    Gamma {
        shape: f64,
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl PriorEntry {
    fn to_prior(self) -> ParamPrior {
        match self {
            PriorEntry::Gamma { shape, rate, lower, upper } => ParamPrior::gamma(shape, rate)
                .bounded(lower.unwrap_or(f64::NEG_INFINITY), upper.unwrap_or(f64::INFINITY)),
            PriorEntry::Uniform { lo, hi } => ParamPrior::uniform(lo, hi),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorsSection {
    /// Restrict the sampled region to `gamma < beta` (network rates).
    #[serde(default)]
    pub gamma_below_beta: bool,
    /// Per-parameter priors keyed by parameter name.
    #[serde(flatten)]
    pub params: BTreeMap<String, PriorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Defaults to half of `draws`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_window")]
    pub adapt_window: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_scale")]
    pub initial_scale: f64,
}

fn default_draws() -> usize {
    20_000
}
fn default_window() -> usize {
    200
}
fn default_chains() -> usize {
    1
}
fn default_scale() -> f64 {
    0.1
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            draws: default_draws(),
            burn_in: None,
            adapt_window: default_window(),
            chains: default_chains(),
            initial_scale: default_scale(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Count CSV for the count likelihood.
    #[serde(default)]
    pub counts: Option<PathBuf>,
    /// Event-record JSON (as written by `simulate`) for the time-based likelihoods.
    #[serde(default)]
    pub events: Option<PathBuf>,
    /// Initial susceptibles, used when the data file does not declare `N`.
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub m: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    #[serde(default)]
    pub nu: f64,
    pub n: u64,
    /// Defaults to `round(rho * n)`.
    #[serde(default)]
    pub m: Option<u64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Spacing of a uniform observation schedule; ignored if `schedule` is given.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    #[serde(default = "default_generator")]
    pub generator: DataGenerator,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

impl ScenarioSection {
    /// Scenario with the given rates and every other field at its default.
    pub fn new(beta: f64, gamma: f64, rho: f64, n: u64) -> Self {
        ScenarioSection {
            beta,
            gamma,
            rho,
            nu: 0.0,
            n,
            m: None,
            t_end: default_t_end(),
            step: default_step(),
            schedule: None,
            generator: default_generator(),
            replicates: default_replicates(),
        }
    }
}

fn default_t_end() -> f64 {
    10.0
}
fn default_step() -> f64 {
    1.0
}
fn default_generator() -> DataGenerator {
    DataGenerator::Dsa
}
fn default_replicates() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: Variant,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub likelihood: LikelihoodChoice,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub priors: PriorsSection,
    /// Parameters held at fixed values and excluded from sampling.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// Initial values for the sampler; missing ones come from a grid search.
    #[serde(default)]
    pub init: BTreeMap<String, f64>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub scenario: Option<ScenarioSection>,
}

fn default_model() -> Variant {
    Variant::StandardSir
}
fn default_alpha() -> f64 {
    0.05
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

/// Flag values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub draws: Option<usize>,
    pub burn_in: Option<usize>,
    pub chains: Option<usize>,
    pub replicates: Option<usize>,
    pub counts: Option<PathBuf>,
    pub n: Option<u64>,
}

fn param_name(key: &str) -> Result<ParamName> {
    key.parse::<ParamName>().map_err(CliError::from)
}

fn absolutize(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a TOML config, or a JSON manifest written by a previous run.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        cfg.data.counts = cfg.data.counts.map(|p| absolutize(&base, &p));
        cfg.data.events = cfg.data.events.map(|p| absolutize(&base, &p));
        cfg.out = cfg.out.map(|p| absolutize(&base, &p));
        Ok(cfg)
    }

    /// Applies flag overrides and checks the result.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if let Some(d) = o.draws {
            self.sampler.draws = d;
        }
        if o.burn_in.is_some() {
            self.sampler.burn_in = o.burn_in;
        }
        if let Some(c) = o.chains {
            self.sampler.chains = c;
        }
        if let Some(r) = o.replicates {
            self.scenario
                .as_mut()
                .ok_or_else(|| CliError::Config("--replicates needs a [scenario] section".into()))?
                .replicates = r;
        }
        if o.counts.is_some() {
            self.data.counts = o.counts.clone();
        }
        if o.n.is_some() {
            self.data.n = o.n;
        }
        for p in [&self.data.counts, &self.data.events].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Config(format!("data file {} does not exist", p.display())));
            }
        }
        for key in self.fixed.keys().chain(self.init.keys()).chain(self.priors.params.keys()) {
            param_name(key)?;
        }
        if let Some(key) = self.fixed.keys().find(|k| self.init.contains_key(*k)) {
            return Err(CliError::Config(format!("`{key}` is both fixed and given an initial value")));
        }
        if self.sampler.chains == 0 {
            return Err(CliError::Config("sampler.chains must be at least 1".into()));
        }
        self.sampler_config(0)?.validate()?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        self.out.clone().ok_or_else(|| CliError::Config("no output directory: pass --out or set `out`".into()))
    }

    pub fn fixed_params(&self) -> Result<BTreeMap<ParamName, f64>> {
        self.fixed.iter().map(|(k, v)| Ok((param_name(k)?, *v))).collect()
    }

    /// Prior specification for the free parameters, filling any parameter
    /// without an explicit entry with the default prior.
    pub fn prior_spec(&self) -> Result<PriorSpec> {
        let mut spec = PriorSpec::diffuse_gamma(self.model, DEFAULT_PRIOR_SHAPE);
        for (key, entry) in &self.priors.params {
            spec.params.insert(param_name(key)?, entry.to_prior());
        }
        spec.gamma_below_beta = self.priors.gamma_below_beta;
        for name in self.fixed_params()?.keys() {
            spec.params.remove(name);
        }
        Ok(spec)
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig> {
        let s = &self.sampler;
        Ok(SamplerConfig {
            n_draws: s.draws,
            burn_in: s.burn_in.unwrap_or(s.draws / 2),
            seed,
            adapt_window: s.adapt_window,
            initial_scale: s.initial_scale,
            ..SamplerConfig::default()
        })
    }

    pub fn scenario_section(&self) -> Result<&ScenarioSection> {
        self.scenario.as_ref().ok_or_else(|| CliError::Config("this command needs a [scenario] section".into()))
    }

    pub fn truth(&self) -> Result<ModelParams> {
        let s = self.scenario_section()?;
        let mut p = ModelParams { variant: self.model, beta: s.beta, gamma: s.gamma, rho: s.rho, nu: s.nu };
        if self.model != Variant::GammaFrailty {
            p.nu = 0.0;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self) -> Result<Vec<f64>> {
        let s = self.scenario_section()?;
        let schedule = match &s.schedule {
            Some(x) => x.clone(),
            None => uniform_schedule(s.t_end, s.step)?,
        };
        validate_schedule(&schedule)?;
        if *schedule.last().unwrap() != s.t_end {
            return Err(CliError::Config(format!("scenario schedule must end at t_end = {}", s.t_end)));
        }
        Ok(schedule)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = self.scenario_section()?;
        let scenario = Scenario {
            truth: self.truth()?,
            n: s.n,
            m: s.m.unwrap_or_else(|| (s.rho * s.n as f64).round() as u64),
            t_end: s.t_end,
            schedule: self.schedule()?,
            replicates: s.replicates,
            generator: s.generator,
            likelihood: self.likelihood.kind(),
            priors: self.prior_spec()?,
            fixed: self.fixed_params()?,
            sampler: self.sampler_config(0)?,
            alpha: self.alpha,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model, Variant::StandardSir);
        assert_eq!(cfg.sampler.draws, 20_000);
        assert_eq!(cfg.sampler_config(3).unwrap().burn_in, 10_000);
        let spec = cfg.prior_spec().unwrap();
        assert_eq!(spec.params.len(), 3);
        assert_eq!(spec.get(ParamName::Rho).unwrap().support(), (0.0, 1.0));
    }

    #[test]
    fn parses_a_full_file() {
        let text = r#"
model = "poisson_network"
seed = 5
likelihood = "counts"

[priors]
gamma_below_beta = true
beta = { dist = "gamma", shape = 0.02, rate = 0.02, lower = 0.1 }
gamma = { dist = "gamma", shape = 0.02, rate = 0.02 }
rho = { dist = "uniform", lo = 0.0, hi = 0.015 }

[sampler]
draws = 4000
chains = 2

[scenario]
beta = 0.5
gamma = 0.3
rho = 0.01
n = 2000
t_end = 20
"#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        let cfg = cfg.with_overrides(&Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(cfg.seed(), 9);
        let spec = cfg.prior_spec().unwrap();
        assert_eq!(spec, PriorSpec::network_ordered());
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.m, 20);
        assert_eq!(sc.schedule.len(), 21);
    }

    #[test]
    fn fixed_parameters_drop_out_of_the_prior() {
        let cfg: RunConfig = toml::from_str("[fixed]\ngamma = 0.16666666666666666\n").unwrap();
        let spec = cfg.prior_spec().unwrap();
        assert!(spec.get(ParamName::Gamma).is_none());
        assert_eq!(cfg.fixed_params().unwrap()[&ParamName::Gamma], 1.0 / 6.0);
    }

    #[test]
    fn rejects_unknown_keys_and_names() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let cfg: RunConfig = toml::from_str("[fixed]\ndelta = 1.0\n").unwrap();
        assert!(cfg.with_overrides(&Overrides::default()).is_err());
        let cfg: RunConfig = toml::from_str("[data]\ncounts = \"/no/such/file.csv\"\n").unwrap();
        assert!(matches!(cfg.with_overrides(&Overrides::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let cfg: RunConfig =
            toml::from_str("seed = 3\n[scenario]\nbeta = 2\ngamma = 1\nrho = 0.05\nn = 100\n").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }
}
