//! Experiment configuration and its TOML form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{RunConfig, StepsizeRule};
use crate::graph::{GraphSchedule, TopologyKind};
use crate::noise::{NoiseFamily, NoiseModel};
use crate::problem::{generate_lasso_instance, generate_simplex_instance, CompositeProblem, LassoSpec};
use crate::rng::SimRng;
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_HORIZON: usize = 5000;
pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_SEED: u64 = 20240601;

/// Which instance generator a variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemBlock {
    /// ℓ1-regularized least squares over the box `[lower, upper]^n`.
    Lasso {
        agents: usize,
        dim: usize,
        lambda: f64,
        #[serde(default = "default_lower")]
        lower: f64,
        #[serde(default = "default_upper")]
        upper: f64,
        #[serde(default = "default_data_noise")]
        data_noise: f64,
    },
    /// Least squares over the probability simplex.
    Simplex {
        agents: usize,
        dim: usize,
        #[serde(default = "default_data_noise")]
        data_noise: f64,
    },
}

fn default_lower() -> f64 {
    -1.0
}

fn default_upper() -> f64 {
    1.0
}

fn default_data_noise() -> f64 {
    1.0
}

impl ProblemBlock {
    pub fn agents(&self) -> usize {
        match *self {
            ProblemBlock::Lasso { agents, .. } | ProblemBlock::Simplex { agents, .. } => agents,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ProblemBlock::Lasso { dim, .. } | ProblemBlock::Simplex { dim, .. } => dim,
        }
    }

    pub fn generate(&self, rng: &mut SimRng) -> Result<CompositeProblem> {
        match *self {
            ProblemBlock::Lasso {
                agents,
                dim,
                lambda,
                lower,
                upper,
                data_noise,
            } => {
                let spec = LassoSpec {
                    data_noise,
                    ..LassoSpec::new(agents, dim, lambda, lower, upper)
                };
                generate_lasso_instance(&spec, rng)
            }
            ProblemBlock::Simplex { agents, dim, data_noise } => generate_simplex_instance(agents, dim, data_noise, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    #[serde(default = "default_topology")]
    pub kind: TopologyKind,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Minimum positive weight; defaults to the smallest weight the family
    /// actually uses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn default_topology() -> TopologyKind {
    TopologyKind::StaticRing
}

fn default_window() -> usize {
    1
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            kind: TopologyKind::StaticRing,
            window: 1,
            eta: None,
        }
    }
}

impl ScheduleBlock {
    pub fn eta_for(&self, m: usize) -> f64 {
        self.eta.unwrap_or_else(|| match self.kind {
            TopologyKind::StaticRing if m == 2 => 0.5,
            TopologyKind::StaticRing => 1.0 / 3.0,
            TopologyKind::StaticComplete | TopologyKind::BCyclicPartition => 1.0 / m as f64,
        })
    }

    pub fn build(&self, m: usize, seed: u64) -> Result<GraphSchedule> {
        GraphSchedule::new(self.kind, m, self.window, self.eta_for(m), seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_stepsize")]
    pub stepsize: StepsizeRule,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_stepsize() -> StepsizeRule {
    StepsizeRule::VaryingInvSqrt
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            stepsize: StepsizeRule::VaryingInvSqrt,
            record_every: DEFAULT_RECORD_EVERY,
        }
    }
}

impl RunBlock {
    pub fn to_run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            record_every: self.record_every,
            ..RunConfig::new(self.horizon, self.stepsize, seed)
        }
    }
}

/// One line of a figure: a fully specified (problem, schedule, noise, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    pub noise: NoiseFamily,
    #[serde(default)]
    pub run: RunBlock,
}

impl Variant {
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.noise, self.problem.dim())
    }

    /// Checks every block without running anything.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let m = self.problem.agents();
        if m == 0 || self.problem.dim() == 0 {
            return Err(Error::InvalidSize(format!("variant {:?} needs agents and dim >= 1", self.label)));
        }
        if let ProblemBlock::Lasso { lambda, lower, upper, data_noise, .. } = self.problem {
            if !(lambda >= 0.0 && lower < upper && data_noise >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "variant {:?}: need lambda >= 0, lower < upper and data_noise >= 0",
                    self.label
                )));
            }
        }
        if let ProblemBlock::Simplex { dim, data_noise, .. } = self.problem {
            if !dim.is_multiple_of(2) || data_noise < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "variant {:?}: simplex instances need an even dim and data_noise >= 0",
                    self.label
                )));
            }
        }
        self.schedule.build(m, seed)?;
        self.noise_model()?;
        self.run.to_run_config(seed).validate()
    }
}

/// A named set of variants run for `trials` trials each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// The accepted file layouts: explicit `[[variant]]` tables, a single
/// variant given as top-level `[problem]`/`[schedule]`/`[noise]`/`[run]`
/// tables, or a manifest written by a previous run (its `[experiment]` table).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    variant: Vec<Variant>,
    problem: Option<ProblemBlock>,
    schedule: Option<ScheduleBlock>,
    noise: Option<NoiseFamily>,
    run: Option<RunBlock>,
}

#[derive(Deserialize)]
struct ManifestFile {
    experiment: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("experiment has no variants".into()));
        }
        let mut labels: Vec<&str> = self.variants.iter().map(|v| v.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("variant labels must be unique".into()));
        }
        self.variants.iter().try_for_each(|v| v.validate(self.seed))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if value.contains_key("experiment") {
            let m: ManifestFile = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            return Ok(m.experiment);
        }
        let raw: ConfigFile = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let name = raw.name.unwrap_or_else(|| "custom".into());
        let single = raw.problem.is_some() || raw.noise.is_some() || raw.schedule.is_some() || raw.run.is_some();
        let variants = match (single, raw.variant.is_empty()) {
            (true, false) => {
                return Err(Error::Config(
                    "use either top-level [problem]/[noise] tables or [[variant]] tables, not both".into(),
                ))
            }
            (true, true) => {
                let (Some(problem), Some(noise)) = (raw.problem, raw.noise) else {
                    return Err(Error::Config("a single-variant config needs [problem] and [noise]".into()));
                };
                vec![Variant {
                    label: name.clone(),
                    problem,
                    schedule: raw.schedule.unwrap_or_default(),
                    noise,
                    run: raw.run.unwrap_or_default(),
                }]
            }
            (false, _) => raw.variant,
        };
        Ok(Self {
            name,
            trials: raw.trials.unwrap_or(DEFAULT_TRIALS),
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            out: raw.out,
            variants,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// `out`, or `out/<name>` when unset.
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| Path::new("out").join(&self.name))
    }

    /// Applies a horizon to every variant.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        for v in &mut self.variants {
            v.run.horizon = horizon;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"
name = "small"
trials = 2
seed = 7

[problem]
kind = "lasso"
agents = 4
dim = 3
lambda = 0.1

[noise]
family = "gaussian-iso"
variance = 0.001

[run]
horizon = 50
stepsize = "constant"
"#;

    #[test]
    fn single_variant_layout() {
        let c = ExperimentConfig::from_toml_str(SINGLE).unwrap();
        assert_eq!(c.trials, 2);
        assert_eq!(c.variants.len(), 1);
        let v = &c.variants[0];
        assert_eq!(v.label, "small");
        assert_eq!(v.run.stepsize, StepsizeRule::ConstantHorizon);
        assert_eq!(v.run.record_every, DEFAULT_RECORD_EVERY);
        assert_eq!(v.schedule, ScheduleBlock::default());
        assert!(matches!(v.problem, ProblemBlock::Lasso { lower, upper, .. } if lower == -1.0 && upper == 1.0));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml_str(SINGLE).unwrap();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn mixed_layouts_rejected() {
        let text = format!("{SINGLE}\n[[variant]]\nlabel = \"x\"\n[variant.problem]\nkind = \"simplex\"\nagents = 2\ndim = 2\n[variant.noise]\nfamily = \"uniform-box\"\nhalf_width = 0.5\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SINGLE.replace("trials = 2", "trails = 2");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn zero_trials_is_usage_error() {
        let mut c = ExperimentConfig::from_toml_str(SINGLE).unwrap();
        c.trials = 0;
        assert!(c.validate().unwrap_err().is_usage());
    }

    #[test]
    fn default_eta_matches_family() {
        let ring = ScheduleBlock::default();
        assert_eq!(ring.eta_for(60), 1.0 / 3.0);
        assert_eq!(ring.eta_for(2), 0.5);
        ring.build(60, 0).unwrap();
        let cyc = ScheduleBlock {
            kind: TopologyKind::BCyclicPartition,
            window: 2,
            eta: None,
        };
        cyc.build(10, 3).unwrap();
    }
}
