//! Runs an experiment and writes its artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::Simulation;
use crate::graph::GraphSchedule;
use crate::metrics::{
    agent_quantiles, aggregate_trials, run_rows, summary_rows, write_csv, ErrorSeries, QuantileSeries, Stat,
    TrialSummary,
};
use crate::noise::{NoiseFamily, NoiseModel};
use crate::problem::{default_reference_tol, reference_optimum};
use crate::rng::{self, Purpose, StreamKey};
use crate::{Error, Result};

use super::config::{ExperimentConfig, ProblemBlock, Variant};
use super::svg::{self, Line};

pub const QUALITATIVE_NOTE: &str = "The paper states neither horizons nor axis scales for its figures. \
These runs reproduce orderings and trends, not plotted values.";

pub const STREAM_NOTE: &str = "ChaCha8 streams keyed by (purpose << 56 | trial << 32 | agent) under the master seed; \
data and initial states depend only on the trial, so variants share them.";

/// Every trial of one variant plus their aggregate.
#[derive(Debug, Clone)]
pub struct VariantResult {
    pub label: String,
    pub noise: NoiseFamily,
    pub trials: Vec<QuantileSeries>,
    pub summary: TrialSummary,
}

impl VariantResult {
    /// Final mean median error over initial mean median error.
    pub fn final_ratio(&self) -> f64 {
        self.summary.final_median() / self.summary.initial_median()
    }

    /// Final trial-mean of the per-trial maximum over agents, over its
    /// initial value.
    pub fn final_max_ratio(&self) -> f64 {
        let max = &self.summary.max_mean;
        max[max.len() - 1] / max[0]
    }
}

/// Simulation results plus where they were written.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub variants: Vec<VariantResult>,
}

impl Report {
    pub fn variant(&self, label: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.label == label)
    }

    /// Whether the Laplace variant ends with the largest mean median error;
    /// `None` when the experiment has no Laplace variant or nothing to compare.
    pub fn laplace_slowest(&self) -> Option<bool> {
        if self.variants.len() < 2 {
            return None;
        }
        let laplace = self
            .variants
            .iter()
            .find(|v| matches!(v.noise, NoiseFamily::LaplaceIid { .. }))?;
        let worst = self.variants.iter().map(|v| v.summary.final_median()).fold(f64::NEG_INFINITY, f64::max);
        Some(laplace.summary.final_median() >= worst)
    }
}

/// File-system name for a variant label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let s = s.trim_matches('-').to_string();
    if s.is_empty() {
        "variant".into()
    } else {
        s
    }
}

fn run_trial(config: &ExperimentConfig, v: &Variant, schedule: &GraphSchedule, noise: &NoiseModel, trial: u32) -> Result<QuantileSeries> {
    let mut data = rng::stream(config.seed, StreamKey::new(Purpose::Data, trial, 0));
    let problem = v.problem.generate(&mut data)?;
    let reference = reference_optimum(&problem, default_reference_tol(problem.geometry()))?;
    let sim = Simulation::new(&problem, schedule, noise, reference.f_star);
    let out = sim.run(&v.run.to_run_config(config.seed), trial)?;
    let errors = ErrorSeries::from_trajectory(&out.trajectory);
    agent_quantiles(&errors.agent_series())
}

/// Runs every `(variant, trial)` job on the rayon pool and aggregates the
/// trials of each variant. Writes nothing.
pub fn simulate(config: &ExperimentConfig) -> Result<Vec<VariantResult>> {
    config.validate()?;
    let mut setups = Vec::with_capacity(config.variants.len());
    for v in &config.variants {
        setups.push((v.schedule.build(v.problem.agents(), config.seed)?, v.noise_model()?));
    }
    let jobs: Vec<(usize, u32)> = (0..config.variants.len())
        .flat_map(|k| (0..config.trials as u32).map(move |t| (k, t)))
        .collect();
    let results: Vec<Result<QuantileSeries>> = jobs
        .par_iter()
        .map(|&(k, trial)| {
            let (schedule, noise) = &setups[k];
            run_trial(config, &config.variants[k], schedule, noise, trial)
        })
        .collect();

    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(config.variants.len());
    for v in &config.variants {
        let trials = results.by_ref().take(config.trials).collect::<Result<Vec<_>>>()?;
        let summary = aggregate_trials(&trials, config.trials)?;
        out.push(VariantResult {
            label: v.label.clone(),
            noise: v.noise,
            trials,
            summary,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct VariantManifest {
    label: String,
    problem: &'static str,
    noise_family: &'static str,
    theta: f64,
    runs_csv: String,
    summary_csv: String,
    initial_median: f64,
    final_median: f64,
    final_min: f64,
    final_max: f64,
    final_over_initial: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_r_squared: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    streams: &'static str,
    note: &'static str,
    figure: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    laplace_slowest: Option<bool>,
    experiment: &'a ExperimentConfig,
    result: Vec<VariantManifest>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(rows, create(path)?).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn figure(config: &ExperimentConfig, variants: &[VariantResult]) -> String {
    let title = format!("{}: {} trials", config.name, config.trials);
    let lines: Vec<Line<'_>> = if let [only] = variants {
        Stat::ALL
            .iter()
            .map(|&stat| Line {
                label: format!("{stat:?}").to_lowercase(),
                steps: &only.summary.steps,
                values: match stat {
                    Stat::Max => &only.summary.max_mean,
                    Stat::Min => &only.summary.min_mean,
                    Stat::Median => &only.summary.median_mean,
                },
            })
            .collect()
    } else {
        variants
            .iter()
            .map(|v| Line {
                label: v.label.clone(),
                steps: &v.summary.steps,
                values: &v.summary.median_mean,
            })
            .collect()
    };
    svg::line_chart(&title, "F(x̃) − F*", &lines)
}

/// Simulates `config` and writes, under its output directory, one
/// `runs.csv` and `summary.csv` per variant, `<name>.svg` and
/// `manifest.toml`. The manifest embeds the configuration, so
/// `run --config manifest.toml` repeats the experiment.
pub fn execute(config: &ExperimentConfig) -> Result<Report> {
    let variants = simulate(config)?;
    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut result = Vec::with_capacity(variants.len());
    for (v, spec) in variants.iter().zip(&config.variants) {
        let dir = slug(&v.label);
        let vdir = out_dir.join(&dir);
        std::fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        write_rows(&vdir.join("runs.csv"), &run_rows(&v.trials, &config.name))?;
        write_rows(&vdir.join("summary.csv"), &summary_rows(&v.summary))?;
        let last = v.summary.steps.len() - 1;
        result.push(VariantManifest {
            label: v.label.clone(),
            problem: match spec.problem {
                ProblemBlock::Lasso { .. } => "lasso",
                ProblemBlock::Simplex { .. } => "simplex",
            },
            noise_family: v.noise.name(),
            theta: v.noise.theta(),
            runs_csv: format!("{dir}/runs.csv"),
            summary_csv: format!("{dir}/summary.csv"),
            initial_median: v.summary.initial_median(),
            final_median: v.summary.final_median(),
            final_min: v.summary.min_mean[last],
            final_max: v.summary.max_mean[last],
            final_over_initial: v.final_ratio(),
            rate_slope: v.summary.rate.map(|r| r.slope),
            rate_r_squared: v.summary.rate.map(|r| r.r_squared),
        });
    }

    let figure_name = format!("{}.svg", slug(&config.name));
    write_text(&out_dir.join(&figure_name), &figure(config, &variants))?;

    let report = Report {
        config: config.clone(),
        out_dir: out_dir.clone(),
        variants,
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: config.seed,
        streams: STREAM_NOTE,
        note: QUALITATIVE_NOTE,
        figure: figure_name,
        laplace_slowest: report.laplace_slowest(),
        experiment: config,
        result,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&out_dir.join("manifest.toml"), &text)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("m=30"), "m-30");
        assert_eq!(slug("Default"), "default");
        assert_eq!(slug("///"), "variant");
    }
}
