//! Named experiment configurations for the paper's figures.

use crate::engine::StepsizeRule;
use crate::noise::NoiseFamily;
use crate::{Error, Result};

use super::config::{ExperimentConfig, ProblemBlock, RunBlock, ScheduleBlock, Variant, DEFAULT_SEED, DEFAULT_TRIALS};

pub const PRESETS: [&str; 8] = [
    "fig1",
    "fig2-noise",
    "fig3-dim",
    "fig4-agents",
    "fig5-stepsize",
    "fig7-dsed",
    "fig8-dsed-dim",
    "fig9-dsed-agents",
];

/// One-line description per preset, in [`PRESETS`] order.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => "lasso m=60 n=20 lambda=0.1, Gaussian 1e-3 noise; max/min/median over agents",
        "fig2-noise" => "lasso under uniform, Gaussian 1e-1 and Laplace 1e-1 gradient noise",
        "fig3-dim" => "lasso with n in {10, 20, 30}",
        "fig4-agents" => "lasso on rings of m in {30, 60, 90} agents",
        "fig5-stepsize" => "lasso with constant 1/sqrt(T) against varying 1/sqrt(t+1) stepsizes",
        "fig7-dsed" => "simplex regression m=60 n=20 with entropic steps; max/min/median",
        "fig8-dsed-dim" => "simplex regression with n in {10, 20, 30}",
        "fig9-dsed-agents" => "simplex regression on rings of m in {30, 60, 90} agents",
        _ => return None,
    })
}

fn lasso(agents: usize, dim: usize) -> ProblemBlock {
    ProblemBlock::Lasso {
        agents,
        dim,
        lambda: 0.1,
        lower: -1.0,
        upper: 1.0,
        data_noise: 1.0,
    }
}

fn simplex(agents: usize, dim: usize) -> ProblemBlock {
    ProblemBlock::Simplex {
        agents,
        dim,
        data_noise: 1.0,
    }
}

const DEFAULT_NOISE: NoiseFamily = NoiseFamily::GaussianIso { variance: 1e-3 };

fn variant(label: impl Into<String>, problem: ProblemBlock, noise: NoiseFamily, stepsize: StepsizeRule) -> Variant {
    Variant {
        label: label.into(),
        problem,
        schedule: ScheduleBlock::default(),
        noise,
        run: RunBlock {
            stepsize,
            ..RunBlock::default()
        },
    }
}

fn plain(label: impl Into<String>, problem: ProblemBlock) -> Variant {
    variant(label, problem, DEFAULT_NOISE, StepsizeRule::VaryingInvSqrt)
}

/// Resolves a preset name to a complete configuration with the default
/// trial count, seed and horizon.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let variants = match name {
        "fig1" => vec![plain("default", lasso(60, 20))],
        "fig2-noise" => vec![
            variant(
                "uniform",
                lasso(60, 20),
                NoiseFamily::UniformBox { half_width: 0.5 },
                StepsizeRule::VaryingInvSqrt,
            ),
            variant(
                "gaussian",
                lasso(60, 20),
                NoiseFamily::GaussianIso { variance: 0.1 },
                StepsizeRule::VaryingInvSqrt,
            ),
            variant(
                "laplace",
                lasso(60, 20),
                NoiseFamily::LaplaceIid { scale: 0.1 },
                StepsizeRule::VaryingInvSqrt,
            ),
        ],
        "fig3-dim" => [10, 20, 30].iter().map(|&n| plain(format!("n={n}"), lasso(60, n))).collect(),
        "fig4-agents" => [30, 60, 90].iter().map(|&m| plain(format!("m={m}"), lasso(m, 20))).collect(),
        "fig5-stepsize" => vec![
            variant("constant", lasso(60, 20), DEFAULT_NOISE, StepsizeRule::ConstantHorizon),
            variant("varying", lasso(60, 20), DEFAULT_NOISE, StepsizeRule::VaryingInvSqrt),
        ],
        "fig7-dsed" => vec![plain("default", simplex(60, 20))],
        "fig8-dsed-dim" => [10, 20, 30].iter().map(|&n| plain(format!("n={n}"), simplex(60, n))).collect(),
        "fig9-dsed-agents" => [30, 60, 90].iter().map(|&m| plain(format!("m={m}"), simplex(m, 20))).collect(),
        _ => {
            return Err(Error::Usage(format!(
                "unknown preset {name:?}; available presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        trials: DEFAULT_TRIALS,
        seed: DEFAULT_SEED,
        out: None,
        variants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves_and_validates() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(c.trials, 10);
            assert!(describe(name).is_some());
            c.validate().unwrap();
        }
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = preset("fig6").unwrap_err();
        assert!(err.is_usage());
        assert!(err.to_string().contains("fig9-dsed-agents"));
    }

    #[test]
    fn dim_sweep_differs_only_in_n() {
        let c = preset("fig3-dim").unwrap();
        assert_eq!(c.variants.len(), 3);
        let dims: Vec<usize> = c.variants.iter().map(|v| v.problem.dim()).collect();
        assert_eq!(dims, [10, 20, 30]);
        for v in &c.variants {
            assert_eq!(v.problem.agents(), 60);
            assert_eq!(v.noise, c.variants[0].noise);
            assert_eq!(v.run, c.variants[0].run);
            assert_eq!(v.schedule, c.variants[0].schedule);
        }
    }
}
