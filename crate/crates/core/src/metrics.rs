//! Error series, agent quantiles, cross-trial means and empirical rates.
//!
//! Each trial's per-agent errors are first reduced to `(max, min, median)`
//! over agents at every recorded step; those statistics are then averaged
//! across trials. The median of an even number of agents is the midpoint of
//! the two central order statistics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::{Error, Result};

/// One agent's values on a step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub steps: Vec<usize>,
    pub values: Vec<f64>,
}

/// Per-agent optimality errors and network disagreement of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub steps: Vec<usize>,
    /// `errors[ℓ][k]`
    pub errors: Vec<Vec<f64>>,
    pub disagreement: Vec<f64>,
}

impl ErrorSeries {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            steps: t.steps.clone(),
            errors: t.per_agent(),
            disagreement: t.disagreement.clone(),
        }
    }

    pub fn agent_series(&self) -> Vec<Series> {
        self.errors
            .iter()
            .map(|values| Series {
                steps: self.steps.clone(),
                values: values.clone(),
            })
            .collect()
    }

    /// Checks strictly increasing steps and errors above `floor`.
    pub fn validate(&self, floor: f64) -> Result<()> {
        if self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Alignment("steps are not strictly increasing".into()));
        }
        if let Some(e) = self.errors.iter().flatten().find(|e| **e < floor) {
            return Err(Error::InvariantViolation(format!("error {e:e} below {floor:e}")));
        }
        Ok(())
    }
}

/// Per-step order statistics over agents for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSeries {
    pub steps: Vec<usize>,
    pub max: Vec<f64>,
    pub min: Vec<f64>,
    pub median: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Max,
    Min,
    Median,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Max, Stat::Min, Stat::Median];
}

impl QuantileSeries {
    pub fn stat(&self, stat: Stat) -> &[f64] {
        match stat {
            Stat::Max => &self.max,
            Stat::Min => &self.min,
            Stat::Median => &self.median,
        }
    }
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Exact `(max, min, median)` across agents at every step.
pub fn agent_quantiles(series: &[Series]) -> Result<QuantileSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Alignment("no agent series".into()))?;
    for (l, s) in series.iter().enumerate() {
        if s.steps != first.steps || s.values.len() != first.steps.len() {
            return Err(Error::Alignment(format!("agent {l} is on a different step grid")));
        }
    }
    let k = first.steps.len();
    let mut out = QuantileSeries {
        steps: first.steps.clone(),
        max: Vec::with_capacity(k),
        min: Vec::with_capacity(k),
        median: Vec::with_capacity(k),
    };
    let mut column = Vec::with_capacity(series.len());
    for idx in 0..k {
        column.clear();
        column.extend(series.iter().map(|s| s.values[idx]));
        column.sort_by(f64::total_cmp);
        out.min.push(column[0]);
        out.max.push(column[column.len() - 1]);
        out.median.push(median_of_sorted(&column));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points in the fit window.
pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares slope of `ln(value)` against `ln(step)` over the points with
/// `step ≥ last_step / 2`.
pub fn rate_fit(steps: &[usize], values: &[f64]) -> Result<RateFit> {
    if steps.len() != values.len() {
        return Err(Error::Alignment("steps and values differ in length".into()));
    }
    let last = *steps.last().ok_or_else(|| Error::FitDomain("empty series".into()))?;
    let window: Vec<(f64, f64)> = steps
        .iter()
        .zip(values)
        .filter(|(t, _)| 2 * **t >= last)
        .map(|(t, v)| (*t as f64, *v))
        .collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::FitDomain(format!(
            "{} points in the fit window, need {MIN_FIT_POINTS}",
            window.len()
        )));
    }
    if let Some((t, v)) = window.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::FitDomain(format!("nonpositive error {v:e} at step {t}")));
    }
    let pts: Vec<(f64, f64)> = window.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit {
        slope,
        r_squared,
        points: pts.len(),
    })
}

/// Trial-averaged agent statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub steps: Vec<usize>,
    pub max_mean: Vec<f64>,
    pub min_mean: Vec<f64>,
    pub median_mean: Vec<f64>,
    pub trials: usize,
    pub rate: Option<RateFit>,
}

impl TrialSummary {
    pub fn final_median(&self) -> f64 {
        *self.median_mean.last().unwrap_or(&f64::NAN)
    }

    pub fn initial_median(&self) -> f64 {
        *self.median_mean.first().unwrap_or(&f64::NAN)
    }
}

/// Pointwise mean of each statistic over trials; also fits the rate of the
/// mean median when the series allows it.
pub fn aggregate_trials(trials: &[QuantileSeries], expected: usize) -> Result<TrialSummary> {
    if trials.len() != expected || expected == 0 {
        return Err(Error::TrialCount {
            expected,
            got: trials.len(),
        });
    }
    let steps = trials[0].steps.clone();
    if let Some(i) = trials.iter().position(|q| q.steps != steps) {
        return Err(Error::Alignment(format!("trial {i} is on a different step grid")));
    }
    let mean = |stat: Stat| -> Vec<f64> {
        (0..steps.len())
            .map(|k| trials.iter().map(|q| q.stat(stat)[k]).sum::<f64>() / trials.len() as f64)
            .collect()
    };
    let median_mean = mean(Stat::Median);
    let rate = rate_fit(&steps, &median_mean).ok();
    Ok(TrialSummary {
        max_mean: mean(Stat::Max),
        min_mean: mean(Stat::Min),
        median_mean,
        steps,
        trials: trials.len(),
        rate,
    })
}

/// Largest ratio `value[k+1] / value[k]` over consecutive points with
/// `step[k] ≥ after`. A value of `1.05` means no step rose by more than 5%.
pub fn max_local_increase(steps: &[usize], values: &[f64], after: usize) -> f64 {
    steps
        .windows(2)
        .zip(values.windows(2))
        .filter(|(s, _)| s[0] >= after)
        .map(|(_, v)| v[1] / v[0])
        .fold(0.0, f64::max)
}

/// One row of the per-run CSV: `step,stat,value,trial,preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub step: usize,
    pub stat: Stat,
    pub value: f64,
    pub trial: u32,
    pub preset: String,
}

/// One row of the summary CSV: `step,max_mean,min_mean,median_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: usize,
    pub max_mean: f64,
    pub min_mean: f64,
    pub median_mean: f64,
}

/// Flattens per-trial quantiles into CSV rows, ordered by trial, step, stat.
pub fn run_rows(trials: &[QuantileSeries], preset: &str) -> Vec<RunRow> {
    let mut rows = Vec::new();
    for (trial, q) in trials.iter().enumerate() {
        for (k, &step) in q.steps.iter().enumerate() {
            for stat in Stat::ALL {
                rows.push(RunRow {
                    step,
                    stat,
                    value: q.stat(stat)[k],
                    trial: trial as u32,
                    preset: preset.to_string(),
                });
            }
        }
    }
    rows
}

/// Rebuilds per-trial quantiles from run rows (inverse of [`run_rows`]).
pub fn quantiles_from_rows(rows: &[RunRow]) -> Result<Vec<QuantileSeries>> {
    let trials = rows.iter().map(|r| r.trial as usize + 1).max().unwrap_or(0);
    let mut out: Vec<QuantileSeries> = (0..trials)
        .map(|_| QuantileSeries {
            steps: Vec::new(),
            max: Vec::new(),
            min: Vec::new(),
            median: Vec::new(),
        })
        .collect();
    for r in rows {
        let q = &mut out[r.trial as usize];
        if q.steps.last() != Some(&r.step) {
            q.steps.push(r.step);
        }
        match r.stat {
            Stat::Max => q.max.push(r.value),
            Stat::Min => q.min.push(r.value),
            Stat::Median => q.median.push(r.value),
        }
    }
    for (i, q) in out.iter().enumerate() {
        let k = q.steps.len();
        if q.max.len() != k || q.min.len() != k || q.median.len() != k {
            return Err(Error::Alignment(format!("trial {i} has incomplete statistics")));
        }
    }
    Ok(out)
}

pub fn summary_rows(summary: &TrialSummary) -> Vec<SummaryRow> {
    (0..summary.steps.len())
        .map(|k| SummaryRow {
            step: summary.steps[k],
            max_mean: summary.max_mean[k],
            min_mean: summary.min_mean[k],
            median_mean: summary.median_mean[k],
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(steps: &[usize], values: &[f64]) -> Series {
        Series {
            steps: steps.to_vec(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn single_agent_quantiles_coincide() {
        let q = agent_quantiles(&[series(&[1, 2], &[0.5, 0.25])]).unwrap();
        assert_eq!(q.max, q.min);
        assert_eq!(q.max, q.median);
    }

    #[test]
    fn three_agent_order_statistics() {
        let q = agent_quantiles(&[series(&[1], &[3.0]), series(&[1], &[1.0]), series(&[1], &[2.0])]).unwrap();
        assert_eq!((q.max[0], q.min[0], q.median[0]), (3.0, 1.0, 2.0));
    }

    #[test]
    fn even_count_median_is_midpoint() {
        let q = agent_quantiles(&[
            series(&[1], &[4.0]),
            series(&[1], &[1.0]),
            series(&[1], &[2.0]),
            series(&[1], &[10.0]),
        ])
        .unwrap();
        assert_eq!(q.median[0], 3.0);
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let err = agent_quantiles(&[series(&[1, 2], &[1.0, 1.0]), series(&[1, 3], &[1.0, 1.0])]).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        assert!(agent_quantiles(&[]).is_err());
    }

    fn flat(steps: &[usize], v: f64) -> QuantileSeries {
        QuantileSeries {
            steps: steps.to_vec(),
            max: vec![v; steps.len()],
            min: vec![v; steps.len()],
            median: vec![v; steps.len()],
        }
    }

    #[test]
    fn aggregation_means() {
        let s = [1, 2, 3];
        let same = aggregate_trials(&[flat(&s, 2.0), flat(&s, 2.0)], 2).unwrap();
        assert_eq!(same.median_mean, vec![2.0; 3]);
        let mixed = aggregate_trials(&[flat(&s, 1.0), flat(&s, 3.0)], 2).unwrap();
        assert_eq!(mixed.max_mean, vec![2.0; 3]);
        assert!(matches!(aggregate_trials(&[flat(&s, 1.0)], 2), Err(Error::TrialCount { .. })));
        assert!(matches!(aggregate_trials(&[flat(&s, 1.0), flat(&[1, 2, 4], 1.0)], 2), Err(Error::Alignment(_))));
    }

    #[test]
    fn aggregation_commutes_with_thinning() {
        let steps: Vec<usize> = (1..=20).collect();
        let a = QuantileSeries {
            steps: steps.clone(),
            max: steps.iter().map(|t| 3.0 / *t as f64).collect(),
            min: steps.iter().map(|t| 1.0 / *t as f64).collect(),
            median: steps.iter().map(|t| 2.0 / *t as f64).collect(),
        };
        let mut b = a.clone();
        b.median.iter_mut().for_each(|v| *v *= 1.5);
        let thin = |q: &QuantileSeries| QuantileSeries {
            steps: q.steps.iter().step_by(2).copied().collect(),
            max: q.max.iter().step_by(2).copied().collect(),
            min: q.min.iter().step_by(2).copied().collect(),
            median: q.median.iter().step_by(2).copied().collect(),
        };
        let full = aggregate_trials(&[a.clone(), b.clone()], 2).unwrap();
        let thinned = aggregate_trials(&[thin(&a), thin(&b)], 2).unwrap();
        let expected: Vec<f64> = full.median_mean.iter().step_by(2).copied().collect();
        assert_eq!(thinned.median_mean, expected);
    }

    #[test]
    fn rate_fit_power_laws() {
        let steps: Vec<usize> = (1..=100).map(|k| 10 * k).collect();
        let inv_sqrt: Vec<f64> = steps.iter().map(|t| 3.0 / (*t as f64).sqrt()).collect();
        let fit = rate_fit(&steps, &inv_sqrt).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        let stalled = vec![0.7; steps.len()];
        assert!(rate_fit(&steps, &stalled).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn rate_fit_errors() {
        let steps: Vec<usize> = (1..=8).collect();
        assert!(matches!(rate_fit(&steps, &[1.0; 8]), Err(Error::FitDomain(_))));
        let steps: Vec<usize> = (1..=40).collect();
        let mut v = vec![1.0; 40];
        v[30] = 0.0;
        assert!(matches!(rate_fit(&steps, &v), Err(Error::FitDomain(_))));
    }

    #[test]
    fn local_increase() {
        let steps = [1, 10, 20, 30];
        assert_eq!(max_local_increase(&steps, &[5.0, 1.0, 1.04, 1.0], 10), 1.04);
        assert_eq!(max_local_increase(&steps, &[1.0, 5.0, 1.0, 0.5], 10), 0.5);
    }

    #[test]
    fn csv_headers_and_round_trip() {
        let q = agent_quantiles(&[series(&[1, 10], &[0.3, 0.1]), series(&[1, 10], &[0.5, 0.2])]).unwrap();
        let rows = run_rows(std::slice::from_ref(&q), "fig1");
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,stat,value,trial,preset\n"));
        let back: Vec<RunRow> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(quantiles_from_rows(&back).unwrap(), vec![q.clone()]);

        let summary = aggregate_trials(&[q], 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&summary_rows(&summary), &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("step,max_mean,min_mean,median_mean\n"));
        let back: Vec<SummaryRow> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, summary_rows(&summary));
    }

    proptest! {
        #[test]
        fn quantiles_are_ordered(values in prop::collection::vec(prop::collection::vec(0.0f64..1e3, 4), 1..12)) {
            let agents: Vec<Series> = values.iter().map(|v| series(&[1, 2, 3, 4], v)).collect();
            let q = agent_quantiles(&agents).unwrap();
            for k in 0..4 {
                prop_assert!(q.min[k] <= q.median[k] && q.median[k] <= q.max[k]);
            }
        }

        #[test]
        fn run_csv_round_trips(values in prop::collection::vec(-1e6f64..1e6, 6)) {
            let q = QuantileSeries {
                steps: vec![1, 5],
                max: values[0..2].to_vec(),
                min: values[2..4].to_vec(),
                median: values[4..6].to_vec(),
            };
            let mut buf = Vec::new();
            write_csv(&run_rows(&[q.clone(), q.clone()], "p"), &mut buf).unwrap();
            let back: Vec<RunRow> = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(quantiles_from_rows(&back).unwrap(), vec![q.clone(), q]);
        }
    }
}
