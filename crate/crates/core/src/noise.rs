//! Sub-Weibull gradient noise.
//!
//! A real random variable `X` is sub-Weibull `(θ, κ)` when
//! `E[exp((|X|/κ)^(1/θ))] ≤ 2`. `θ = 1/2` is sub-Gaussian, `θ = 1`
//! sub-exponential, and larger `θ` allows heavier tails. The noise models here
//! are symmetric vector families whose dual norm is sub-Weibull; the helpers
//! evaluate the Orlicz condition, the moment and concentration bounds it
//! implies, and estimate `κ` from samples.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::geometry::Norm;
use crate::{Error, Result};

/// Ratio between consecutive points of the `κ` search grid.
pub const KAPPA_GRID_RATIO: f64 = 1.05;

/// Grid start used when the model has zero scale.
pub const KAPPA_GRID_FLOOR: f64 = 1e-12;

/// A symmetric, mean-zero noise family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// i.i.d. components uniform on `[−half_width, half_width]`.
    UniformBox { half_width: f64 },
    /// `N(0, variance · I)`.
    GaussianIso { variance: f64 },
    /// i.i.d. `Laplace(0, scale)` components.
    LaplaceIid { scale: f64 },
    /// i.i.d. components `s · W` with a Rademacher sign `s` and
    /// `W ~ Weibull(shape = 1/theta, scale)`.
    WeibullTail { theta: f64, scale: f64 },
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::UniformBox { .. } => "uniform-box",
            NoiseFamily::GaussianIso { .. } => "gaussian-iso",
            NoiseFamily::LaplaceIid { .. } => "laplace-iid",
            NoiseFamily::WeibullTail { .. } => "weibull-tail",
        }
    }

    /// Nominal tail parameter of the family.
    pub fn theta(&self) -> f64 {
        match *self {
            NoiseFamily::UniformBox { .. } | NoiseFamily::GaussianIso { .. } => 0.5,
            NoiseFamily::LaplaceIid { .. } => 1.0,
            NoiseFamily::WeibullTail { theta, .. } => theta,
        }
    }

    /// Per-component scale in the units of the noise (the standard deviation
    /// for the Gaussian family).
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseFamily::UniformBox { half_width } => half_width,
            NoiseFamily::GaussianIso { variance } => variance.sqrt(),
            NoiseFamily::LaplaceIid { scale } => scale,
            NoiseFamily::WeibullTail { scale, .. } => scale,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = match *self {
            NoiseFamily::UniformBox { half_width } => half_width,
            NoiseFamily::GaussianIso { variance } => variance,
            NoiseFamily::LaplaceIid { scale } => scale,
            NoiseFamily::WeibullTail { theta, scale } => {
                if !(theta >= 0.5 && theta.is_finite()) {
                    return Err(Error::InvalidParameter(format!("weibull-tail theta {theta} < 1/2")));
                }
                scale
            }
        };
        if s >= 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("noise scale {s} must be finite and nonnegative")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    pub dim: usize,
    pub theta: f64,
    /// Orlicz scale if known; see [`estimate_kappa`].
    pub kappa_hint: Option<f64>,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, dim: usize) -> Result<Self> {
        family.validate()?;
        if dim == 0 {
            return Err(Error::InvalidSize("noise dimension must be positive".into()));
        }
        Ok(Self {
            family,
            dim,
            theta: family.theta(),
            kappa_hint: None,
        })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa_hint = Some(kappa);
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.family.scale() == 0.0
    }

    /// Draws one noise vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    /// Fills `out` with one noise vector.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        if self.is_degenerate() {
            out.fill(0.0);
            return;
        }
        match self.family {
            NoiseFamily::UniformBox { half_width } => {
                for v in out.iter_mut() {
                    *v = rng.random_range(-half_width..=half_width);
                }
            }
            NoiseFamily::GaussianIso { variance } => {
                let sd = variance.sqrt();
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = sd * z;
                }
            }
            NoiseFamily::LaplaceIid { scale } => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *v = if rng.random::<bool>() { scale * e } else { -scale * e };
                }
            }
            NoiseFamily::WeibullTail { theta, scale } => {
                let w = Weibull::new(scale, 1.0 / theta).expect("validated weibull parameters");
                for v in out.iter_mut() {
                    let mag: f64 = w.sample(rng);
                    *v = if rng.random::<bool>() { mag } else { -mag };
                }
            }
        }
    }

    /// Dual norms of `count` fresh samples.
    pub fn sample_norms<R: Rng + ?Sized>(&self, norm: Norm, count: usize, rng: &mut R) -> Vec<f64> {
        let mut buf = vec![0.0; self.dim];
        (0..count)
            .map(|_| {
                self.sample_into(rng, &mut buf);
                norm.eval(&buf)
            })
            .collect()
    }
}

/// `2 Γ(θp + 1) κ^p`, the bound on `E|X|^p` for a sub-Weibull `(θ, κ)` variable.
pub fn moment_bound(theta: f64, kappa: f64, p: f64) -> f64 {
    2.0 * gamma(theta * p + 1.0) * kappa.powf(p)
}

/// `c_θ = 2^(max(θ,1)+1) Γ(θ+1) / ln(2)^θ`, the scale inflation for centering.
pub fn centering_constant(theta: f64) -> f64 {
    2f64.powf(theta.max(1.0) + 1.0) * gamma(theta + 1.0) / std::f64::consts::LN_2.powf(theta)
}

/// `K_θ` for a sum of `m` sub-Weibull variables: `m^θ` when `θ > 1`, else 1.
pub fn summation_constant(theta: f64, m: usize) -> f64 {
    if theta > 1.0 {
        (m as f64).powf(theta)
    } else {
        1.0
    }
}

/// `v_θ = (4e)^θ` for `θ ≤ 1`, `2(2eθ)^θ` for `θ ≥ 1`.
pub fn concentration_constant(theta: f64) -> f64 {
    let e = std::f64::consts::E;
    if theta <= 1.0 {
        (4.0 * e).powf(theta)
    } else {
        2.0 * (2.0 * e * theta).powf(theta)
    }
}

/// Empirical `E[exp((|x|/κ)^(1/θ))]`.
pub fn orlicz_mean(values: &[f64], theta: f64, kappa: f64) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let inv = 1.0 / theta;
    values.iter().map(|v| (v.abs() / kappa).powf(inv).exp()).sum::<f64>() / values.len() as f64
}

/// Whether the empirical Orlicz condition `mean ≤ 2` holds at `kappa`.
pub fn passes_orlicz(values: &[f64], theta: f64, kappa: f64) -> bool {
    orlicz_mean(values, theta, kappa) <= 2.0
}

/// Geometric grid `start · 1.05^k` searched up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGrid {
    pub start: f64,
    pub stop: f64,
}

impl KappaGrid {
    /// `[1e−3 · scale, 1e6 · scale]`, or a single point at
    /// [`KAPPA_GRID_FLOOR`] for zero scale.
    pub fn for_scale(scale: f64) -> Self {
        if scale > 0.0 {
            Self {
                start: 1e-3 * scale,
                stop: 1e6 * scale,
            }
        } else {
            Self {
                start: KAPPA_GRID_FLOOR,
                stop: KAPPA_GRID_FLOOR,
            }
        }
    }

    fn len(&self) -> usize {
        ((self.stop / self.start).ln() / KAPPA_GRID_RATIO.ln()).floor() as usize + 1
    }

    fn point(&self, k: usize) -> f64 {
        self.start * KAPPA_GRID_RATIO.powi(k as i32)
    }
}

/// Smallest grid `κ` at which `values` pass the empirical Orlicz condition.
pub fn estimate_kappa_from_values(values: &[f64], theta: f64, grid: KappaGrid) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta {theta} must be positive")));
    }
    let len = grid.len();
    // The Orlicz mean is non-increasing in κ.
    let first = (0..len).collect::<Vec<_>>().partition_point(|&k| !passes_orlicz(values, theta, grid.point(k)));
    if first == len {
        return Err(Error::EstimationFailed(format!(
            "Orlicz condition at theta = {theta} still fails at kappa = {:e}",
            grid.point(len - 1)
        )));
    }
    Ok(grid.point(first))
}

/// Estimates `κ` for `‖ξ‖` with `ξ ~ model`, from `count ≥ 10⁴` samples, at the
/// model's nominal `θ`.
pub fn estimate_kappa<R: Rng + ?Sized>(model: &NoiseModel, norm: Norm, count: usize, rng: &mut R) -> Result<f64> {
    estimate_kappa_at(model, norm, model.theta, count, rng)
}

/// As [`estimate_kappa`] but testing the Orlicz condition at an arbitrary `theta`.
pub fn estimate_kappa_at<R: Rng + ?Sized>(
    model: &NoiseModel,
    norm: Norm,
    theta: f64,
    count: usize,
    rng: &mut R,
) -> Result<f64> {
    if count < 10_000 {
        return Err(Error::InvalidParameter(format!("kappa estimation needs at least 1e4 samples, got {count}")));
    }
    let norms = model.sample_norms(norm, count, rng);
    let scale = model.family.scale() * (model.dim as f64).sqrt();
    estimate_kappa_from_values(&norms, theta, KappaGrid::for_scale(scale))
}

/// Whether `|Σ x_i| ≤ ln(2/δ)^θ · v_θ · Σ κ_i`.
pub fn concentration_check(samples: &[f64], kappas: &[f64], theta: f64, delta: f64) -> bool {
    let sum: f64 = samples.iter().sum();
    sum.abs() <= concentration_radius(kappas.iter().sum(), theta, delta)
}

/// `ln(2/δ)^θ · v_θ · κ_total`
pub fn concentration_radius(kappa_total: f64, theta: f64, delta: f64) -> f64 {
    (2.0 / delta).ln().powf(theta) * concentration_constant(theta) * kappa_total
}

/// Largest violation frequency the Monte-Carlo concentration test accepts:
/// `δ + 3 sqrt(δ(1−δ)/M)`.
pub fn violation_allowance(delta: f64, repetitions: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / repetitions as f64).sqrt()
}

/// One row of the noise diagnostic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub family: String,
    pub theta: f64,
    pub kappa: f64,
    pub p: f64,
    pub empirical: f64,
    pub bound: f64,
}

impl MomentReport {
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound
    }
}

/// Estimates `κ̂` from `count` samples, then compares the empirical moments
/// `E‖ξ‖^p` of another `count` samples with `2Γ(θp+1)κ̂^p`.
pub fn moment_report<R: Rng + ?Sized>(
    model: &NoiseModel,
    norm: Norm,
    powers: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<MomentReport>> {
    let kappa = estimate_kappa(model, norm, count, rng)?;
    let norms = model.sample_norms(norm, count, rng);
    Ok(powers
        .iter()
        .map(|&p| MomentReport {
            family: model.family.name().to_string(),
            theta: model.theta,
            kappa,
            p,
            empirical: norms.iter().map(|v| v.powf(p)).sum::<f64>() / norms.len() as f64,
            bound: moment_bound(model.theta, kappa, p),
        })
        .collect())
}

/// Writes moment reports as CSV with header
/// `family,theta,kappa,p,empirical,bound`.
pub fn write_moment_csv<W: std::io::Write>(rows: &[MomentReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
