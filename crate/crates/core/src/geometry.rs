//! Bregman geometries and closed-form regularized mirror steps.
//!
//! Two distance-generating functions are supported:
//!
//! | geometry           | `Φ(x)`          | `D_Φ(x‖y)`              | norm / dual norm |
//! |--------------------|-----------------|-------------------------|------------------|
//! | Euclidean box      | `½‖x‖²`         | `½‖x − y‖²`             | `ℓ2 / ℓ2`        |
//! | entropic simplex   | `Σ x_j ln x_j`  | `Σ x_j ln(x_j / y_j)`   | `ℓ1 / ℓ∞`        |
//!
//! Both are 1-strongly convex with respect to their primal norm. The mirror
//! step solves
//!
//! ```text
//! argmin_{x ∈ X}  ⟨g, x⟩ + D_Φ(x‖y) / α + ψ(x)
//! ```
//!
//! exactly for the supported `(geometry, regularizer)` pairs.

use serde::{Deserialize, Serialize};

use crate::linalg::{norm1, norm2, norm_inf};
use crate::{Error, Result};

/// Default floor for entropic iterates.
pub const DEFAULT_SIMPLEX_FLOOR: f64 = 1e-12;

/// Tolerance used for domain membership tests.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => norm1(v),
            Norm::L2 => norm2(v),
            Norm::LInf => norm_inf(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// `Φ = ½‖·‖²` on the box `lower ≤ x ≤ upper`.
    EuclideanBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Negative entropy on the probability simplex; iterates are kept at or
    /// above `floor` after each step.
    EntropicSimplex { dim: usize, floor: f64 },
}

impl Geometry {
    pub fn euclidean_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidSize("box dimension must be positive".into()));
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] < upper[j])) {
            return Err(Error::InvalidParameter(format!(
                "box bound {j}: lower {} must be below upper {}",
                lower[j], upper[j]
            )));
        }
        Ok(Geometry::EuclideanBox { lower, upper })
    }

    /// The cube `[lower, upper]^n`.
    pub fn cube(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::euclidean_box(vec![lower; n], vec![upper; n])
    }

    pub fn simplex(dim: usize, floor: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSize("simplex dimension must be positive".into()));
        }
        if !(0.0..1.0 / dim as f64).contains(&floor) {
            return Err(Error::InvalidParameter(format!(
                "simplex floor {floor} outside [0, 1/n)"
            )));
        }
        Ok(Geometry::EntropicSimplex { dim, floor })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::EuclideanBox { .. } => "euclidean-box",
            Geometry::EntropicSimplex { .. } => "entropic-simplex",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::EuclideanBox { lower, .. } => lower.len(),
            Geometry::EntropicSimplex { dim, .. } => *dim,
        }
    }

    /// Strong-convexity modulus of `Φ` with respect to [`Geometry::norm`].
    pub fn sigma_phi(&self) -> f64 {
        1.0
    }

    pub fn norm(&self) -> Norm {
        match self {
            Geometry::EuclideanBox { .. } => Norm::L2,
            Geometry::EntropicSimplex { .. } => Norm::L1,
        }
    }

    pub fn dual_norm(&self) -> Norm {
        match self {
            Geometry::EuclideanBox { .. } => Norm::L2,
            Geometry::EntropicSimplex { .. } => Norm::LInf,
        }
    }

    /// Largest primal norm of a point of the domain.
    pub fn radius(&self) -> f64 {
        match self {
            Geometry::EuclideanBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            Geometry::EntropicSimplex { .. } => 1.0,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Geometry::EuclideanBox { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            Geometry::EntropicSimplex { .. } => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol * x.len().max(1) as f64
            }
        }
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Moves `x` into the domain: clamps to the box, or clips negatives,
    /// applies the floor and renormalizes on the simplex.
    pub fn project_feasible(&self, x: &mut [f64]) {
        match self {
            Geometry::EuclideanBox { lower, upper } => {
                for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            Geometry::EntropicSimplex { floor, .. } => {
                for v in x.iter_mut() {
                    *v = v.max(*floor).max(0.0);
                }
                let total: f64 = x.iter().sum();
                for v in x.iter_mut() {
                    *v /= total;
                }
            }
        }
    }

    /// `Φ(x)`
    pub fn phi(&self, x: &[f64]) -> f64 {
        match self {
            Geometry::EuclideanBox { .. } => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Geometry::EntropicSimplex { .. } => x.iter().map(|&v| xlogx(v)).sum(),
        }
    }

    /// `∇Φ(x)`; on the simplex this is `ln x_j + 1`, `−∞` at zero entries.
    pub fn grad_phi(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Geometry::EuclideanBox { .. } => x.to_vec(),
            Geometry::EntropicSimplex { .. } => x.iter().map(|v| v.ln() + 1.0).collect(),
        }
    }
}

/// `v ln v` with the convention `0 ln 0 = 0`.
fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// `D_Φ(x‖y)`.
///
/// Euclidean: `½‖x − y‖²`. Entropic: `Σ x_j ln(x_j / y_j)` with `0 ln 0 = 0`;
/// fails when `y_j = 0` while `x_j > 0`.
pub fn bregman(geom: &Geometry, x: &[f64], y: &[f64]) -> Result<f64> {
    geom.check_dim(x)?;
    geom.check_dim(y)?;
    match geom {
        Geometry::EuclideanBox { .. } => Ok(0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
        Geometry::EntropicSimplex { .. } => {
            let mut acc = 0.0;
            for (index, (&xj, &yj)) in x.iter().zip(y).enumerate() {
                if xj == 0.0 {
                    continue;
                }
                if yj <= 0.0 {
                    return Err(Error::DivergenceUndefined { index });
                }
                acc += xj * (xj / yj).ln();
            }
            Ok(acc.max(0.0))
        }
    }
}

/// The regularizer `ψ` carried by every agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regularizer {
    None,
    /// `λ‖x‖₁`
    L1 { lambda: f64 },
    /// `(λ1/2)‖x‖² + λ2‖x‖₁`
    ElasticNet { lambda1: f64, lambda2: f64 },
    /// Indicator of the domain; already enforced by the geometry.
    Indicator,
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L1 { .. } => "l1",
            Regularizer::ElasticNet { .. } => "elastic-net",
            Regularizer::Indicator => "indicator",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Regularizer::L1 { lambda } => lambda >= 0.0 && lambda.is_finite(),
            Regularizer::ElasticNet { lambda1, lambda2 } => {
                lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()
            }
            Regularizer::None | Regularizer::Indicator => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("negative or non-finite weight in {self:?}")))
        }
    }

    /// `ψ(x)`; the indicator contributes zero on the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::None | Regularizer::Indicator => 0.0,
            Regularizer::L1 { lambda } => lambda * norm1(x),
            Regularizer::ElasticNet { lambda1, lambda2 } => {
                0.5 * lambda1 * x.iter().map(|v| v * v).sum::<f64>() + lambda2 * norm1(x)
            }
        }
    }

    /// The same regularizer multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Regularizer {
        match *self {
            Regularizer::L1 { lambda } => Regularizer::L1 { lambda: lambda * factor },
            Regularizer::ElasticNet { lambda1, lambda2 } => Regularizer::ElasticNet {
                lambda1: lambda1 * factor,
                lambda2: lambda2 * factor,
            },
            other => other,
        }
    }

    /// `(quadratic weight, ℓ1 weight)`
    fn weights(&self) -> (f64, f64) {
        match *self {
            Regularizer::None | Regularizer::Indicator => (0.0, 0.0),
            Regularizer::L1 { lambda } => (0.0, lambda),
            Regularizer::ElasticNet { lambda1, lambda2 } => (lambda1, lambda2),
        }
    }
}

fn soft_threshold(v: f64, level: f64) -> f64 {
    if v > level {
        v - level
    } else if v < -level {
        v + level
    } else {
        0.0
    }
}

fn check_stepsize(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStepsize(alpha))
    }
}

fn check_pair(geom: &Geometry, reg: &Regularizer) -> Result<()> {
    match (geom, reg) {
        (Geometry::EuclideanBox { .. }, _) => Ok(()),
        (Geometry::EntropicSimplex { .. }, Regularizer::None | Regularizer::Indicator) => Ok(()),
        _ => Err(Error::UnsupportedCombination {
            geometry: geom.name(),
            regularizer: reg.name(),
        }),
    }
}

/// Solves `argmin_{x∈X} ⟨g, x⟩ + D_Φ(x‖y)/α + ψ(x)` in closed form.
///
/// Euclidean box: per coordinate, `x_j = clamp(soft(y_j − αg_j, αλ2) / (1 + αλ1))`
/// where `λ1, λ2` are the quadratic and ℓ1 weights (both zero for
/// `None`/`Indicator`, giving the projected gradient step).
///
/// Entropic simplex: `x_j ∝ y_j exp(−α g_j)`, evaluated in log space, then
/// floored and renormalized when the floor is positive.
pub fn mirror_step(geom: &Geometry, reg: &Regularizer, y: &[f64], g: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; geom.dim()];
    mirror_step_into(geom, reg, y, g, alpha, &mut out)?;
    Ok(out)
}

/// [`mirror_step`] writing into a caller-provided buffer.
pub fn mirror_step_into(
    geom: &Geometry,
    reg: &Regularizer,
    y: &[f64],
    g: &[f64],
    alpha: f64,
    out: &mut [f64],
) -> Result<()> {
    check_stepsize(alpha)?;
    check_pair(geom, reg)?;
    geom.check_dim(y)?;
    geom.check_dim(g)?;
    geom.check_dim(out)?;
    match geom {
        Geometry::EuclideanBox { lower, upper } => {
            let (quad, l1) = reg.weights();
            let shrink = 1.0 / (1.0 + alpha * quad);
            let level = alpha * l1;
            for j in 0..y.len() {
                let v = soft_threshold(y[j] - alpha * g[j], level) * shrink;
                out[j] = v.clamp(lower[j], upper[j]);
            }
        }
        Geometry::EntropicSimplex { floor, .. } => {
            let mut peak = f64::NEG_INFINITY;
            for j in 0..y.len() {
                let l = if y[j] > 0.0 { y[j].ln() - alpha * g[j] } else { f64::NEG_INFINITY };
                out[j] = l;
                peak = peak.max(l);
            }
            if !peak.is_finite() {
                return Err(Error::Domain("entropic step from a point without positive mass".into()));
            }
            let mut total = 0.0;
            for v in out.iter_mut() {
                *v = (*v - peak).exp();
                total += *v;
            }
            for v in out.iter_mut() {
                *v /= total;
            }
            if *floor > 0.0 && out.iter().any(|v| v < floor) {
                let mut total = 0.0;
                for v in out.iter_mut() {
                    *v = v.max(*floor);
                    total += *v;
                }
                for v in out.iter_mut() {
                    *v /= total;
                }
            }
        }
    }
    Ok(())
}

/// First-order optimality residual of a mirror step.
///
/// With `v = αg + ∇Φ(x) − ∇Φ(y) + α s` for a subgradient `s ∈ ∂ψ(x)` chosen to
/// match the closed form, returns the largest `max(0, −⟨v, d⟩)` over the probe
/// directions `d` that are feasible at `x`: `±e_j` on the box, `e_k − e_j` on
/// the simplex (mass leaves `j` only when `x_j` is above the floor).
pub fn verify_first_order_optimality(
    geom: &Geometry,
    reg: &Regularizer,
    y: &[f64],
    g: &[f64],
    alpha: f64,
    x: &[f64],
) -> f64 {
    match geom {
        Geometry::EuclideanBox { lower, upper } => {
            let (quad, l1) = reg.weights();
            let mut worst = 0.0f64;
            for j in 0..x.len() {
                let smooth = alpha * g[j] + x[j] - y[j] + alpha * quad * x[j];
                let s = if x[j] > 0.0 {
                    l1
                } else if x[j] < 0.0 {
                    -l1
                } else {
                    (-smooth / alpha).clamp(-l1, l1)
                };
                let v = smooth + alpha * s;
                if x[j] < upper[j] {
                    worst = worst.max(-v);
                }
                if x[j] > lower[j] {
                    worst = worst.max(v);
                }
            }
            worst
        }
        Geometry::EntropicSimplex { floor, .. } => {
            let v: Vec<f64> = (0..x.len()).map(|j| alpha * g[j] + x[j].ln() - y[j].ln()).collect();
            let at_floor = |j: usize| x[j] <= floor * (1.0 + 1e-9);
            // Moving mass from j to k changes the objective at rate v_k − v_j.
            let max_source = (0..x.len())
                .filter(|&j| !at_floor(j))
                .map(|j| v[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let min_target = v.iter().copied().fold(f64::INFINITY, f64::min);
            (max_source - min_target).max(0.0)
        }
    }
}

/// Whether `D_Φ(x‖Σ a_j y_j) ≤ Σ a_j D_Φ(x‖y_j) + 1e−10`.
pub fn separate_convexity_probe(geom: &Geometry, x: &[f64], points: &[Vec<f64>], weights: &[f64]) -> Result<bool> {
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let mut mix = vec![0.0; geom.dim()];
    let mut rhs = 0.0;
    for (p, &a) in points.iter().zip(weights) {
        crate::linalg::axpy(a, p, &mut mix);
        rhs += a * bregman(geom, x, p)?;
    }
    Ok(bregman(geom, x, &mix)? <= rhs + 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> Geometry {
        Geometry::cube(2, -1.0, 1.0).unwrap()
    }

    fn simplex2() -> Geometry {
        Geometry::simplex(2, DEFAULT_SIMPLEX_FLOOR).unwrap()
    }

    #[test]
    fn bregman_examples() {
        assert_eq!(bregman(&cube(), &[0.3, -0.2], &[0.3, -0.2]).unwrap(), 0.0);
        assert_eq!(bregman(&simplex2(), &[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(bregman(&cube(), &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        // 1·ln(1/0.5) + 0·ln 0 = ln 2
        let kl = bregman(&simplex2(), &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn bregman_undefined_on_boundary() {
        let err = bregman(&simplex2(), &[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DivergenceUndefined { index: 1 }));
        // No mass where y vanishes: fine.
        assert!(bregman(&simplex2(), &[1.0, 0.0], &[1.0, 0.0]).is_ok());
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let x = mirror_step(&cube(), &Regularizer::None, &[0.0, 0.0], &[0.0, 0.0], 0.7).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        let y = [0.25, 0.75];
        let x = mirror_step(&simplex2(), &Regularizer::None, &y, &[0.0, 0.0], 0.7).unwrap();
        assert!((x[0] - 0.25).abs() < 1e-15 && (x[1] - 0.75).abs() < 1e-15);
        assert!(verify_first_order_optimality(&simplex2(), &Regularizer::None, &y, &[0.0, 0.0], 0.7, &x) < 1e-15);
    }

    #[test]
    fn entropic_step_by_hand() {
        // (½e^{−ln 2}, ½) = (¼, ½) → normalized (1/3, 2/3)
        let x = mirror_step(&simplex2(), &Regularizer::None, &[0.5, 0.5], &[std::f64::consts::LN_2, 0.0], 1.0).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    /// Objective of the scalar box subproblem for one coordinate.
    fn scalar_objective(x: f64, y: f64, g: f64, alpha: f64, quad: f64, l1: f64) -> f64 {
        g * x + (x - y).powi(2) / (2.0 * alpha) + 0.5 * quad * x * x + l1 * x.abs()
    }

    fn grid_argmin(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let steps = ((hi - lo) / 1e-4).round() as usize;
        (0..=steps)
            .map(|k| lo + k as f64 * 1e-4)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    #[test]
    fn l1_step_by_hand_and_grid() {
        let reg = Regularizer::L1 { lambda: 0.5 };
        let y = [2.0, 0.1];
        let x = mirror_step(&cube(), &reg, &y, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        for j in 0..2 {
            let best = grid_argmin(-1.0, 1.0, |v| scalar_objective(v, y[j], 0.0, 1.0, 0.0, 0.5));
            assert!((best - x[j]).abs() <= 1e-4);
        }
        assert!(verify_first_order_optimality(&cube(), &reg, &y, &[0.0, 0.0], 1.0, &x) <= 1e-12);
    }

    #[test]
    fn elastic_net_step_matches_grid() {
        let reg = Regularizer::ElasticNet { lambda1: 0.8, lambda2: 0.3 };
        let y = [0.9, -0.2];
        let g = [-1.1, 0.05];
        let alpha = 0.6;
        let x = mirror_step(&cube(), &reg, &y, &g, alpha).unwrap();
        for j in 0..2 {
            let best = grid_argmin(-1.0, 1.0, |v| scalar_objective(v, y[j], g[j], alpha, 0.8, 0.3));
            assert!((best - x[j]).abs() <= 1e-4, "{j}: {best} vs {}", x[j]);
        }
        assert!(verify_first_order_optimality(&cube(), &reg, &y, &g, alpha, &x) <= 1e-12);
    }

    #[test]
    fn perturbed_output_violates_optimality() {
        let reg = Regularizer::L1 { lambda: 0.2 };
        let y = [0.3, -0.4];
        let g = [0.1, 0.2];
        let mut x = mirror_step(&cube(), &reg, &y, &g, 0.5).unwrap();
        x[0] += 0.01;
        assert!(verify_first_order_optimality(&cube(), &reg, &y, &g, 0.5, &x) > 0.0);
    }

    #[test]
    fn unsupported_pairs_and_bad_steps() {
        let err = mirror_step(&simplex2(), &Regularizer::L1 { lambda: 0.1 }, &[0.5, 0.5], &[0.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::UnsupportedCombination { .. })));
        for alpha in [0.0, -1.0, f64::NAN] {
            let err = mirror_step(&cube(), &Regularizer::None, &[0.0, 0.0], &[0.0, 0.0], alpha);
            assert!(matches!(err, Err(Error::InvalidStepsize(_))));
        }
    }

    #[test]
    fn entropic_step_survives_huge_gradients() {
        let geom = Geometry::simplex(3, DEFAULT_SIMPLEX_FLOOR).unwrap();
        let x = mirror_step(&geom, &Regularizer::None, &[0.2, 0.3, 0.5], &[1e5, -1e5, 0.0], 1.0).unwrap();
        assert!(x.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(x[0] >= DEFAULT_SIMPLEX_FLOOR * 0.5);
    }

    #[test]
    fn separate_convexity_single_point() {
        let geom = simplex2();
        assert!(separate_convexity_probe(&geom, &[0.3, 0.7], &[vec![0.6, 0.4]], &[1.0]).unwrap());
    }

    #[test]
    fn constructor_validation() {
        assert!(Geometry::cube(2, 1.0, 1.0).is_err());
        assert!(Geometry::simplex(4, 0.25).is_err());
        assert!(Geometry::simplex(4, 0.0).is_ok());
        assert!(Regularizer::L1 { lambda: -0.1 }.validate().is_err());
    }
}
