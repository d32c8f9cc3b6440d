//! Composite regression instances over a network of agents.
//!
//! Agent `i` holds one observation `(a_i, b_i)` and the local loss
//! `f_i(x) = ½(⟨a_i, x⟩ − b_i)²`. Every agent carries the same regularizer
//! `ψ`, so the global objective is `F(x) = Σ_i f_i(x) + m ψ(x)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{self, Geometry, Regularizer, DEFAULT_SIMPLEX_FLOOR};
use crate::linalg::{dot, norm2};
use crate::noise::NoiseModel;
use crate::{Error, Result};

/// Domain-membership tolerance for oracle calls.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeProblem {
    features: Vec<Vec<f64>>,
    responses: Vec<f64>,
    geometry: Geometry,
    reg: Regularizer,
    /// The data-generating vector (not the minimizer).
    planted: Vec<f64>,
    g_bound: f64,
    g_psi: f64,
}

impl CompositeProblem {
    /// Assembles an instance and computes its subgradient bound `G` and
    /// regularizer Lipschitz constant `G_ψ`.
    pub fn new(
        features: Vec<Vec<f64>>,
        responses: Vec<f64>,
        geometry: Geometry,
        reg: Regularizer,
        planted: Vec<f64>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidSize("problem needs at least one agent".into()));
        }
        if features.len() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: responses.len(),
            });
        }
        let n = geometry.dim();
        for a in &features {
            geometry.check_dim(a)?;
        }
        if planted.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: planted.len(),
            });
        }
        reg.validate()?;
        if let (Geometry::EntropicSimplex { .. }, Regularizer::L1 { .. } | Regularizer::ElasticNet { .. }) = (&geometry, &reg) {
            return Err(Error::UnsupportedCombination {
                geometry: geometry.name(),
                regularizer: reg.name(),
            });
        }
        let dual = geometry.dual_norm();
        let radius = geometry.radius();
        let g_bound = features
            .iter()
            .zip(&responses)
            .map(|(a, b)| {
                let an = dual.eval(a);
                an * (an * radius + b.abs())
            })
            .fold(0.0, f64::max);
        // Dual norm of a sign vector: sqrt(n) for ℓ2, 1 for ℓ∞.
        let c = dual.eval(&vec![1.0; n]);
        let g_psi = match reg {
            Regularizer::None | Regularizer::Indicator => 0.0,
            Regularizer::L1 { lambda } => lambda * c,
            Regularizer::ElasticNet { lambda1, lambda2 } => lambda1 * radius * c + lambda2 * c,
        };
        Ok(Self {
            features,
            responses,
            geometry,
            reg,
            planted,
            g_bound,
            g_psi,
        })
    }

    pub fn agents(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn planted(&self) -> &[f64] {
        &self.planted
    }

    /// Bound on `‖g‖_*` for subgradients of any `f_i` over the domain.
    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    /// Lipschitz constant of `ψ` in the primal norm.
    pub fn g_psi(&self) -> f64 {
        self.g_psi
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.geometry.check_dim(x)?;
        if !self.geometry.contains(x, ORACLE_TOL) {
            return Err(Error::Domain(format!("point outside the {} domain", self.geometry.name())));
        }
        Ok(())
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        dot(&self.features[i], x) - self.responses[i]
    }

    /// `∇f_i(x) = (⟨a_i, x⟩ − b_i) a_i`.
    pub fn local_subgradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.local_subgradient_into(i, x, &mut out)?;
        Ok(out)
    }

    pub fn local_subgradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        let r = self.residual(i, x);
        for (o, a) in out.iter_mut().zip(&self.features[i]) {
            *o = r * a;
        }
        Ok(())
    }

    /// `∇f_i(x) − ξ` with one draw `ξ` from `noise`.
    pub fn noisy_gradient<R: Rng + ?Sized>(&self, i: usize, x: &[f64], noise: &NoiseModel, rng: &mut R) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        let mut xi = vec![0.0; self.dim()];
        self.noisy_gradient_into(i, x, noise, rng, &mut g, &mut xi)?;
        Ok(g)
    }

    /// Allocation-free [`CompositeProblem::noisy_gradient`]; `scratch` receives the noise draw.
    pub fn noisy_gradient_into<R: Rng + ?Sized>(
        &self,
        i: usize,
        x: &[f64],
        noise: &NoiseModel,
        rng: &mut R,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<()> {
        self.local_subgradient_into(i, x, out)?;
        noise.sample_into(rng, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o -= s;
        }
        Ok(())
    }

    /// `f_i(x) + ψ(x)`
    pub fn local_objective(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        let r = self.residual(i, x);
        Ok(0.5 * r * r + self.reg.value(x))
    }

    /// `F(x) = Σ_i [½(⟨a_i,x⟩ − b_i)² + ψ(x)]`
    pub fn global_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.smooth_value(x) + self.agents() as f64 * self.reg.value(x))
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        (0..self.agents()).map(|i| 0.5 * self.residual(i, x).powi(2)).sum()
    }

    /// Gradient of `Σ_i f_i` at `x`, without a domain check.
    fn smooth_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.agents() {
            let r = self.residual(i, x);
            crate::linalg::axpy(r, &self.features[i], out);
        }
    }

    /// Largest eigenvalue of `Σ a_i a_iᵀ` by power iteration.
    fn smoothness(&self) -> f64 {
        let n = self.dim();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut w = vec![0.0; n];
        let mut estimate = 0.0;
        for _ in 0..1000 {
            w.fill(0.0);
            for a in &self.features {
                crate::linalg::axpy(dot(a, &v), a, &mut w);
            }
            let norm = norm2(&w);
            if norm == 0.0 {
                return 0.0;
            }
            let next = dot(&v, &w);
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
            if (next - estimate).abs() <= 1e-12 * next.abs() {
                estimate = next;
                break;
            }
            estimate = next;
        }
        // Rayleigh quotients approach λ_max from below.
        estimate
    }

    /// Writes the instance as CSV rows `agent,a_0,…,a_{n−1},b`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["agent".to_string()];
        header.extend((0..self.dim()).map(|j| format!("a_{j}")));
        header.push("b".into());
        w.write_record(&header)?;
        for (i, (a, b)) in self.features.iter().zip(&self.responses).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(a.iter().map(|v| v.to_string()));
            rec.push(b.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parameters of the box-constrained lasso generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSpec {
    pub agents: usize,
    pub dim: usize,
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    /// Standard deviation of the response noise `ε`.
    pub data_noise: f64,
}

impl LassoSpec {
    pub fn new(agents: usize, dim: usize, lambda: f64, lower: f64, upper: f64) -> Self {
        Self {
            agents,
            dim,
            lambda,
            lower,
            upper,
            data_noise: 1.0,
        }
    }
}

fn uniform_features<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
}

fn planted_responses<R: Rng + ?Sized>(features: &[Vec<f64>], planted: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    features
        .iter()
        .map(|a| {
            let eps: f64 = StandardNormal.sample(rng);
            dot(a, planted) + sd * eps
        })
        .collect()
}

/// `a_i ~ U[−1,1]ⁿ`, `b_i = ⟨a_i, x_p⟩ + ε_i` with `[x_p]_j = 1` for
/// `j < ⌊n/2⌋` and 0 otherwise, `ψ = λ‖·‖₁`, `X = [lower, upper]ⁿ`.
pub fn generate_lasso_instance<R: Rng + ?Sized>(spec: &LassoSpec, rng: &mut R) -> Result<CompositeProblem> {
    if spec.agents == 0 || spec.dim == 0 {
        return Err(Error::InvalidSize("agents and dimension must be positive".into()));
    }
    let geometry = Geometry::cube(spec.dim, spec.lower, spec.upper)?;
    let planted: Vec<f64> = (0..spec.dim).map(|j| if j < spec.dim / 2 { 1.0 } else { 0.0 }).collect();
    let features = uniform_features(spec.agents, spec.dim, rng);
    let responses = planted_responses(&features, &planted, spec.data_noise, rng);
    let reg = if spec.lambda > 0.0 {
        Regularizer::L1 { lambda: spec.lambda }
    } else {
        Regularizer::None
    };
    CompositeProblem::new(features, responses, geometry, reg, planted)
}

/// Simplex regression: `a_i ~ U[−1,1]ⁿ`, `b_i = ⟨a_i, x_p⟩ + ε_i` with
/// `[x_p]_j = 2/n` on the first half, no regularizer, entropic geometry.
pub fn generate_simplex_instance<R: Rng + ?Sized>(agents: usize, dim: usize, data_noise: f64, rng: &mut R) -> Result<CompositeProblem> {
    if agents == 0 || dim == 0 {
        return Err(Error::InvalidSize("agents and dimension must be positive".into()));
    }
    if !dim.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("simplex instance needs an even dimension, got {dim}")));
    }
    let geometry = Geometry::simplex(dim, DEFAULT_SIMPLEX_FLOOR)?;
    let planted: Vec<f64> = (0..dim).map(|j| if j < dim / 2 { 2.0 / dim as f64 } else { 0.0 }).collect();
    let features = uniform_features(agents, dim, rng);
    let responses = planted_responses(&features, &planted, data_noise, rng);
    CompositeProblem::new(features, responses, geometry, Regularizer::None, planted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub iterations: usize,
    /// Box: `‖x − prox(x − ∇f(x)/L)‖₂`. Simplex: the Wolfe gap.
    pub residual: f64,
}

/// Iteration cap of the reference solver.
pub const REFERENCE_MAX_ITER: usize = 1_000_000;

/// Solves the centralized problem `min_X Σ f_i + m ψ` to high accuracy.
///
/// Both geometries use accelerated proximal gradient with adaptive restart;
/// the prox is the Euclidean projection-with-shrinkage of the mirror step on
/// the box and the sort-based Euclidean projection on the simplex. The box
/// solver stops when the prox-gradient fixed-point residual is below `tol`;
/// the simplex solver when the Wolfe gap is below `tol`. Either returns
/// [`Error::SolverFailed`] after [`REFERENCE_MAX_ITER`] iterations.
pub fn reference_optimum(problem: &CompositeProblem, tol: f64) -> Result<ReferenceOptimum> {
    let n = problem.dim();
    let lipschitz = problem.smoothness().max(1e-12) * 1.01;
    let mut step = 1.0 / lipschitz;
    let summed = problem.reg.scaled(problem.agents() as f64);
    let euclid = match &problem.geometry {
        Geometry::EuclideanBox { lower, upper } => Geometry::euclidean_box(lower.clone(), upper.clone())?,
        Geometry::EntropicSimplex { .. } => Geometry::cube(n, 0.0, 1.0)?,
    };
    let prox = |v: &[f64], step: f64, out: &mut [f64]| -> Result<()> {
        match &problem.geometry {
            Geometry::EuclideanBox { .. } => {
                let zero = vec![0.0; n];
                geometry::mirror_step_into(&euclid, &summed, v, &zero, step, out)
            }
            Geometry::EntropicSimplex { .. } => {
                project_simplex(v, out);
                Ok(())
            }
        }
    };

    let mut x = problem.planted.clone();
    problem.geometry.project_feasible(&mut x);
    if let Geometry::EntropicSimplex { .. } = problem.geometry {
        x = vec![1.0 / n as f64; n];
    }
    let mut z = x.clone();
    let mut x_prev = x.clone();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut momentum = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut restarted = false;

    let objective = |p: &[f64]| problem.smooth_value(p) + problem.agents() as f64 * problem.reg.value(p);
    let mut f_prev = objective(&x);

    for iter in 1..=REFERENCE_MAX_ITER {
        problem.smooth_gradient(&z, &mut grad);
        for j in 0..n {
            trial[j] = z[j] - step * grad[j];
        }
        x_prev.copy_from_slice(&x);
        prox(&trial, step, &mut x)?;

        let f_now = objective(&x);
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if f_now > f_prev + 1e-14 * f_prev.abs().max(1.0) {
            // Restart: drop momentum and step from the previous point. A
            // second consecutive failure means the step is too long.
            if restarted {
                step *= 0.5;
            }
            restarted = true;
            momentum = 1.0;
            z.copy_from_slice(&x_prev);
            x.copy_from_slice(&x_prev);
            f_prev = objective(&x);
        } else {
            restarted = false;
            let beta = (momentum - 1.0) / next;
            for j in 0..n {
                z[j] = x[j] + beta * (x[j] - x_prev[j]);
            }
            momentum = next;
            f_prev = f_now;
        }

        if iter % 10 == 0 || iter == 1 {
            residual = match problem.geometry {
                Geometry::EuclideanBox { .. } => {
                    problem.smooth_gradient(&x, &mut grad);
                    for j in 0..n {
                        trial[j] = x[j] - step * grad[j];
                    }
                    let mut mapped = vec![0.0; n];
                    prox(&trial, step, &mut mapped)?;
                    norm2(&crate::linalg::sub(&x, &mapped))
                }
                Geometry::EntropicSimplex { .. } => {
                    problem.smooth_gradient(&x, &mut grad);
                    wolfe_gap(&x, &grad)
                }
            };
            if residual <= tol {
                let f_star = problem.global_objective(&x)?;
                return Ok(ReferenceOptimum {
                    x_star: x,
                    f_star,
                    iterations: iter,
                    residual,
                });
            }
        }
    }
    Err(Error::SolverFailed {
        iterations: REFERENCE_MAX_ITER,
        residual,
    })
}

/// Default stopping tolerance for [`reference_optimum`] per geometry.
pub fn default_reference_tol(geometry: &Geometry) -> f64 {
    match geometry {
        Geometry::EuclideanBox { .. } => 1e-10,
        Geometry::EntropicSimplex { .. } => 1e-10,
    }
}

/// `⟨∇f(x), x⟩ − min_j ∂_j f(x)`, the Frank-Wolfe duality gap on the simplex.
pub fn wolfe_gap(x: &[f64], grad: &[f64]) -> f64 {
    let min = grad.iter().copied().fold(f64::INFINITY, f64::min);
    (dot(grad, x) - min).max(0.0)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64], out: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if s - candidate > 0.0 {
            shift = candidate;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - shift).max(0.0);
    }
}
