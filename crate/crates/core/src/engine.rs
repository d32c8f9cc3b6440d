//! The synchronous distributed mirror-descent iteration.
//!
//! At step `t` every agent `i`
//!
//! 1. mixes its neighbours' states, `y_i = Σ_j [W_t]_ij x_j`;
//! 2. draws a noisy subgradient `ĝ_i = ∇f_i(x_i) − ξ_i` at its own state;
//! 3. moves to `x_i⁺ = argmin_X ⟨ĝ_i, x⟩ + D_Φ(x‖y_i)/α_t + ψ(x)`.
//!
//! All agents read the step-`t` snapshot before any writes. Each agent keeps
//! running sums for the equal-weight average `x̃ = (1/T) Σ x_t` and the
//! stepsize-weighted average `x̂ = Σ α_t x_t / Σ α_t` over the pre-step
//! iterates `t = 1..T`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::geometry::{self, bregman, Geometry};
use crate::graph::GraphSchedule;
use crate::noise::NoiseModel;
use crate::problem::CompositeProblem;
use crate::rng::{self, Purpose, SimRng, StreamKey};
use crate::{Error, Result};

/// Feasibility tolerance for the invariant checks during a run.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Lowest optimality error accepted before the reference optimum is deemed
/// wrong.
pub const ERROR_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeRule {
    /// `α_t = 1/√(t+1)`
    #[serde(alias = "varying")]
    VaryingInvSqrt,
    /// `α_t = 1/√T`
    #[serde(alias = "constant")]
    ConstantHorizon,
}

impl StepsizeRule {
    pub fn name(&self) -> &'static str {
        match self {
            StepsizeRule::VaryingInvSqrt => "varying-invsqrt",
            StepsizeRule::ConstantHorizon => "constant-horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub horizon: usize,
    pub stepsize: StepsizeRule,
    pub seed: u64,
    pub record_every: usize,
}

impl RunConfig {
    pub fn new(horizon: usize, stepsize: StepsizeRule, seed: u64) -> Self {
        Self {
            horizon,
            stepsize,
            seed,
            record_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidParameter("horizon T must be at least 1".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidParameter("record stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Steps at which the trajectory is recorded: `1`, every multiple of the
    /// stride, and `T`.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let mut steps = vec![1];
        steps.extend((self.record_every..=self.horizon).step_by(self.record_every));
        steps.push(self.horizon);
        steps.dedup();
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// `α_t` for `1 ≤ t ≤ T`; always in `(0, 1]`.
pub fn stepsize_at(config: &RunConfig, t: usize) -> f64 {
    match config.stepsize {
        StepsizeRule::VaryingInvSqrt => 1.0 / ((t + 1) as f64).sqrt(),
        StepsizeRule::ConstantHorizon => 1.0 / (config.horizon as f64).sqrt(),
    }
}

/// One agent's iterate and ergodic accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    sum_x: Vec<f64>,
    sum_alpha_x: Vec<f64>,
    sum_alpha: f64,
    alpha_range: (f64, f64),
    steps: usize,
}

impl AgentState {
    pub fn new(x: Vec<f64>) -> Self {
        let n = x.len();
        Self {
            x,
            sum_x: vec![0.0; n],
            sum_alpha_x: vec![0.0; n],
            sum_alpha: 0.0,
            alpha_range: (f64::INFINITY, f64::NEG_INFINITY),
            steps: 0,
        }
    }

    /// Adds the current iterate to both running sums.
    pub fn accumulate(&mut self, alpha: f64) {
        for ((sx, sax), xi) in self.sum_x.iter_mut().zip(self.sum_alpha_x.iter_mut()).zip(&self.x) {
            *sx += xi;
            *sax += alpha * xi;
        }
        self.sum_alpha += alpha;
        self.alpha_range = (self.alpha_range.0.min(alpha), self.alpha_range.1.max(alpha));
        self.steps += 1;
    }

    /// Number of iterates accumulated so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sum_alpha(&self) -> f64 {
        self.sum_alpha
    }
}

/// `(x̃, x̂)` for one agent, moved back into the domain if rounding pushed an
/// average off it. With equal weights `x̂` is `x̃` exactly.
pub fn ergodic_outputs(state: &AgentState, geom: &Geometry) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.steps == 0 {
        return Err(Error::InvariantViolation("ergodic outputs need at least one step".into()));
    }
    let mut tilde: Vec<f64> = state.sum_x.iter().map(|s| s / state.steps as f64).collect();
    let mut hat: Vec<f64> = if state.alpha_range.0 == state.alpha_range.1 {
        tilde.clone()
    } else {
        state.sum_alpha_x.iter().map(|s| s / state.sum_alpha).collect()
    };
    for v in [&mut tilde, &mut hat] {
        if !geom.contains(v, 0.0) {
            geom.project_feasible(v);
        }
    }
    Ok((tilde, hat))
}

/// Per-step scratch buffers.
struct Workspace {
    mixed: Vec<Vec<f64>>,
    grad: Vec<f64>,
    noise: Vec<f64>,
}

impl Workspace {
    fn new(m: usize, n: usize) -> Self {
        Self {
            mixed: vec![vec![0.0; n]; m],
            grad: vec![0.0; n],
            noise: vec![0.0; n],
        }
    }
}

/// Advances every agent from `x_{·,t}` to `x_{·,t+1}`.
///
/// Ergodic sums absorb the pre-step iterate with weight `alpha`. `rngs[i]`
/// is agent `i`'s noise stream.
pub fn dcsmd_step(
    problem: &CompositeProblem,
    schedule: &GraphSchedule,
    noise: &NoiseModel,
    states: &mut [AgentState],
    t: usize,
    alpha: f64,
    rngs: &mut [SimRng],
) -> Result<()> {
    let mut ws = Workspace::new(states.len(), problem.dim());
    step_with(problem, schedule, noise, states, t, alpha, rngs, &mut ws)
}

#[allow(clippy::too_many_arguments)]
fn step_with(
    problem: &CompositeProblem,
    schedule: &GraphSchedule,
    noise: &NoiseModel,
    states: &mut [AgentState],
    t: usize,
    alpha: f64,
    rngs: &mut [SimRng],
    ws: &mut Workspace,
) -> Result<()> {
    let m = states.len();
    if m != problem.agents() || m != schedule.agents() || m != rngs.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.agents(),
            got: m,
        });
    }
    if noise.dim != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: noise.dim,
        });
    }
    let geom = problem.geometry();
    for (i, s) in states.iter().enumerate() {
        if !geom.contains(&s.x, FEASIBILITY_TOL) {
            return Err(Error::InvariantViolation(format!("agent {i} infeasible at step {t}")));
        }
    }

    let w = schedule.weight_at(t);
    for i in 0..m {
        let y = &mut ws.mixed[i];
        y.fill(0.0);
        for (j, &wij) in w.row(i).iter().enumerate() {
            if wij != 0.0 {
                crate::linalg::axpy(wij, &states[j].x, y);
            }
        }
    }

    for (i, state) in states.iter_mut().enumerate() {
        state.accumulate(alpha);
        problem.noisy_gradient_into(i, &state.x, noise, &mut rngs[i], &mut ws.grad, &mut ws.noise)?;
        geometry::mirror_step_into(geom, problem.regularizer(), &ws.mixed[i], &ws.grad, alpha, &mut state.x)?;
    }
    Ok(())
}

/// Initial states: uniform on `[0,1]ⁿ` clamped into a box, or symmetric
/// Dirichlet(1) on the simplex.
pub fn initial_states<R: Rng + ?Sized>(problem: &CompositeProblem, rng: &mut R) -> Vec<AgentState> {
    let n = problem.dim();
    let geom = problem.geometry();
    (0..problem.agents())
        .map(|_| {
            let mut x: Vec<f64> = match geom {
                Geometry::EuclideanBox { .. } => (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                Geometry::EntropicSimplex { .. } => {
                    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
                    let s: f64 = e.iter().sum();
                    e.into_iter().map(|v| v / s).collect()
                }
            };
            geom.project_feasible(&mut x);
            AgentState::new(x)
        })
        .collect()
}

/// `max_i ‖x_i − x̄‖` in the geometry's primal norm.
pub fn disagreement(states: &[AgentState], geom: &Geometry) -> f64 {
    let mean = network_average(states);
    let norm = geom.norm();
    states
        .iter()
        .map(|s| norm.eval(&crate::linalg::sub(&s.x, &mean)))
        .fold(0.0, f64::max)
}

/// `x̄ = (1/m) Σ_i x_i`
pub fn network_average(states: &[AgentState]) -> Vec<f64> {
    let n = states.first().map_or(0, |s| s.x.len());
    let mut mean = vec![0.0; n];
    for s in states {
        crate::linalg::axpy(1.0 / states.len() as f64, &s.x, &mut mean);
    }
    mean
}

/// `max_i sqrt(D_Φ(x*‖x_i))`, the distance of the network to a known optimum.
pub fn optimum_distance(states: &[AgentState], geom: &Geometry, x_star: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in states {
        worst = worst.max(bregman(geom, x_star, &s.x)?.sqrt());
    }
    Ok(worst)
}

/// Recorded per-step diagnostics of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<usize>,
    /// `errors[k][ℓ] = F(x̃_ℓ^t) − F*` at `t = steps[k]`.
    pub errors: Vec<Vec<f64>>,
    /// `max_i ‖x_{i,t} − x̄_t‖`
    pub disagreement: Vec<f64>,
    pub stepsizes: Vec<f64>,
}

impl Trajectory {
    /// Errors regrouped per agent: `per_agent[ℓ][k]`.
    pub fn per_agent(&self) -> Vec<Vec<f64>> {
        let m = self.errors.first().map_or(0, Vec::len);
        (0..m).map(|l| self.errors.iter().map(|row| row[l]).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub x_tilde: Vec<Vec<f64>>,
    pub x_hat: Vec<Vec<f64>>,
    pub final_states: Vec<AgentState>,
}

/// A problem, network and noise model bound to a reference value `F*`.
#[derive(Debug, Clone, Copy)]
pub struct Simulation<'a> {
    pub problem: &'a CompositeProblem,
    pub schedule: &'a GraphSchedule,
    pub noise: &'a NoiseModel,
    pub f_star: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(problem: &'a CompositeProblem, schedule: &'a GraphSchedule, noise: &'a NoiseModel, f_star: f64) -> Self {
        Self {
            problem,
            schedule,
            noise,
            f_star,
        }
    }

    /// Runs `T` steps from the configured initialization. Initial states use
    /// the `(Init, trial)` stream and agent `i`'s noise the `(Noise, trial, i)`
    /// stream under `config.seed`.
    pub fn run(&self, config: &RunConfig, trial: u32) -> Result<RunOutput> {
        let mut init = rng::stream(config.seed, StreamKey::new(Purpose::Init, trial, 0));
        let states = initial_states(self.problem, &mut init);
        self.run_from(config, trial, states)
    }

    /// As [`Simulation::run`] from caller-supplied initial states.
    pub fn run_from(&self, config: &RunConfig, trial: u32, mut states: Vec<AgentState>) -> Result<RunOutput> {
        config.validate()?;
        let m = self.problem.agents();
        if states.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: states.len() });
        }
        let geom = self.problem.geometry();
        let mut rngs: Vec<SimRng> = (0..m)
            .map(|i| rng::stream(config.seed, StreamKey::new(Purpose::Noise, trial, i as u32)))
            .collect();
        let recorded = config.recorded_steps();
        let mut next_record = recorded.iter().peekable();
        let mut trajectory = Trajectory::default();
        let mut ws = Workspace::new(m, self.problem.dim());

        for t in 1..=config.horizon {
            let alpha = stepsize_at(config, t);
            let spread = if next_record.peek() == Some(&&t) {
                Some(disagreement(&states, geom))
            } else {
                None
            };
            step_with(self.problem, self.schedule, self.noise, &mut states, t, alpha, &mut rngs, &mut ws)?;
            if let Some(spread) = spread {
                next_record.next();
                let mut row = Vec::with_capacity(m);
                for (l, s) in states.iter().enumerate() {
                    let (tilde, _) = ergodic_outputs(s, geom)?;
                    let err = self.problem.global_objective(&tilde)? - self.f_star;
                    if err < ERROR_FLOOR {
                        return Err(Error::InvariantViolation(format!(
                            "agent {l} error {err:e} at step {t} is below the reference optimum"
                        )));
                    }
                    row.push(err);
                }
                trajectory.steps.push(t);
                trajectory.errors.push(row);
                trajectory.disagreement.push(spread);
                trajectory.stepsizes.push(alpha);
            }
        }

        for (i, s) in states.iter().enumerate() {
            if !geom.contains(&s.x, FEASIBILITY_TOL) {
                return Err(Error::InvariantViolation(format!("agent {i} infeasible after the final step")));
            }
        }
        let mut x_tilde = Vec::with_capacity(m);
        let mut x_hat = Vec::with_capacity(m);
        for s in &states {
            let (a, b) = ergodic_outputs(s, geom)?;
            x_tilde.push(a);
            x_hat.push(b);
        }
        Ok(RunOutput {
            trajectory,
            x_tilde,
            x_hat,
            final_states: states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Regularizer;
    use crate::graph::{b_cyclic_schedule, GraphSchedule};
    use crate::noise::NoiseFamily;
    use crate::problem::{generate_lasso_instance, generate_simplex_instance, LassoSpec};

    fn data(trial: u32) -> SimRng {
        rng::stream(5, StreamKey::new(Purpose::Data, trial, 0))
    }

    #[test]
    fn stepsize_examples() {
        let varying = RunConfig::new(100, StepsizeRule::VaryingInvSqrt, 0);
        assert_eq!(stepsize_at(&varying, 3), 0.5);
        let constant = RunConfig::new(100, StepsizeRule::ConstantHorizon, 0);
        for t in [1, 50, 100] {
            assert!((stepsize_at(&constant, t) - 0.1).abs() < 1e-15);
        }
        let mut prev = f64::INFINITY;
        for t in 1..=100 {
            let a = stepsize_at(&varying, t);
            assert!(a <= prev && a > 0.0 && a < 1.0);
            prev = a;
        }
    }

    #[test]
    fn recorded_steps_include_ends() {
        let mut c = RunConfig::new(35, StepsizeRule::VaryingInvSqrt, 0);
        c.record_every = 10;
        assert_eq!(c.recorded_steps(), vec![1, 10, 20, 30, 35]);
        c.horizon = 1;
        assert_eq!(c.recorded_steps(), vec![1]);
    }

    #[test]
    fn ergodic_output_arithmetic() {
        let geom = Geometry::cube(2, -1.0, 1.0).unwrap();
        let mut s = AgentState::new(vec![0.2, -0.4]);
        s.accumulate(1.0);
        s.accumulate(1.0);
        let (a, b) = ergodic_outputs(&s, &geom).unwrap();
        assert_eq!(a, vec![0.2, -0.4]);
        assert!((b[0] - 0.2).abs() < 1e-15);

        let mut s = AgentState::new(vec![1.0, 0.0]);
        s.accumulate(1.0);
        s.x = vec![0.0, 1.0];
        s.accumulate(0.5);
        let (_, hat) = ergodic_outputs(&s, &geom).unwrap();
        assert!((hat[0] - 1.0 / 1.5).abs() < 1e-15);
        assert!((hat[1] - 0.5 / 1.5).abs() < 1e-15);
        assert!(ergodic_outputs(&AgentState::new(vec![0.0, 0.0]), &geom).is_err());
    }

    #[test]
    fn zero_everything_is_a_fixed_point() {
        let geometry = Geometry::cube(2, -1.0, 1.0).unwrap();
        // a_i = 0, b_i = 0 → zero gradients everywhere.
        let problem = CompositeProblem::new(vec![vec![0.0, 0.0]; 3], vec![0.0; 3], geometry, Regularizer::None, vec![0.0, 0.0]).unwrap();
        let schedule = GraphSchedule::static_ring(3, 1.0 / 3.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 0.0 }, 2).unwrap();
        let x = vec![0.3, -0.2];
        let mut states = vec![AgentState::new(x.clone()); 3];
        let mut rngs: Vec<SimRng> = (0..3).map(|i| rng::stream(0, StreamKey::new(Purpose::Noise, 0, i))).collect();
        for t in 1..5 {
            dcsmd_step(&problem, &schedule, &noise, &mut states, t, 0.5, &mut rngs).unwrap();
        }
        for s in &states {
            assert!((s.x[0] - x[0]).abs() < 1e-15 && (s.x[1] - x[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn singleton_network_is_centralized_mirror_descent() {
        let problem = generate_lasso_instance(&LassoSpec::new(1, 3, 0.1, -1.0, 1.0), &mut data(0)).unwrap();
        let schedule = GraphSchedule::static_complete(1, 1.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 0.0 }, 3).unwrap();
        let mut states = vec![AgentState::new(vec![0.5, 0.5, 0.5])];
        let mut rngs = vec![rng::stream(0, StreamKey::new(Purpose::Noise, 0, 0))];
        let mut x = vec![0.5, 0.5, 0.5];
        for t in 1..20 {
            let alpha = 1.0 / ((t + 1) as f64).sqrt();
            let g = problem.local_subgradient(0, &x).unwrap();
            x = geometry::mirror_step(problem.geometry(), problem.regularizer(), &x, &g, alpha).unwrap();
            dcsmd_step(&problem, &schedule, &noise, &mut states, t, alpha, &mut rngs).unwrap();
            assert_eq!(states[0].x, x);
        }
    }

    #[test]
    fn euclidean_step_matches_projected_dsgd() {
        let problem = generate_lasso_instance(&LassoSpec::new(6, 4, 0.0, -1.0, 1.0), &mut data(1)).unwrap();
        let schedule = b_cyclic_schedule(6, 2, 1.0 / 6.0, 3).unwrap();
        let noise = NoiseModel::new(NoiseFamily::LaplaceIid { scale: 0.1 }, 4).unwrap();
        let mut init = rng::stream(1, StreamKey::new(Purpose::Init, 0, 0));
        let mut states = initial_states(&problem, &mut init);
        let mut rngs: Vec<SimRng> = (0..6).map(|i| rng::stream(1, StreamKey::new(Purpose::Noise, 0, i))).collect();
        let mut twin_rngs = rngs.clone();
        for t in 1..30 {
            let alpha = 1.0 / ((t + 1) as f64).sqrt();
            let w = schedule.weight_at(t);
            let before: Vec<Vec<f64>> = states.iter().map(|s| s.x.clone()).collect();
            let expected: Vec<Vec<f64>> = (0..6)
                .map(|i| {
                    let g = problem.noisy_gradient(i, &before[i], &noise, &mut twin_rngs[i]).unwrap();
                    (0..4)
                        .map(|k| {
                            let y: f64 = (0..6).map(|j| w.get(i, j) * before[j][k]).sum();
                            (y - alpha * g[k]).clamp(-1.0, 1.0)
                        })
                        .collect()
                })
                .collect();
            dcsmd_step(&problem, &schedule, &noise, &mut states, t, alpha, &mut rngs).unwrap();
            for i in 0..6 {
                for k in 0..4 {
                    assert!((states[i].x[k] - expected[i][k]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn infeasible_state_is_trapped() {
        let problem = generate_lasso_instance(&LassoSpec::new(3, 2, 0.1, -1.0, 1.0), &mut data(2)).unwrap();
        let schedule = GraphSchedule::static_ring(3, 1.0 / 3.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 0.0 }, 2).unwrap();
        let mut states = vec![AgentState::new(vec![0.0, 0.0]), AgentState::new(vec![2.0, 0.0]), AgentState::new(vec![0.0, 0.0])];
        let mut rngs: Vec<SimRng> = (0..3).map(|i| rng::stream(0, StreamKey::new(Purpose::Noise, 0, i))).collect();
        let err = dcsmd_step(&problem, &schedule, &noise, &mut states, 1, 0.5, &mut rngs).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    fn small_simulation(stepsize: StepsizeRule, horizon: usize) -> RunOutput {
        let problem = generate_lasso_instance(&LassoSpec::new(8, 4, 0.1, -1.0, 1.0), &mut data(3)).unwrap();
        let reference = crate::problem::reference_optimum(&problem, 1e-10).unwrap();
        let schedule = GraphSchedule::static_ring(8, 1.0 / 3.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 1e-3 }, 4).unwrap();
        let sim = Simulation::new(&problem, &schedule, &noise, reference.f_star);
        let mut config = RunConfig::new(horizon, stepsize, 11);
        config.record_every = 5;
        sim.run(&config, 0).unwrap()
    }

    #[test]
    fn single_step_run_averages_one_iterate() {
        let problem = generate_lasso_instance(&LassoSpec::new(4, 3, 0.1, -1.0, 1.0), &mut data(4)).unwrap();
        let schedule = GraphSchedule::static_ring(4, 1.0 / 3.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 1e-3 }, 3).unwrap();
        let sim = Simulation::new(&problem, &schedule, &noise, 0.0);
        let config = RunConfig::new(1, StepsizeRule::VaryingInvSqrt, 3);
        let mut init = rng::stream(3, StreamKey::new(Purpose::Init, 0, 0));
        let initial = initial_states(&problem, &mut init);
        let out = sim.run(&config, 0).unwrap();
        for (l, s) in initial.iter().enumerate() {
            assert_eq!(out.x_tilde[l], s.x);
        }
    }

    #[test]
    fn constant_stepsize_makes_averages_coincide() {
        let out = small_simulation(StepsizeRule::ConstantHorizon, 200);
        for (a, b) in out.x_tilde.iter().zip(&out.x_hat) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let a = small_simulation(StepsizeRule::VaryingInvSqrt, 100);
        let b = small_simulation(StepsizeRule::VaryingInvSqrt, 100);
        assert_eq!(a, b);
        assert_eq!(a.trajectory.steps.first(), Some(&1));
        assert_eq!(a.trajectory.steps.last(), Some(&100));
        assert!(a.trajectory.errors.iter().flatten().all(|e| *e >= ERROR_FLOOR));
    }

    #[test]
    fn simplex_runs_stay_on_the_simplex() {
        let problem = generate_simplex_instance(6, 4, 1.0, &mut data(5)).unwrap();
        let reference = crate::problem::reference_optimum(&problem, 1e-10).unwrap();
        let schedule = GraphSchedule::static_ring(6, 1.0 / 3.0).unwrap();
        let noise = NoiseModel::new(NoiseFamily::GaussianIso { variance: 1e-3 }, 4).unwrap();
        let sim = Simulation::new(&problem, &schedule, &noise, reference.f_star);
        let out = sim.run(&RunConfig::new(300, StepsizeRule::VaryingInvSqrt, 2), 0).unwrap();
        for x in out.x_tilde.iter().chain(&out.x_hat).chain(out.final_states.iter().map(|s| &s.x)) {
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|v| *v >= 0.0));
        }
        let d = optimum_distance(&out.final_states, problem.geometry(), &reference.x_star).unwrap();
        assert!(d.is_finite());
    }
}
