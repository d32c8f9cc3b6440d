//! Property and diagnostic suites behind `dcsmd verify`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::geometry::{
    bregman, mirror_step, separate_convexity_probe, verify_first_order_optimality, Geometry, Regularizer,
};
use crate::graph::{b_cyclic_schedule, GraphSchedule};
use crate::linalg::{dot, norm1, norm2, sub};
use crate::noise::{
    concentration_check, estimate_kappa, moment_report, violation_allowance, NoiseFamily, NoiseModel,
};
use crate::problem::{reference_optimum, CompositeProblem};
use crate::rng::{self, Purpose, SimRng, StreamKey};
use crate::Result;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn failed(name: &'static str, err: crate::Error) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

fn diag(seed: u64, suite: u32) -> SimRng {
    rng::stream(seed, StreamKey::new(Purpose::Diagnostic, suite, 0))
}

fn dirichlet(n: usize, rng: &mut SimRng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn box_point(n: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Ring schedules the mixing and stochasticity suites run over: the static
/// ring for `B = 1` and the B-cyclic partition for larger windows.
pub fn ring_schedules(ms: &[usize], windows: &[usize], seed: u64) -> Result<Vec<GraphSchedule>> {
    let mut out = Vec::new();
    for &m in ms {
        for &b in windows {
            out.push(if b == 1 {
                GraphSchedule::static_ring(m, if m == 2 { 0.5 } else { 1.0 / 3.0 })?
            } else {
                b_cyclic_schedule(m, b, 1.0 / m as f64, seed)?
            });
        }
    }
    Ok(out)
}

/// `max_ij |Ψ(t,s)_ij − 1/m| ≤ ωγ^(t−s)` for every `1 ≤ t − s ≤ max_gap`.
/// Schedules are periodic with period `B`, so starts `s ∈ 1..=B` cover all.
pub fn mixing_bound(max_gap: usize) -> Check {
    const NAME: &str = "mixing bound";
    let schedules = match ring_schedules(&[3, 10, 60], &[1, 2], 1) {
        Ok(s) => s,
        Err(e) => return Check::failed(NAME, e),
    };
    let mut violations = 0;
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for sched in &schedules {
        let c = match sched.mixing_constants() {
            Ok(c) => c,
            Err(e) => return Check::failed(NAME, e),
        };
        for s in 1..=sched.window() {
            for (gap, psi) in sched.products_from(s).enumerate().skip(1).take(max_gap) {
                let dev = psi.uniform_deviation();
                let env = c.envelope(gap);
                checked += 1;
                tightest = tightest.min(env - dev);
                if dev > env {
                    violations += 1;
                }
            }
        }
    }
    Check::new(
        NAME,
        violations == 0,
        format!("{violations} violations in {checked} products; smallest slack {tightest:.3e}"),
    )
}

/// Row and column sums of every `W_t` and every product within `tol` of 1.
pub fn double_stochasticity(max_gap: usize, tol: f64) -> Check {
    const NAME: &str = "double stochasticity";
    let mut schedules = match ring_schedules(&[2, 3, 10, 60], &[1, 2, 3], 7) {
        Ok(s) => s,
        Err(e) => return Check::failed(NAME, e),
    };
    for m in [1, 5, 60] {
        match GraphSchedule::static_complete(m, 1.0 / m as f64) {
            Ok(s) => schedules.push(s),
            Err(e) => return Check::failed(NAME, e),
        }
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for sched in &schedules {
        for t in 1..=sched.window() {
            worst = worst.max(sched.weight_at(t).stochastic_defect());
            count += 1;
        }
        for s in 1..=sched.window() {
            for psi in sched.products_from(s).take(max_gap) {
                worst = worst.max(psi.stochastic_defect());
                count += 1;
            }
        }
    }
    Check::new(
        NAME,
        worst <= tol,
        format!("worst row/column defect {worst:.2e} over {count} matrices (tolerance {tol:.0e})"),
    )
}

fn scalar_l1_objective(x: f64, z: f64, weight: f64) -> f64 {
    0.5 * (x - z) * (x - z) + weight * x.abs()
}

/// Closed-form mirror steps against independent oracles:
/// clamp projection, a 1-D grid search for the ℓ1 prox, simplex mass, and the
/// first-order optimality residual of every step taken.
pub fn mirror_steps(probes: usize, seed: u64) -> Check {
    const NAME: &str = "mirror steps";
    let run = || -> Result<(f64, f64, f64, f64)> {
        let mut rng = diag(seed, 3);
        let n = 3;
        let cube = Geometry::cube(n, -1.0, 1.0)?;
        let simplex = Geometry::simplex(n + 2, crate::geometry::DEFAULT_SIMPLEX_FLOOR)?;
        let grid: Vec<f64> = (0..=20_000).map(|k| -1.0 + k as f64 * 1e-4).collect();
        let (mut clamp_gap, mut grid_gap, mut mass_gap, mut residual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..probes {
            let y = box_point(n, &mut rng);
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..=3.0)).collect();
            let alpha: f64 = rng.random_range(0.01..=1.0);

            let x = mirror_step(&cube, &Regularizer::None, &y, &g, alpha)?;
            for j in 0..n {
                clamp_gap = clamp_gap.max((x[j] - (y[j] - alpha * g[j]).clamp(-1.0, 1.0)).abs());
            }
            residual = residual.max(verify_first_order_optimality(&cube, &Regularizer::None, &y, &g, alpha, &x));

            let lambda: f64 = rng.random_range(0.0..=1.0);
            let reg = Regularizer::L1 { lambda };
            let x = mirror_step(&cube, &reg, &y, &g, alpha)?;
            for j in 0..n {
                let z = y[j] - alpha * g[j];
                let best = grid
                    .iter()
                    .map(|&u| scalar_l1_objective(u, z, alpha * lambda))
                    .fold(f64::INFINITY, f64::min);
                grid_gap = grid_gap.max((scalar_l1_objective(x[j], z, alpha * lambda) - best).abs());
            }
            residual = residual.max(verify_first_order_optimality(&cube, &reg, &y, &g, alpha, &x));

            let enet = Regularizer::ElasticNet {
                lambda1: rng.random_range(0.0..=1.0),
                lambda2: rng.random_range(0.0..=1.0),
            };
            let x = mirror_step(&cube, &enet, &y, &g, alpha)?;
            residual = residual.max(verify_first_order_optimality(&cube, &enet, &y, &g, alpha, &x));

            let ys = dirichlet(n + 2, &mut rng);
            let gs: Vec<f64> = (0..n + 2).map(|_| rng.random_range(-3.0..=3.0)).collect();
            let x = mirror_step(&simplex, &Regularizer::None, &ys, &gs, alpha)?;
            mass_gap = mass_gap.max((x.iter().sum::<f64>() - 1.0).abs());
            residual = residual.max(verify_first_order_optimality(&simplex, &Regularizer::None, &ys, &gs, alpha, &x));
        }
        Ok((clamp_gap, grid_gap, mass_gap, residual))
    };
    match run() {
        Ok((clamp, grid, mass, res)) => Check::new(
            NAME,
            clamp <= 1e-12 && grid <= 2e-4 && mass <= 1e-12 && res <= 1e-8,
            format!("clamp {clamp:.1e}, l1 grid gap {grid:.1e}, simplex mass {mass:.1e}, optimality residual {res:.1e}"),
        ),
        Err(e) => Check::failed(NAME, e),
    }
}

/// Three-point identity, strong convexity in the geometry's norm and
/// separate convexity, on random probes in both geometries.
pub fn bregman_properties(probes: usize, seed: u64) -> Check {
    const NAME: &str = "bregman properties";
    let run = || -> Result<(f64, f64, usize)> {
        let mut rng = diag(seed, 4);
        let n = 5;
        let geoms = [
            Geometry::cube(n, -1.0, 1.0)?,
            Geometry::simplex(n, crate::geometry::DEFAULT_SIMPLEX_FLOOR)?,
        ];
        let (mut identity, mut convexity, mut separate) = (0.0f64, f64::INFINITY, 0usize);
        for geom in &geoms {
            let draw = |rng: &mut SimRng| match geom {
                Geometry::EuclideanBox { .. } => box_point(n, rng),
                Geometry::EntropicSimplex { .. } => dirichlet(n, rng),
            };
            for _ in 0..probes {
                let (x, y, z) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
                let lhs = bregman(geom, &x, &y)? + bregman(geom, &y, &z)? - bregman(geom, &x, &z)?;
                let rhs = dot(&sub(&geom.grad_phi(&z), &geom.grad_phi(&y)), &sub(&x, &y));
                identity = identity.max((lhs - rhs).abs());

                let d = sub(&x, &y);
                let norm = match geom {
                    Geometry::EuclideanBox { .. } => norm2(&d),
                    Geometry::EntropicSimplex { .. } => norm1(&d),
                };
                convexity = convexity.min(bregman(geom, &x, &y)? - 0.5 * geom.sigma_phi() * norm * norm);

                let points = vec![y, z, draw(&mut rng)];
                let w = dirichlet(3, &mut rng);
                if !separate_convexity_probe(geom, &x, &points, &w)? {
                    separate += 1;
                }
            }
        }
        Ok((identity, convexity, separate))
    };
    match run() {
        Ok((identity, convexity, separate)) => Check::new(
            NAME,
            identity <= 1e-10 && convexity >= -1e-10 && separate == 0,
            format!("three-point error {identity:.1e}, strong-convexity slack {convexity:.1e}, separate-convexity violations {separate}"),
        ),
        Err(e) => Check::failed(NAME, e),
    }
}

/// Families exercised by the noise diagnostics, at dimension 20.
pub fn diagnostic_families() -> [NoiseFamily; 5] {
    [
        NoiseFamily::UniformBox { half_width: 0.5 },
        NoiseFamily::GaussianIso { variance: 1e-3 },
        NoiseFamily::GaussianIso { variance: 0.1 },
        NoiseFamily::LaplaceIid { scale: 0.1 },
        NoiseFamily::WeibullTail { theta: 2.0, scale: 0.1 },
    ]
}

/// For each family: `κ̂` from `samples` draws of `‖ξ‖₂`, the moment bounds
/// for `p ∈ {1, 2, 4}` on fresh draws, and the violation frequency of the
/// concentration bound for sums of 10 norms over `repetitions` repetitions
/// at `δ = 0.05`.
pub fn sub_weibull(samples: usize, repetitions: usize, seed: u64) -> Check {
    const NAME: &str = "sub-Weibull diagnostics";
    let delta = 0.05;
    let k = 10;
    let run = || -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for (f, family) in diagnostic_families().into_iter().enumerate() {
            let mut rng = diag(seed, 50 + f as u32);
            let model = NoiseModel::new(family, 20)?;
            let norm = crate::geometry::Norm::L2;
            let moments = moment_report(&model, norm, &[1.0, 2.0, 4.0], samples, &mut rng)?;
            let moments_ok = moments.iter().all(|r| r.holds());
            let kappa = estimate_kappa(&model, norm, samples, &mut rng)?;
            let kappas = vec![kappa; k];
            let mut violations = 0;
            for _ in 0..repetitions {
                let xs = model.sample_norms(norm, k, &mut rng);
                if !concentration_check(&xs, &kappas, model.theta, delta) {
                    violations += 1;
                }
            }
            let freq = violations as f64 / repetitions as f64;
            let conc_ok = freq <= violation_allowance(delta, repetitions);
            ok &= moments_ok && conc_ok;
            parts.push(format!(
                "{}(θ={}) κ̂={:.3e} moments {} freq {:.4}",
                family.name(),
                model.theta,
                kappa,
                if moments_ok { "ok" } else { "FAIL" },
                freq
            ));
        }
        Ok((ok, parts.join("; ")))
    };
    match run() {
        Ok((ok, detail)) => Check::new(NAME, ok, detail),
        Err(e) => Check::failed(NAME, e),
    }
}

fn solve_3x3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// The reference solver on a 5-agent, 3-dimensional unregularized instance
/// whose box is inactive, against the normal equations.
pub fn reference_solver(seed: u64) -> Check {
    const NAME: &str = "reference solver";
    let run = || -> Result<f64> {
        let mut rng = diag(seed, 10);
        let features: Vec<Vec<f64>> = (0..5).map(|_| box_point(3, &mut rng)).collect();
        let planted = vec![0.3, -0.2, 0.5];
        let responses: Vec<f64> = features
            .iter()
            .map(|a| dot(a, &planted) + 0.1 * rng.random_range(-1.0..=1.0))
            .collect();
        let mut ata = [[0.0; 3]; 3];
        let mut atb = [0.0; 3];
        for (a, b) in features.iter().zip(&responses) {
            for r in 0..3 {
                for c in 0..3 {
                    ata[r][c] += a[r] * a[c];
                }
                atb[r] += a[r] * b;
            }
        }
        let closed = solve_3x3(ata, atb);
        let problem = CompositeProblem::new(
            features,
            responses,
            Geometry::cube(3, -100.0, 100.0)?,
            Regularizer::None,
            planted,
        )?;
        let r = reference_optimum(&problem, 1e-12)?;
        Ok((0..3).map(|j| (r.x_star[j] - closed[j]).abs()).fold(0.0, f64::max))
    };
    match run() {
        Ok(err) => Check::new(NAME, err <= 1e-8, format!("max deviation from least squares {err:.1e}")),
        Err(e) => Check::failed(NAME, e),
    }
}

/// Every suite at its acceptance scale.
pub fn all(seed: u64) -> Vec<Check> {
    vec![
        mixing_bound(200),
        double_stochasticity(200, 1e-10),
        mirror_steps(10_000, seed),
        bregman_properties(10_000, seed),
        sub_weibull(100_000, 10_000, seed),
        reference_solver(seed),
    ]
}

/// Fixed-width pass/fail table.
pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            format!(
                "{:<width$}  {}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(mixing_bound(20).passed);
        assert!(double_stochasticity(20, 1e-10).passed);
        let c = mirror_steps(50, 1);
        assert!(c.passed, "{}", c.detail);
        let c = bregman_properties(200, 1);
        assert!(c.passed, "{}", c.detail);
        let c = reference_solver(1);
        assert!(c.passed, "{}", c.detail);
    }

    #[test]
    fn solve_3x3_identity() {
        let x = solve_3x3([[2.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 1.0, 0.0]], [2.0, 6.0, 5.0]);
        assert_eq!(x, [1.0, 5.0, 2.0]);
    }

    #[test]
    fn table_marks_failures() {
        let t = table(&[
            Check::new("a", true, "fine".into()),
            Check::new("longer", false, "bad".into()),
        ]);
        assert!(t.contains("a       PASS  fine"));
        assert!(t.contains("longer  FAIL  bad"));
    }
}
