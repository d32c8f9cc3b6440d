//! Time-varying doubly stochastic communication schedules.
//!
//! A [`GraphSchedule`] yields one [`CommMatrix`] `W_t` per step `t ≥ 1`. Every
//! matrix is doubly stochastic with diagonal and positive off-diagonal entries
//! bounded below by the schedule's `eta`, and the union of the edge sets over
//! any window of `B` consecutive steps (aligned at `kB + 1`) is the full ring
//! (or complete graph), hence strongly connected. Under these conditions the
//! transition products `Ψ(t, s) = W_t ⋯ W_s` approach the uniform matrix
//! geometrically, see [`mixing_constants`].

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use crate::rng::{self, Purpose, StreamKey};
use crate::{Error, Result};

/// Tolerance used when validating row and column sums of a single matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A dense `m × m` mixing matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CommMatrix {
    m: usize,
    w: Vec<f64>,
}

impl CommMatrix {
    pub fn identity(m: usize) -> Self {
        let mut w = vec![0.0; m * m];
        for i in 0..m {
            w[i * m + i] = 1.0;
        }
        Self { m, w }
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            m,
            w: vec![1.0 / m as f64; m * m],
        }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(m: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: w.len(),
            });
        }
        Ok(Self { m, w })
    }

    /// Lazy Metropolis weights on an undirected edge list: each edge `(i, j)`
    /// gets `1 / (1 + max(deg_i, deg_j))` and the residual mass goes on the
    /// diagonal.
    pub fn metropolis(m: usize, edges: &[(usize, usize)]) -> Self {
        let mut deg = vec![0usize; m];
        for &(i, j) in edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        let mut w = vec![0.0; m * m];
        for &(i, j) in edges {
            let wij = 1.0 / (1 + deg[i].max(deg[j])) as f64;
            w[i * m + j] += wij;
            w[j * m + i] += wij;
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| w[i * m + j]).sum();
            w[i * m + i] = 1.0 - off;
        }
        Self { m, w }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.w
    }

    /// Nonzero entries of row `i` as `(column, weight)` pairs.
    pub fn row_support(&self, i: usize) -> Vec<(usize, f64)> {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect()
    }

    /// Directed edges `(j, i)` with `w[i][j] > 0` and `i != j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j && self.get(i, j) > 0.0 {
                    out.push((j, i));
                }
            }
        }
        out
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &CommMatrix) -> CommMatrix {
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let a = self.w[i * m + k];
                if a == 0.0 {
                    continue;
                }
                let src = &rhs.w[k * m..(k + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        CommMatrix { m, w: out }
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochastic_defect(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for i in 0..m {
            let row: f64 = self.row(i).iter().sum();
            let col: f64 = (0..m).map(|k| self.get(k, i)).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }

    /// `max_ij |w_ij - 1/m|`
    pub fn uniform_deviation(&self) -> f64 {
        let target = 1.0 / self.m as f64;
        self.w.iter().fold(0.0, |acc, v| acc.max((v - target).abs()))
    }

    /// Checks double stochasticity within `tol`, entries in `[0, 1]`, and the
    /// `eta` lower bound on the diagonal and on positive off-diagonal entries.
    pub fn validate(&self, eta: f64, tol: f64) -> Result<()> {
        let defect = self.stochastic_defect();
        if defect > tol {
            return Err(Error::InvariantViolation(format!(
                "row/column sums deviate from 1 by {defect:e}"
            )));
        }
        for i in 0..self.m {
            for j in 0..self.m {
                let v = self.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvariantViolation(format!("entry ({i},{j}) = {v} outside [0,1]")));
                }
                if (i == j || v > 0.0) && v < eta {
                    return Err(Error::InvariantViolation(format!(
                        "entry ({i},{j}) = {v} below eta = {eta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Metropolis weights on the ring over `m` agents.
///
/// For `m ≥ 3` every agent keeps `1/3` and sends `1/3` to each neighbour; for
/// `m = 2` the single edge gives all entries `1/2`.
pub fn metropolis_ring(m: usize) -> Result<CommMatrix> {
    if m < 2 {
        return Err(Error::InvalidSize(format!("ring needs at least 2 agents, got {m}")));
    }
    Ok(CommMatrix::metropolis(m, &ring_edges(m)))
}

/// Undirected ring edges `(k, k+1 mod m)`; a single edge when `m = 2`.
pub fn ring_edges(m: usize) -> Vec<(usize, usize)> {
    match m {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..m).map(|k| (k, (k + 1) % m)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    /// Metropolis ring, the same matrix every step.
    StaticRing,
    /// Uniform `1/m` weights, the same matrix every step.
    StaticComplete,
    /// Ring edges split into `B` phases; step `t` activates phase `(t-1) mod B`.
    BCyclicPartition,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::StaticRing => "static-ring",
            TopologyKind::StaticComplete => "static-complete",
            TopologyKind::BCyclicPartition => "b-cyclic-partition",
        }
    }
}

/// Constants of the geometric mixing bound
/// `|[Ψ(t,s)]_ij − 1/m| ≤ omega · gamma^(t−s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingConstants {
    pub omega: f64,
    pub gamma: f64,
}

impl MixingConstants {
    /// `omega · gamma^gap`
    pub fn envelope(&self, gap: usize) -> f64 {
        self.omega * self.gamma.powf(gap as f64)
    }
}

/// `omega = (1 − eta/(4m²))^−2`, `gamma = (1 − eta/(4m²))^(1/B)`.
pub fn mixing_constants(m: usize, window: usize, eta: f64) -> Result<MixingConstants> {
    if m < 2 {
        return Err(Error::InvalidSize(format!("mixing constants need m >= 2, got {m}")));
    }
    if window < 1 {
        return Err(Error::InvalidParameter("window B must be at least 1".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} outside (0,1)")));
    }
    let base = 1.0 - eta / (4.0 * (m * m) as f64);
    Ok(MixingConstants {
        omega: base.powi(-2),
        gamma: base.powf(1.0 / window as f64),
    })
}

/// A deterministic generator of communication matrices `W_1, W_2, …`.
#[derive(Debug, Clone)]
pub struct GraphSchedule {
    kind: TopologyKind,
    m: usize,
    window: usize,
    eta: f64,
    seed: u64,
    /// One matrix per phase; step `t` uses `phases[(t - 1) % phases.len()]`.
    phases: Vec<CommMatrix>,
}

impl GraphSchedule {
    /// Builds a schedule of the given family and validates every matrix it
    /// can produce against `eta`.
    pub fn new(kind: TopologyKind, m: usize, window: usize, eta: f64, seed: u64) -> Result<Self> {
        match kind {
            TopologyKind::StaticRing => Self::static_ring(m, eta),
            TopologyKind::StaticComplete => Self::static_complete(m, eta),
            TopologyKind::BCyclicPartition => b_cyclic_schedule(m, window, eta, seed),
        }
    }

    /// The Metropolis ring at every step. `eta` must not exceed `1/3`
    /// (`1/2` when `m = 2`).
    pub fn static_ring(m: usize, eta: f64) -> Result<Self> {
        let w = metropolis_ring(m)?;
        Self::from_phases(TopologyKind::StaticRing, m, 1, eta, 0, vec![w])
    }

    /// Uniform averaging at every step. Also accepts the singleton network.
    pub fn static_complete(m: usize, eta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSize("network needs at least one agent".into()));
        }
        Self::from_phases(TopologyKind::StaticComplete, m, 1, eta, 0, vec![CommMatrix::uniform(m)])
    }

    fn from_phases(
        kind: TopologyKind,
        m: usize,
        window: usize,
        eta: f64,
        seed: u64,
        phases: Vec<CommMatrix>,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) && !(m == 1 && eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta} outside (0,1)")));
        }
        for w in &phases {
            w.validate(eta, STOCHASTIC_TOL).map_err(|_| {
                Error::InvalidParameter(format!(
                    "eta = {eta} exceeds the smallest positive weight of the {} schedule",
                    kind.name()
                ))
            })?;
        }
        Ok(Self {
            kind,
            m,
            window,
            eta,
            seed,
            phases,
        })
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The matrix used at step `t` (steps are 1-based).
    pub fn weight_at(&self, t: usize) -> &CommMatrix {
        assert!(t >= 1, "steps are 1-based");
        &self.phases[(t - 1) % self.phases.len()]
    }

    /// Mixing constants for this schedule's `(m, B, eta)`.
    pub fn mixing_constants(&self) -> Result<MixingConstants> {
        mixing_constants(self.m, self.window, self.eta)
    }

    /// Whether the union of edge sets over steps `kB+1 … (k+1)B` is strongly
    /// connected (breadth-first search from agent 0 on the union and on its
    /// reverse).
    pub fn window_connected(&self, k: usize) -> bool {
        let m = self.m;
        let mut adj = vec![vec![false; m]; m];
        for t in k * self.window + 1..=(k + 1) * self.window {
            for (j, i) in self.weight_at(t).edges() {
                adj[j][i] = true;
            }
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; m];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for v in 0..m {
                    let linked = if forward { adj[u][v] } else { adj[v][u] };
                    if linked && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Iterator over `Ψ(s, s), Ψ(s+1, s), Ψ(s+2, s), …`.
    pub fn products_from(&self, s: usize) -> TransitionProducts<'_> {
        assert!(s >= 1, "steps are 1-based");
        TransitionProducts {
            schedule: self,
            next_t: s,
            acc: None,
        }
    }
}

/// Builds a B-cyclic partition of the ring.
///
/// The ring edges are shuffled with `seed` and dealt round-robin into `B`
/// phases. Step `t` activates phase `(t − 1) mod B` with lazy Metropolis
/// weights, so every aligned window of `B` steps activates the whole ring.
/// `eta` must lie in `(0, 1/m]`.
pub fn b_cyclic_schedule(m: usize, window: usize, eta: f64, seed: u64) -> Result<GraphSchedule> {
    if m < 2 {
        return Err(Error::InvalidSize(format!("ring needs at least 2 agents, got {m}")));
    }
    if window < 1 {
        return Err(Error::InvalidParameter("window B must be at least 1".into()));
    }
    if !(eta > 0.0 && eta <= 1.0 / m as f64) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} must lie in (0, 1/m] = (0, {}]",
            1.0 / m as f64
        )));
    }
    let mut edges = ring_edges(m);
    if window > 1 {
        let mut rng = rng::stream(seed, StreamKey::new(Purpose::Graph, 0, 0));
        edges.shuffle(&mut rng);
    }
    let mut buckets = vec![Vec::new(); window];
    for (k, e) in edges.into_iter().enumerate() {
        buckets[k % window].push(e);
    }
    let phases = buckets.iter().map(|b| CommMatrix::metropolis(m, b)).collect();
    GraphSchedule::from_phases(TopologyKind::BCyclicPartition, m, window, eta, seed, phases)
}

/// `Ψ(t, s) = W_t · W_{t−1} ⋯ W_s`.
pub fn transition_product(schedule: &GraphSchedule, t: usize, s: usize) -> Result<CommMatrix> {
    if s < 1 {
        return Err(Error::InvalidRange { t, s });
    }
    if t < s {
        return Err(Error::InvalidRange { t, s });
    }
    Ok(schedule
        .products_from(s)
        .nth(t - s)
        .expect("transition products are unbounded"))
}

/// Incremental transition products from a fixed start step.
pub struct TransitionProducts<'a> {
    schedule: &'a GraphSchedule,
    next_t: usize,
    acc: Option<CommMatrix>,
}

impl Iterator for TransitionProducts<'_> {
    type Item = CommMatrix;

    fn next(&mut self) -> Option<CommMatrix> {
        let w = self.schedule.weight_at(self.next_t);
        let product = match &self.acc {
            None => w.clone(),
            Some(prev) => w.matmul(prev),
        };
        self.next_t += 1;
        self.acc = Some(product.clone());
        Some(product)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn ring_of_three_is_uniform_thirds() {
        // Metropolis by hand: every degree is 2, so each edge weight is
        // 1/(1+2) = 1/3 and the self weight is 1 - 2/3 = 1/3.
        let w = metropolis_ring(3).unwrap();
        for &v in w.entries() {
            assert_close(v, 1.0 / 3.0, 1e-15);
        }
    }

    #[test]
    fn ring_of_two_is_halves() {
        let w = metropolis_ring(2).unwrap();
        for &v in w.entries() {
            assert_close(v, 0.5, 1e-15);
        }
    }

    #[test]
    fn ring_rejects_tiny_networks() {
        assert!(matches!(metropolis_ring(1), Err(Error::InvalidSize(_))));
        assert!(matches!(metropolis_ring(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn ring_weights_for_larger_m() {
        for m in [4, 7, 60] {
            let w = metropolis_ring(m).unwrap();
            assert!(w.stochastic_defect() <= 1e-12);
            w.validate(1.0 / 3.0, 1e-12).unwrap();
            for i in 0..m {
                assert_close(w.get(i, (i + 1) % m), 1.0 / 3.0, 1e-15);
                assert_close(w.get(i, (i + m - 1) % m), 1.0 / 3.0, 1e-15);
                assert_close(w.get(i, i), 1.0 / 3.0, 1e-15);
                assert_eq!(w.row_support(i).len(), 3);
            }
        }
    }

    #[test]
    fn mixing_constants_by_hand() {
        let c = mixing_constants(2, 1, 0.5).unwrap();
        let base = 1.0 - 0.5 / 16.0;
        assert_eq!(base, 0.96875);
        assert_close(c.omega, 1.0 / (0.96875 * 0.96875), 1e-15);
        assert_close(c.gamma, 0.96875, 1e-15);
    }

    #[test]
    fn mixing_gamma_increases_with_window() {
        let mut prev = 0.0;
        for b in 1..20 {
            let c = mixing_constants(10, b, 0.1).unwrap();
            assert!(c.gamma > prev && c.gamma < 1.0);
            assert!(c.omega > 1.0);
            prev = c.gamma;
        }
    }

    #[test]
    fn mixing_constants_reject_bad_inputs() {
        assert!(mixing_constants(1, 1, 0.5).is_err());
        assert!(mixing_constants(3, 0, 0.5).is_err());
        assert!(mixing_constants(3, 1, 0.0).is_err());
        assert!(mixing_constants(3, 1, 1.0).is_err());
    }

    #[test]
    fn window_of_one_is_full_ring() {
        let s = b_cyclic_schedule(6, 1, 1.0 / 6.0, 11).unwrap();
        let ring = metropolis_ring(6).unwrap();
        for t in 1..10 {
            assert_eq!(s.weight_at(t), &ring);
        }
    }

    #[test]
    fn four_agents_two_phases() {
        let s = b_cyclic_schedule(4, 2, 0.25, 5).unwrap();
        let e1 = s.weight_at(1).edges();
        let e2 = s.weight_at(2).edges();
        // Two disjoint halves of the 4 ring edges (8 directed).
        assert_eq!(e1.len(), 4);
        assert_eq!(e2.len(), 4);
        assert!(e1.iter().all(|e| !e2.contains(e)));
        assert!(!s.window_connected_single(1));
        for k in 0..10 {
            assert!(s.window_connected(k));
        }
        assert_eq!(s.weight_at(1), s.weight_at(3));
    }

    impl GraphSchedule {
        fn window_connected_single(&self, t: usize) -> bool {
            let single = GraphSchedule {
                window: 1,
                phases: vec![self.weight_at(t).clone()],
                ..self.clone()
            };
            single.window_connected(0)
        }
    }

    #[test]
    fn schedule_is_deterministic() {
        let a = b_cyclic_schedule(9, 3, 0.1, 42).unwrap();
        let b = b_cyclic_schedule(9, 3, 0.1, 42).unwrap();
        for t in 1..12 {
            assert_eq!(a.weight_at(t), b.weight_at(t));
            assert_eq!(a.weight_at(t), a.weight_at(t));
        }
    }

    #[test]
    fn eta_too_large_is_rejected() {
        assert!(matches!(b_cyclic_schedule(4, 2, 0.3, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(GraphSchedule::static_ring(5, 0.4), Err(Error::InvalidParameter(_))));
        assert!(GraphSchedule::static_ring(5, 1.0 / 3.0).is_ok());
    }

    #[test]
    fn transition_product_base_cases() {
        let s = b_cyclic_schedule(5, 2, 0.2, 3).unwrap();
        assert_eq!(&transition_product(&s, 4, 4).unwrap(), s.weight_at(4));
        let two = transition_product(&s, 5, 4).unwrap();
        assert_eq!(two, s.weight_at(5).matmul(s.weight_at(4)));
        assert!(matches!(transition_product(&s, 3, 4), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn complete_graph_products_are_uniform() {
        let s = GraphSchedule::static_complete(7, 1.0 / 7.0).unwrap();
        let p = transition_product(&s, 20, 3).unwrap();
        assert!(p.uniform_deviation() < 1e-15);
    }

    #[test]
    fn ring_of_three_mixes_within_envelope() {
        let s = GraphSchedule::static_ring(3, 1.0 / 3.0).unwrap();
        let c = s.mixing_constants().unwrap();
        let p = transition_product(&s, 51, 1).unwrap();
        assert!(p.uniform_deviation() < c.envelope(50));
    }
}
