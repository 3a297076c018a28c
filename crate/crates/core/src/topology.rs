//! Time-varying directed communication graphs and their mixing matrices.
//!
//! Each round draws a random graph on `n` agents, optionally overlays the
//! directed ring `0 -> 1 -> ... -> n-1 -> 0`, and weights every received edge
//! by `1/n` with the remainder on the diagonal. Row `i` of the matrix holds
//! the weights agent `i` applies to what it hears from its in-neighbours.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// How random edges are drawn for each agent pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSampling {
    /// One draw per unordered pair; success adds both directions.
    #[default]
    Undirected,
    /// One draw per ordered pair. The resulting weights are row stochastic
    /// but generally not column stochastic.
    Directed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub n: usize,
    pub rho: f64,
    /// Joint-connectivity window `B`.
    pub window: usize,
    pub ring: bool,
    /// Lower bound on positive weights. The generator realizes `1/n`.
    pub weight_floor: f64,
    pub sampling: EdgeSampling,
}

impl GraphConfig {
    pub fn new(n: usize, rho: f64) -> Self {
        GraphConfig {
            n,
            rho,
            window: 1,
            ring: true,
            weight_floor: if n > 0 { 1.0 / n as f64 } else { 0.0 },
            sampling: EdgeSampling::Undirected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", format!("need at least 2 agents, got {}", self.n)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid("rho", format!("{} is not in [0, 1]", self.rho)));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be at least 1"));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 1.0) {
            return Err(invalid(
                "weight_floor",
                format!("{} is not in (0, 1)", self.weight_floor),
            ));
        }
        Ok(())
    }
}

/// Doubly stochastic weight matrix of one communication round.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    weights: Vec<f64>,
    in_neighbors: Vec<Vec<usize>>,
}

impl MixingMatrix {
    /// Builds a matrix from row-major entries; the edge set is read off the
    /// off-diagonal support.
    pub fn from_entries(n: usize, weights: Vec<f64>) -> Result<Self> {
        check_dim(n * n, weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "entries must be finite and nonnegative"));
        }
        let in_neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && weights[i * n + j] > 0.0)
                    .collect()
            })
            .collect();
        Ok(MixingMatrix {
            n,
            weights,
            in_neighbors,
        })
    }

    /// Applies the `1/n` weight rule to the given in-neighbour lists.
    fn from_in_neighbors(n: usize, mut in_neighbors: Vec<Vec<usize>>) -> Self {
        let share = 1.0 / n as f64;
        let mut weights = vec![0.0; n * n];
        for (i, nbrs) in in_neighbors.iter_mut().enumerate() {
            nbrs.sort_unstable();
            nbrs.dedup();
            let mut off = 0.0;
            for &j in nbrs.iter() {
                weights[i * n + j] = share;
                off += share;
            }
            weights[i * n + i] = 1.0 - off;
        }
        MixingMatrix {
            n,
            weights,
            in_neighbors,
        }
    }

    pub fn uniform(n: usize) -> Self {
        let in_neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        MixingMatrix {
            n,
            weights: vec![1.0 / n as f64; n * n],
            in_neighbors,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        MixingMatrix {
            n,
            weights,
            in_neighbors: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.weights
    }

    /// Agents `j != i` with an edge `(j, i)`, sorted.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Directed edges `(j, i)` (sender, receiver), self-loops excluded.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (j, i)))
    }

    pub fn edge_count(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochasticity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: f64 = self.row(i).iter().sum();
            let col: f64 = (0..n).map(|k| self.weight(k, i)).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.stochasticity_defect() <= tol
    }

    /// Checks the support/weight-floor condition: every edge and diagonal
    /// entry is at least `floor`, every other entry is zero.
    pub fn respects_floor(&self, floor: f64) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let w = self.weight(i, j);
                let linked = i == j || self.in_neighbors[i].binary_search(&j).is_ok();
                if linked {
                    // The diagonal is `1 - k/n`, which may round just below `1/n`.
                    w >= floor * (1.0 - 1e-12)
                } else {
                    w == 0.0
                }
            })
        })
    }
}

/// Draws the mixing matrix for round `t`.
///
/// With undirected sampling a drawn pair that the ring already links is left
/// as the ring edge alone, so every agent keeps equal in- and out-degree and
/// the `1/n` rule yields a doubly stochastic matrix.
pub fn generate_round<R: Rng + ?Sized>(cfg: &GraphConfig, _t: usize, rng: &mut R) -> MixingMatrix {
    let n = cfg.n;
    let mut in_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let ring_linked = |a: usize, b: usize| cfg.ring && ((a + 1) % n == b || (b + 1) % n == a);
    match cfg.sampling {
        EdgeSampling::Undirected => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let hit = rng.random::<f64>() < cfg.rho;
                    if hit && !ring_linked(i, j) {
                        in_neighbors[i].push(j);
                        in_neighbors[j].push(i);
                    }
                }
            }
        }
        EdgeSampling::Directed => {
            for (i, nbrs) in in_neighbors.iter_mut().enumerate() {
                for j in 0..n {
                    if j != i && rng.random::<f64>() < cfg.rho {
                        nbrs.push(j);
                    }
                }
            }
        }
    }
    if cfg.ring {
        for j in 0..n {
            in_neighbors[(j + 1) % n].push(j);
        }
    }
    MixingMatrix::from_in_neighbors(n, in_neighbors)
}

/// Geometric consensus constants `(tau, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants {
    pub tau: f64,
    pub lambda: f64,
}

impl ContractionConstants {
    /// `tau * lambda^(t - s)`.
    pub fn bound(&self, steps: usize) -> f64 {
        self.tau * self.lambda.powi(steps as i32)
    }
}

/// `tau = (1 - w/(4n^2))^-2`, `lambda = (1 - w/(4n^2))^(1/B)`.
pub fn contraction_constants(n: usize, w: f64, window: usize) -> Result<ContractionConstants> {
    if n < 2 {
        return Err(invalid("n", "need at least 2 agents"));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(invalid("w", format!("{w} is not in (0, 1)")));
    }
    if window == 0 {
        return Err(invalid("window", "must be at least 1"));
    }
    let base = 1.0 - w / (4.0 * (n * n) as f64);
    Ok(ContractionConstants {
        tau: base.powi(-2),
        lambda: base.powf(1.0 / window as f64),
    })
}

fn mat_mul(n: usize, left: &[f64], right: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let a = left[i * n + k];
            if a == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += a * right[k * n + j];
            }
        }
    }
    out
}

fn deviation_from_average(n: usize, psi: &[f64]) -> f64 {
    let avg = 1.0 / n as f64;
    psi.iter().fold(0.0, |m, v| m.max((v - avg).abs()))
}

/// `max_ij |[W_t ... W_s]_ij - 1/n|` with 1-based inclusive round indices
/// into `matrices`.
pub fn verify_consensus_contraction(matrices: &[MixingMatrix], s: usize, t: usize) -> Result<f64> {
    if s == 0 || t < s || t > matrices.len() {
        return Err(invalid(
            "window",
            format!("need 1 <= s <= t <= {}, got s={s}, t={t}", matrices.len()),
        ));
    }
    let profile = consensus_deviations_from(&matrices[..t], s)?;
    Ok(*profile.last().expect("nonempty window"))
}

/// Deviation of `W_t ... W_s` for every `t` from `s` to the end of
/// `matrices` (1-based `s`). Entry `k` corresponds to `t = s + k`.
pub fn consensus_deviations_from(matrices: &[MixingMatrix], s: usize) -> Result<Vec<f64>> {
    if s == 0 || s > matrices.len() {
        return Err(invalid("s", format!("{s} is out of range")));
    }
    let n = matrices[s - 1].n();
    let mut psi = matrices[s - 1].entries().to_vec();
    let mut out = Vec::with_capacity(matrices.len() - s + 1);
    out.push(deviation_from_average(n, &psi));
    for w in &matrices[s..] {
        check_dim(n, w.n())?;
        psi = mat_mul(n, w.entries(), &psi);
        out.push(deviation_from_average(n, &psi));
    }
    Ok(out)
}

/// Breadth-first strong-connectivity test of a digraph given by its edges.
pub fn is_strongly_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for &(a, b) in edges {
        fwd[a].push(b);
        rev[b].push(a);
    }
    let reaches_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    };
    reaches_all(&fwd) && reaches_all(&rev)
}

/// Whether the union of the given rounds' edge sets is strongly connected.
pub fn jointly_strongly_connected(window: &[MixingMatrix]) -> bool {
    let Some(first) = window.first() else {
        return false;
    };
    let edges: Vec<(usize, usize)> = window.iter().flat_map(|w| w.edges()).collect();
    is_strongly_connected(first.n(), &edges)
}

impl From<&MixingMatrix> for Vec<Vec<f64>> {
    fn from(w: &MixingMatrix) -> Self {
        (0..w.n()).map(|i| w.row(i).to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::streams::{stream, Purpose};
    use approx::assert_relative_eq;

    fn rng() -> crate::streams::StreamRng {
        stream(1, Purpose::Test, 0, 0)
    }

    #[test]
    fn three_ring_weights() {
        let cfg = GraphConfig {
            rho: 0.0,
            ..GraphConfig::new(3, 0.0)
        };
        let w = generate_round(&cfg, 1, &mut rng());
        let third = 1.0 / 3.0;
        // Agent 1 (0-based 0) hears from agent 3.
        assert_relative_eq!(w.row(0)[0], 1.0 - third, epsilon = 1e-15);
        assert_eq!(w.row(0)[1], 0.0);
        assert_relative_eq!(w.row(0)[2], third, epsilon = 1e-15);
        assert_relative_eq!(w.row(1)[0], third, epsilon = 1e-15);
        assert_relative_eq!(w.row(1)[1], 1.0 - third, epsilon = 1e-15);
        assert_eq!(w.row(1)[2], 0.0);
        assert_eq!(w.row(2)[0], 0.0);
        assert_relative_eq!(w.row(2)[1], third, epsilon = 1e-15);
        assert_relative_eq!(w.row(2)[2], 1.0 - third, epsilon = 1e-15);
        let mut edges: Vec<_> = w.edges().collect();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn complete_pair() {
        let cfg = GraphConfig {
            ring: false,
            ..GraphConfig::new(2, 1.0)
        };
        let w = generate_round(&cfg, 1, &mut rng());
        assert_eq!(w.entries(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(w.edge_count(), 2);
    }

    #[test]
    fn single_agent_rejected() {
        assert!(GraphConfig::new(1, 0.5).validate().is_err());
        assert!(GraphConfig::new(2, 1.5).validate().is_err());
        assert!(GraphConfig {
            window: 0,
            ..GraphConfig::new(4, 0.5)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn dense_graphs_keep_diagonal_floor() {
        for n in [2, 3, 7, 12] {
            for ring in [false, true] {
                let cfg = GraphConfig {
                    ring,
                    ..GraphConfig::new(n, 1.0)
                };
                let w = generate_round(&cfg, 1, &mut rng());
                assert!(w.is_doubly_stochastic(1e-12));
                assert!(w.respects_floor(1.0 / n as f64));
            }
        }
    }

    #[test]
    fn directed_sampling_is_row_stochastic() {
        let cfg = GraphConfig {
            sampling: EdgeSampling::Directed,
            ..GraphConfig::new(8, 0.4)
        };
        let w = generate_round(&cfg, 1, &mut rng());
        for i in 0..8 {
            assert_relative_eq!(w.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(w.respects_floor(1.0 / 8.0));
    }

    #[test]
    fn contraction_constant_values() {
        let c = contraction_constants(2, 0.5, 1).unwrap();
        assert_relative_eq!(c.lambda, 31.0 / 32.0, epsilon = 1e-15);
        assert_relative_eq!(c.tau, (32.0f64 / 31.0).powi(2), epsilon = 1e-15);
        assert_relative_eq!(c.tau, 1.0656, epsilon = 1e-4);

        let c = contraction_constants(10, 0.1, 5).unwrap();
        assert_relative_eq!(c.lambda, 0.99975f64.powf(0.2), epsilon = 1e-15);
        assert_relative_eq!(c.lambda, 0.99995, epsilon = 1e-5);

        let wide = contraction_constants(10, 0.1, 50).unwrap();
        assert!(wide.lambda > c.lambda);
        assert_eq!(wide.tau, c.tau);

        assert!(contraction_constants(1, 0.5, 1).is_err());
        assert!(contraction_constants(3, 1.0, 1).is_err());
        assert!(contraction_constants(3, 0.2, 0).is_err());
    }

    #[test]
    fn uniform_matrix_mixes_in_one_step() {
        let ws = vec![MixingMatrix::uniform(4)];
        assert!(verify_consensus_contraction(&ws, 1, 1).unwrap() < 1e-15);
    }

    #[test]
    fn identity_never_mixes() {
        let ws = vec![MixingMatrix::identity(4); 10];
        let dev = verify_consensus_contraction(&ws, 1, 10).unwrap();
        assert_relative_eq!(dev, 0.75, epsilon = 1e-15);
        assert!(!jointly_strongly_connected(&ws));
    }

    #[test]
    fn three_ring_repeated_meets_bound() {
        let cfg = GraphConfig::new(3, 0.0);
        let w = generate_round(&cfg, 1, &mut rng());
        let ws = vec![w; 20];
        let c = contraction_constants(3, 1.0 / 3.0, 1).unwrap();
        let dev = verify_consensus_contraction(&ws, 1, 20).unwrap();
        assert!(dev <= c.bound(19), "{dev} > {}", c.bound(19));
        assert!(jointly_strongly_connected(&ws[..1]));
    }

    #[test]
    fn window_errors() {
        let ws = vec![MixingMatrix::uniform(3); 3];
        assert!(verify_consensus_contraction(&ws, 0, 2).is_err());
        assert!(verify_consensus_contraction(&ws, 3, 2).is_err());
        assert!(verify_consensus_contraction(&ws, 1, 4).is_err());
        let mixed = vec![MixingMatrix::uniform(3), MixingMatrix::uniform(4)];
        assert!(matches!(
            verify_consensus_contraction(&mixed, 1, 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
