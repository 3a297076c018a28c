//! Cooperative tracking of a moving target by `n` range sensors.
//!
//! Sensor `i` holds `f_{i,t}(x) = 1/4 (||S_i - x||^2 - D_{i,t})^2` where
//! `D_{i,t}` is its noisy squared range to the target, and the affine
//! constraint `B_{i,t} x - b_{i,t} <= 0` with nonnegative `B` and `b >= b_min`.
//! The origin satisfies every constraint with margin `b_min`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BanditRound, GradientRound, OnlineProblem, ProblemConstants};
use crate::error::{invalid, Result};
use crate::feasible_set::FeasibleSet;
use crate::streams::{stream, Purpose};

const DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationParams {
    pub n: usize,
    /// Constraint rows per agent.
    pub m: usize,
    /// Lower end of the `b_{i,t}` entries; positive values certify Slater.
    pub b: f64,
    /// Upper end of the measurement noise range `[0, noise]`.
    pub noise: f64,
    /// Sensors are drawn from `[-sensor_range, sensor_range]^2`.
    pub sensor_range: f64,
    /// Entries of `B_{i,t}` are drawn from `[0, b_entry_max]`.
    pub b_entry_max: f64,
    pub initial_target: [f64; 2],
}

impl Default for LocalizationParams {
    fn default() -> Self {
        LocalizationParams {
            n: 100,
            m: 2,
            b: 0.01,
            noise: 0.001,
            sensor_range: 5.0,
            b_entry_max: 2.0,
            initial_target: [0.8, 0.95],
        }
    }
}

impl LocalizationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "need at least one agent"));
        }
        if self.m == 0 {
            return Err(invalid("m", "need at least one constraint row"));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("sensor_range", self.sensor_range),
            ("b_entry_max", self.b_entry_max),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("{v} must be finite and nonnegative")));
            }
        }
        if !self.b.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        Ok(())
    }
}

/// One step of the target dynamics from round `t >= 1`.
pub fn advance_target(pos: [f64; 2], t: usize, q: bool) -> [f64; 2] {
    let tf = t as f64;
    let qf = if q { 1.0 } else { 0.0 };
    let sign = if q { -1.0 } else { 1.0 };
    [
        pos[0] + sign * (tf / 50.0).sin() / (10.0 * tf),
        pos[1] - qf * (tf / 70.0).cos() / (40.0 * tf),
    ]
}

fn target_coin(seed: u64, t: usize) -> bool {
    stream(seed, Purpose::Target, 0, t as u64).random_bool(0.5)
}

#[derive(Debug, Clone)]
pub struct LocalizationProblem {
    params: LocalizationParams,
    seed: u64,
    set: FeasibleSet,
    sensors: Arc<Vec<[f64; 2]>>,
    /// `targets[t]` is the target position at round `t`; index 0 is the
    /// initial position and round 1 starts there.
    targets: Vec<[f64; 2]>,
    constants: ProblemConstants,
}

impl LocalizationProblem {
    /// Builds an instance whose target trajectory is precomputed through
    /// round `horizon`.
    pub fn new(params: LocalizationParams, set: FeasibleSet, seed: u64, horizon: usize) -> Result<Self> {
        params.validate()?;
        set.validate()?;
        if set.dim() != DIM {
            return Err(invalid("set", format!("localization is planar, got dim {}", set.dim())));
        }
        let sensors: Vec<[f64; 2]> = (0..params.n)
            .map(|i| {
                let mut r = stream(seed, Purpose::Sensors, i as u64, 0);
                let a = params.sensor_range;
                if a == 0.0 {
                    [0.0, 0.0]
                } else {
                    [r.random_range(-a..=a), r.random_range(-a..=a)]
                }
            })
            .collect();
        let mut targets = Vec::with_capacity(horizon + 2);
        targets.push(params.initial_target);
        targets.push(params.initial_target);
        for t in 1..horizon.max(1) {
            let next = advance_target(targets[t], t, target_coin(seed, t));
            targets.push(next);
        }
        let mut problem = LocalizationProblem {
            params,
            seed,
            set,
            sensors: Arc::new(sensors),
            targets,
            constants: ProblemConstants {
                f1: 0.0,
                f2: 0.0,
                g1: 0.0,
                g2: 0.0,
                lipschitz: 0.0,
            },
        };
        problem.constants = problem.analytic_constants();
        Ok(problem)
    }

    pub fn params(&self) -> &LocalizationParams {
        &self.params
    }

    pub fn sensors(&self) -> &[[f64; 2]] {
        &self.sensors
    }

    pub fn target(&self, t: usize) -> [f64; 2] {
        if t < self.targets.len() {
            return self.targets[t];
        }
        let mut pos = *self.targets.last().expect("initial target");
        for s in (self.targets.len() - 1)..t {
            pos = advance_target(pos, s, target_coin(self.seed, s));
        }
        pos
    }

    /// Noisy squared range `D_{i,t}`; a pure function of `(seed, i, t)`.
    pub fn measure_distance(&self, agent: usize, t: usize) -> f64 {
        let s = self.sensors[agent];
        let x0 = self.target(t);
        let tau = if self.params.noise > 0.0 {
            stream(self.seed, Purpose::Noise, agent as u64, t as u64)
                .random_range(0.0..=self.params.noise)
        } else {
            0.0
        };
        (s[0] - x0[0]).powi(2) + (s[1] - x0[1]).powi(2) + tau
    }

    fn constraint_data(&self, agent: usize, t: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.params.m;
        let mut r = stream(self.seed, Purpose::Constraints, agent as u64, t as u64);
        let hi = self.params.b_entry_max;
        let mat: Vec<f64> = (0..m * DIM)
            .map(|_| if hi > 0.0 { r.random_range(0.0..=hi) } else { 0.0 })
            .collect();
        let lo = self.params.b;
        let rhs: Vec<f64> = (0..m).map(|_| r.random_range(lo..=lo + 1.0)).collect();
        (mat, rhs)
    }

    fn analytic_constants(&self) -> ProblemConstants {
        let r_out = self.set.outer_radius();
        let l1_max = match self.set {
            FeasibleSet::Box { half_width, dim } => half_width * dim as f64,
            FeasibleSet::Ball { radius, dim } => radius * (dim as f64).sqrt(),
        };
        let mut f1: f64 = 0.0;
        let mut g1: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for s in self.sensors.iter() {
            let far = s[0].hypot(s[1]) + r_out;
            let d_max = self
                .targets
                .iter()
                .map(|x0| (s[0] - x0[0]).powi(2) + (s[1] - x0[1]).powi(2))
                .fold(0.0, f64::max)
                + self.params.noise;
            let resid = (far * far).max(d_max);
            f1 = f1.max(resid * resid / 4.0);
            g1 = g1.max(resid * far);
            lip = lip.max(resid + 2.0 * far * far);
        }
        let m = self.params.m as f64;
        let row = self.params.b_entry_max * l1_max + self.params.b.abs() + 1.0;
        ProblemConstants {
            f1,
            f2: m.sqrt() * row,
            g1,
            g2: self.params.b_entry_max * (m * DIM as f64).sqrt(),
            lipschitz: lip,
        }
    }
}

impl OnlineProblem for LocalizationProblem {
    type Round = LocalizationRound;

    fn dim(&self) -> usize {
        DIM
    }

    fn agents(&self) -> usize {
        self.params.n
    }

    fn constraint_dim(&self, _agent: usize) -> usize {
        self.params.m
    }

    fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn round(&self, t: usize) -> LocalizationRound {
        let n = self.params.n;
        let distances = (0..n).map(|i| self.measure_distance(i, t)).collect();
        let (mats, rhs) = (0..n).map(|i| self.constraint_data(i, t)).unzip();
        LocalizationRound {
            t,
            m: self.params.m,
            sensors: Arc::clone(&self.sensors),
            distances,
            mats,
            rhs,
        }
    }

    fn slater_point(&self) -> Option<(Vec<f64>, f64)> {
        (self.params.b > 0.0).then(|| (vec![0.0; DIM], self.params.b))
    }
}

/// Realized data of one round.
#[derive(Debug, Clone)]
pub struct LocalizationRound {
    pub t: usize,
    m: usize,
    sensors: Arc<Vec<[f64; 2]>>,
    distances: Vec<f64>,
    mats: Vec<Vec<f64>>,
    rhs: Vec<Vec<f64>>,
}

impl LocalizationRound {
    pub fn distance(&self, agent: usize) -> f64 {
        self.distances[agent]
    }

    /// Row-major `m x 2` constraint matrix of `agent`.
    pub fn matrix(&self, agent: usize) -> &[f64] {
        &self.mats[agent]
    }

    pub fn rhs(&self, agent: usize) -> &[f64] {
        &self.rhs[agent]
    }

    fn residual(&self, agent: usize, x: &[f64]) -> (f64, [f64; 2]) {
        let s = self.sensors[agent];
        let diff = [x[0] - s[0], x[1] - s[1]];
        let sq = diff[0] * diff[0] + diff[1] * diff[1];
        (sq - self.distances[agent], diff)
    }
}

impl BanditRound for LocalizationRound {
    fn loss(&self, agent: usize, x: &[f64]) -> f64 {
        let (r, _) = self.residual(agent, x);
        0.25 * r * r
    }

    fn constraint(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        let a = &self.mats[agent];
        let b = &self.rhs[agent];
        (0..self.m)
            .map(|k| a[k * DIM] * x[0] + a[k * DIM + 1] * x[1] - b[k])
            .collect()
    }
}

impl GradientRound for LocalizationRound {
    fn loss_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        let (r, diff) = self.residual(agent, x);
        vec![r * diff[0], r * diff[1]]
    }

    fn constraint_jacobian(&self, agent: usize, _x: &[f64]) -> Vec<Vec<f64>> {
        self.mats[agent].chunks(DIM).map(<[f64]>::to_vec).collect()
    }

    fn affine_constraints(&self, agent: usize) -> Option<Vec<(Vec<f64>, f64)>> {
        Some(
            self.mats[agent]
                .chunks(DIM)
                .zip(&self.rhs[agent])
                .map(|(row, &beta)| (row.to_vec(), beta))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(n: usize, b: f64) -> LocalizationProblem {
        let params = LocalizationParams {
            n,
            b,
            ..Default::default()
        };
        LocalizationProblem::new(params, FeasibleSet::cube(5.0, 2), 11, 50).unwrap()
    }

    fn round_with(sensor: [f64; 2], d: f64, mat: Vec<f64>, rhs: Vec<f64>) -> LocalizationRound {
        LocalizationRound {
            t: 1,
            m: rhs.len(),
            sensors: Arc::new(vec![sensor]),
            distances: vec![d],
            mats: vec![mat],
            rhs: vec![rhs],
        }
    }

    #[test]
    fn target_step_examples() {
        let step = advance_target([0.0, 0.0], 1, false);
        assert_relative_eq!(step[0], 0.02f64.sin() / 10.0, epsilon = 1e-15);
        assert_relative_eq!(step[0], 0.0019999, epsilon = 1e-7);
        assert_eq!(step[1], 0.0);

        let step = advance_target([0.0, 0.0], 1, true);
        assert_relative_eq!(step[0], -0.0019999, epsilon = 1e-7);
        assert_relative_eq!(step[1], -(1.0f64 / 70.0).cos() / 40.0, epsilon = 1e-15);
        assert_relative_eq!(step[1], -0.0249974, epsilon = 1e-7);

        for t in 1..500 {
            for q in [false, true] {
                let s = advance_target([0.3, -0.2], t, q);
                let len = (s[0] - 0.3).hypot(s[1] + 0.2);
                assert!(len <= 1.0 / (10.0 * t as f64) + 1.0 / (40.0 * t as f64));
            }
        }
    }

    #[test]
    fn target_trajectory_starts_at_initial_position() {
        let p = problem(3, 0.01);
        assert_eq!(p.target(0), [0.8, 0.95]);
        assert_eq!(p.target(1), [0.8, 0.95]);
        // Beyond the precomputed horizon the trajectory keeps evolving
        // consistently.
        let long = LocalizationProblem::new(p.params().clone(), p.set().clone(), 11, 200).unwrap();
        assert_eq!(p.target(120), long.target(120));
    }

    #[test]
    fn loss_examples() {
        let r = round_with([0.0, 0.0], 0.0, vec![1.0, 0.0, 0.0, 1.0], vec![0.01, 0.01]);
        assert_relative_eq!(r.loss(0, &[1.0, 0.0]), 0.25);
        assert_eq!(r.loss_grad(0, &[1.0, 0.0]), vec![1.0, 0.0]);

        let r = round_with([1.0, 1.0], 25.0, vec![0.0; 4], vec![0.0; 2]);
        assert_eq!(r.loss(0, &[4.0, 5.0]), 0.0);
        assert_eq!(r.loss_grad(0, &[4.0, 5.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn loss_is_nonconvex_through_the_sensor() {
        // Restricted to a ray through S the loss is 1/4 (s^2 - D)^2: a local
        // maximum at the sensor itself, minima at s = ±sqrt(D).
        let d = 4.0;
        let r = round_with([0.0, 0.0], d, vec![0.0; 4], vec![0.0; 2]);
        let f = |s: f64| r.loss(0, &[s, 0.0]);
        assert!(f(0.0) > f(0.5) && f(0.0) > f(-0.5));
        assert_eq!(f(2.0), 0.0);
        assert_eq!(f(-2.0), 0.0);
        // Hessian at S is -D I: indefinite along with the positive curvature
        // at the minima.
        let h = 1e-4;
        let curv = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert_relative_eq!(curv, -d, epsilon = 1e-3);
    }

    #[test]
    fn constraint_examples() {
        let r = round_with([0.0, 0.0], 0.0, vec![1.0, 0.0, 0.0, 1.0], vec![0.01, 0.01]);
        let g = r.constraint(0, &[1.0, 1.0]);
        assert_relative_eq!(g[0], 0.99);
        assert_relative_eq!(g[1], 0.99);
        assert_eq!(r.constraint(0, &[0.0, 0.0]), vec![-0.01, -0.01]);
        assert_eq!(r.constraint_jacobian(0, &[0.0, 0.0]), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn origin_is_strictly_feasible() {
        let p = problem(6, 0.01);
        for t in 1..40 {
            let round = p.round(t);
            for i in 0..6 {
                assert!(round.constraint(i, &[0.0, 0.0]).iter().all(|g| *g <= -0.01));
            }
        }
        assert_eq!(p.slater_point(), Some((vec![0.0, 0.0], 0.01)));
        assert_eq!(problem(2, 0.5).slater_point(), Some((vec![0.0, 0.0], 0.5)));
        assert_eq!(problem(2, 0.0).slater_point(), None);
    }

    #[test]
    fn distance_examples() {
        let params = LocalizationParams {
            n: 1,
            noise: 0.0,
            sensor_range: 0.0,
            initial_target: [0.0, 0.0],
            ..Default::default()
        };
        let p = LocalizationProblem::new(params.clone(), FeasibleSet::cube(5.0, 2), 1, 10).unwrap();
        assert_eq!(p.measure_distance(0, 1), 0.0);

        let shifted = LocalizationParams {
            initial_target: [-3.0, -4.0],
            ..params
        };
        let p = LocalizationProblem::new(shifted, FeasibleSet::cube(5.0, 2), 1, 1).unwrap();
        assert_relative_eq!(p.measure_distance(0, 1), 25.0);

        let p = problem(5, 0.01);
        for t in 1..50 {
            for i in 0..5 {
                let s = p.sensors()[i];
                let x0 = p.target(t);
                let clean = (s[0] - x0[0]).powi(2) + (s[1] - x0[1]).powi(2);
                let d = p.measure_distance(i, t);
                assert!(d - clean >= 0.0 && d - clean <= 0.001 + 1e-15);
                assert_eq!(d, p.measure_distance(i, t));
            }
        }
    }

    #[test]
    fn rounds_are_replay_stable() {
        let p = problem(4, 0.01);
        let a = p.round(17);
        let b = p.round(17);
        for i in 0..4 {
            assert_eq!(a.distance(i), b.distance(i));
            assert_eq!(a.matrix(i), b.matrix(i));
            assert_eq!(a.rhs(i), b.rhs(i));
            assert!(a.matrix(i).iter().all(|v| (0.0..=2.0).contains(v)));
            assert!(a.rhs(i).iter().all(|v| (0.01..=1.01).contains(v)));
        }
    }
}
