//! Distributed online primal-dual methods with compressed communication.
//!
//! [`Network`] holds the agents and executes single rounds; [`Simulation`]
//! drives a whole run from a [`SimulationConfig`] against an
//! [`OnlineProblem`].

mod network;
mod schedule;

pub use network::{max_dual_norm, AgentState, Communication, Network, ReplicaMode, RoundLog};
pub use schedule::{balanced_exponents, Exponents, RoundScalars, Schedule, ValidationReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::estimators::sample_sphere;
use crate::feasible_set::FeasibleSet;
use crate::parallel::Executor;
use crate::problems::OnlineProblem;
use crate::streams::{stream, Purpose};
use crate::topology::{generate_round, EdgeSampling, GraphConfig, MixingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    OnePoint,
    TwoPoint,
    /// Exact gradients; the reference the bandit methods are compared to.
    FullInformation,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::OnePoint => "one_point",
            Algorithm::TwoPoint => "two_point",
            Algorithm::FullInformation => "full_information",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub algorithm: Algorithm,
    pub communication: Communication,
    pub replica_mode: ReplicaMode,
    pub graph: GraphConfig,
    pub schedule: Schedule,
    pub seed: u64,
    /// Horizon `T`; rounds `1..T` are executed.
    pub horizon: usize,
    pub executor: Executor,
}

/// Draws `z_{i,1}` uniformly from `(1 - xi) X`.
pub fn initial_iterates(set: &FeasibleSet, xi: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    set.validate()?;
    if !(0.0..1.0).contains(&xi) {
        return Err(invalid("xi", format!("{xi} is not in [0, 1)")));
    }
    let p = set.dim();
    Ok((0..n)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Init, i as u64, 0);
            match *set {
                FeasibleSet::Box { half_width, .. } => {
                    let c = (1.0 - xi) * half_width;
                    (0..p).map(|_| rng.random_range(-c..=c)).collect()
                }
                FeasibleSet::Ball { radius, .. } => {
                    let u = sample_sphere(p, &mut rng);
                    let rho = (1.0 - xi) * radius * rng.random::<f64>().powf(1.0 / p as f64);
                    u.iter().map(|v| rho * v).collect()
                }
            }
        })
        .collect())
}

/// Everything produced by one executed round.
pub struct Step<R> {
    pub log: RoundLog,
    /// The realized round data, for evaluation.
    pub round: R,
    pub mixing: MixingMatrix,
}

pub struct Simulation<'a, P: OnlineProblem> {
    cfg: SimulationConfig,
    problem: &'a P,
    net: Network,
    t: usize,
}

impl<'a, P: OnlineProblem> Simulation<'a, P> {
    pub fn new(cfg: SimulationConfig, problem: &'a P) -> Result<Self> {
        cfg.graph.validate()?;
        check_dim(problem.agents(), cfg.graph.n)?;
        if cfg.graph.sampling == EdgeSampling::Directed {
            return Err(invalid(
                "sampling",
                "directed sampling does not give doubly stochastic weights",
            ));
        }
        let set = problem.set().clone();
        let xi1 = cfg.schedule.at(1).xi;
        let z0 = initial_iterates(&set, xi1, cfg.graph.n, cfg.seed)?;
        let net = Network::new(
            set,
            z0,
            cfg.communication.clone(),
            cfg.replica_mode,
            cfg.seed,
            cfg.executor,
        )?;
        Ok(Simulation {
            cfg,
            problem,
            net,
            t: 1,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Next round to execute.
    pub fn round_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.cfg.horizon
    }

    /// Executes the next round, or returns `None` after round `T - 1`.
    pub fn step(&mut self) -> Result<Option<Step<P::Round>>> {
        if self.is_done() {
            return Ok(None);
        }
        let t = self.t;
        let mut graph_rng = stream(self.cfg.seed, Purpose::Graph, 0, t as u64);
        let w = generate_round(&self.cfg.graph, t, &mut graph_rng);
        let sc = self.cfg.schedule.at(t);
        let xi_next = self.cfg.schedule.at(t + 1).xi;
        let round = self.problem.round(t);
        let log = match self.cfg.algorithm {
            Algorithm::OnePoint => self.net.round_one_point(t, &w, sc, xi_next, &round)?,
            Algorithm::TwoPoint => self.net.round_two_point(t, &w, sc, xi_next, &round)?,
            Algorithm::FullInformation => self.net.round_full_information(t, &w, sc, xi_next, &round)?,
        };
        self.t += 1;
        Ok(Some(Step {
            log,
            round,
            mixing: w,
        }))
    }
}

/// Round logs of a whole run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecisionLog {
    pub rounds: Vec<RoundLog>,
}

impl DecisionLog {
    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.rounds.iter().map(|r| r.bits).sum()
    }
}

/// Runs rounds `1..T` and keeps every log.
pub fn run<P: OnlineProblem>(cfg: SimulationConfig, problem: &P) -> Result<DecisionLog> {
    let mut sim = Simulation::new(cfg, problem)?;
    let mut log = DecisionLog::default();
    while let Some(step) = sim.step()? {
        log.rounds.push(step.log);
    }
    Ok(log)
}
