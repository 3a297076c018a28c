//! Run configuration: a TOML file with a few dotted sections.
//!
//! ```toml
//! algo = "two_point"
//! T = 2000
//! n = 10
//! seeds = [1, 2, 3]
//!
//! [graph]
//! rho = 0.1
//!
//! [compressor]
//! kind = "uniform"
//! delta = 1.0
//!
//! [schedule]
//! theta1 = 0.5
//! ```
//!
//! Every key is optional. Omitted schedule values are filled in per
//! algorithm when the config is resolved.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compression::{CompressorKind, CompressorSpec, OverflowPolicy};
use crate::error::{Error, Result};
use crate::feasible_set::FeasibleSet;
use crate::parallel::Executor;
use crate::primal_dual::{
    balanced_exponents, Algorithm, Communication, Exponents, ReplicaMode, Schedule, SimulationConfig,
};
use crate::problems::{LocalizationParams, LocalizationProblem, OnlineProblem};
use crate::topology::{EdgeSampling, GraphConfig};

/// Horizon, agent count and seeds of the small-scale preset.
pub const DESK_HORIZON: usize = 2000;
pub const DESK_AGENTS: usize = 10;
pub const DESK_SEEDS: [u64; 3] = [1, 2, 3];
/// Horizon of the full-scale preset.
pub const FULL_HORIZON: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub rho: f64,
    pub ring: bool,
    pub window: usize,
    pub sampling: EdgeSampling,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            rho: 0.1,
            ring: true,
            window: 1,
            sampling: EdgeSampling::Undirected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Half-width of the box `[-h, h]^2`.
    pub half_width: f64,
    pub m: usize,
    pub b: f64,
    pub noise: f64,
    pub sensor_range: f64,
    pub b_entry_max: f64,
    pub initial_target: [f64; 2],
}

impl Default for ProblemSection {
    fn default() -> Self {
        let p = LocalizationParams::default();
        ProblemSection {
            half_width: 5.0,
            m: p.m,
            b: p.b,
            noise: p.noise,
            sensor_range: p.sensor_range,
            b_entry_max: p.b_entry_max,
            initial_target: p.initial_target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressorSection {
    pub kind: CompressorKind,
    pub delta: f64,
    /// Bits per transmitted integer.
    pub bits: u32,
    pub overflow: OverflowPolicy,
}

impl Default for CompressorSection {
    fn default() -> Self {
        CompressorSection {
            kind: CompressorKind::Uniform,
            delta: 1.0,
            bits: 8,
            overflow: OverflowPolicy::Count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub theta3: Option<f64>,
    pub theta4: Option<f64>,
    pub alpha0: Option<f64>,
    /// Defaults to the largest admissible value.
    pub gamma0: Option<f64>,
    pub s0: Option<f64>,
    pub offset: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            theta1: None,
            theta2: None,
            theta3: None,
            theta4: None,
            alpha0: None,
            gamma0: None,
            s0: None,
            offset: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: usize,
    pub seeds: Vec<u64>,
    /// Metrics are recorded every `stride` rounds and at the last round.
    pub stride: usize,
    pub out: PathBuf,
    pub replica_mode: ReplicaMode,
    pub graph: GraphSection,
    pub problem: ProblemSection,
    pub compressor: CompressorSection,
    pub schedule: ScheduleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algorithm::OnePoint,
            horizon: FULL_HORIZON,
            n: 100,
            seeds: vec![1],
            stride: 10,
            out: PathBuf::from("runs"),
            replica_mode: ReplicaMode::Ledger,
            graph: GraphSection::default(),
            problem: ProblemSection::default(),
            compressor: CompressorSection::default(),
            schedule: ScheduleSection::default(),
        }
    }
}

/// Default step and scale constants per algorithm: `(theta1, alpha0, s0)`.
pub fn schedule_defaults(algo: Algorithm) -> (f64, f64, f64) {
    match algo {
        Algorithm::OnePoint => (0.8, 0.02, 1.0),
        Algorithm::TwoPoint | Algorithm::FullInformation => (0.5, 0.02, 1.0),
    }
}

impl RunConfig {
    /// Small-scale preset used when no config file is given.
    pub fn desk() -> Self {
        RunConfig {
            horizon: DESK_HORIZON,
            n: DESK_AGENTS,
            seeds: DESK_SEEDS.to_vec(),
            ..RunConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn set(&self) -> FeasibleSet {
        FeasibleSet::cube(self.problem.half_width, 2)
    }

    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            rho: self.graph.rho,
            ring: self.graph.ring,
            window: self.graph.window,
            sampling: self.graph.sampling,
            ..GraphConfig::new(self.n, self.graph.rho)
        }
    }

    pub fn problem_params(&self) -> LocalizationParams {
        LocalizationParams {
            n: self.n,
            m: self.problem.m,
            b: self.problem.b,
            noise: self.problem.noise,
            sensor_range: self.problem.sensor_range,
            b_entry_max: self.problem.b_entry_max,
            initial_target: self.problem.initial_target,
        }
    }

    /// The compressor actually used; the full-information reference
    /// always communicates exactly.
    pub fn compressor_spec(&self) -> CompressorSpec {
        if self.algo == Algorithm::FullInformation {
            return CompressorSpec::identity(2);
        }
        let c = &self.compressor;
        let spec = match c.kind {
            CompressorKind::Identity => CompressorSpec::identity(2),
            CompressorKind::Uniform => CompressorSpec::uniform(2, c.delta).with_bits(c.bits),
            CompressorKind::Stochastic => CompressorSpec::stochastic(2, c.delta).with_bits(c.bits),
        };
        CompressorSpec {
            overflow: c.overflow,
            ..spec
        }
    }

    pub fn build_problem(&self, seed: u64) -> Result<LocalizationProblem> {
        LocalizationProblem::new(self.problem_params(), self.set(), seed, self.horizon)
    }

    /// Fills in omitted schedule values and checks admissibility.
    pub fn schedule(&self) -> std::result::Result<Schedule, Vec<String>> {
        let s = &self.schedule;
        let (theta1_d, alpha0_d, s0_d) = schedule_defaults(self.algo);
        let theta1 = s.theta1.unwrap_or(theta1_d);
        let r = self.set().inner_radius();
        let exponents = match self.algo {
            Algorithm::OnePoint => {
                let (theta2, theta3) = match (s.theta2, s.theta3) {
                    (Some(a), Some(b)) => (a, b),
                    (given2, given3) => match balanced_exponents(theta1) {
                        Some((b2, b3)) => (given2.unwrap_or(b2), given3.unwrap_or(b3)),
                        None => {
                            return Err(vec![format!(
                                "theta2/theta3 omitted but theta1 = {theta1} is outside (3/4, 5/6], \
                                 where the balanced choice is defined"
                            )])
                        }
                    },
                };
                Exponents::OnePoint {
                    theta1,
                    theta2,
                    theta3,
                    theta4: s.theta4.unwrap_or(1.0),
                }
            }
            Algorithm::TwoPoint | Algorithm::FullInformation => Exponents::TwoPoint {
                theta1,
                theta2: s.theta2.unwrap_or(1.0),
            },
        };
        let mut schedule = Schedule {
            exponents,
            alpha0: s.alpha0.unwrap_or(alpha0_d),
            gamma0: 0.0,
            s0: s.s0.unwrap_or(s0_d),
            inner_radius: r,
            offset: s.offset,
        };
        schedule.gamma0 = match s.gamma0 {
            Some(g) => g,
            None => match self.build_problem(self.seeds.first().copied().unwrap_or(0)) {
                Ok(p) => schedule.gamma0_cap(&p.constants(), 2),
                Err(e) => return Err(vec![e.to_string()]),
            },
        };
        Ok(schedule)
    }

    /// Every violated condition; empty when the config can run.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.horizon == 0 {
            errs.push("T must be at least 1".to_string());
        }
        if self.seeds.is_empty() {
            errs.push("seeds must not be empty".to_string());
        }
        if self.stride == 0 {
            errs.push("stride must be at least 1".to_string());
        }
        if let Err(e) = self.graph_config().validate() {
            errs.push(e.to_string());
        }
        if self.graph.sampling == EdgeSampling::Directed {
            errs.push("graph.sampling = directed gives weights that are not doubly stochastic".to_string());
        }
        if let Err(e) = self.compressor_spec().validate() {
            errs.push(e.to_string());
        }
        if let Err(e) = self.set().validate() {
            errs.push(e.to_string());
        }
        let problem = match self.build_problem(self.seeds.first().copied().unwrap_or(0)) {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        };
        match self.schedule() {
            Err(v) => errs.extend(v),
            Ok(schedule) => {
                let report = schedule.validate(problem.as_ref().map(|p| p.constants()).as_ref(), 2);
                errs.extend(report.violations);
                let r = schedule.inner_radius;
                if let Some(t) = (1..=self.horizon.max(1)).find(|&t| {
                    let k = schedule.at(t);
                    k.delta > r * k.xi * (1.0 + 1e-12) || !(k.xi > 0.0 && k.xi < 1.0)
                }) {
                    errs.push(format!("exploration radius exceeds r * xi or xi leaves (0, 1) at t = {t}"));
                }
            }
        }
        errs
    }

    /// Simulation settings for one seed.
    pub fn simulation(&self, seed: u64, executor: Executor) -> Result<SimulationConfig> {
        let errs = self.validate();
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let schedule = self.schedule().map_err(Error::Validation)?;
        let spec = self.compressor_spec();
        let communication = if self.algo == Algorithm::FullInformation {
            Communication::Perfect
        } else {
            Communication::Compressed(spec)
        };
        Ok(SimulationConfig {
            algorithm: self.algo,
            communication,
            replica_mode: self.replica_mode,
            graph: self.graph_config(),
            schedule,
            seed,
            horizon: self.horizon,
            executor,
        })
    }

    pub fn compressor_label(&self) -> String {
        self.compressor_spec().label()
    }
}

/// Reads, defaults and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = RunConfig::from_toml(&text)?;
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(errs))
    }
}
