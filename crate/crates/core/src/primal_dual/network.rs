//! Agent states and the synchronous round protocol.

use serde::{Deserialize, Serialize};

use crate::compression::{apply_tracking, encode_tracking, CompressorSpec, Payload, FULL_WIDTH_BITS};
use crate::error::{check_dim, invalid, Error, Result};
use crate::estimators::{one_point_f, one_point_g, sample_sphere, two_point_f, two_point_g};
use crate::feasible_set::{FeasibleSet, MEMBERSHIP_TOL};
use crate::parallel::Executor;
use crate::problems::{BanditRound, GradientRound};
use crate::streams::{stream, Purpose};
use crate::topology::MixingMatrix;

use super::schedule::RoundScalars;

/// How neighbours' iterates reach an agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Communication {
    /// Compressed increments tracked through replicas `z_hat`.
    Compressed(CompressorSpec),
    /// Exact iterates, mixed directly.
    Perfect,
}

/// Bookkeeping of the replicas `z_hat_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplicaMode {
    /// One global replica per sender; every message updates it.
    #[default]
    Ledger,
    /// Each receiver keeps its own copy and only updates it on contact.
    StrictLocal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    /// Primal iterate; lies in `(1 - xi_t) X` entering round `t`.
    pub z: Vec<f64>,
    /// Last mixed decision.
    pub x: Vec<f64>,
    /// Last dual vector.
    pub v: Vec<f64>,
}

enum Replicas {
    None,
    Ledger(Vec<Vec<f64>>),
    /// `local[i][j]`: receiver `i`'s copy of sender `j`'s replica.
    Local(Vec<Vec<Vec<f64>>>),
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub t: usize,
    pub scalars: RoundScalars,
    /// Mixed decisions `x_{i,t}`.
    pub decisions: Vec<Vec<f64>>,
    /// Query points `e_{i,t}`; equal to the decisions without exploration.
    pub queries: Vec<Vec<f64>>,
    /// Duals `v_{i,t+1}`.
    pub duals: Vec<Vec<f64>>,
    /// Bits sent over non-self edges.
    pub bits: u64,
    pub messages: usize,
    /// Quantizer coordinates outside the `q`-bit range, summed over senders.
    pub overflowed: usize,
    /// `||z_{i,t} - z_hat_{i,t}||` per agent (sender side).
    pub tracking_error: Vec<f64>,
    /// Largest gap between a receiver's copy and the sender's own replica.
    pub replica_divergence: f64,
}

struct Mixed {
    x: Vec<Vec<f64>>,
    bits: u64,
    messages: usize,
    overflowed: usize,
    tracking_error: Vec<f64>,
    divergence: f64,
}

struct AgentOutcome {
    e: Vec<f64>,
    v: Vec<f64>,
    z: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn positive_part(g: &[f64], gamma: f64) -> Vec<f64> {
    g.iter().map(|gk| gamma * gk.max(0.0)).collect()
}

fn check_finite(x: &[f64], what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `sum_j w_j y_j` over the nonzero entries of `row`, in index order.
fn mix<'a>(row: &[f64], p: usize, vecs: impl Fn(usize) -> &'a [f64]) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (j, &w) in row.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, y) in out.iter_mut().zip(vecs(j)) {
            *o += w * y;
        }
    }
    out
}

/// The agents of one run together with their communication state.
pub struct Network {
    set: FeasibleSet,
    seed: u64,
    communication: Communication,
    executor: Executor,
    agents: Vec<AgentState>,
    replicas: Replicas,
}

impl Network {
    /// Starts from the given iterates with all replicas at zero.
    pub fn new(
        set: FeasibleSet,
        z0: Vec<Vec<f64>>,
        communication: Communication,
        mode: ReplicaMode,
        seed: u64,
        executor: Executor,
    ) -> Result<Self> {
        set.validate()?;
        let p = set.dim();
        if z0.is_empty() {
            return Err(invalid("agents", "need at least one agent"));
        }
        for z in &z0 {
            check_dim(p, z.len())?;
            check_finite(z, "initial iterate")?;
        }
        if let Communication::Compressed(spec) = &communication {
            spec.validate()?;
            check_dim(p, spec.dim)?;
        }
        let n = z0.len();
        let replicas = match (&communication, mode) {
            (Communication::Perfect, _) => Replicas::None,
            (_, ReplicaMode::Ledger) => Replicas::Ledger(vec![vec![0.0; p]; n]),
            (_, ReplicaMode::StrictLocal) => Replicas::Local(vec![vec![vec![0.0; p]; n]; n]),
        };
        let agents = z0
            .into_iter()
            .enumerate()
            .map(|(id, z)| AgentState {
                id,
                x: z.clone(),
                z,
                v: Vec::new(),
            })
            .collect();
        Ok(Network {
            set,
            seed,
            communication,
            executor,
            agents,
            replicas,
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// Sender-side replica of agent `j`, if replicas are kept.
    pub fn replica(&self, j: usize) -> Option<&[f64]> {
        match &self.replicas {
            Replicas::None => None,
            Replicas::Ledger(r) => Some(&r[j]),
            Replicas::Local(r) => Some(&r[j][j]),
        }
    }

    /// Steps (1)-(3): broadcast, replica update, mixing.
    fn communicate(&mut self, t: usize, w: &MixingMatrix, sc: &RoundScalars) -> Result<Mixed> {
        let n = self.agents.len();
        let p = self.set.dim();
        check_dim(n, w.n())?;
        let xi = sc.xi;
        let set = &self.set;
        let agents = &self.agents;
        let exec = self.executor;
        let seed = self.seed;

        let spec = match &self.communication {
            Communication::Perfect => {
                let snap: Vec<Vec<f64>> = agents
                    .iter()
                    .map(|a| set.project(xi, &a.z))
                    .collect::<Result<_>>()?;
                let x = exec.map_range(n, |i| mix(w.row(i), p, |j| &snap[j]));
                let messages = w.edge_count();
                return Ok(Mixed {
                    x,
                    bits: messages as u64 * p as u64 * FULL_WIDTH_BITS as u64,
                    messages,
                    overflowed: 0,
                    tracking_error: vec![0.0; n],
                    divergence: 0.0,
                });
            }
            Communication::Compressed(spec) => spec.clone(),
        };

        let own = |j: usize| -> &[f64] {
            match &self.replicas {
                Replicas::Ledger(r) => &r[j],
                Replicas::Local(r) => &r[j][j],
                Replicas::None => unreachable!(),
            }
        };
        let payloads: Vec<Payload> = exec
            .map_range(n, |i| {
                let mut rng = stream(seed, Purpose::Quantizer, i as u64, t as u64);
                encode_tracking(&spec, &agents[i].z, own(i), sc.scale, &mut rng)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let messages = w.edge_count();
        let bits = messages as u64 * spec.message_bits();
        let overflowed = payloads.iter().map(|m| m.overflowed).sum();
        let update = |prev: &[f64], j: usize| -> Result<Vec<f64>> {
            let mut next = apply_tracking(prev, &payloads[j], sc.scale)?;
            set.project_in_place(xi, &mut next)?;
            Ok(next)
        };

        match &mut self.replicas {
            Replicas::Ledger(ledger) => {
                let next: Vec<Vec<f64>> = exec
                    .map_range(n, |j| update(&ledger[j], j))
                    .into_iter()
                    .collect::<Result<_>>()?;
                *ledger = next;
                let ledger = &*ledger;
                let tracking_error = (0..n).map(|i| dist(&agents[i].z, &ledger[i])).collect();
                let x = exec.map_range(n, |i| mix(w.row(i), p, |j| &ledger[j]));
                Ok(Mixed {
                    x,
                    bits,
                    messages,
                    overflowed,
                    tracking_error,
                    divergence: 0.0,
                })
            }
            Replicas::Local(local) => {
                let next: Vec<Vec<Vec<f64>>> = exec
                    .map_range(n, |i| {
                        let mut row = local[i].clone();
                        for &j in w.in_neighbors(i).iter().chain(std::iter::once(&i)) {
                            row[j] = update(&local[i][j], j)?;
                        }
                        Ok(row)
                    })
                    .into_iter()
                    .collect::<Result<_>>()?;
                *local = next;
                let local = &*local;
                let tracking_error = (0..n).map(|i| dist(&agents[i].z, &local[i][i])).collect();
                let divergence = (0..n)
                    .flat_map(|i| w.in_neighbors(i).iter().map(move |&j| dist(&local[i][j], &local[j][j])))
                    .fold(0.0, f64::max);
                let x = exec.map_range(n, |i| mix(w.row(i), p, |j| &local[i][j]));
                Ok(Mixed {
                    x,
                    bits,
                    messages,
                    overflowed,
                    tracking_error,
                    divergence,
                })
            }
            Replicas::None => unreachable!("compressed communication keeps replicas"),
        }
    }

    fn finish(&mut self, t: usize, sc: RoundScalars, mixed: Mixed, outcomes: Vec<Result<AgentOutcome>>) -> Result<RoundLog> {
        let outcomes: Vec<AgentOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let mut queries = Vec::with_capacity(outcomes.len());
        let mut duals = Vec::with_capacity(outcomes.len());
        for ((agent, out), x) in self.agents.iter_mut().zip(outcomes).zip(&mixed.x) {
            agent.z = out.z;
            agent.x = x.clone();
            agent.v = out.v.clone();
            queries.push(out.e);
            duals.push(out.v);
        }
        Ok(RoundLog {
            t,
            scalars: sc,
            decisions: mixed.x,
            queries,
            duals,
            bits: mixed.bits,
            messages: mixed.messages,
            overflowed: mixed.overflowed,
            tracking_error: mixed.tracking_error,
            replica_divergence: mixed.divergence,
        })
    }

    fn check_decision(&self, i: usize, t: usize, xi: f64, x: &[f64], e: &[f64]) -> Result<()> {
        check_finite(x, "decision")?;
        check_finite(e, "query point")?;
        if !self.set.contains(xi, x, MEMBERSHIP_TOL) || !self.set.contains(0.0, e, MEMBERSHIP_TOL) {
            return Err(Error::QueryOutsideSet { agent: i, round: t });
        }
        Ok(())
    }

    fn perturb(&self, i: usize, t: usize, x: &[f64], delta: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(self.seed, Purpose::Sphere, i as u64, t as u64);
        let u = sample_sphere(x.len(), &mut rng).into_vec();
        let e = x.iter().zip(&u).map(|(a, b)| a + delta * b).collect();
        (u, e)
    }

    fn descend(&self, x: &[f64], alpha: f64, dir: &[f64], xi_next: f64) -> Result<Vec<f64>> {
        check_finite(dir, "update direction")?;
        let mut z: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - alpha * d).collect();
        self.set.project_in_place(xi_next, &mut z)?;
        Ok(z)
    }

    /// One round of the one-point bandit method. `xi_next` is the shrinkage
    /// of the following round.
    pub fn round_one_point<R: BanditRound + Sync>(
        &mut self,
        t: usize,
        w: &MixingMatrix,
        sc: RoundScalars,
        xi_next: f64,
        round: &R,
    ) -> Result<RoundLog> {
        let mixed = self.communicate(t, w, &sc)?;
        let p = self.set.dim();
        let outcomes = self.executor.map_range(self.agents.len(), |i| {
            let x = &mixed.x[i];
            let (u, e) = self.perturb(i, t, x, sc.delta);
            self.check_decision(i, t, sc.xi, x, &e)?;
            let f = round.loss(i, &e);
            let g = round.constraint(i, &e);
            if !f.is_finite() {
                return Err(Error::NonFinite("loss value"));
            }
            check_finite(&g, "constraint value")?;
            let v = positive_part(&g, sc.gamma);
            let mut a = one_point_f(f, &u, p, sc.delta)?;
            let gv = one_point_g(&g, &u, p, sc.delta)?.mul_vec(&v)?;
            for (ak, gk) in a.iter_mut().zip(gv) {
                *ak += gk;
            }
            let z = self.descend(x, sc.alpha, &a, xi_next)?;
            Ok(AgentOutcome { e, v, z })
        });
        self.finish(t, sc, mixed, outcomes)
    }

    /// One round of the two-point bandit method.
    pub fn round_two_point<R: BanditRound + Sync>(
        &mut self,
        t: usize,
        w: &MixingMatrix,
        sc: RoundScalars,
        xi_next: f64,
        round: &R,
    ) -> Result<RoundLog> {
        let mixed = self.communicate(t, w, &sc)?;
        let p = self.set.dim();
        let outcomes = self.executor.map_range(self.agents.len(), |i| {
            let x = &mixed.x[i];
            let (u, e) = self.perturb(i, t, x, sc.delta);
            self.check_decision(i, t, sc.xi, x, &e)?;
            let (f_x, f_e) = (round.loss(i, x), round.loss(i, &e));
            let (g_x, g_e) = (round.constraint(i, x), round.constraint(i, &e));
            if !(f_x.is_finite() && f_e.is_finite()) {
                return Err(Error::NonFinite("loss value"));
            }
            check_finite(&g_x, "constraint value")?;
            check_finite(&g_e, "constraint value")?;
            let v = positive_part(&g_x, sc.gamma);
            let mut b = two_point_f(f_e, f_x, &u, p, sc.delta)?;
            let gv = two_point_g(&g_e, &g_x, &u, p, sc.delta)?.mul_vec(&v)?;
            for (bk, gk) in b.iter_mut().zip(gv) {
                *bk += gk;
            }
            let z = self.descend(x, sc.alpha, &b, xi_next)?;
            Ok(AgentOutcome { e, v, z })
        });
        self.finish(t, sc, mixed, outcomes)
    }

    /// The same primal-dual step driven by exact gradients.
    pub fn round_full_information<R: GradientRound + Sync>(
        &mut self,
        t: usize,
        w: &MixingMatrix,
        sc: RoundScalars,
        xi_next: f64,
        round: &R,
    ) -> Result<RoundLog> {
        let mixed = self.communicate(t, w, &sc)?;
        let outcomes = self.executor.map_range(self.agents.len(), |i| {
            let x = &mixed.x[i];
            self.check_decision(i, t, sc.xi, x, x)?;
            let g = round.constraint(i, x);
            check_finite(&g, "constraint value")?;
            let v = positive_part(&g, sc.gamma);
            let mut d = round.loss_grad(i, x);
            for (row, vk) in round.constraint_jacobian(i, x).iter().zip(&v) {
                if *vk == 0.0 {
                    continue;
                }
                for (dk, r) in d.iter_mut().zip(row) {
                    *dk += vk * r;
                }
            }
            let z = self.descend(x, sc.alpha, &d, xi_next)?;
            Ok(AgentOutcome { e: x.clone(), v, z })
        });
        self.finish(t, sc, mixed, outcomes)
    }
}

/// Largest dual norm in a round.
pub fn max_dual_norm(log: &RoundLog) -> f64 {
    log.duals.iter().map(|v| norm(v)).fold(0.0, f64::max)
}
