//! Performance metrics of a run: network regret against the best fixed
//! decision satisfying every constraint seen so far, cumulative constraint
//! violation, consensus error, communication volume and power-law fits.

mod lp;

pub use lp::{prune_rows, solve_lp, ComparatorLp, LpSolution, Row, CERT_TOL};

use crate::error::{check_dim, invalid, Error, Result};
use crate::feasible_set::FeasibleSet;
use crate::parallel::Executor;
use crate::primal_dual::RoundLog;
use crate::problems::{GradientRound, OnlineProblem};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Norm of the positive part.
pub fn positive_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt()
}

/// `(1/n) sum_{i,j} ||x_i - x_j||`.
pub fn consensus_error(decisions: &[Vec<f64>]) -> f64 {
    let n = decisions.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in decisions {
        for b in decisions {
            total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        }
    }
    total / n as f64
}

/// Bits sent in one round: `edges * bits_per_message`.
pub fn round_bits(edges: usize, bits_per_message: u64) -> u64 {
    edges as u64 * bits_per_message
}

/// Net regret from per-agent sums `sum_t <grad f_t(x_i), x_i>` and
/// comparator values `min <c_i, x>`.
pub fn net_regret(linear_sums: &[f64], comparator_values: &[f64]) -> Result<f64> {
    check_dim(linear_sums.len(), comparator_values.len())?;
    if linear_sums.is_empty() {
        return Err(invalid("agents", "need at least one agent"));
    }
    let n = linear_sums.len() as f64;
    Ok(linear_sums
        .iter()
        .zip(comparator_values)
        .map(|(l, c)| l - c)
        .sum::<f64>()
        / n)
}

/// Net cumulative constraint violation from per-agent sums of
/// `||[g_t(x_{i,t})]_+||`.
pub fn net_ccv(per_agent: &[f64]) -> f64 {
    if per_agent.is_empty() {
        return 0.0;
    }
    per_agent.iter().sum::<f64>() / per_agent.len() as f64
}

/// Least-squares slope of `log v` against `log t`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("series", "need at least two points"));
    }
    for (k, &(t, v)) in points.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositiveSeries { index: k, value: t });
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveSeries { index: k, value: v });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("series", "all points share one abscissa"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Points with `t >= t_last / 10`.
pub fn trailing_decade(points: &[(f64, f64)]) -> &[(f64, f64)] {
    let Some(&(last, _)) = points.last() else {
        return points;
    };
    let start = points.partition_point(|p| p.0 < last / 10.0);
    &points[start..]
}

/// Slope over the trailing decade.
pub fn trailing_slope(points: &[(f64, f64)]) -> Result<f64> {
    loglog_slope(trailing_decade(points))
}

/// Metrics at one recorded round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub regret: f64,
    pub ccv: f64,
    pub cv: f64,
    pub consensus_err: f64,
    pub bits: u64,
}

/// Streaming accumulator of all metrics.
///
/// Feed every executed round through [`MetricsTracker::observe`]; call
/// [`MetricsTracker::snapshot`] at rounds to be recorded.
pub struct MetricsTracker {
    n: usize,
    p: usize,
    executor: Executor,
    comparator: ComparatorLp,
    /// `sum_t <grad f_t(x_{i,t}), x_{i,t}>`.
    linear: Vec<f64>,
    /// `c_i = sum_t grad f_t(x_{i,t})`.
    grads: Vec<Vec<f64>>,
    ccv: Vec<f64>,
    /// `sum_t g_t(x_{i,t})`, stacked over agents.
    g_sum: Vec<Vec<f64>>,
    bits: u64,
    last_t: usize,
    consensus: f64,
}

impl MetricsTracker {
    pub fn new(set: &FeasibleSet, n: usize, executor: Executor) -> Result<Self> {
        let half_width = match *set {
            FeasibleSet::Box { half_width, .. } => half_width,
            FeasibleSet::Ball { .. } => {
                return Err(invalid("set", "the regret comparator needs a box decision set"))
            }
        };
        let p = set.dim();
        Ok(MetricsTracker {
            n,
            p,
            executor,
            comparator: ComparatorLp::new(p, half_width)?,
            linear: vec![0.0; n],
            grads: vec![vec![0.0; p]; n],
            ccv: vec![0.0; n],
            g_sum: vec![Vec::new(); n],
            bits: 0,
            last_t: 0,
            consensus: 0.0,
        })
    }

    pub fn for_problem<P: OnlineProblem>(problem: &P, executor: Executor) -> Result<Self> {
        Self::new(problem.set(), problem.agents(), executor)
    }

    pub fn comparator(&self) -> &ComparatorLp {
        &self.comparator
    }

    /// Accumulates round `log.t` with its realized data.
    pub fn observe<R: GradientRound + Sync>(&mut self, log: &RoundLog, round: &R) -> Result<()> {
        let n = self.n;
        let p = self.p;
        check_dim(n, log.decisions.len())?;
        for i in 0..n {
            let rows = round
                .affine_constraints(i)
                .ok_or_else(|| invalid("constraints", "the regret comparator needs affine constraints"))?;
            for (a, beta) in rows {
                self.comparator.add(Row::new(a, beta))?;
            }
        }
        let per_agent: Vec<(Vec<f64>, Vec<f64>)> = self.executor.map_range(n, |i| {
            let x = &log.decisions[i];
            let mut grad = vec![0.0; p];
            let mut g = Vec::new();
            for j in 0..n {
                for (a, b) in grad.iter_mut().zip(round.loss_grad(j, x)) {
                    *a += b;
                }
                g.extend(round.constraint(j, x));
            }
            for a in grad.iter_mut() {
                *a /= n as f64;
            }
            (grad, g)
        });
        for (i, (grad, g)) in per_agent.into_iter().enumerate() {
            let x = &log.decisions[i];
            self.linear[i] += dot(&grad, x);
            for (c, gk) in self.grads[i].iter_mut().zip(&grad) {
                *c += gk;
            }
            self.ccv[i] += positive_norm(&g);
            if self.g_sum[i].is_empty() {
                self.g_sum[i] = g;
            } else {
                check_dim(self.g_sum[i].len(), g.len())?;
                for (s, gk) in self.g_sum[i].iter_mut().zip(&g) {
                    *s += gk;
                }
            }
        }
        self.bits += log.bits;
        self.consensus = consensus_error(&log.decisions);
        self.last_t = log.t;
        Ok(())
    }

    /// Per-agent comparator values `min_{x in X_t} <c_i, x>`.
    pub fn comparator_values(&self) -> Result<Vec<f64>> {
        let values = self
            .executor
            .map(&self.grads, |c| self.comparator.minimize(c).map(|s| s.value));
        values.into_iter().collect()
    }

    pub fn snapshot(&self) -> Result<MetricsRow> {
        let regret = net_regret(&self.linear, &self.comparator_values()?)?;
        let cv = self.g_sum.iter().map(|s| positive_norm(s)).sum::<f64>() / self.n as f64;
        Ok(MetricsRow {
            t: self.last_t,
            regret,
            ccv: net_ccv(&self.ccv),
            cv,
            consensus_err: self.consensus,
            bits: self.bits,
        })
    }

    pub fn gradient_sums(&self) -> &[Vec<f64>] {
        &self.grads
    }
}
