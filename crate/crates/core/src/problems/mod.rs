//! Online problems: per-round private losses and constraints.
//!
//! Algorithms only see [`BanditRound`], which answers value queries. The
//! gradient capability ([`GradientRound`]) is reserved for metrics and the
//! full-information reference.

mod localization;

pub use localization::{advance_target, LocalizationParams, LocalizationProblem, LocalizationRound};

use serde::{Deserialize, Serialize};

use crate::feasible_set::FeasibleSet;

/// Conservative bounds over the decision set: `|f| <= f1`, `||g|| <= f2`,
/// `||grad f|| <= g1`, `||grad g|| <= g2`, and `lipschitz` for `grad f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
    pub lipschitz: f64,
}

/// Value oracles for one round.
pub trait BanditRound {
    fn loss(&self, agent: usize, x: &[f64]) -> f64;
    fn constraint(&self, agent: usize, x: &[f64]) -> Vec<f64>;
}

/// Exact first-order information for one round.
pub trait GradientRound: BanditRound {
    fn loss_grad(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// Jacobian rows `d g_k / d x`, one per constraint component.
    fn constraint_jacobian(&self, agent: usize, x: &[f64]) -> Vec<Vec<f64>>;

    /// Rows `(a, beta)` meaning `<a, x> <= beta`, when the agent's
    /// constraints are affine.
    fn affine_constraints(&self, agent: usize) -> Option<Vec<(Vec<f64>, f64)>>;
}

pub trait OnlineProblem: Sync {
    type Round: GradientRound + Send + Sync;

    fn dim(&self) -> usize;
    fn agents(&self) -> usize;
    fn constraint_dim(&self, agent: usize) -> usize;
    fn set(&self) -> &FeasibleSet;
    fn constants(&self) -> ProblemConstants;

    /// Realizes the data of round `t >= 1`.
    fn round(&self, t: usize) -> Self::Round;

    /// A point with `g_t(x) <= -margin` for every round, if one is certified.
    fn slater_point(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}
