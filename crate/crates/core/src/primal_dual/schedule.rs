//! Polynomial parameter schedules and their admissible ranges.

use serde::{Deserialize, Serialize};

use crate::problems::ProblemConstants;

/// Slack for closed-interval checks on exponents computed in floating point.
const CLOSED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Exponents {
    /// `alpha_t = alpha0 t^-theta1`, `gamma_t = gamma0 t^theta2`,
    /// `xi_t = t^-theta3`, `delta_t = r t^-theta3`, `s_t = s0 t^-theta4`.
    OnePoint {
        theta1: f64,
        theta2: f64,
        theta3: f64,
        theta4: f64,
    },
    /// `alpha_t = alpha0 t^-theta1`, `gamma_t = gamma0 / alpha_t`,
    /// `xi_t = alpha_t`, `delta_t = r alpha_t`, `s_t = s0 t^-theta2`.
    TwoPoint { theta1: f64, theta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub exponents: Exponents,
    pub alpha0: f64,
    pub gamma0: f64,
    pub s0: f64,
    /// Inner radius `r` of the decision set.
    pub inner_radius: f64,
    /// Round `t` is evaluated at index `t + offset`.
    pub offset: usize,
}

/// Scalars used in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundScalars {
    pub alpha: f64,
    pub gamma: f64,
    pub xi: f64,
    pub delta: f64,
    pub scale: f64,
}

/// `(theta2, theta3) = (2 theta1 - 3/2, theta1 - 1/2)`, the choice that
/// equalizes the three regret exponents; defined for `theta1 in (3/4, 5/6]`.
pub fn balanced_exponents(theta1: f64) -> Option<(f64, f64)> {
    (theta1 > 0.75 && theta1 <= 5.0 / 6.0 + CLOSED_TOL).then_some((2.0 * theta1 - 1.5, theta1 - 0.5))
}

impl Schedule {
    /// One-point schedule with balanced exponents for `theta1`.
    pub fn one_point_balanced(theta1: f64, alpha0: f64, gamma0: f64, s0: f64, r: f64) -> Option<Self> {
        let (theta2, theta3) = balanced_exponents(theta1)?;
        Some(Schedule {
            exponents: Exponents::OnePoint {
                theta1,
                theta2,
                theta3,
                theta4: 1.0,
            },
            alpha0,
            gamma0,
            s0,
            inner_radius: r,
            offset: 1,
        })
    }

    pub fn two_point(theta1: f64, alpha0: f64, gamma0: f64, s0: f64, r: f64) -> Self {
        Schedule {
            exponents: Exponents::TwoPoint { theta1, theta2: 1.0 },
            alpha0,
            gamma0,
            s0,
            inner_radius: r,
            offset: 1,
        }
    }

    /// Scalars at raw index `k` (no offset).
    pub fn at_index(&self, k: f64) -> RoundScalars {
        let r = self.inner_radius;
        match self.exponents {
            Exponents::OnePoint {
                theta1,
                theta2,
                theta3,
                theta4,
            } => {
                let xi = k.powf(-theta3);
                RoundScalars {
                    alpha: self.alpha0 * k.powf(-theta1),
                    gamma: self.gamma0 * k.powf(theta2),
                    xi,
                    delta: r * xi,
                    scale: self.s0 * k.powf(-theta4),
                }
            }
            Exponents::TwoPoint { theta1, theta2 } => {
                let alpha = self.alpha0 * k.powf(-theta1);
                RoundScalars {
                    alpha,
                    gamma: self.gamma0 / alpha,
                    xi: alpha,
                    delta: r * alpha,
                    scale: self.s0 * k.powf(-theta2),
                }
            }
        }
    }

    /// Scalars for round `t >= 1`.
    pub fn at(&self, t: usize) -> RoundScalars {
        self.at_index((t + self.offset) as f64)
    }

    /// Largest admissible `gamma0` for the given constants and dimension.
    pub fn gamma0_cap(&self, constants: &ProblemConstants, p: usize) -> f64 {
        let p = p as f64;
        match self.exponents {
            Exponents::OnePoint { .. } => {
                self.inner_radius.powi(2) / (2.0 * p * p * constants.f2.powi(2))
            }
            Exponents::TwoPoint { .. } => 1.0 / (4.0 * (p * p + 1.0) * constants.g2.powi(2)),
        }
    }

    /// Checks every admissibility condition. Problem-dependent conditions
    /// become warnings when `constants` is `None`.
    pub fn validate(&self, constants: Option<&ProblemConstants>, p: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                report.violations.push(msg);
            }
        };
        need(self.alpha0 > 0.0, format!("alpha0 = {} must be positive", self.alpha0));
        need(self.s0 > 0.0, format!("s0 = {} must be positive", self.s0));
        need(self.gamma0 > 0.0, format!("gamma0 = {} must be positive", self.gamma0));
        need(
            self.inner_radius > 0.0,
            format!("inner radius {} must be positive", self.inner_radius),
        );
        match self.exponents {
            Exponents::OnePoint {
                theta1,
                theta2,
                theta3,
                theta4,
            } => {
                need(theta1 > 0.0 && theta1 < 1.0, format!("theta1 = {theta1} not in (0, 1)"));
                need(
                    theta2 > 0.0 && theta2 < theta1 / 3.0,
                    format!("theta2 = {theta2} not in (0, theta1/3 = {})", theta1 / 3.0),
                );
                let hi = (theta1 - theta2) / 2.0;
                need(
                    theta3 > theta2 && theta3 <= hi + CLOSED_TOL,
                    format!("theta3 = {theta3} not in (theta2, (theta1 - theta2)/2 = {hi}]"),
                );
                need(theta4 >= 1.0, format!("theta4 = {theta4} must be >= 1"));
            }
            Exponents::TwoPoint { theta1, theta2 } => {
                need(theta1 > 0.0 && theta1 < 1.0, format!("theta1 = {theta1} not in (0, 1)"));
                need(theta2 >= 1.0, format!("theta2 = {theta2} must be >= 1"));
            }
        }
        let first = self.at(1);
        need(
            first.xi > 0.0 && first.xi < 1.0,
            format!(
                "first-round shrinkage xi = {} not in (0, 1); raise the offset",
                first.xi
            ),
        );
        match constants {
            Some(c) => {
                let cap = self.gamma0_cap(c, p);
                need(
                    self.gamma0 <= cap * (1.0 + CLOSED_TOL),
                    format!("gamma0 = {} exceeds its cap {cap}", self.gamma0),
                );
            }
            None => report
                .warnings
                .push("problem constants unknown; gamma0 cap not checked".to_string()),
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}
