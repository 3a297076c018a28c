//! Origin-symmetric decision sets, their shrunk copies `(1 - xi) X`, and
//! Euclidean projection onto them.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeasibleSet {
    /// `[-half_width, half_width]^dim`.
    Box { half_width: f64, dim: usize },
    /// Centered Euclidean ball.
    Ball { radius: f64, dim: usize },
}

impl FeasibleSet {
    pub fn cube(half_width: f64, dim: usize) -> Self {
        FeasibleSet::Box { half_width, dim }
    }

    pub fn ball(radius: f64, dim: usize) -> Self {
        FeasibleSet::Ball { radius, dim }
    }

    pub fn validate(&self) -> Result<()> {
        let (size, dim) = match *self {
            FeasibleSet::Box { half_width, dim } => (half_width, dim),
            FeasibleSet::Ball { radius, dim } => (radius, dim),
        };
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !(size.is_finite() && size > 0.0) {
            return Err(invalid("size", format!("{size} must be positive")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            FeasibleSet::Box { dim, .. } | FeasibleSet::Ball { dim, .. } => dim,
        }
    }

    /// Inner and outer radii `(r, R)`: `r B ⊆ X ⊆ R B`.
    pub fn radii(&self) -> (f64, f64) {
        match *self {
            FeasibleSet::Box { half_width, dim } => (half_width, half_width * (dim as f64).sqrt()),
            FeasibleSet::Ball { radius, .. } => (radius, radius),
        }
    }

    pub fn inner_radius(&self) -> f64 {
        self.radii().0
    }

    pub fn outer_radius(&self) -> f64 {
        self.radii().1
    }

    fn check_shrink(shrink: f64) -> Result<()> {
        if (0.0..1.0).contains(&shrink) {
            Ok(())
        } else {
            Err(invalid("shrink", format!("{shrink} is not in [0, 1)")))
        }
    }

    /// Euclidean projection onto `(1 - shrink) X`.
    pub fn project(&self, shrink: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.project_in_place(shrink, &mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, shrink: f64, x: &mut [f64]) -> Result<()> {
        Self::check_shrink(shrink)?;
        check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection input"));
        }
        match *self {
            FeasibleSet::Box { half_width, .. } => {
                let bound = (1.0 - shrink) * half_width;
                for v in x.iter_mut() {
                    *v = v.clamp(-bound, bound);
                }
            }
            FeasibleSet::Ball { radius, .. } => {
                let bound = (1.0 - shrink) * radius;
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > bound {
                    // Rounding can leave the rescaled point an ulp outside;
                    // shrink until it is inside so projection is idempotent.
                    let mut scale = bound / norm;
                    let orig = x.to_vec();
                    loop {
                        for (v, o) in x.iter_mut().zip(&orig) {
                            *v = o * scale;
                        }
                        if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= bound {
                            break;
                        }
                        scale *= 1.0 - f64::EPSILON;
                    }
                }
            }
        }
        Ok(())
    }

    /// Membership in `(1 - shrink) X` up to `tol` (per coordinate for
    /// boxes, in norm for balls).
    pub fn contains(&self, shrink: f64, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match *self {
            FeasibleSet::Box { half_width, .. } => {
                let bound = (1.0 - shrink) * half_width + tol;
                x.iter().all(|v| v.abs() <= bound)
            }
            FeasibleSet::Ball { radius, .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm <= (1.0 - shrink) * radius + tol
            }
        }
    }
}
