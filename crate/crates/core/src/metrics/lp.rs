//! Small dense linear programs over a box.
//!
//! `min <c, x>` subject to `<a_k, x> <= beta_k` and `|x_j| <= h`. The solver
//! runs the primal simplex method with Bland's rule on the dual
//!
//! ```text
//! min  d^T y   s.t.  G^T y = -c,  y >= 0,      G = [A; I; -I],  d = [beta; h; h]
//! ```
//!
//! whose simplex multipliers are the primal minimizer. Picking, per
//! coordinate, the box row whose sign matches `-c` gives a feasible starting
//! basis, so no phase one is needed. An unbounded dual certifies that the
//! primal is infeasible.

use crate::error::{check_dim, invalid, Error, Result};

/// Certification tolerance on the duality gap and primal feasibility.
pub const CERT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;

/// Half-space `<a, x> <= beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub a: Vec<f64>,
    pub beta: f64,
}

impl Row {
    pub fn new(a: Vec<f64>, beta: f64) -> Self {
        Row { a, beta }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `M z = rhs` for a small dense `p x p` matrix given by columns.
fn solve_dense(cols: &[Vec<f64>], rhs: &[f64], transpose: bool) -> Option<Vec<f64>> {
    let p = rhs.len();
    // Row-major augmented matrix.
    let mut m = vec![0.0; p * (p + 1)];
    for r in 0..p {
        for c in 0..p {
            m[r * (p + 1) + c] = if transpose { cols[r][c] } else { cols[c][r] };
        }
        m[r * (p + 1) + p] = rhs[r];
    }
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&a, &b| m[a * (p + 1) + k].abs().total_cmp(&m[b * (p + 1) + k].abs()))?;
        if m[piv * (p + 1) + k].abs() < 1e-300 {
            return None;
        }
        if piv != k {
            for c in 0..=p {
                m.swap(k * (p + 1) + c, piv * (p + 1) + c);
            }
        }
        let d = m[k * (p + 1) + k];
        for r in (k + 1)..p {
            let f = m[r * (p + 1) + k] / d;
            if f != 0.0 {
                for c in k..=p {
                    m[r * (p + 1) + c] -= f * m[k * (p + 1) + c];
                }
            }
        }
    }
    let mut z = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = m[k * (p + 1) + p];
        for c in (k + 1)..p {
            s -= m[k * (p + 1) + c] * z[c];
        }
        z[k] = s / m[k * (p + 1) + k];
    }
    Some(z)
}

/// Drops exact duplicates, zero rows that always hold, and rows implied by
/// the box alone (`h ||a||_1 <= beta`). Fails if a zero row demands
/// `0 <= beta < 0`.
pub fn prune_rows(half_width: f64, rows: &[Row]) -> Result<Vec<Row>> {
    let mut kept: Vec<Row> = Vec::with_capacity(rows.len());
    for r in rows {
        let l1: f64 = r.a.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            if r.beta < 0.0 {
                return Err(Error::Infeasible);
            }
            continue;
        }
        if half_width * l1 <= r.beta {
            continue;
        }
        kept.push(r.clone());
    }
    kept.sort_by(|x, y| {
        x.a.iter()
            .zip(&y.a)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.beta.total_cmp(&y.beta))
    });
    kept.dedup();
    Ok(kept)
}

/// Exact minimizer of `<c, x>` over `{|x_j| <= h} ∩ rows`.
pub fn solve_lp(c: &[f64], half_width: f64, rows: &[Row]) -> Result<LpSolution> {
    let p = c.len();
    if p == 0 {
        return Err(invalid("c", "objective must be nonempty"));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(invalid("half_width", format!("{half_width} must be positive")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective"));
    }
    for r in rows {
        check_dim(p, r.a.len())?;
        if !r.beta.is_finite() || r.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constraint row"));
        }
    }
    let rows = prune_rows(half_width, rows)?;
    let m = rows.len();
    let k_total = m + 2 * p;

    // Dual column j is row j of G.
    let g_col = |j: usize| -> Vec<f64> {
        if j < m {
            rows[j].a.clone()
        } else {
            let k = (j - m) % p;
            let mut e = vec![0.0; p];
            e[k] = if j < m + p { 1.0 } else { -1.0 };
            e
        }
    };
    let d = |j: usize| if j < m { rows[j].beta } else { half_width };
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();

    let mut basis: Vec<usize> = (0..p)
        .map(|k| if neg_c[k] >= 0.0 { m + k } else { m + p + k })
        .collect();
    let max_pivots = 50 * (k_total + 10) * (p + 1);
    let mut pivots = 0;
    loop {
        let cols: Vec<Vec<f64>> = basis.iter().map(|&j| g_col(j)).collect();
        let d_b: Vec<f64> = basis.iter().map(|&j| d(j)).collect();
        let y_b = solve_dense(&cols, &neg_c, false)
            .ok_or_else(|| Error::Uncertified("singular basis".into()))?;
        let pi = solve_dense(&cols, &d_b, true)
            .ok_or_else(|| Error::Uncertified("singular basis".into()))?;
        let scale = 1.0 + pi.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let entering = (0..k_total)
            .filter(|j| !basis.contains(j))
            .find(|&j| d(j) - dot(&g_col(j), &pi) < -PIVOT_TOL * scale);
        let Some(j_in) = entering else {
            return certify(c, half_width, &rows, pi, &basis, &y_b, d_b, pivots);
        };
        if pivots >= max_pivots {
            return Err(Error::Uncertified(format!("no convergence after {pivots} pivots")));
        }
        let w = solve_dense(&cols, &g_col(j_in), false)
            .ok_or_else(|| Error::Uncertified("singular basis".into()))?;
        let mut leave: Option<(usize, f64)> = None;
        for (pos, (&wk, &yk)) in w.iter().zip(&y_b).enumerate() {
            if wk <= PIVOT_TOL {
                continue;
            }
            let ratio = yk.max(0.0) / wk;
            leave = match leave {
                None => Some((pos, ratio)),
                Some((bp, br)) => {
                    if ratio < br || (ratio == br && basis[pos] < basis[bp]) {
                        Some((pos, ratio))
                    } else {
                        Some((bp, br))
                    }
                }
            };
        }
        let Some((pos, _)) = leave else {
            // Dual unbounded below: the primal has no feasible point.
            return Err(Error::Infeasible);
        };
        basis[pos] = j_in;
        pivots += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn certify(
    c: &[f64],
    half_width: f64,
    rows: &[Row],
    x: Vec<f64>,
    basis: &[usize],
    y_b: &[f64],
    d_b: Vec<f64>,
    pivots: usize,
) -> Result<LpSolution> {
    let scale = 1.0 + x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let box_ok = x.iter().all(|v| v.abs() <= half_width + CERT_TOL * scale);
    let rows_ok = rows
        .iter()
        .all(|r| r.eval(&x) <= r.beta + CERT_TOL * (1.0 + r.beta.abs()) * scale);
    let dual_ok = y_b.iter().all(|v| *v >= -CERT_TOL);
    let value = dot(c, &x);
    let dual_value = -dot(&d_b, y_b);
    let gap = (value - dual_value).abs();
    if !(box_ok && rows_ok && dual_ok) || gap > CERT_TOL * (1.0 + value.abs()) {
        return Err(Error::Uncertified(format!(
            "basis {basis:?}: primal ok {}, dual ok {dual_ok}, gap {gap:e}",
            box_ok && rows_ok
        )));
    }
    // Snap to the box to remove rounding residue.
    let x = x.into_iter().map(|v| v.clamp(-half_width, half_width)).collect::<Vec<_>>();
    Ok(LpSolution {
        value: dot(c, &x),
        x,
        pivots,
    })
}

/// Incremental comparator over a growing set of half-spaces.
///
/// A new row is kept only if it cuts the current region, which is decided
/// by maximizing its left-hand side over that region. Discarded rows stay
/// implied as the region only shrinks, so minima over the kept rows equal
/// minima over all rows seen.
#[derive(Debug, Clone)]
pub struct ComparatorLp {
    dim: usize,
    half_width: f64,
    rows: Vec<Row>,
    seen: usize,
    prune_at: usize,
}

impl ComparatorLp {
    pub fn new(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid("half_width", format!("{half_width} must be positive")));
        }
        Ok(ComparatorLp {
            dim,
            half_width,
            rows: Vec::new(),
            seen: 0,
            prune_at: 64,
        })
    }

    /// Rows currently kept.
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Rows offered so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    fn max_over(&self, a: &[f64], rows: &[Row]) -> Result<f64> {
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        Ok(-solve_lp(&neg, self.half_width, rows)?.value)
    }

    pub fn add(&mut self, row: Row) -> Result<()> {
        check_dim(self.dim, row.a.len())?;
        self.seen += 1;
        let l1: f64 = row.a.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            return if row.beta < 0.0 { Err(Error::Infeasible) } else { Ok(()) };
        }
        if self.half_width * l1 <= row.beta || self.rows.contains(&row) {
            return Ok(());
        }
        if self.max_over(&row.a, &self.rows)? <= row.beta {
            return Ok(());
        }
        self.rows.push(row);
        if self.rows.len() >= self.prune_at {
            self.prune()?;
            self.prune_at = (2 * self.rows.len()).max(64);
        }
        Ok(())
    }

    /// Removes kept rows implied by the others.
    fn prune(&mut self) -> Result<()> {
        let mut k = 0;
        while k < self.rows.len() {
            let row = self.rows.remove(k);
            if self.max_over(&row.a, &self.rows)? > row.beta {
                self.rows.insert(k, row);
                k += 1;
            }
        }
        Ok(())
    }

    pub fn minimize(&self, c: &[f64]) -> Result<LpSolution> {
        check_dim(self.dim, c.len())?;
        solve_lp(c, self.half_width, &self.rows)
    }
}
