//! Zeroth-order gradient estimators built from function values at points
//! perturbed along a uniformly random unit direction.
//!
//! For a scalar loss the estimate is a vector; for an `m`-valued constraint
//! it is a `p x m` matrix whose column `k` estimates the gradient of `g_k`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};

/// A direction drawn uniformly from the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSample(Vec<f64>);

impl SphereSample {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for SphereSample {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform draw from the unit sphere in `p` dimensions (normalized
/// Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> SphereSample {
    assert!(p >= 1, "sphere dimension must be positive");
    loop {
        let g: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return SphereSample(g.into_iter().map(|v| v / norm).collect());
        }
    }
}

/// Column-major `p x m` estimate of a constraint Jacobian transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GradMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GradMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from columns, one per constraint component.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            check_dim(rows, c.len())?;
            data.extend_from_slice(c);
        }
        Ok(GradMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.rows..(k + 1) * self.rows]
    }

    /// `self * v` for `v` in `R^m`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, v.len())?;
        let mut out = vec![0.0; self.rows];
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(self.column(k)) {
                *o += c * vk;
            }
        }
        Ok(out)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(invalid("delta", format!("{delta} must be positive")))
    }
}

fn scaled_direction(coef: f64, u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| coef * v).collect()
}

/// `(p / delta) f(x + delta u) u`.
pub fn one_point_f(f_perturbed: f64, u: &[f64], p: usize, delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    check_dim(p, u.len())?;
    Ok(scaled_direction(p as f64 / delta * f_perturbed, u))
}

/// Column `k` is `(p / delta) g_k(x + delta u) u`.
pub fn one_point_g(g_perturbed: &[f64], u: &[f64], p: usize, delta: f64) -> Result<GradMatrix> {
    check_delta(delta)?;
    check_dim(p, u.len())?;
    let coef = p as f64 / delta;
    let cols: Vec<Vec<f64>> = g_perturbed
        .iter()
        .map(|gk| scaled_direction(coef * gk, u))
        .collect();
    GradMatrix::from_columns(p, &cols)
}

/// `(p / delta) (f(x + delta u) - f(x)) u`.
pub fn two_point_f(
    f_perturbed: f64,
    f_center: f64,
    u: &[f64],
    p: usize,
    delta: f64,
) -> Result<Vec<f64>> {
    check_delta(delta)?;
    check_dim(p, u.len())?;
    Ok(scaled_direction(p as f64 / delta * (f_perturbed - f_center), u))
}

/// Columnwise two-point estimate of the constraint gradients.
pub fn two_point_g(
    g_perturbed: &[f64],
    g_center: &[f64],
    u: &[f64],
    p: usize,
    delta: f64,
) -> Result<GradMatrix> {
    check_delta(delta)?;
    check_dim(p, u.len())?;
    check_dim(g_perturbed.len(), g_center.len())?;
    let coef = p as f64 / delta;
    let cols: Vec<Vec<f64>> = g_perturbed
        .iter()
        .zip(g_center)
        .map(|(a, b)| scaled_direction(coef * (a - b), u))
        .collect();
    GradMatrix::from_columns(p, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{stream, Purpose};
    use approx::assert_relative_eq;

    fn rng() -> crate::streams::StreamRng {
        stream(5, Purpose::Test, 0, 0)
    }

    #[test]
    fn sphere_is_unit() {
        let mut r = rng();
        for p in 1..6 {
            for _ in 0..200 {
                let u = sample_sphere(p, &mut r);
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_sphere_is_balanced() {
        let mut r = rng();
        let draws = 10_000;
        let mut plus = 0;
        for _ in 0..draws {
            let u = sample_sphere(1, &mut r);
            assert!(u[0] == 1.0 || u[0] == -1.0);
            if u[0] > 0.0 {
                plus += 1;
            }
        }
        let freq = plus as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn sphere_mean_is_centered() {
        let mut r = rng();
        let draws = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..draws {
            let u = sample_sphere(2, &mut r);
            mean[0] += u[0];
            mean[1] += u[1];
        }
        for m in mean {
            assert!((m / draws as f64).abs() <= 4.0 / (draws as f64).sqrt());
        }
    }

    #[test]
    fn one_point_examples() {
        assert_eq!(one_point_f(3.0, &[0.0, 1.0], 2, 0.5).unwrap(), vec![0.0, 12.0]);
        assert_eq!(one_point_f(0.0, &[0.6, 0.8], 2, 0.5).unwrap(), vec![0.0, 0.0]);
        assert_eq!(one_point_f(-2.0, &[1.0], 1, 1.0).unwrap(), vec![-2.0]);
        assert!(one_point_f(1.0, &[1.0], 1, 0.0).is_err());

        let g = one_point_g(&[1.0, -1.0], &[1.0, 0.0], 2, 1.0).unwrap();
        assert_eq!(g.column(0), &[2.0, 0.0]);
        assert_eq!(g.column(1), &[-2.0, 0.0]);
        assert_eq!(one_point_g(&[0.0, 0.0], &[0.6, 0.8], 2, 0.1).unwrap().norm(), 0.0);
        assert!(one_point_g(&[1.0], &[1.0], 1, -1.0).is_err());

        let u = [0.6, 0.8];
        let single = one_point_g(&[2.5], &u, 2, 0.3).unwrap();
        assert_eq!(single.column(0), one_point_f(2.5, &u, 2, 0.3).unwrap().as_slice());
    }

    #[test]
    fn two_point_examples() {
        assert_eq!(two_point_f(1.5, 1.5, &[0.6, 0.8], 2, 0.5).unwrap(), vec![0.0, 0.0]);
        let est = two_point_f(3.0, 2.5, &[1.0, 0.0], 2, 0.5).unwrap();
        assert_relative_eq!(est[0], 2.0, epsilon = 1e-15);
        assert_eq!(est[1], 0.0);

        let u = [0.6, 0.8];
        assert_eq!(two_point_g(&[1.0, 2.0], &[1.0, 2.0], &u, 2, 0.2).unwrap().norm(), 0.0);
        let single = two_point_g(&[0.7], &[0.2], &u, 2, 0.2).unwrap();
        assert_eq!(single.column(0), two_point_f(0.7, 0.2, &u, 2, 0.2).unwrap().as_slice());
        assert!(two_point_g(&[1.0], &[1.0, 2.0], &u, 2, 0.2).is_err());
    }

    #[test]
    fn mul_vec_combines_columns() {
        let g = GradMatrix::from_columns(2, &[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
        assert_eq!(g.mul_vec(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(g.mul_vec(&[2.0, 1.0]).unwrap(), vec![5.0, 3.0]);
        assert!(g.mul_vec(&[1.0]).is_err());
    }

    #[test]
    fn affine_constraint_recovers_rows() {
        // g(x) = Bx - b; column k of the averaged estimate approaches row k of B.
        let b_mat = [[1.0, -2.0], [0.5, 0.25]];
        let b_vec = [0.3, -0.1];
        let g = |x: &[f64]| -> Vec<f64> {
            (0..2)
                .map(|k| b_mat[k][0] * x[0] + b_mat[k][1] * x[1] - b_vec[k])
                .collect()
        };
        let x = [0.4, -0.2];
        let delta = 0.1;
        let mut r = rng();
        let draws = 200_000;
        let mut acc = [[0.0; 2]; 2];
        for _ in 0..draws {
            let u = sample_sphere(2, &mut r);
            let e = [x[0] + delta * u[0], x[1] + delta * u[1]];
            let est = two_point_g(&g(&e), &g(&x), &u, 2, delta).unwrap();
            for k in 0..2 {
                acc[k][0] += est.column(k)[0];
                acc[k][1] += est.column(k)[1];
            }
        }
        for k in 0..2 {
            for c in 0..2 {
                // each coordinate of p<B_k,u>u has variance <= p^2 ||B_k||^2 / p
                let sd = (2.0 * (b_mat[k][0].powi(2) + b_mat[k][1].powi(2))).sqrt();
                let se = sd / (draws as f64).sqrt();
                assert!((acc[k][c] / draws as f64 - b_mat[k][c]).abs() <= 5.0 * se);
            }
        }
    }

    #[test]
    fn norm_caps() {
        let mut r = rng();
        let (p, delta, f1) = (3, 0.2, 4.0);
        for _ in 0..1000 {
            let u = sample_sphere(p, &mut r);
            let f: f64 = r.random_range(-f1..=f1);
            let est = one_point_f(f, &u, p, delta).unwrap();
            let norm = est.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= p as f64 * f1 / delta * (1.0 + 1e-12));

            let gv: Vec<f64> = (0..2).map(|_| r.random_range(-1.0..1.0)).collect();
            let gn = gv.iter().map(|v| v * v).sum::<f64>().sqrt();
            let est = one_point_g(&gv, &u, p, delta).unwrap();
            assert!(est.norm() <= p as f64 * gn / delta * (1.0 + 1e-12));

            // f(x) = <c, x> is ||c||-Lipschitz.
            let c = [1.0, -2.0, 0.5];
            let lip = (1.0f64 + 4.0 + 0.25).sqrt();
            let df: f64 = c.iter().zip(u.iter()).map(|(a, b)| a * b * delta).sum();
            let est = two_point_f(df, 0.0, &u, p, delta).unwrap();
            let norm = est.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= p as f64 * lip * (1.0 + 1e-12));
        }
    }
}
