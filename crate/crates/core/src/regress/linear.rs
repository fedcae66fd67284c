//! Ridge (closed form) and lasso (cyclic coordinate descent) with an
//! unpenalized intercept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, solve, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.rows() });
    }
    Ok(())
}

/// Column means of `x` and the mean of `y`.
fn centering(x: &Matrix, y: &[f64]) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let means = (0..x.cols()).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
    (means, y.iter().sum::<f64>() / n)
}

/// Minimizes `||y - Xw - b||^2 + lambda ||w||^2` via the centered normal equations.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    check_xy(x, y)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (xm, ym) = centering(x, y);
    let d = x.cols();
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for (row, &yi) in x.iter_rows().zip(y) {
        for j in 0..d {
            xc[j] = row[j] - xm[j];
        }
        for a in 0..d {
            rhs[a] += xc[a] * (yi - ym);
            for b in 0..d {
                gram[a * d + b] += xc[a] * xc[b];
            }
        }
    }
    for a in 0..d {
        gram[a * d + a] += lambda;
    }
    let weights = solve(gram, rhs)?;
    let intercept = ym - dot(&weights, &xm);
    Ok(LinearModel { weights, intercept })
}

pub const LASSO_TOL: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes `(1/2n)||y - Xw - b||^2 + lambda ||w||_1`.
pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_lasso_traced(x, y, lambda).map(|(m, _)| m)
}

/// Lasso fit plus the objective value after every sweep.
pub fn fit_lasso_traced(x: &Matrix, y: &[f64], lambda: f64) -> Result<(LinearModel, Vec<f64>)> {
    check_xy(x, y)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lasso lambda must be >= 0, got {lambda}")));
    }
    let n = x.rows();
    let nf = n as f64;
    let d = x.cols();
    let (xm, ym) = centering(x, y);
    // column-major centered design
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| x.column(j).into_iter().map(|v| v - xm[j]).collect())
        .collect();
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c) / nf).collect();
    let mut w = vec![0.0; d];
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let objective = |resid: &[f64], w: &[f64]| {
        dot(resid, resid) / (2.0 * nf) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut trace = vec![objective(&resid, &w)];
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..d {
            if norms[j] <= 0.0 {
                continue;
            }
            let rho = dot(&cols[j], &resid) / nf + norms[j] * w[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, c) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * c;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push(objective(&resid, &w));
        if max_change < LASSO_TOL {
            let intercept = ym - dot(&w, &xm);
            return Ok((LinearModel { weights: w, intercept }, trace));
        }
    }
    Err(Error::NoConvergence {
        solver: "lasso coordinate descent",
        iterations: LASSO_MAX_SWEEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = rows
            .iter()
            .map(|r| 1.5 * r[0] - 0.7 * r[d - 1] + 3.0 + rng.random_range(-0.3..0.3))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn exact_line() {
        let x = Matrix::column_vector(&[1.0, 2.0, 3.0, 4.0]);
        let m = fit_ridge(&x, &[2.0, 4.0, 6.0, 8.0], 0.0).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn heavy_penalty_shrinks_to_mean() {
        let x = Matrix::column_vector(&[-1.5, -0.5, 0.5, 1.5]);
        let y = [1.0, 2.0, 4.0, 9.0];
        let m = fit_ridge(&x, &y, 1e9).unwrap();
        assert!(m.weights[0].abs() < 1e-6);
        assert!((m.intercept - 4.0).abs() < 1e-6);
    }

    #[test]
    fn matches_independent_solve() {
        // centered 3x2 design so the intercept is exactly mean(y) = 0
        let rows = [[1.0, -2.0], [0.0, 3.0], [-1.0, -1.0]];
        let y = [2.0, -1.0, -1.0];
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_ridge(&x, &y, 1.0).unwrap();
        let xa = DMatrix::from_row_slice(3, 2, &rows.concat());
        let lhs = xa.transpose() * &xa + DMatrix::identity(2, 2);
        let rhs = xa.transpose() * DVector::from_row_slice(&y);
        let w = lhs.lu().solve(&rhs).unwrap();
        assert!((m.weights[0] - w[0]).abs() < 1e-8);
        assert!((m.weights[1] - w[1]).abs() < 1e-8);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn normal_equation_residual() {
        for seed in 0..20 {
            let (x, y) = random_problem(seed, 15, 4);
            let lambda = [0.0, 0.1, 3.0, 100.0][seed as usize % 4];
            let m = fit_ridge(&x, &y, lambda).unwrap();
            let d = x.cols();
            for a in 0..d {
                let mut lhs = lambda * m.weights[a];
                let mut rhs = 0.0;
                for (row, yi) in x.iter_rows().zip(&y) {
                    lhs += row[a] * dot(row, &m.weights);
                    rhs += row[a] * (yi - m.intercept);
                }
                assert!((lhs - rhs).abs() < 1e-8, "seed {seed}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn singular_without_penalty() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0), Err(Error::Singular)));
        assert!(fit_ridge(&x, &[1.0, 2.0, 3.0], 0.5).is_ok());
    }

    #[test]
    fn lasso_shutoff_at_lambda_max() {
        let (x, y) = random_problem(3, 20, 3);
        let n = y.len() as f64;
        let ym = y.iter().sum::<f64>() / n;
        let lambda_max = (0..3)
            .map(|j| {
                let c = x.column(j);
                let cm = c.iter().sum::<f64>() / n;
                c.iter().zip(&y).map(|(a, b)| (a - cm) * (b - ym)).sum::<f64>().abs() / n
            })
            .fold(0.0, f64::max);
        let m = fit_lasso(&x, &y, lambda_max * (1.0 + 1e-9)).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!((m.intercept - ym).abs() < 1e-12);
        let m = fit_lasso(&x, &y, lambda_max * 0.9).unwrap();
        assert!(m.weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn lasso_without_penalty_is_ols() {
        let (x, y) = random_problem(5, 40, 3);
        let l = fit_lasso(&x, &y, 0.0).unwrap();
        let r = fit_ridge(&x, &y, 0.0).unwrap();
        for (a, b) in l.weights.iter().zip(&r.weights) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((l.intercept - r.intercept).abs() < 1e-6);
    }

    #[test]
    fn lasso_orthonormal_closed_form() {
        // columns centered, orthogonal, with x_j'x_j / n = 1
        let rows = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let y = [3.0, 1.0, -0.5, -2.5];
        let x = Matrix::from_rows(&rows).unwrap();
        for lambda in [0.0, 0.2, 0.9, 1.5, 3.0] {
            let m = fit_lasso(&x, &y, lambda).unwrap();
            for j in 0..2 {
                let z = x.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / 4.0;
                assert!((m.weights[j] - soft_threshold(z, lambda)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lasso_objective_descends() {
        for seed in 0..10 {
            let (x, y) = random_problem(seed, 25, 5);
            let (_, trace) = fit_lasso_traced(&x, &y, 0.05 * (seed + 1) as f64).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
