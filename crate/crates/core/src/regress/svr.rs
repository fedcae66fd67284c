//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved in its doubled form (one variable per tube side) by
//! two-coefficient sequential minimal optimization with second-order working
//! set selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const KKT_TOL: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 100_000;
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvrModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.support
            .iter_rows()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, row, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

/// Dual solution: `beta[i] = alpha[i] - alpha*[i]` and the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// `0.5 b'Kb - y'b + eps |b|_1`, the quantity the solver minimizes.
pub fn dual_objective(kernel: &Matrix, y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel.get(i, j);
        }
    }
    0.5 * quad - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
}

pub fn kernel_matrix(x: &Matrix, gamma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

fn check_params(p: &SvrParams) -> Result<()> {
    if !(p.c.is_finite() && p.c > 0.0) {
        return Err(Error::InvalidParameter(format!("SVR C must be positive, got {}", p.c)));
    }
    if !(p.gamma.is_finite() && p.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("SVR gamma must be positive, got {}", p.gamma)));
    }
    if !(p.epsilon.is_finite() && p.epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("SVR epsilon must be >= 0, got {}", p.epsilon)));
    }
    Ok(())
}

pub fn solve_dual(x: &Matrix, y: &[f64], p: &SvrParams) -> Result<DualSolution> {
    check_params(p)?;
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.rows() });
    }
    let n = y.len();
    let l = 2 * n;
    let k = kernel_matrix(x, p.gamma);
    let c = p.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kk = |s: usize, t: usize| k.get(s % n, t % n);
    let mut a = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { p.epsilon - y[t] } else { p.epsilon + y[t - n] })
        .collect();
    let up = |t: usize, a: &[f64]| if t < n { a[t] < c } else { a[t] > 0.0 };
    let low = |t: usize, a: &[f64]| if t < n { a[t] > 0.0 } else { a[t] < c };

    let mut iterations = 0;
    loop {
        // i: the most violating index that can move up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if up(t, &a) {
                let v = -sign(t) * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // j: second-order choice among indices that can move down
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..l {
            if !low(t, &a) {
                continue;
            }
            let v = sign(t) * grad[t];
            gmax2 = gmax2.max(v);
            if i == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (kk(i, i) + kk(t, t) - 2.0 * kk(i, t)).max(TAU);
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < KKT_TOL || j == usize::MAX {
            break;
        }
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                solver: "SVR dual",
                iterations: MAX_ITERATIONS,
            });
        }

        let (old_i, old_j) = (a[i], a[j]);
        let quad = (kk(i, i) + kk(j, j) - 2.0 * kk(i, j)).max(TAU);
        if sign(i) != sign(j) {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        for t in 0..l {
            let st = sign(t);
            grad[t] += st * (sign(i) * kk(t, i) * di + sign(j) * kk(t, j) * dj);
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if a[t] >= c {
            if t >= n {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a[t] <= 0.0 {
            if t < n {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { 0.5 * (ub + lb) };
    let beta = (0..n).map(|t| a[t] - a[t + n]).collect();
    Ok(DualSolution {
        beta,
        bias: -rho,
        iterations,
    })
}

pub fn fit_svr(x: &Matrix, y: &[f64], p: &SvrParams) -> Result<SvrModel> {
    let sol = solve_dual(x, y, p)?;
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.beta[i] != 0.0).collect();
    Ok(SvrModel {
        support: x.select_rows(&keep),
        coef: keep.iter().map(|&i| sol.beta[i]).collect(),
        bias: sol.bias,
        gamma: p.gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(seed: u64, n: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.6 + rng.random_range(0.0..0.3)).collect();
        let y = xs.iter().map(|x| (x * 1.3).sin() * 2.0 + rng.random_range(-0.2..0.2)).collect();
        (Matrix::column_vector(&xs), y)
    }

    /// Exact dual minimum by enumerating which coefficients sit at -C, 0, +C
    /// or are free with a given sign, solving the equality-constrained
    /// stationarity system on each face.
    fn brute_force_dual(k: &Matrix, y: &[f64], c: f64, eps: f64) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        let total = 5usize.pow(n as u32);
        for code in 0..total {
            let mut state = vec![0u8; n];
            let mut rest = code;
            for s in state.iter_mut() {
                *s = (rest % 5) as u8;
                rest /= 5;
            }
            let fixed_val = |s: u8| match s {
                0 => Some(-c),
                2 => Some(0.0),
                4 => Some(c),
                _ => None,
            };
            let free: Vec<usize> = (0..n).filter(|&i| fixed_val(state[i]).is_none()).collect();
            let mut beta: Vec<f64> = state.iter().map(|&s| fixed_val(s).unwrap_or(0.0)).collect();
            let fixed_sum: f64 = beta.iter().sum();
            if free.is_empty() {
                if fixed_sum.abs() > 1e-12 {
                    continue;
                }
            } else {
                let f = free.len();
                let mut a = DMatrix::<f64>::zeros(f + 1, f + 1);
                let mut b = DVector::<f64>::zeros(f + 1);
                for (r, &i) in free.iter().enumerate() {
                    let s = if state[i] == 1 { -1.0 } else { 1.0 };
                    for (q, &j) in free.iter().enumerate() {
                        a[(r, q)] = k.get(i, j);
                    }
                    a[(r, f)] = 1.0;
                    a[(f, r)] = 1.0;
                    let fixed_part: f64 = (0..n)
                        .filter(|j| !free.contains(j))
                        .map(|j| k.get(i, j) * beta[j])
                        .sum();
                    b[r] = y[i] - eps * s - fixed_part;
                }
                b[f] = -fixed_sum;
                let Some(sol) = a.lu().solve(&b) else { continue };
                let mut ok = true;
                for (r, &i) in free.iter().enumerate() {
                    let v = sol[r];
                    let feasible = if state[i] == 1 { v <= 1e-12 && v >= -c - 1e-12 } else { v >= -1e-12 && v <= c + 1e-12 };
                    ok &= feasible;
                    beta[i] = v;
                }
                if !ok {
                    continue;
                }
            }
            best = best.min(dual_objective(k, y, &beta, eps));
        }
        best
    }

    #[test]
    fn constant_target() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, -1.0], [3.0, 2.0]]).unwrap();
        for eps in [0.0, 0.1, 1.0] {
            let p = SvrParams { c: 10.0, gamma: 0.5, epsilon: eps };
            let sol = solve_dual(&x, &[4.2; 4], &p).unwrap();
            assert!(sol.beta.iter().all(|&b| b == 0.0));
            let m = fit_svr(&x, &[4.2; 4], &p).unwrap();
            assert!((m.predict_row(&[9.0, 9.0]) - 4.2).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_matches_enumeration() {
        for seed in 0..6 {
            let (x, y) = fixture(seed, 6);
            for (c, gamma, eps) in [(1.0, 0.5, 0.1), (10.0, 1.0, 0.2), (0.3, 0.2, 0.05)] {
                let p = SvrParams { c, gamma, epsilon: eps };
                let sol = solve_dual(&x, &y, &p).unwrap();
                let k = kernel_matrix(&x, gamma);
                let got = dual_objective(&k, &y, &sol.beta, eps);
                let oracle = brute_force_dual(&k, &y, c, eps);
                let rel = (got - oracle).abs() / oracle.abs().max(1e-12);
                assert!(rel < 1e-3, "seed {seed} C={c}: {got} vs {oracle}");
                assert!(sol.beta.iter().all(|b| b.abs() <= c + 1e-12));
                assert!(sol.beta.iter().sum::<f64>().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_support_points_inside_tube() {
        for seed in 0..5 {
            let (x, y) = fixture(100 + seed, 30);
            let p = SvrParams { c: 5.0, gamma: 0.8, epsilon: 0.3 };
            let sol = solve_dual(&x, &y, &p).unwrap();
            let m = fit_svr(&x, &y, &p).unwrap();
            for i in 0..y.len() {
                if sol.beta[i] == 0.0 {
                    let r = (m.predict_row(x.row(i)) - y[i]).abs();
                    assert!(r <= p.epsilon + 2.0 * KKT_TOL, "residual {r}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let (x, y) = fixture(1, 5);
        assert!(solve_dual(&x, &y, &SvrParams { c: 0.0, gamma: 1.0, epsilon: 0.1 }).is_err());
        assert!(solve_dual(&x, &y, &SvrParams { c: 1.0, gamma: -1.0, epsilon: 0.1 }).is_err());
    }
}
