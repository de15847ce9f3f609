//! Lasso by cyclic coordinate descent with K-fold cross-validation.
//!
//! Columns are standardized internally (mean 0, population SD 1) and the
//! response is centered; the loss is `1/(2n) |y - X b|^2 + lambda |b|_1` on
//! that scale. Coefficients are reported on the original scale.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_constant, mean, Coefficient, DesignMatrix, LassoPath, RegressionFit};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoOptions {
    pub folds: usize,
    pub seed: u64,
    pub n_lambda: usize,
    /// Smallest penalty on the path as a fraction of the largest.
    pub lambda_min_ratio: f64,
    /// Choose the largest penalty within one standard error of the CV
    /// minimum instead of the minimizer.
    pub one_se: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            one_se: false,
        }
    }
}

/// Convergence threshold on coefficient updates, relative to the SD of y.
const PATH_TOL: f64 = 1e-9;
const FINAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100_000;

struct Standardized {
    x_mean: Vec<f64>,
    x_sd: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    z: Vec<Vec<f64>>,
    yc: Vec<f64>,
}

impl Standardized {
    fn new(x: &DesignMatrix, y: &[f64]) -> Self {
        let n = y.len() as f64;
        let y_mean = mean(y);
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let y_scale = (yc.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        let mut x_mean = Vec::new();
        let mut x_sd = Vec::new();
        let mut z = Vec::new();
        for c in &x.columns {
            let m = mean(c);
            let sd = if is_constant(c) {
                0.0
            } else {
                (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
            };
            x_mean.push(m);
            x_sd.push(sd);
            z.push(if sd > 0.0 {
                c.iter().map(|v| (v - m) / sd).collect()
            } else {
                vec![0.0; c.len()]
            });
        }
        Self { x_mean, x_sd, y_mean, y_scale, z, yc }
    }

    fn n(&self) -> usize {
        self.yc.len()
    }

    fn lambda_max(&self) -> f64 {
        let n = self.n() as f64;
        self.z
            .iter()
            .map(|c| dot(c, &self.yc).abs() / n)
            .fold(0.0, f64::max)
    }

    /// Coordinate descent from `beta` at penalty `lambda`.
    fn solve(&self, beta: &mut [f64], lambda: f64, tol: f64) {
        let n = self.n() as f64;
        let mut r = self.yc.clone();
        for (c, b) in self.z.iter().zip(beta.iter()) {
            if *b != 0.0 {
                axpy(-*b, c, &mut r);
            }
        }
        let thresh = tol * self.y_scale.max(f64::MIN_POSITIVE);
        let usable: Vec<usize> = (0..beta.len()).filter(|&j| self.x_sd[j] > 0.0).collect();
        let mut sweeps = 0;
        loop {
            let mut full_change = self.sweep(&usable, beta, &mut r, lambda, n);
            sweeps += 1;
            // iterate on the active set before the next full pass
            while full_change > thresh && sweeps < MAX_SWEEPS {
                let active: Vec<usize> = usable.iter().copied().filter(|&j| beta[j] != 0.0).collect();
                let change = self.sweep(&active, beta, &mut r, lambda, n);
                sweeps += 1;
                if change <= thresh {
                    break;
                }
                full_change = change;
            }
            if full_change <= thresh || sweeps >= MAX_SWEEPS {
                break;
            }
        }
    }

    fn sweep(&self, idx: &[usize], beta: &mut [f64], r: &mut [f64], lambda: f64, n: f64) -> f64 {
        let mut max_change = 0.0f64;
        for &j in idx {
            let zj = &self.z[j];
            let old = beta[j];
            let rho = dot(zj, r) / n + old;
            let new = soft(rho, lambda);
            if new != old {
                axpy(old - new, zj, r);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    /// Standardized coefficients along `lambdas` with warm starts.
    fn path(&self, lambdas: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let mut beta = vec![0.0; self.z.len()];
        lambdas
            .iter()
            .map(|&l| {
                self.solve(&mut beta, l, tol);
                beta.clone()
            })
            .collect()
    }

    /// Original-scale intercept and slopes.
    fn unscale(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let slopes: Vec<f64> = beta
            .iter()
            .zip(&self.x_sd)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        let icpt = self.y_mean - slopes.iter().zip(&self.x_mean).map(|(b, m)| b * m).sum::<f64>();
        (icpt, slopes)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Log-spaced penalties from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let (a, b) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Seeded assignment of `n` rows to `folds` folds of near-equal size.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    fold_of
}

pub fn fit_lasso_cv(x: &DesignMatrix, y: &[f64], opts: &LassoOptions) -> Result<RegressionFit> {
    let n = y.len();
    if x.n_rows().is_some_and(|r| r != n) {
        return Err(Error::Dimension("design and response differ in length".into()));
    }
    if !(opts.folds >= 2 && n >= opts.folds) {
        return Err(Error::Config(format!("need n >= folds >= 2, got n = {n}, folds = {}", opts.folds)));
    }
    if opts.n_lambda == 0 || !(opts.lambda_min_ratio > 0.0 && opts.lambda_min_ratio < 1.0) {
        return Err(Error::Config("n_lambda must be >= 1 and lambda_min_ratio in (0, 1)".into()));
    }
    if is_constant(y) {
        return Err(Error::Degenerate("response is constant".into()));
    }
    let full = Standardized::new(x, y);
    let lmax = full.lambda_max();
    if lmax <= 0.0 {
        return Err(Error::Degenerate("no covariate varies or correlates with the response".into()));
    }
    let lambdas = lambda_grid(lmax, opts.n_lambda, opts.lambda_min_ratio);

    let fold_of = fold_assignment(n, opts.folds, opts.seed);
    let fold_mse: Vec<Vec<f64>> = (0..opts.folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let xt = x.rows_at(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let st = Standardized::new(&xt, &yt);
            st.path(&lambdas, PATH_TOL)
                .iter()
                .map(|b| {
                    let (icpt, slopes) = st.unscale(b);
                    test.iter()
                        .map(|&i| {
                            let pred = icpt
                                + slopes
                                    .iter()
                                    .zip(&x.columns)
                                    .map(|(s, c)| s * c[i])
                                    .sum::<f64>();
                            (y[i] - pred).powi(2)
                        })
                        .sum::<f64>()
                        / test.len() as f64
                })
                .collect()
        })
        .collect();
    let k = opts.folds as f64;
    let cv_mean: Vec<f64> = (0..lambdas.len())
        .map(|l| fold_mse.iter().map(|m| m[l]).sum::<f64>() / k)
        .collect();
    let cv_se: Vec<f64> = (0..lambdas.len())
        .map(|l| {
            let var = fold_mse.iter().map(|m| (m[l] - cv_mean[l]).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    let i_min = (0..lambdas.len())
        .min_by(|&a, &b| cv_mean[a].total_cmp(&cv_mean[b]))
        .unwrap_or(0);
    let i_1se = (0..=i_min)
        .find(|&l| cv_mean[l] <= cv_mean[i_min] + cv_se[i_min])
        .unwrap_or(i_min);
    let i_chosen = if opts.one_se { i_1se } else { i_min };

    let mut beta = full
        .path(&lambdas[..=i_chosen], PATH_TOL)
        .pop()
        .unwrap_or_else(|| vec![0.0; x.n_cols()]);
    full.solve(&mut beta, lambdas[i_chosen], FINAL_TOL);
    let (icpt, slopes) = full.unscale(&beta);
    let coefficients: Vec<Coefficient> = x
        .names
        .iter()
        .zip(&slopes)
        .map(|(name, b)| Coefficient::point(name.clone(), *b))
        .collect();
    let selected = coefficients
        .iter()
        .filter(|c| c.estimate != 0.0)
        .map(|c| c.name.clone())
        .collect();
    Ok(RegressionFit {
        intercept: Coefficient::point("(Intercept)", icpt),
        coefficients,
        selected,
        n_obs: n,
        residual_df: None,
        sigma2: None,
        lasso: Some(LassoPath {
            lambdas: lambdas.clone(),
            cv_mean,
            cv_se,
            lambda_min: lambdas[i_min],
            lambda_1se: lambdas[i_1se],
            lambda: lambdas[i_chosen],
            folds: opts.folds,
            seed: opts.seed,
            fold_of,
        }),
    })
}

/// Largest violation of the Lasso optimality conditions of `fit` at its
/// penalty, on the standardized scale: `|g_j| - lambda` for zero
/// coefficients and `|g_j + lambda sign(b_j)|` for active ones, where `g` is
/// the gradient of the squared-error loss.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], fit: &RegressionFit) -> Result<f64> {
    let lambda = fit
        .lasso
        .as_ref()
        .ok_or_else(|| Error::Config("not a Lasso fit".into()))?
        .lambda;
    let st = Standardized::new(x, y);
    let n = y.len() as f64;
    let beta: Vec<f64> = fit
        .coefficients
        .iter()
        .zip(&st.x_sd)
        .map(|(c, s)| c.estimate * s)
        .collect();
    let mut r = st.yc.clone();
    for (c, b) in st.z.iter().zip(&beta) {
        axpy(-b, c, &mut r);
    }
    let mut worst = 0.0f64;
    for (j, c) in st.z.iter().enumerate() {
        if st.x_sd[j] == 0.0 {
            continue;
        }
        let g = -dot(c, &r) / n;
        let v = if beta[j] == 0.0 {
            g.abs() - lambda
        } else {
            (g + lambda * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..p)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        DesignMatrix::new((0..p).map(|j| format!("x{j}")).collect(), cols).unwrap()
    }

    #[test]
    fn noiseless_support_and_kkt() {
        let x = gaussian_design(200, 20, 1);
        let y: Vec<f64> = (0..200)
            .map(|i| 1.0 + 3.0 * x.columns[4][i] - 2.0 * x.columns[11][i])
            .collect();
        let fit = fit_lasso_cv(&x, &y, &LassoOptions::default()).unwrap();
        assert!(fit.selected.contains(&"x4".to_string()));
        assert!(fit.selected.contains(&"x11".to_string()));
        assert!(kkt_violation(&x, &y, &fit).unwrap() <= 1e-8);
    }

    #[test]
    fn full_shrinkage_at_lambda_max() {
        let x = gaussian_design(50, 5, 2);
        let y: Vec<f64> = (0..50).map(|i| x.columns[0][i] + 0.1 * i as f64).collect();
        let st = Standardized::new(&x, &y);
        let lmax = st.lambda_max();
        let mut b = vec![0.0; 5];
        st.solve(&mut b, lmax, FINAL_TOL);
        assert!(b.iter().all(|v| *v == 0.0));
        st.solve(&mut b, 0.9 * lmax, FINAL_TOL);
        assert!(b.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn constant_response_is_an_error() {
        let x = gaussian_design(30, 3, 3);
        assert!(matches!(
            fit_lasso_cv(&x, &[2.0; 30], &LassoOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn folds_are_seeded_and_balanced() {
        let a = fold_assignment(23, 10, 7);
        assert_eq!(a, fold_assignment(23, 10, 7));
        assert_ne!(a, fold_assignment(23, 10, 8));
        for f in 0..10 {
            let c = a.iter().filter(|&&v| v == f).count();
            assert!(c == 2 || c == 3);
        }
    }

    #[test]
    fn one_se_rule_picks_a_larger_penalty() {
        let x = gaussian_design(120, 30, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..120)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x.columns[0][i] + 0.5 * x.columns[1][i] + e
            })
            .collect();
        let min = fit_lasso_cv(&x, &y, &LassoOptions::default()).unwrap();
        let se = fit_lasso_cv(&x, &y, &LassoOptions { one_se: true, ..Default::default() }).unwrap();
        let (pm, ps) = (min.lasso.unwrap(), se.lasso.unwrap());
        assert!(ps.lambda >= pm.lambda);
        assert_eq!(ps.lambda_min, pm.lambda_min);
        assert!(se.selected.len() <= min.selected.len());
    }
}
