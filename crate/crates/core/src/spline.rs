//! Cubic smoothing spline with knots at every abscissa, tuned by the trace
//! of its smoother matrix (equivalent degrees of freedom).
//!
//! Uses the Reinsch formulation: with `Q` the second-divided-difference
//! operator and `R` the tridiagonal Gram matrix of the interior second
//! derivatives, the fit is `f = y - lambda Q gamma` where
//! `(R + lambda Q'Q) gamma = Q'y`. Both matrices are pentadiagonal, so every
//! quantity, including `trace(S) = n - lambda tr((R + lambda Q'Q)^-1 Q'Q)`,
//! is computed in O(n) from a banded LDL' factorization and the band of the
//! inverse.

use crate::error::{Error, Result};

/// Bracket for the penalty search, in the abscissa scaled to `[0, 1]`.
pub const LAMBDA_MIN: f64 = 1e-12;
pub const LAMBDA_MAX: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct SplineFit {
    pub fitted: Vec<f64>,
    pub lambda: f64,
    pub df: f64,
}

/// Symmetric pentadiagonal matrix stored by diagonals.
#[derive(Clone, Debug)]
struct Band5 {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

struct Ldl {
    d: Vec<f64>,
    l1: Vec<f64>, // L[i+1][i]
    l2: Vec<f64>, // L[i+2][i]
}

impl Band5 {
    fn ldl(&self) -> Result<Ldl> {
        let m = self.d0.len();
        let mut d = vec![0.0; m];
        let mut l1 = vec![0.0; m];
        let mut l2 = vec![0.0; m];
        for i in 0..m {
            let mut di = self.d0[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            if !(di > 0.0 && di.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "smoothing system not positive definite at row {i}"
                )));
            }
            d[i] = di;
            if i + 1 < m {
                let mut a = self.d1[i];
                if i >= 1 {
                    a -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = a / di;
            }
            if i + 2 < m {
                l2[i] = self.d2[i] / di;
            }
        }
        Ok(Ldl { d, l1, l2 })
    }
}

impl Ldl {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = b.len();
        let mut z = b.to_vec();
        for i in 0..m {
            if i >= 1 {
                z[i] -= self.l1[i - 1] * z[i - 1];
            }
            if i >= 2 {
                z[i] -= self.l2[i - 2] * z[i - 2];
            }
        }
        for (zi, di) in z.iter_mut().zip(&self.d) {
            *zi /= di;
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                z[i] -= self.l1[i] * z[i + 1];
            }
            if i + 2 < m {
                z[i] -= self.l2[i] * z[i + 2];
            }
        }
        z
    }

    /// Band (|i - j| <= 2) of the inverse matrix.
    fn inverse_band(&self) -> Band5 {
        let m = self.d.len();
        let mut s0 = vec![0.0; m];
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![0.0; m];
        for i in (0..m).rev() {
            let a = if i + 1 < m { self.l1[i] } else { 0.0 };
            let b = if i + 2 < m { self.l2[i] } else { 0.0 };
            let s11 = if i + 1 < m { s0[i + 1] } else { 0.0 };
            let s12 = if i + 2 < m { s1[i + 1] } else { 0.0 };
            let s22 = if i + 2 < m { s0[i + 2] } else { 0.0 };
            if i + 2 < m {
                s2[i] = -a * s12 - b * s22;
            }
            if i + 1 < m {
                s1[i] = -a * s11 - b * s12;
            }
            s0[i] = 1.0 / self.d[i] - a * s1[i] - b * s2[i];
        }
        Band5 { d0: s0, d1: s1, d2: s2 }
    }
}

/// Precomputed operators for a fixed abscissa.
#[derive(Clone, Debug)]
pub struct SmoothingSpline {
    h: Vec<f64>,
    r: Band5,
    qtq: Band5,
}

impl SmoothingSpline {
    /// `x` must be strictly increasing with at least 3 points.
    pub fn new(x: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 3 {
            return Err(Error::Config(format!("smoothing spline needs >= 3 points, got {n}")));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("abscissa must be strictly increasing".into()));
        }
        let span = x[n - 1] - x[0];
        let h: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) / span).collect();
        let m = n - 2;
        let a: Vec<f64> = (0..m).map(|j| 1.0 / h[j]).collect();
        let b: Vec<f64> = (0..m).map(|j| -1.0 / h[j] - 1.0 / h[j + 1]).collect();
        let c: Vec<f64> = (0..m).map(|j| 1.0 / h[j + 1]).collect();
        let mut qtq = Band5 { d0: vec![0.0; m], d1: vec![0.0; m], d2: vec![0.0; m] };
        let mut r = Band5 { d0: vec![0.0; m], d1: vec![0.0; m], d2: vec![0.0; m] };
        for j in 0..m {
            qtq.d0[j] = a[j] * a[j] + b[j] * b[j] + c[j] * c[j];
            if j + 1 < m {
                qtq.d1[j] = b[j] * a[j + 1] + c[j] * b[j + 1];
                r.d1[j] = h[j + 1] / 6.0;
            }
            if j + 2 < m {
                qtq.d2[j] = c[j] * a[j + 2];
            }
            r.d0[j] = (h[j] + h[j + 1]) / 3.0;
        }
        Ok(Self { h, r, qtq })
    }

    pub fn len(&self) -> usize {
        self.h.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn system(&self, lambda: f64) -> Band5 {
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(r, q)| r + lambda * q).collect();
        Band5 {
            d0: comb(&self.r.d0, &self.qtq.d0),
            d1: comb(&self.r.d1, &self.qtq.d1),
            d2: comb(&self.r.d2, &self.qtq.d2),
        }
    }

    /// Trace of the smoother matrix at penalty `lambda`.
    pub fn df(&self, lambda: f64) -> Result<f64> {
        let inv = self.system(lambda).ldl()?.inverse_band();
        let q = &self.qtq;
        let m = q.d0.len();
        let mut tr = 0.0;
        for j in 0..m {
            tr += inv.d0[j] * q.d0[j] + 2.0 * inv.d1[j] * q.d1[j] + 2.0 * inv.d2[j] * q.d2[j];
        }
        Ok(self.len() as f64 - lambda * tr)
    }

    /// Fitted values at penalty `lambda`.
    pub fn fit(&self, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        if y.len() != n {
            return Err(Error::Dimension(format!("{} values for {n} abscissae", y.len())));
        }
        let h = &self.h;
        // Q'y as divided differences so constants map to exactly zero
        let qty: Vec<f64> = (0..n - 2)
            .map(|j| (y[j] - y[j + 1]) / h[j] + (y[j + 2] - y[j + 1]) / h[j + 1])
            .collect();
        let gamma = self.system(lambda).ldl()?.solve(&qty);
        let mut f = y.to_vec();
        for (j, g) in gamma.iter().enumerate() {
            let lg = lambda * g;
            f[j] -= lg / h[j];
            f[j + 1] -= lg * (-1.0 / h[j] - 1.0 / h[j + 1]);
            f[j + 2] -= lg / h[j + 1];
        }
        Ok(f)
    }

    /// Penalty whose smoother trace equals `target_df`, by bisection in
    /// `log(lambda)` over `[LAMBDA_MIN, LAMBDA_MAX]`.
    pub fn lambda_for_df(&self, target_df: f64) -> Result<f64> {
        let n = self.len() as f64;
        let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
        let df_lo = self.df(LAMBDA_MIN)?;
        let df_hi = self.df(LAMBDA_MAX)?;
        if !(target_df > 1.0 && target_df <= n) || target_df < df_hi {
            return Err(Error::DfSearch { target: target_df, lo: df_hi, hi: df_lo });
        }
        if target_df >= df_lo {
            // interpolation limit: the least penalized fit in the bracket
            return Ok(LAMBDA_MIN);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let d = self.df(mid.exp())?;
            if (d - target_df).abs() < 1e-9 {
                return Ok(mid.exp());
            }
            if d > target_df {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}

/// Smooths `y` observed at `x` with the given equivalent degrees of freedom.
pub fn smooth_with_df(x: &[f64], y: &[f64], target_df: f64) -> Result<SplineFit> {
    let s = SmoothingSpline::new(x)?;
    let lambda = s.lambda_for_df(target_df)?;
    Ok(SplineFit {
        fitted: s.fit(y, lambda)?,
        lambda,
        df: s.df(lambda)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Dense reference: S = (I + lambda K)^-1 with K = Q R^-1 Q'.
    fn dense_smoother(x: &[f64], lambda: f64) -> DMatrix<f64> {
        let n = x.len();
        let span = x[n - 1] - x[0];
        let h: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) / span).collect();
        let m = n - 2;
        let mut q = DMatrix::zeros(n, m);
        let mut r = DMatrix::zeros(m, m);
        for j in 0..m {
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let k = &q * r.try_inverse().unwrap() * q.transpose();
        (DMatrix::identity(n, n) + k * lambda).try_inverse().unwrap()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 + 0.3 * ((i * 7) % 3) as f64 / 3.0).collect()
    }

    #[test]
    fn banded_trace_and_fit_match_dense() {
        let x = grid(40);
        let y: Vec<f64> = x.iter().map(|v| (v / 5.0).sin() + 0.1 * (v * 1.7).cos()).collect();
        let s = SmoothingSpline::new(&x).unwrap();
        for lambda in [1e-8, 1e-5, 1e-3] {
            let dense = dense_smoother(&x, lambda);
            assert!((s.df(lambda).unwrap() - dense.trace()).abs() < 1e-8);
            let f = s.fit(&y, lambda).unwrap();
            let fd = &dense * DVector::from_vec(y.clone());
            for (a, b) in f.iter().zip(fd.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn df_is_monotone_in_lambda() {
        let s = SmoothingSpline::new(&grid(200)).unwrap();
        let mut prev = f64::INFINITY;
        for k in -24..=12 {
            let d = s.df(10f64.powi(k)).unwrap();
            assert!(d <= prev + 1e-9);
            prev = d;
        }
        assert!(s.df(LAMBDA_MAX).unwrap() < 2.1);
        assert!(s.df(LAMBDA_MIN).unwrap() > 199.0);
    }

    #[test]
    fn constants_are_reproduced() {
        let x = grid(60);
        let y = vec![3.25; 60];
        let f = smooth_with_df(&x, &y, 8.0).unwrap();
        assert!(f.fitted.iter().all(|v| (v - 3.25).abs() <= 1e-10));
    }

    #[test]
    fn interpolation_limit() {
        let x = grid(30);
        let y: Vec<f64> = x.iter().map(|v| (v * 0.9).sin()).collect();
        let f = smooth_with_df(&x, &y, 30.0).unwrap();
        assert!(f.fitted.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-4));
    }

    #[test]
    fn out_of_range_df_is_an_error() {
        let x = grid(30);
        let y = vec![0.0; 30];
        assert!(matches!(smooth_with_df(&x, &y, 1.0), Err(Error::DfSearch { .. })));
        assert!(matches!(smooth_with_df(&x, &y, 31.0), Err(Error::DfSearch { .. })));
    }
}
