//! Ordinary least squares with classical inference.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Coefficient, DesignMatrix, RegressionFit};
use crate::error::{Error, Result};

/// Ratio of smallest to largest singular value of the column-normalized
/// design below which it is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Least squares of `y` on an intercept and the columns of `x`.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    let n = y.len();
    if let Some(r) = x.n_rows() {
        if r != n {
            return Err(Error::Dimension(format!("{r} design rows for {n} responses")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("response has non-finite values".into()));
    }
    let p = x.n_cols() + 1;
    if n < p {
        return Err(Error::RankDeficient(with_intercept(&x.names)));
    }
    let a = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.columns[j - 1][i] });
    check_rank(&a, &x.names)?;

    let qr = a.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(with_intercept(&x.names)))?;
    let resid = DVector::from_column_slice(y) - &a * &beta;
    let rss = resid.norm_squared();
    let df = n - p;

    let names = with_intercept(&x.names);
    let (sigma2, se): (Option<f64>, Vec<Option<f64>>) = if df > 0 {
        let s2 = rss / df as f64;
        let rinv = r
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient(names.clone()))?;
        let se = (0..p)
            .map(|j| Some((s2 * rinv.row(j).norm_squared()).sqrt()))
            .collect();
        (Some(s2), se)
    } else {
        (None, vec![None; p])
    };
    let tdist = if df > 0 {
        Some(StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Degenerate(e.to_string()))?)
    } else {
        None
    };
    let mut coefs: Vec<Coefficient> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let est = beta[j];
            let t = se[j].filter(|s| *s > 0.0).map(|s| est / s);
            let pv = match (t, &tdist) {
                (Some(t), Some(d)) => Some((2.0 * d.sf(t.abs())).clamp(0.0, 1.0)),
                _ => None,
            };
            Coefficient {
                name: name.clone(),
                estimate: est,
                std_error: se[j],
                t_value: t,
                p_value: pv,
            }
        })
        .collect();
    let intercept = coefs.remove(0);
    Ok(RegressionFit {
        intercept,
        coefficients: coefs,
        selected: x.names.clone(),
        n_obs: n,
        residual_df: Some(df),
        sigma2,
        lasso: None,
    })
}

fn with_intercept(names: &[String]) -> Vec<String> {
    std::iter::once("(Intercept)".to_string())
        .chain(names.iter().cloned())
        .collect()
}

/// Errors with the names of the columns spanning a near-null direction.
fn check_rank(a: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut scaled = a.clone();
    for mut c in scaled.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c /= nrm;
        }
    }
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let s = &svd.singular_values;
    let smax = s.max();
    let (imin, smin) = s.argmin();
    if smin > RANK_TOL * smax {
        return Ok(());
    }
    let all = with_intercept(names);
    let null = v_t.row(imin);
    let big = null.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let involved = all
        .into_iter()
        .zip(null.iter())
        .filter(|(_, v)| v.abs() > 1e-6 * big)
        .map(|(n, _)| n)
        .collect();
    Err(Error::RankDeficient(involved))
}
