//! Scalar-on-function regression with momenta fields as predictors.
//!
//! `y_i = a0 + alpha' z_i + int beta_x(t) m_x,i(t) dt + int beta_y(t) m_y,i(t) dt + e_i`
//! with `beta_x`, `beta_y` expanded in cubic B-splines and penalized by
//! second differences of their coefficients. Integrals use the trapezoid
//! rule on the control grid; both penalties are chosen jointly by
//! generalized cross-validation over a log-spaced grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::bspline::{second_difference_penalty, BSplineBasis};
use super::{Coefficient, DesignMatrix};
use crate::error::{Error, Result};
use crate::fpca::MomentaMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    CubicBSpline,
    /// A single constant function; the integrals collapse to weighted means
    /// and the model is an unpenalized scalar regression.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunRegOptions {
    pub basis: BasisKind,
    pub n_basis: usize,
    /// Candidate penalties, as log10 multiples of the data-to-penalty scale.
    pub log10_lambda_min: f64,
    pub log10_lambda_max: f64,
    pub n_lambda: usize,
    /// Ridge added to the roughness penalty, relative to it, so that the
    /// linear null space is not left unpenalized when predictors vanish.
    pub ridge: f64,
}

impl Default for FunRegOptions {
    fn default() -> Self {
        Self {
            basis: BasisKind::CubicBSpline,
            n_basis: 30,
            log10_lambda_min: -8.0,
            log10_lambda_max: 4.0,
            n_lambda: 25,
            ridge: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCurve {
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalFit {
    pub grid: Vec<f64>,
    pub beta_x: CoefficientCurve,
    pub beta_y: CoefficientCurve,
    pub intercept: Coefficient,
    pub alpha: Vec<Coefficient>,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub edf: f64,
    pub gcv: f64,
    pub sigma2: f64,
}

/// Two-sided 95% normal quantile used for pointwise bands.
pub const Z95: f64 = 1.959963984540054;

/// Trapezoid weights for an increasing grid.
pub fn trapezoid_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = 0.5 * (t[k + 1] - t[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

struct Basis {
    /// `n_grid x n_basis`.
    values: Vec<Vec<f64>>,
    penalty: Vec<Vec<f64>>,
}

fn build_basis(grid: &[f64], opts: &FunRegOptions) -> Result<Basis> {
    match opts.basis {
        BasisKind::Constant => Ok(Basis {
            values: vec![vec![1.0]; grid.len()],
            penalty: vec![vec![0.0]],
        }),
        BasisKind::CubicBSpline => {
            let b = BSplineBasis::new(grid[0], grid[grid.len() - 1], opts.n_basis)?;
            let mut penalty = second_difference_penalty(opts.n_basis);
            let tr: f64 = (0..opts.n_basis).map(|i| penalty[i][i]).sum();
            for (i, row) in penalty.iter_mut().enumerate() {
                row[i] += opts.ridge * tr / opts.n_basis as f64;
            }
            Ok(Basis {
                values: b.design(grid),
                penalty,
            })
        }
    }
}

pub fn fit_functional_regression(
    momenta: &MomentaMatrix,
    z: &DesignMatrix,
    y: &[f64],
    opts: &FunRegOptions,
) -> Result<FunctionalFit> {
    let n = momenta.n_subjects();
    let g = momenta.n_control();
    if y.len() != n || z.n_rows().is_some_and(|r| r != n) {
        return Err(Error::Dimension("momenta, covariates and response differ in length".into()));
    }
    if g < 2 {
        return Err(Error::Dimension("need at least 2 grid points".into()));
    }
    if opts.n_lambda == 0 || opts.log10_lambda_max < opts.log10_lambda_min {
        return Err(Error::Config("invalid penalty grid".into()));
    }
    let grid = momenta.control_x.clone();
    let w = trapezoid_weights(&grid);
    let basis = build_basis(&grid, opts)?;
    let k = basis.values[0].len();
    let q = z.n_cols();
    let p = 1 + q + 2 * k;
    let off_x = 1 + q;
    let off_y = 1 + q + k;

    let mut c = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        c[(i, 0)] = 1.0;
        for (j, col) in z.columns.iter().enumerate() {
            c[(i, 1 + j)] = col[i];
        }
        let row = &momenta.rows[i];
        for t in 0..g {
            let (mx, my) = (row[t] * w[t], row[g + t] * w[t]);
            for (b, v) in basis.values[t].iter().enumerate() {
                c[(i, off_x + b)] += mx * v;
                c[(i, off_y + b)] += my * v;
            }
        }
    }
    let ctc = c.transpose() * &c;
    let cty = c.transpose() * DVector::from_column_slice(y);
    let yv = DVector::from_column_slice(y);

    let pen_tr: f64 = (0..k).map(|i| basis.penalty[i][i]).sum();
    let block_scale = |off: usize| {
        let data: f64 = (off..off + k).map(|i| ctc[(i, i)]).sum();
        if data > 0.0 && pen_tr > 0.0 {
            data / pen_tr
        } else {
            1.0
        }
    };
    let (sx, sy) = (block_scale(off_x), block_scale(off_y));
    let penalized = opts.basis == BasisKind::CubicBSpline;
    let lambdas: Vec<f64> = if penalized {
        (0..opts.n_lambda)
            .map(|i| {
                let f = if opts.n_lambda == 1 { 0.0 } else { i as f64 / (opts.n_lambda - 1) as f64 };
                10f64.powf(opts.log10_lambda_min + f * (opts.log10_lambda_max - opts.log10_lambda_min))
            })
            .collect()
    } else {
        vec![0.0]
    };

    struct Candidate {
        lx: f64,
        ly: f64,
        theta: DVector<f64>,
        ainv: DMatrix<f64>,
        rss: f64,
        edf: f64,
        gcv: f64,
    }
    let solve = |lx: f64, ly: f64| -> Result<Candidate> {
        let mut a = ctc.clone();
        for r in 0..k {
            for s in 0..k {
                a[(off_x + r, off_x + s)] += lx * basis.penalty[r][s];
                a[(off_y + r, off_y + s)] += ly * basis.penalty[r][s];
            }
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Degenerate("penalized normal equations are singular".into()))?;
        let theta = chol.solve(&cty);
        let ainv = chol.inverse();
        let resid = &yv - &c * &theta;
        let rss = resid.norm_squared();
        let edf = (&ainv * &ctc).trace();
        let denom = n as f64 - edf;
        let gcv = if denom > 0.0 { n as f64 * rss / (denom * denom) } else { f64::INFINITY };
        Ok(Candidate { lx, ly, theta, ainv, rss, edf, gcv })
    };

    let mut best: Option<Candidate> = None;
    for &lx in &lambdas {
        for &ly in &lambdas {
            let cand = solve(lx * sx, ly * sy)?;
            if best.as_ref().is_none_or(|b| cand.gcv < b.gcv) {
                best = Some(cand);
            }
        }
    }
    let best = best.expect("at least one penalty candidate");
    let resid_df = n as f64 - best.edf;
    if resid_df <= 0.0 {
        return Err(Error::Degenerate(format!(
            "fit uses {:.3} effective parameters for {n} observations",
            best.edf
        )));
    }
    let sigma2 = best.rss / resid_df;
    let cov = &best.ainv * sigma2;

    let curve = |off: usize| -> CoefficientCurve {
        let mut est = Vec::with_capacity(g);
        let mut se = Vec::with_capacity(g);
        for bt in &basis.values {
            let e: f64 = bt.iter().enumerate().map(|(r, v)| v * best.theta[off + r]).sum();
            let mut var = 0.0;
            for (r, vr) in bt.iter().enumerate() {
                if *vr == 0.0 {
                    continue;
                }
                for (s, vs) in bt.iter().enumerate() {
                    var += vr * vs * cov[(off + r, off + s)];
                }
            }
            est.push(e);
            se.push(var.max(0.0).sqrt());
        }
        CoefficientCurve {
            lower: est.iter().zip(&se).map(|(e, s)| e - Z95 * s).collect(),
            upper: est.iter().zip(&se).map(|(e, s)| e + Z95 * s).collect(),
            estimate: est,
            std_error: se,
        }
    };
    let tdist = StudentsT::new(0.0, 1.0, resid_df).map_err(|e| Error::Degenerate(e.to_string()))?;
    let coef = |name: &str, j: usize| {
        let est = best.theta[j];
        let se = cov[(j, j)].max(0.0).sqrt();
        let t = (se > 0.0).then(|| est / se);
        Coefficient {
            name: name.to_string(),
            estimate: est,
            std_error: Some(se),
            t_value: t,
            p_value: t.map(|t| (2.0 * tdist.sf(t.abs())).clamp(0.0, 1.0)),
        }
    };
    Ok(FunctionalFit {
        beta_x: curve(off_x),
        beta_y: curve(off_y),
        intercept: coef("(Intercept)", 0),
        alpha: z.names.iter().enumerate().map(|(j, nm)| coef(nm, 1 + j)).collect(),
        grid,
        lambda_x: best.lx,
        lambda_y: best.ly,
        edf: best.edf,
        gcv: best.gcv,
        sigma2,
    })
}

/// `int (a - b)^2 dt` by the trapezoid rule.
pub fn integrated_squared_error(grid: &[f64], a: &[f64], b: &[f64]) -> f64 {
    trapezoid_weights(grid)
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x - y).powi(2))
        .sum()
}
