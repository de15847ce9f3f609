//! Regression of scores and outcomes on covariates.
//!
//! [`lasso`] selects covariates by cross-validated Lasso, [`ols`] refits the
//! selected (plus forced-in) columns with classical inference, and
//! [`funreg`] regresses a scalar outcome on momenta fields as functional
//! predictors.

pub mod bspline;
pub mod funreg;
pub mod lasso;
pub mod ols;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named covariate columns for one set of subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    /// Column-major values, one vector per covariate.
    pub columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Config(format!("duplicate covariate name {dup:?}")));
        }
        if let Some(c) = columns.first() {
            let n = c.len();
            if let Some((j, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
                return Err(Error::Dimension(format!("column {} has a different length", names[j])));
            }
        }
        if let Some((j, _)) = columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Config(format!("column {} has missing or non-finite values", names[j])));
        }
        Ok(Self { names, columns })
    }

    /// Builds from row-major data.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::Dimension(format!("row of length {} for {p} columns", r.len())));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::new(names, columns)
    }

    pub fn empty() -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Number of rows, or `None` when there are no columns.
    pub fn n_rows(&self) -> Option<usize> {
        self.columns.first().map(Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    /// Sub-design with the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<DesignMatrix> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::Config(format!("unknown covariate {n:?}")))
            })
            .collect::<Result<_>>()?;
        Self::new(names.to_vec(), columns)
    }

    /// Rows at `idx`.
    pub fn rows_at(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }
}

/// Share of missing values above which a covariate is dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ImputeAction {
    Kept,
    Dropped { missing: usize },
    ImputedNo { missing: usize },
    MeanImputed { missing: usize, mean: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputeLog {
    pub column: String,
    pub action: ImputeAction,
}

/// Applies the missing-covariate policy: columns with more than 5% missing
/// are dropped; binary (0/1) columns are imputed as 0 ("no"); other columns
/// are mean-imputed. Non-finite values count as missing.
pub fn impute_missing(
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
) -> Result<(DesignMatrix, Vec<ImputeLog>)> {
    let mut out_names = Vec::new();
    let mut out_cols = Vec::new();
    let mut log = Vec::new();
    for (name, col) in names.into_iter().zip(columns) {
        let n = col.len();
        let observed: Vec<f64> = col.iter().flatten().copied().filter(|v| v.is_finite()).collect();
        let missing = n - observed.len();
        let action = if missing == 0 {
            ImputeAction::Kept
        } else if observed.is_empty() || missing as f64 > MAX_MISSING_FRACTION * n as f64 {
            ImputeAction::Dropped { missing }
        } else if observed.iter().all(|v| *v == 0.0 || *v == 1.0) {
            ImputeAction::ImputedNo { missing }
        } else {
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            ImputeAction::MeanImputed { missing, mean }
        };
        let fill = match action {
            ImputeAction::Dropped { .. } => None,
            ImputeAction::MeanImputed { mean, .. } => Some(mean),
            _ => Some(0.0),
        };
        if let Some(fill) = fill {
            out_cols.push(
                col.iter()
                    .map(|v| v.filter(|x| x.is_finite()).unwrap_or(fill))
                    .collect(),
            );
            out_names.push(name.clone());
        }
        if action != ImputeAction::Kept {
            log::info!("covariate {name}: {action:?}");
        }
        log.push(ImputeLog { column: name, action });
    }
    Ok((DesignMatrix::new(out_names, out_cols)?, log))
}

/// One row of a coefficient table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
}

impl Coefficient {
    pub fn point(name: impl Into<String>, estimate: f64) -> Self {
        Self {
            name: name.into(),
            estimate,
            std_error: None,
            t_value: None,
            p_value: None,
        }
    }
}

/// Regularization path and cross-validation curve of a Lasso fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    /// Penalty the reported coefficients were fit at.
    pub lambda: f64,
    pub folds: usize,
    pub seed: u64,
    /// Fold of every row.
    pub fold_of: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub intercept: Coefficient,
    pub coefficients: Vec<Coefficient>,
    /// Names of covariates with nonzero coefficients (Lasso) or all
    /// covariates in the model (OLS).
    pub selected: Vec<String>,
    pub n_obs: usize,
    pub residual_df: Option<usize>,
    pub sigma2: Option<f64>,
    pub lasso: Option<LassoPath>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Intercept plus covariate predictions for each row of `x`, whose
    /// columns must include every coefficient name.
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        let n = x.n_rows().unwrap_or(0);
        let mut out = vec![self.intercept.estimate; n];
        for c in &self.coefficients {
            let col = x
                .column(&c.name)
                .ok_or_else(|| Error::Config(format!("missing covariate {:?}", c.name)))?;
            for (o, v) in out.iter_mut().zip(col) {
                *o += c.estimate * v;
            }
        }
        Ok(out)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn is_constant(v: &[f64]) -> bool {
    let m = mean(v);
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    v.iter().all(|x| (x - m).abs() <= 1e-14 * scale)
}
