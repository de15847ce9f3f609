use std::collections::HashMap;
use std::path::Path;

use actigeo_core::fpca::MomentaMatrix;
use actigeo_core::ingest::fmt_f64;
use actigeo_core::stats::funreg::{fit_functional_regression, CoefficientCurve, FunctionalFit};
use actigeo_core::stats::lasso::fit_lasso_cv;
use actigeo_core::stats::ols::fit_ols;
use actigeo_core::stats::{impute_missing, Coefficient, DesignMatrix, ImputeLog, RegressionFit};
use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::Serialize;

use crate::artifacts::{load_matches, load_scale, load_scores, momenta_fields};
use crate::config::{FunctionalOptions, PipelineConfig};
use crate::failure::{require_file, Classify, ClassifyCore, CmdResult, Failure};
use crate::output::{csv_bytes, file_stem, Outputs};

/// Covariate table: subject ids in file order and nullable columns.
pub struct Covariates {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

pub fn read_covariates(path: &Path) -> CmdResult<Covariates> {
    require_file(path, "covariate file")?;
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .runtime()?;
    let header = rdr.headers().invalid()?.clone();
    if header.get(0) != Some("subject_id") {
        return Err(Failure::Invalid(anyhow!(
            "{}: first column must be subject_id",
            path.display()
        )));
    }
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for row in rdr.records() {
        let row = row.invalid()?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != names.len() + 1 {
            return Err(Failure::Invalid(anyhow!("{} line {line}: wrong number of fields", path.display())));
        }
        ids.push(row[0].to_string());
        for (j, col) in columns.iter_mut().enumerate() {
            let s = &row[j + 1];
            col.push(if is_missing(s) {
                None
            } else {
                Some(s.trim().parse::<f64>().map_err(|_| {
                    Failure::Invalid(anyhow!(
                        "{} line {line}: {} is not numeric: {s:?}",
                        path.display(),
                        names[j]
                    ))
                })?)
            });
        }
    }
    Ok(Covariates { ids, names, columns })
}

impl Covariates {
    fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }

    fn require(&self, name: &str) -> CmdResult<&[Option<f64>]> {
        self.column(name)
            .ok_or_else(|| Failure::Invalid(anyhow!("covariate {name:?} not in the covariate table")))
    }
}

fn pc_index(name: &str) -> Option<usize> {
    name.strip_prefix("pc").and_then(|k| k.parse::<usize>().ok()).filter(|k| *k >= 1)
}

#[derive(Serialize)]
struct RegressionReport<'a> {
    response: &'a str,
    n_obs: usize,
    forced: &'a [String],
    imputation: &'a [ImputeLog],
    lasso: Option<&'a RegressionFit>,
    ols: &'a RegressionFit,
}

fn coefficient_rows(fit: &RegressionFit, lasso: Option<&RegressionFit>, forced: &[String]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let role = |c: &Coefficient| {
        if c.name == fit.intercept.name {
            "intercept"
        } else if forced.contains(&c.name) {
            "forced"
        } else if lasso.is_some() {
            "selected"
        } else {
            "included"
        }
    };
    std::iter::once(&fit.intercept)
        .chain(&fit.coefficients)
        .map(|c| {
            let table = match c.std_error {
                Some(se) => format!("{:.3} ({:.3})", c.estimate, se),
                None => format!("{:.3}", c.estimate),
            };
            vec![
                c.name.clone(),
                role(c).to_string(),
                fmt_f64(c.estimate),
                opt(c.std_error),
                opt(c.t_value),
                opt(c.p_value),
                table,
            ]
        })
        .collect()
}

fn fit_response(
    cfg: &PipelineConfig,
    out: &mut Outputs,
    cov: &Covariates,
    scores: &HashMap<String, Vec<f64>>,
    response: &str,
) -> CmdResult<()> {
    let opts = &cfg.regress;
    for f in &opts.forced {
        cov.require(f)?;
    }
    // subjects with a matched curve pair and an observed response
    let y_of = |i: usize| -> CmdResult<Option<f64>> {
        let id = &cov.ids[i];
        let Some(s) = scores.get(id) else { return Ok(None) };
        Ok(match pc_index(response) {
            Some(k) if cov.column(response).is_none() => Some(*s.get(k - 1).ok_or_else(|| {
                Failure::Invalid(anyhow!("response {response} but only {} PCs were fitted", s.len()))
            })?),
            _ => cov.require(response)?[i],
        })
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..cov.ids.len() {
        if let Some(v) = y_of(i)? {
            rows.push(i);
            y.push(v);
        }
    }
    if rows.is_empty() {
        return Err(Failure::Invalid(anyhow!("no subject has both scores and response {response}")));
    }

    let excluded: Vec<&str> = opts
        .responses
        .iter()
        .map(String::as_str)
        .chain(opts.functional.as_ref().map(|f| f.response.as_str()))
        .collect();
    let mut names: Vec<String> = if opts.candidates.is_empty() {
        cov.names.iter().filter(|n| !excluded.contains(&n.as_str())).cloned().collect()
    } else {
        opts.candidates.clone()
    };
    for f in &opts.forced {
        if !names.contains(f) {
            names.push(f.clone());
        }
    }
    let columns = names
        .iter()
        .map(|n| rows.iter().map(|&i| cov.require(n).map(|c| c[i])).collect::<CmdResult<Vec<_>>>())
        .collect::<CmdResult<Vec<_>>>()?;
    let (x, imputation) = impute_missing(names, columns).classify("imputing covariates")?;
    for f in &opts.forced {
        if x.column(f).is_none() {
            return Err(Failure::Invalid(anyhow!("forced covariate {f} has too many missing values")));
        }
    }

    let lasso = if opts.select && x.n_cols() > 0 {
        Some(fit_lasso_cv(&x, &y, &opts.lasso).classify(&format!("Lasso for {response}"))?)
    } else {
        None
    };
    let keep: Vec<String> = x
        .names
        .iter()
        .filter(|n| opts.forced.contains(n) || lasso.as_ref().is_none_or(|l| l.selected.contains(n)))
        .cloned()
        .collect();
    let xs = x.select(&keep).classify("selecting covariates")?;
    let ols = fit_ols(&xs, &y).classify(&format!("OLS for {response}"))?;
    info!("{response}: {} subjects, {} covariates in the final model", y.len(), keep.len());

    let stem = file_stem(response);
    let header = ["covariate", "role", "estimate", "std_error", "t_value", "p_value", "estimate_se"];
    out.write(
        &format!("regress/{stem}.csv"),
        &csv_bytes(&header, coefficient_rows(&ols, lasso.as_ref(), &opts.forced)).runtime()?,
    )
    .runtime()?;
    let report = RegressionReport {
        response,
        n_obs: y.len(),
        forced: &opts.forced,
        imputation: &imputation,
        lasso: lasso.as_ref(),
        ols: &ols,
    };
    out.write_json(&format!("regress/{stem}.json"), &report).runtime()?;
    Ok(())
}

fn curve_rows(fit: &FunctionalFit, minutes: &[f64]) -> Vec<Vec<String>> {
    let cols = |c: &CoefficientCurve, k: usize| {
        [c.estimate[k], c.std_error[k], c.lower[k], c.upper[k]].map(fmt_f64)
    };
    (0..fit.grid.len())
        .map(|k| {
            let mut r = vec![fmt_f64(minutes[k]), fmt_f64(fit.grid[k])];
            r.extend(cols(&fit.beta_x, k));
            r.extend(cols(&fit.beta_y, k));
            r
        })
        .collect()
}

fn fit_functional(cfg: &PipelineConfig, out: &mut Outputs, cov: &Covariates, f: &FunctionalOptions) -> CmdResult<()> {
    let records = load_matches(&cfg.paths.out_dir)?;
    let fields = momenta_fields(&records)?;
    let resp = cov.require(&f.response)?;
    let index: HashMap<&str, usize> = cov.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut keep = Vec::new();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, r) in records.iter().enumerate() {
        if let Some(&i) = index.get(r.subject_id.as_str()) {
            if let Some(v) = resp[i] {
                keep.push(k);
                rows.push(i);
                y.push(v);
            }
        }
    }
    if keep.is_empty() {
        return Err(Failure::Invalid(anyhow!("no matched subject has response {}", f.response)));
    }
    let skipped = records.len() - keep.len();
    if skipped > 0 {
        warn!("functional regression: {skipped} matched subject(s) without {} skipped", f.response);
    }
    let ids = keep.iter().map(|&k| records[k].subject_id.clone()).collect();
    let sel: Vec<_> = keep.iter().map(|&k| fields[k].clone()).collect();
    let m = MomentaMatrix::from_fields(ids, &sel).classify("stacking momenta")?;
    let columns = f
        .covariates
        .iter()
        .map(|n| rows.iter().map(|&i| cov.require(n).map(|c| c[i])).collect::<CmdResult<Vec<_>>>())
        .collect::<CmdResult<Vec<_>>>()?;
    let (z, imputation) = impute_missing(f.covariates.clone(), columns).classify("imputing covariates")?;
    let z = if z.n_cols() == 0 { DesignMatrix::empty() } else { z };
    let fit = fit_functional_regression(&m, &z, &y, &f.options).classify("functional regression")?;

    let scale = load_scale(&cfg.scale_path())?.scale;
    let minutes: Vec<f64> = fit.grid.iter().map(|&x| scale.from_x(x)).collect();
    let stem = file_stem(&f.response);
    let header = [
        "minute", "x", "beta_x", "beta_x_se", "beta_x_lower", "beta_x_upper", "beta_y", "beta_y_se",
        "beta_y_lower", "beta_y_upper",
    ];
    out.write(
        &format!("regress/functional_{stem}.csv"),
        &csv_bytes(&header, curve_rows(&fit, &minutes)).runtime()?,
    )
    .runtime()?;
    #[derive(Serialize)]
    struct Report<'a> {
        response: &'a str,
        n_obs: usize,
        imputation: &'a [ImputeLog],
        fit: &'a FunctionalFit,
    }
    out.write_json(
        &format!("regress/functional_{stem}.json"),
        &Report { response: &f.response, n_obs: y.len(), imputation: &imputation, fit: &fit },
    )
    .runtime()?;
    Ok(())
}

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let path = cfg
        .paths
        .covariates
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow!("paths.covariates is not set")))?;
    let cov = read_covariates(path)?;
    let (_, scores) = load_scores(&cfg.paths.out_dir)?;
    for r in &cfg.regress.responses {
        fit_response(cfg, out, &cov, &scores, r)?;
    }
    if let Some(f) = &cfg.regress.functional {
        fit_functional(cfg, out, &cov, f)?;
    }
    Ok(())
}
