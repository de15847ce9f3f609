//! PCA of stacked initial momenta.
//!
//! Each subject contributes one row: the `n_g x 2` momenta flattened as the
//! x-block followed by the y-block. Components are stored scaled by the
//! score standard deviation so that `m_i = mean + sum_l a_il mu_l` with
//! unit-SD scores `a_il`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, Vec2};
use crate::kernel::ControlPoints;
use crate::matching::select_control_points;
use crate::shooting::{shoot_and_flow, MomentaField};

/// Maximal deviation between control-point times of two momenta fields
/// that are considered to live on the same grid.
pub const GRID_TOL: f64 = 1e-9;

/// Subjects by stacked momenta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentaMatrix {
    pub subject_ids: Vec<String>,
    /// Time coordinate of each control point, shared by every subject.
    pub control_x: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl MomentaMatrix {
    pub fn new(subject_ids: Vec<String>, control_x: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if subject_ids.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} subject ids for {} rows",
                subject_ids.len(),
                rows.len()
            )));
        }
        let d = 2 * control_x.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Dimension(format!(
                "row {i} ({}) has length {}, expected {d}",
                subject_ids[i],
                r.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite momenta".into()));
        }
        Ok(Self {
            subject_ids,
            control_x,
            rows,
        })
    }

    /// Stacks momenta fields; every field must share the control-point times.
    pub fn from_fields(subject_ids: Vec<String>, fields: &[MomentaField<f64>]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Dimension("no momenta fields".into()))?;
        let control_x: Vec<f64> = first.q0.as_slice().iter().map(|q| q.x).collect();
        for (id, f) in subject_ids.iter().zip(fields) {
            check_grid(&control_x, f.q0.as_slice()).map_err(|e| Error::Subject {
                subject: id.clone(),
                source: Box::new(e),
            })?;
        }
        let rows = fields.iter().map(|f| f.to_flat()).collect();
        Self::new(subject_ids, control_x, rows)
    }

    pub fn n_subjects(&self) -> usize {
        self.rows.len()
    }

    pub fn n_control(&self) -> usize {
        self.control_x.len()
    }
}

fn check_grid(control_x: &[f64], q: &[Vec2<f64>]) -> Result<()> {
    if q.len() != control_x.len() {
        return Err(Error::Dimension(format!(
            "{} control points, expected {}",
            q.len(),
            control_x.len()
        )));
    }
    if let Some((j, _)) = q
        .iter()
        .zip(control_x)
        .enumerate()
        .find(|(_, (a, b))| (a.x - **b).abs() > GRID_TOL)
    {
        return Err(Error::Dimension(format!("control point {j} is off the shared time grid")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PCModel {
    pub subject_ids: Vec<String>,
    pub control_x: Vec<f64>,
    pub mean: Vec<f64>,
    /// Unit-norm principal directions `u_l`.
    pub raw_components: Vec<Vec<f64>>,
    /// Stored components `mu_l = sigma_l u_l`.
    pub components: Vec<Vec<f64>>,
    /// Score standard deviations `sigma_l` of the retained components.
    pub sigmas: Vec<f64>,
    /// Variances of every component of the centered data, descending.
    pub eigenvalues: Vec<f64>,
    /// Cumulative fraction of variance, aligned with `eigenvalues`.
    pub var_explained: Vec<f64>,
    /// `subjects x n_pc` unit-SD scores.
    pub scores: Vec<Vec<f64>>,
}

impl PCModel {
    pub fn n_pc(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + sum_l scores_l mu_l`.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (a, mu) in scores.iter().zip(&self.components) {
            for (o, m) in out.iter_mut().zip(mu) {
                *o += a * m;
            }
        }
        out
    }

    /// Scores of a flattened momenta vector.
    pub fn project_flat(&self, m: &[f64]) -> Result<Vec<f64>> {
        if m.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "momenta of length {}, model expects {}",
                m.len(),
                self.dim()
            )));
        }
        Ok(self
            .raw_components
            .iter()
            .zip(&self.sigmas)
            .map(|(u, s)| {
                u.iter()
                    .zip(m.iter().zip(&self.mean))
                    .map(|(ui, (mi, bi))| ui * (mi - bi))
                    .sum::<f64>()
                    / s
            })
            .collect())
    }
}

/// Relative threshold below which a singular value counts as zero.
const RANK_TOL: f64 = 1e-10;

pub fn fit_pca(data: &MomentaMatrix, n_pc: usize) -> Result<PCModel> {
    pca_rows(&data.subject_ids, &data.control_x, &data.rows, n_pc)
}

/// PCA of arbitrary equal-length rows; `control_x` is carried into the
/// model for later grid checks.
pub fn pca_rows(subject_ids: &[String], control_x: &[f64], rows: &[Vec<f64>], n_pc: usize) -> Result<PCModel> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if subject_ids.len() != n || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged rows or misaligned subject ids".into()));
    }
    if n < 2 {
        return Err(Error::Dimension(format!("PCA needs >= 2 subjects, got {n}")));
    }
    if n_pc == 0 || n_pc > (n - 1).min(d) {
        return Err(Error::Config(format!(
            "n_pc = {n_pc} must lie in [1, {}]",
            (n - 1).min(d)
        )));
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean: Vec<f64> = x.row_mean().iter().copied().collect();
    let mut xc = x;
    for mut row in xc.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    // The SVD of the transpose has the (tall) component space as U.
    let svd = xc.transpose().svd(true, false);
    let u = svd.u.as_ref().expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    let scale = mean.iter().chain(xc.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    if !(top > RANK_TOL * scale.max(f64::MIN_POSITIVE)) || top == 0.0 {
        return Err(Error::Degenerate("momenta have zero variance".into()));
    }
    let rank = sv.iter().take_while(|&&s| s > RANK_TOL * top).count();
    if n_pc > rank {
        return Err(Error::Config(format!(
            "n_pc = {n_pc} exceeds the numerical rank {rank} of the centered momenta"
        )));
    }

    let dof = (n - 1) as f64;
    let n_eig = (n - 1).min(d);
    let eigenvalues: Vec<f64> = (0..n_eig)
        .map(|k| sv.get(k).map_or(0.0, |s| s * s / dof))
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    let var_explained = eigenvalues
        .iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc / total)
        })
        .collect();

    let mut raw_components = Vec::with_capacity(n_pc);
    let mut components = Vec::with_capacity(n_pc);
    let mut sigmas = Vec::with_capacity(n_pc);
    let mut score_cols = Vec::with_capacity(n_pc);
    for &k in order.iter().take(n_pc) {
        let mut ul: Vec<f64> = u.column(k).iter().copied().collect();
        let lead = ul
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, *v) } else { best });
        if lead.1 < 0.0 {
            ul.iter_mut().for_each(|v| *v = -*v);
        }
        let raw: Vec<f64> = xc
            .row_iter()
            .map(|r| r.iter().zip(&ul).map(|(a, b)| a * b).sum())
            .collect();
        let sd = (raw.iter().map(|s| s * s).sum::<f64>() / dof).sqrt();
        score_cols.push(raw.iter().map(|s| s / sd).collect::<Vec<f64>>());
        components.push(ul.iter().map(|v| v * sd).collect());
        raw_components.push(ul);
        sigmas.push(sd);
    }
    let scores = (0..n)
        .map(|i| score_cols.iter().map(|c| c[i]).collect())
        .collect();
    Ok(PCModel {
        subject_ids: subject_ids.to_vec(),
        control_x: control_x.to_vec(),
        mean,
        raw_components,
        components,
        sigmas,
        eigenvalues,
        var_explained,
        scores,
    })
}

/// Scores of a momenta field under `model`.
pub fn project(m: &MomentaField<f64>, model: &PCModel) -> Result<Vec<f64>> {
    check_grid(&model.control_x, m.q0.as_slice())?;
    model.project_flat(&m.to_flat())
}

/// Shooting parameters used to visualize components.
#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub control_stride: usize,
    pub n_steps: usize,
    pub sigma_v: f64,
}

/// Flows `template` by `mean + c mu_l` for every multiplier `c`.
/// Control points are the template vertices at `opts.control_stride`,
/// which must coincide in time with the model's control grid.
pub fn pc_flow_curves(
    model: &PCModel,
    l: usize,
    template: &Curve<f64>,
    multipliers: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<Curve<f64>>> {
    if l >= model.n_pc() {
        return Err(Error::Config(format!("component {l} not in model with {} PCs", model.n_pc())));
    }
    let q0: ControlPoints<f64> = select_control_points(template, opts.control_stride)?;
    check_grid(&model.control_x, q0.as_slice())?;
    multipliers
        .iter()
        .map(|&c| {
            let flat: Vec<f64> = model
                .mean
                .iter()
                .zip(&model.components[l])
                .map(|(m, mu)| m + c * mu)
                .collect();
            let field = MomentaField::from_flat(q0.clone(), &flat)?;
            let pts = shoot_and_flow(&field, template.points(), opts.n_steps, opts.sigma_v)?;
            Ok(Curve::new_unchecked(pts))
        })
        .collect()
}

/// Pointwise mean of curves sharing a vertex count.
pub fn mean_curve<'a>(curves: impl IntoIterator<Item = &'a Curve<f64>>) -> Result<Curve<f64>> {
    let mut acc: Vec<Vec2<f64>> = Vec::new();
    let mut count = 0usize;
    for c in curves {
        if count == 0 {
            acc = vec![Vec2::zero(); c.len()];
        } else if c.len() != acc.len() {
            return Err(Error::Dimension("curves differ in vertex count".into()));
        }
        for (a, p) in acc.iter_mut().zip(c.points()) {
            *a += *p;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Dimension("no curves to average".into()));
    }
    Curve::new(acc.into_iter().map(|p| p * (1.0 / count as f64)).collect())
}
