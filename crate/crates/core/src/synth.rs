//! Synthetic cohorts with known deformation modes.
//!
//! A smooth day profile serves as the common baseline. Hand-built momenta
//! fields (read from a recipe file) are orthonormalized into modes; every
//! subject's momenta are a Gaussian combination of the modes and the
//! follow-up curve is the baseline flowed along the resulting geodesic.
//! The vertical-difference PCA comparator and the recovery report live here
//! as well.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::{pca_rows, PCModel};
use crate::geometry::{Curve, Vec2};
use crate::ingest::{fmt_f64, ScaleParams, CSV_HEADER};
use crate::kernel::ControlPoints;
use crate::shooting::{shoot_and_flow, MomentaField};

/// Mode recipes shipped with the crate.
pub const DEFAULT_MODE_RECIPES: &str = include_str!("../data/synth_modes.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

/// Baseline activity in counts/min: `level + sum of Gaussian peaks`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub level: f64,
    pub peaks: Vec<Peak>,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            level: 150.0,
            peaks: vec![
                Peak { center: 600.0, width: 75.0, height: 850.0 },
                Peak { center: 930.0, width: 105.0, height: 700.0 },
            ],
        }
    }
}

impl BaselineSpec {
    pub fn eval(&self, minute: f64) -> f64 {
        self.level
            + self
                .peaks
                .iter()
                .map(|p| p.height * (-(minute - p.center).powi(2) / (2.0 * p.width * p.width)).exp())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModeTerm {
    Plateau {
        center: f64,
        half_width: f64,
        taper: f64,
        amplitude: f64,
    },
    Gauss {
        center: f64,
        width: f64,
        amplitude: f64,
    },
}

impl ModeTerm {
    pub fn eval(&self, minute: f64) -> f64 {
        match *self {
            ModeTerm::Plateau { center, half_width, taper, amplitude } => {
                let d = (minute - center).abs() - half_width;
                if d <= 0.0 {
                    amplitude
                } else if d >= taper {
                    0.0
                } else {
                    amplitude * 0.5 * (1.0 + (std::f64::consts::PI * d / taper).cos())
                }
            }
            ModeTerm::Gauss { center, width, amplitude } => {
                amplitude * (-(minute - center).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRecipe {
    pub name: String,
    #[serde(default)]
    pub x: Vec<ModeTerm>,
    #[serde(default)]
    pub y: Vec<ModeTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRecipes {
    pub modes: Vec<ModeRecipe>,
}

impl ModeRecipes {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("mode recipes: {e}")))
    }
}

impl Default for ModeRecipes {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_MODE_RECIPES).expect("bundled mode recipes parse")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// First and last grid minute (both inclusive).
    pub start_min: u32,
    pub end_min: u32,
    pub epoch_min: u32,
    /// Maximal admissible magnitude used for normalization.
    pub m_max: f64,
    pub baseline: BaselineSpec,
    /// Score standard deviation of each mode, in raw units.
    pub scale_factors: Vec<f64>,
    /// Converts `scale_factors` into coefficient standard deviations of the
    /// unit-norm modes: `sd = scale_factor * momentum_unit / sqrt(n_grid)`.
    /// The square root keeps the size of the deformation independent of
    /// the grid spacing.
    pub momentum_unit: f64,
    pub n_subjects: usize,
    pub seed: u64,
    pub n_steps: usize,
    pub sigma_v: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start_min: 420,
            end_min: 1260,
            epoch_min: 5,
            m_max: 2000.0,
            baseline: BaselineSpec::default(),
            scale_factors: vec![0.8 / 2000.0, 1.2 / 2000.0, 1.5 / 2000.0],
            momentum_unit: 300.0,
            n_subjects: 100,
            seed: 2024,
            n_steps: crate::shooting::DEFAULT_STEPS,
            sigma_v: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_min == 0 || self.start_min >= self.end_min || self.end_min >= 1440 {
            return Err(Error::Config("synthetic window must satisfy start < end < 1440 and epoch > 0".into()));
        }
        if self.grid_minutes().len() < 4 {
            return Err(Error::Config("synthetic grid has fewer than 4 points".into()));
        }
        if self.scale_factors.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("scale_factors must be finite and >= 0".into()));
        }
        if !(self.momentum_unit.is_finite() && self.momentum_unit >= 0.0) {
            return Err(Error::Config("momentum_unit must be finite and >= 0".into()));
        }
        if !(self.m_max > 0.0) || !(self.sigma_v > 0.0) || self.n_steps == 0 {
            return Err(Error::Config("m_max, sigma_v and n_steps must be positive".into()));
        }
        let peak = self
            .grid_minutes()
            .iter()
            .map(|&t| self.baseline.eval(t as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        if peak > self.m_max {
            return Err(Error::Config(format!("baseline peak {peak} exceeds m_max {}", self.m_max)));
        }
        Ok(())
    }

    pub fn grid_minutes(&self) -> Vec<u32> {
        (self.start_min..=self.end_min)
            .step_by(self.epoch_min.max(1) as usize)
            .collect()
    }

    pub fn scale(&self) -> ScaleParams {
        let g = self.grid_minutes();
        ScaleParams {
            t_min: g[0] as f64,
            t_max: *g.last().expect("nonempty grid") as f64,
            m_max: self.m_max,
        }
    }

    pub fn baseline_curve(&self) -> Result<Curve<f64>> {
        let s = self.scale();
        Curve::new(
            self.grid_minutes()
                .iter()
                .map(|&t| Vec2::new(s.to_x(t as f64), s.to_y(self.baseline.eval(t as f64))))
                .collect(),
        )
    }

    /// Coefficient standard deviation of every mode.
    pub fn score_sds(&self) -> Vec<f64> {
        let root_n = (self.grid_minutes().len() as f64).sqrt();
        self.scale_factors
            .iter()
            .map(|s| s * self.momentum_unit / root_n)
            .collect()
    }
}

/// Raw (non-orthogonal) momenta fields of `recipes` on the baseline vertices.
pub fn raw_modes(recipes: &ModeRecipes, cfg: &SynthConfig) -> Result<Vec<MomentaField<f64>>> {
    let baseline = cfg.baseline_curve()?;
    let q0 = ControlPoints::new(baseline.points().to_vec())?;
    let minutes = cfg.grid_minutes();
    recipes
        .modes
        .iter()
        .map(|r| {
            let p0 = minutes
                .iter()
                .map(|&t| {
                    let t = t as f64;
                    Vec2::new(
                        r.x.iter().map(|term| term.eval(t)).sum(),
                        r.y.iter().map(|term| term.eval(t)).sum(),
                    )
                })
                .collect();
            MomentaField::new(q0.clone(), p0)
        })
        .collect()
}

/// Gram-Schmidt (two passes) under the Frobenius inner product.
pub fn make_orthonormal_modes(raw: &[MomentaField<f64>]) -> Result<Vec<MomentaField<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    for (l, m) in raw.iter().enumerate() {
        let orig = m.to_flat();
        let norm0 = dot(&orig, &orig).sqrt();
        let mut v = orig;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(norm > 1e-10 * norm0) || norm == 0.0 {
            return Err(Error::Degenerate(format!(
                "raw modes are linearly dependent (mode {l} lies in the span of the previous ones)"
            )));
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    raw.iter()
        .zip(basis)
        .map(|(m, b)| MomentaField::from_flat(m.q0.clone(), &b))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSubject {
    pub subject_id: String,
    /// True coefficient of every mode.
    pub scores: Vec<f64>,
    pub momenta: MomentaField<f64>,
    pub follow_up: Curve<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthCohort {
    pub grid_minutes: Vec<u32>,
    pub scale: ScaleParams,
    pub baseline: Curve<f64>,
    pub modes: Vec<MomentaField<f64>>,
    pub mode_names: Vec<String>,
    pub subjects: Vec<SynthSubject>,
}

impl SynthCohort {
    pub fn true_scores(&self) -> Vec<Vec<f64>> {
        self.subjects.iter().map(|s| s.scores.clone()).collect()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn follow_ups(&self) -> Vec<Curve<f64>> {
        self.subjects.iter().map(|s| s.follow_up.clone()).collect()
    }
}

pub fn subject_id(i: usize) -> String {
    format!("S{:04}", i + 1)
}

/// Momenta `sum_l c_l mode_l` on the modes' control points.
pub fn combine_modes(modes: &[MomentaField<f64>], coefs: &[f64]) -> Result<MomentaField<f64>> {
    let first = modes
        .first()
        .ok_or_else(|| Error::Config("no modes".into()))?;
    let mut flat = vec![0.0; 2 * first.q0.len()];
    for (m, c) in modes.iter().zip(coefs) {
        for (f, v) in flat.iter_mut().zip(m.to_flat()) {
            *f += c * v;
        }
    }
    MomentaField::from_flat(first.q0.clone(), &flat)
}

fn flow_subject(
    cfg: &SynthConfig,
    baseline: &Curve<f64>,
    modes: &[MomentaField<f64>],
    i: usize,
    scores: Vec<f64>,
) -> Result<SynthSubject> {
    let wrap = |e| Error::Subject {
        subject: format!("{} (index {i})", subject_id(i)),
        source: Box::new(e),
    };
    let momenta = combine_modes(modes, &scores).map_err(wrap)?;
    let pts = shoot_and_flow(&momenta, baseline.points(), cfg.n_steps, cfg.sigma_v).map_err(wrap)?;
    let follow_up = Curve::new(clip_to_window(&pts)).map_err(wrap)?;
    Ok(SynthSubject {
        subject_id: subject_id(i),
        scores,
        momenta,
        follow_up,
    })
}

/// Restricts a flowed polyline to the observation window `-1 <= x <= 1`,
/// replacing segments that cross a boundary by their crossing point.
pub fn clip_to_window(pts: &[Vec2<f64>]) -> Vec<Vec2<f64>> {
    let inside = |p: &Vec2<f64>| p.x.abs() <= 1.0;
    let crossing = |a: Vec2<f64>, b: Vec2<f64>, edge: f64| {
        let s = (edge - a.x) / (b.x - a.x);
        Vec2::new(edge, a.y + s * (b.y - a.y))
    };
    let mut out = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        if i > 0 {
            let prev = pts[i - 1];
            for edge in [-1.0, 1.0] {
                let (lo, hi) = (prev.x.min(p.x), prev.x.max(p.x));
                let strictly_crosses = lo < edge && edge < hi;
                if strictly_crosses && (inside(&prev) != inside(&p)) {
                    out.push(crossing(prev, p, edge));
                }
            }
        }
        if inside(&p) {
            out.push(p);
        }
    }
    out
}

/// Builds the orthonormal modes from `recipes` and simulates a cohort.
pub fn simulate_cohort(cfg: &SynthConfig, recipes: &ModeRecipes) -> Result<SynthCohort> {
    cfg.validate()?;
    if recipes.modes.len() != cfg.scale_factors.len() {
        return Err(Error::Config(format!(
            "{} mode recipes but {} scale factors",
            recipes.modes.len(),
            cfg.scale_factors.len()
        )));
    }
    let modes = make_orthonormal_modes(&raw_modes(recipes, cfg)?)?;
    let baseline = cfg.baseline_curve()?;
    let sds = cfg.score_sds();
    // scores are drawn sequentially so the cohort is independent of threading
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scores: Vec<Vec<f64>> = (0..cfg.n_subjects)
        .map(|_| {
            sds.iter()
                .map(|sd| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * sd
                })
                .collect()
        })
        .collect();
    let subjects = scores
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| flow_subject(cfg, &baseline, &modes, i, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCohort {
        grid_minutes: cfg.grid_minutes(),
        scale: cfg.scale(),
        baseline,
        modes,
        mode_names: recipes.modes.iter().map(|m| m.name.clone()).collect(),
        subjects,
    })
}

/// A subject whose coefficients split a two-SD total magnitude by `weights`
/// (e.g. 40/15/45%).
pub fn showcase_subject(cfg: &SynthConfig, cohort: &SynthCohort, weights: &[f64]) -> Result<SynthSubject> {
    let total = 2.0 * cfg.score_sds().iter().sum::<f64>();
    let scores = weights.iter().map(|w| w * total).collect();
    let mut s = flow_subject(cfg, &cohort.baseline, &cohort.modes, 0, scores)?;
    s.subject_id = "showcase".into();
    Ok(s)
}

/// Follow-up minus baseline magnitude on the baseline time grid, the
/// follow-up resampled by linear interpolation in time.
pub fn vertical_difference(baseline: &Curve<f64>, follow_up: &Curve<f64>) -> Vec<f64> {
    baseline
        .points()
        .iter()
        .map(|p| follow_up.interpolate_y(p.x) - p.y)
        .collect()
}

/// PCA of vertical differences. A cohort without change yields a model
/// with zero eigenvalues, components and scores.
pub fn vertical_diff_pca_curves(
    subject_ids: &[String],
    baseline: &Curve<f64>,
    follow_ups: &[Curve<f64>],
    n_pc: usize,
) -> Result<PCModel> {
    let rows: Vec<Vec<f64>> = follow_ups
        .iter()
        .map(|f| vertical_difference(baseline, f))
        .collect();
    let control_x: Vec<f64> = baseline.points().iter().map(|p| p.x).collect();
    match pca_rows(subject_ids, &control_x, &rows, n_pc) {
        Err(e @ (Error::Degenerate(_) | Error::Config(_))) if n_pc <= rows.len().saturating_sub(1) => {
            let d = control_x.len();
            let n = rows.len();
            let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
            let spread = rows
                .iter()
                .flat_map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b).abs()))
                .fold(0.0f64, f64::max);
            if spread > 1e-12 {
                return Err(e);
            }
            let unit = |l: usize| (0..d).map(|j| if j == l % d { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
            Ok(PCModel {
                subject_ids: subject_ids.to_vec(),
                control_x,
                mean,
                raw_components: (0..n_pc).map(unit).collect(),
                components: vec![vec![0.0; d]; n_pc],
                sigmas: vec![0.0; n_pc],
                eigenvalues: vec![0.0; (n - 1).min(d)],
                var_explained: vec![0.0; (n - 1).min(d)],
                scores: vec![vec![0.0; n_pc]; n],
            })
        }
        other => other,
    }
}

pub fn vertical_diff_pca(cohort: &SynthCohort, n_pc: usize) -> Result<PCModel> {
    vertical_diff_pca_curves(&cohort.subject_ids(), &cohort.baseline, &cohort.follow_ups(), n_pc)
}

/// Pearson correlation; `None` when either input is constant or lengths differ.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecovery {
    pub mode: usize,
    pub pc_index: usize,
    /// +1 or -1, the orientation aligning the PC with the true mode.
    pub sign: f64,
    /// Score correlation after sign alignment.
    pub score_corr: f64,
    /// Correlation of the true mode with the aligned component, when both
    /// live in the same space.
    pub momenta_corr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub modes: Vec<ModeRecovery>,
    /// Cumulative variance explained by the first `modes.len()` PCs.
    pub top_var_explained: Option<f64>,
}

impl RecoveryReport {
    pub fn min_score_corr(&self) -> f64 {
        self.modes.iter().map(|m| m.score_corr).fold(f64::INFINITY, f64::min)
    }
}

/// Matches each true mode to a distinct estimated PC maximizing the total
/// absolute score correlation (exhaustive search), then aligns signs.
pub fn compare_recovery(
    true_scores: &[Vec<f64>],
    true_modes: Option<&[Vec<f64>]>,
    estimated: &PCModel,
) -> Result<RecoveryReport> {
    let n = true_scores.len();
    if estimated.scores.len() != n {
        return Err(Error::Dimension(format!(
            "{n} true subjects but {} estimated score rows",
            estimated.scores.len()
        )));
    }
    let n_modes = true_scores.first().map_or(0, Vec::len);
    let n_pc = estimated.n_pc();
    let col = |rows: &[Vec<f64>], j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let corr: Vec<Vec<f64>> = (0..n_modes)
        .map(|l| {
            let t = col(true_scores, l);
            (0..n_pc)
                .map(|j| correlation(&t, &col(&estimated.scores, j)).unwrap_or(0.0))
                .collect()
        })
        .collect();

    let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
    let mut current = Vec::with_capacity(n_modes);
    let mut used = vec![false; n_pc];
    search(&corr, 0, n_modes.min(n_pc), &mut used, &mut current, 0.0, &mut best);

    let modes = best
        .1
        .iter()
        .enumerate()
        .map(|(l, &j)| {
            let c = corr[l][j];
            let sign = if c < 0.0 { -1.0 } else { 1.0 };
            let momenta_corr = true_modes.and_then(|tm| {
                let comp: Vec<f64> = estimated.raw_components[j].iter().map(|v| sign * v).collect();
                correlation(&tm[l], &comp)
            });
            ModeRecovery {
                mode: l,
                pc_index: j,
                sign,
                score_corr: c.abs(),
                momenta_corr,
            }
        })
        .collect::<Vec<_>>();
    let top_var_explained = estimated
        .var_explained
        .get(modes.len().saturating_sub(1))
        .copied()
        .filter(|_| !modes.is_empty());
    Ok(RecoveryReport { modes, top_var_explained })
}

fn search(
    corr: &[Vec<f64>],
    l: usize,
    depth: usize,
    used: &mut [bool],
    current: &mut Vec<usize>,
    total: f64,
    best: &mut (f64, Vec<usize>),
) {
    if l == depth {
        if total > best.0 + 1e-15 {
            *best = (total, current.clone());
        }
        return;
    }
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        current.push(j);
        search(corr, l + 1, depth, used, current, total + corr[l][j].abs(), best);
        current.pop();
        used[j] = false;
    }
}

pub fn compare_recovery_cohort(cohort: &SynthCohort, estimated: &PCModel) -> Result<RecoveryReport> {
    let modes: Vec<Vec<f64>> = cohort.modes.iter().map(|m| m.to_flat()).collect();
    let same_space = estimated.dim() == modes.first().map_or(0, Vec::len);
    compare_recovery(
        &cohort.true_scores(),
        same_space.then_some(modes.as_slice()),
        estimated,
    )
}

/// Mean squared magnitude error on the baseline time grid between the
/// targets and curves rebuilt from the first `k` PCs of a momenta model
/// (template: `baseline`, control points at every vertex).
pub fn momenta_reconstruction_error(
    baseline: &Curve<f64>,
    targets: &[Curve<f64>],
    model: &PCModel,
    k: usize,
    n_steps: usize,
    sigma_v: f64,
) -> Result<f64> {
    let q0 = ControlPoints::new(baseline.points().to_vec())?;
    let errs = targets
        .par_iter()
        .zip(&model.scores)
        .map(|(target, scores)| {
            let flat = model.reconstruct(&scores[..k.min(scores.len())]);
            let m = MomentaField::from_flat(q0.clone(), &flat)?;
            let rec = Curve::new_unchecked(shoot_and_flow(&m, baseline.points(), n_steps, sigma_v)?);
            Ok(grid_mse(baseline, &rec, target))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len().max(1) as f64)
}

/// Same error for a vertical-difference model: the rebuilt curve is the
/// baseline plus the reconstructed difference.
pub fn vertical_reconstruction_error(
    baseline: &Curve<f64>,
    targets: &[Curve<f64>],
    model: &PCModel,
    k: usize,
) -> f64 {
    let errs: Vec<f64> = targets
        .iter()
        .zip(&model.scores)
        .map(|(target, scores)| {
            let d = model.reconstruct(&scores[..k.min(scores.len())]);
            let rec = Curve::new_unchecked(
                baseline
                    .points()
                    .iter()
                    .zip(&d)
                    .map(|(p, dy)| Vec2::new(p.x, p.y + dy))
                    .collect(),
            );
            grid_mse(baseline, &rec, target)
        })
        .collect();
    errs.iter().sum::<f64>() / errs.len().max(1) as f64
}

fn grid_mse(baseline: &Curve<f64>, a: &Curve<f64>, b: &Curve<f64>) -> f64 {
    let pts = baseline.points();
    pts.iter()
        .map(|p| (a.interpolate_y(p.x) - b.interpolate_y(p.x)).powi(2))
        .sum::<f64>()
        / pts.len() as f64
}

/// Writes the cohort as minute-level records (one day per visit) in the
/// activity CSV layout, sampling each curve at every minute of the window.
pub fn write_activity_csv<W: Write>(cohort: &SynthCohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let s = &cohort.scale;
    let first = cohort.grid_minutes[0];
    let last = *cohort.grid_minutes.last().expect("nonempty grid");
    for subj in &cohort.subjects {
        for (visit, curve) in [("0", &cohort.baseline), ("1", &subj.follow_up)] {
            for t in first..=last {
                let vm = s.from_y(curve.interpolate_y(s.to_x(t as f64))).max(0.0);
                w.write_record([subj.subject_id.as_str(), visit, "0", &t.to_string(), &fmt_f64(vm)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `subject_id,mode,score` rows of the true coefficients.
pub fn write_truth_csv<W: Write>(cohort: &SynthCohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subject_id", "mode", "score"])?;
    for s in &cohort.subjects {
        for (l, c) in s.scores.iter().enumerate() {
            w.write_record([s.subject_id.as_str(), &(l + 1).to_string(), &fmt_f64(*c)])?;
        }
    }
    w.flush()?;
    Ok(())
}
