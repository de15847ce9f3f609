//! File formats passed between stages.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use actigeo_core::fpca::PCModel;
use actigeo_core::ingest::{read_curves_csv, ScaleParams, SubjectCurves};
use actigeo_core::{ControlPoints, Error as CoreError, MatchConfig, MatchResult, MomentaField, Vec2};
use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use crate::config::{MATCH_DIR, MATCH_SUMMARY_FILE, PCA_MODEL_FILE, SCORES_FILE};
use crate::failure::{require_file, Classify, ClassifyCore, CmdResult, Failure};
use crate::output::file_stem;

/// Sidecar of a curves file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSidecar {
    pub scale: ScaleParams,
    /// Spacing of curve vertices in minutes.
    pub epoch_min: u32,
    /// Equivalent degrees of freedom achieved by the smoother.
    pub achieved_df: Option<f64>,
    pub n_subjects: usize,
    /// Subjects without both visits, excluded from the curves.
    pub incomplete_subjects: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// Per-subject output of `match`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub subject_id: String,
    pub status: Status,
    pub error: Option<String>,
    pub control_points: Vec<[f64; 2]>,
    pub momenta: Vec<[f64; 2]>,
    pub objective_trace: Vec<f64>,
    pub final_attachment: Option<f64>,
    pub final_energy: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
    pub config: MatchConfig,
}

fn pairs(v: &[Vec2<f64>]) -> Vec<[f64; 2]> {
    v.iter().map(|p| [p.x, p.y]).collect()
}

fn points(v: &[[f64; 2]]) -> Vec<Vec2<f64>> {
    v.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

impl MatchRecord {
    pub fn success(subject_id: &str, r: &MatchResult, cfg: &MatchConfig) -> Self {
        Self {
            subject_id: subject_id.to_string(),
            status: Status::Ok,
            error: None,
            control_points: pairs(r.momenta.q0.as_slice()),
            momenta: pairs(&r.momenta.p0),
            objective_trace: r.objective_trace.clone(),
            final_attachment: Some(r.final_attachment),
            final_energy: Some(r.final_energy),
            converged: r.converged,
            iterations: r.iterations,
            diagnostics: r.diagnostics.clone(),
            config: *cfg,
        }
    }

    pub fn failure(subject_id: &str, error: String, cfg: &MatchConfig) -> Self {
        Self {
            subject_id: subject_id.to_string(),
            status: Status::Failed,
            error: Some(error),
            control_points: Vec::new(),
            momenta: Vec::new(),
            objective_trace: Vec::new(),
            final_attachment: None,
            final_energy: None,
            converged: false,
            iterations: 0,
            diagnostics: Vec::new(),
            config: *cfg,
        }
    }

    pub fn momenta_field(&self) -> actigeo_core::Result<MomentaField> {
        MomentaField::new(ControlPoints::new(points(&self.control_points))?, points(&self.momenta))
    }

    pub fn file_name(subject_id: &str) -> String {
        format!("{MATCH_DIR}/{}.json", file_stem(subject_id))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryEntry {
    pub subject_id: String,
    pub status: Status,
    pub file: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchSummary {
    pub n_subjects: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_converged: usize,
    pub subjects: Vec<SummaryEntry>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> CmdResult<T> {
    require_file(path, what)?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .runtime()?;
    serde_json::from_str(&text)
        .with_context(|| format!("{what} {} does not have the expected format", path.display()))
        .invalid()
}

pub fn load_scale(path: &Path) -> CmdResult<ScaleSidecar> {
    read_json(path, "scale file")
}

/// Curves in file order; subjects whose curves are invalid are kept as
/// errors so the caller can isolate them.
pub fn load_curves(path: &Path) -> CmdResult<Vec<(String, actigeo_core::Result<SubjectCurves>)>> {
    require_file(path, "curves file")?;
    let f = fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .runtime()?;
    read_curves_csv(f).classify(&format!("reading {}", path.display()))
}

/// Successful match records in summary order.
pub fn load_matches(out_dir: &Path) -> CmdResult<Vec<MatchRecord>> {
    let summary: MatchSummary = read_json(&out_dir.join(MATCH_SUMMARY_FILE), "match summary")?;
    let mut out = Vec::new();
    for e in summary.subjects.iter().filter(|e| e.status == Status::Ok) {
        let rec: MatchRecord = read_json(&out_dir.join(&e.file), "match result")?;
        if rec.subject_id != e.subject_id {
            return Err(Failure::Invalid(anyhow!(
                "{} holds subject {} but the summary lists {}",
                e.file,
                rec.subject_id,
                e.subject_id
            )));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Failure::Invalid(anyhow!("no successfully matched subjects in {}", out_dir.display())));
    }
    Ok(out)
}

pub fn momenta_fields(records: &[MatchRecord]) -> CmdResult<Vec<MomentaField>> {
    records
        .iter()
        .map(|r| {
            r.momenta_field()
                .map_err(|e| CoreError::Subject { subject: r.subject_id.clone(), source: Box::new(e) })
        })
        .collect::<actigeo_core::Result<_>>()
        .classify("reading momenta")
}

pub fn load_model(out_dir: &Path) -> CmdResult<PCModel> {
    read_json(&out_dir.join(PCA_MODEL_FILE), "PCA model")
}

/// Subject ids in file order and each subject's scores.
pub type ScoreTable = (Vec<String>, HashMap<String, Vec<f64>>);

/// Scores by subject, PCs in index order.
pub fn load_scores(out_dir: &Path) -> CmdResult<ScoreTable> {
    let path = out_dir.join(SCORES_FILE);
    require_file(&path, "scores file")?;
    let mut rdr = csv::Reader::from_path(&path)
        .with_context(|| format!("cannot open {}", path.display()))
        .runtime()?;
    let header = rdr.headers().invalid()?.clone();
    if header.iter().ne(["subject_id", "pc_index", "score"]) {
        return Err(Failure::Invalid(anyhow!("{} has an unexpected header", path.display())));
    }
    let mut order = Vec::new();
    let mut map: HashMap<String, Vec<f64>> = HashMap::new();
    for row in rdr.records() {
        let row = row.invalid()?;
        let bad = || Failure::Invalid(anyhow!("{}: malformed row {:?}", path.display(), row));
        let k: usize = row[1].parse().map_err(|_| bad())?;
        let v: f64 = row[2].parse().map_err(|_| bad())?;
        let entry = map.entry(row[0].to_string()).or_insert_with(|| {
            order.push(row[0].to_string());
            Vec::new()
        });
        if k != entry.len() + 1 {
            return Err(bad());
        }
        entry.push(v);
    }
    Ok((order, map))
}
