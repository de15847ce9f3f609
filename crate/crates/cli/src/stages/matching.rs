use actigeo_core::matching::match_curves;
use anyhow::anyhow;
use log::{info, warn};
use rayon::prelude::*;

use crate::artifacts::{load_curves, MatchRecord, MatchSummary, Status, SummaryEntry};
use crate::config::{PipelineConfig, MATCH_SUMMARY_FILE};
use crate::failure::{Classify, CmdResult, Failure};
use crate::output::Outputs;

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let curves = load_curves(&cfg.curves_path())?;
    if curves.is_empty() {
        return Err(Failure::Invalid(anyhow!("{} holds no subjects", cfg.curves_path().display())));
    }
    let mc = cfg.matching;
    let records: Vec<MatchRecord> = curves
        .into_par_iter()
        .map(|(id, pair)| {
            let res = pair.and_then(|p| match_curves(&p.baseline, &p.follow_up, &mc));
            match res {
                Ok(r) => MatchRecord::success(&id, &r, &mc),
                Err(e) => MatchRecord::failure(&id, e.to_string(), &mc),
            }
        })
        .collect();

    let mut entries = Vec::with_capacity(records.len());
    for r in &records {
        let file = MatchRecord::file_name(&r.subject_id);
        out.write_json(&file, r).runtime()?;
        if let Some(e) = &r.error {
            warn!("subject {} failed: {e}", r.subject_id);
        }
        entries.push(SummaryEntry {
            subject_id: r.subject_id.clone(),
            status: r.status,
            file,
            error: r.error.clone(),
        });
    }
    let n_ok = records.iter().filter(|r| r.status == Status::Ok).count();
    let summary = MatchSummary {
        n_subjects: records.len(),
        n_ok,
        n_failed: records.len() - n_ok,
        n_converged: records.iter().filter(|r| r.converged).count(),
        subjects: entries,
    };
    out.write_json(MATCH_SUMMARY_FILE, &summary).runtime()?;
    info!(
        "matched {} subjects: {} ok ({} at gradient tolerance), {} failed",
        summary.n_subjects, summary.n_ok, summary.n_converged, summary.n_failed
    );
    if n_ok == 0 {
        return Err(Failure::Runtime(anyhow!("all {} subjects failed to match", records.len())));
    }
    Ok(())
}
