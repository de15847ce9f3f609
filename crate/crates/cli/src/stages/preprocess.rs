use actigeo_core::ingest::{parse_activity_csv, preprocess, write_curves_csv};
use anyhow::anyhow;
use log::{info, warn};

use crate::artifacts::ScaleSidecar;
use crate::config::{PipelineConfig, CURVES_FILE, SCALE_FILE};
use crate::failure::{require_file, Classify, ClassifyCore, CmdResult, Failure};
use crate::output::Outputs;

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let path = cfg
        .paths
        .activity
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow!("paths.activity is not set")))?;
    require_file(path, "activity file")?;
    let data = parse_activity_csv(path, &cfg.preprocess).classify(&format!("reading {}", path.display()))?;
    let cohort = preprocess(&data, &cfg.preprocess).classify("preprocessing")?;
    if !cohort.incomplete.is_empty() {
        warn!(
            "{} subject(s) without both visits skipped: {}",
            cohort.incomplete.len(),
            cohort.incomplete.join(", ")
        );
    }
    info!(
        "{} subjects preprocessed, smoother df {:.4}",
        cohort.subjects.len(),
        cohort.achieved_df
    );
    let mut buf = Vec::new();
    write_curves_csv(&mut buf, &cohort.subjects).runtime()?;
    out.write(CURVES_FILE, &buf).runtime()?;
    let sidecar = ScaleSidecar {
        scale: cohort.scale,
        epoch_min: cfg.preprocess.epoch_min,
        achieved_df: Some(cohort.achieved_df),
        n_subjects: cohort.subjects.len(),
        incomplete_subjects: cohort.incomplete,
    };
    out.write_json(SCALE_FILE, &sidecar).runtime()?;
    Ok(())
}
