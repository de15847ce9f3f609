use actigeo_core::fpca::{fit_pca, MomentaMatrix};
use actigeo_core::ingest::fmt_f64;
use log::{info, warn};

use crate::artifacts::{load_matches, momenta_fields};
use crate::config::{PipelineConfig, PCA_MODEL_FILE, SCORES_FILE};
use crate::failure::{Classify, ClassifyCore, CmdResult};
use crate::output::{csv_bytes, Outputs};

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let records = load_matches(&cfg.paths.out_dir)?;
    let fields = momenta_fields(&records)?;
    let ids = records.iter().map(|r| r.subject_id.clone()).collect();
    let data = MomentaMatrix::from_fields(ids, &fields).classify("stacking momenta")?;
    let cap = (data.n_subjects().saturating_sub(1)).min(2 * data.n_control()).max(1);
    let n_pc = if cfg.fpca.n_pc > cap {
        warn!("n_pc {} exceeds what {} subjects support; using {cap}", cfg.fpca.n_pc, data.n_subjects());
        cap
    } else {
        cfg.fpca.n_pc
    };
    let model = fit_pca(&data, n_pc).classify("fitting PCA")?;
    info!(
        "PCA on {} subjects: first {n_pc} PCs explain {:.1}% of the variance",
        data.n_subjects(),
        100.0 * model.var_explained[n_pc - 1]
    );
    out.write_json(PCA_MODEL_FILE, &model).runtime()?;

    let rows = model.subject_ids.iter().zip(&model.scores).flat_map(|(id, s)| {
        s.iter()
            .enumerate()
            .map(move |(l, v)| vec![id.clone(), (l + 1).to_string(), fmt_f64(*v)])
    });
    out.write(SCORES_FILE, &csv_bytes(&["subject_id", "pc_index", "score"], rows).runtime()?)
        .runtime()?;

    let var_rows = model.eigenvalues.iter().zip(&model.var_explained).enumerate().map(|(l, (e, c))| {
        vec![(l + 1).to_string(), fmt_f64(*e), fmt_f64(*c)]
    });
    out.write(
        "pca_variance.csv",
        &csv_bytes(&["pc_index", "eigenvalue", "cumulative_var_explained"], var_rows).runtime()?,
    )
    .runtime()?;
    Ok(())
}
