use std::fs;

use actigeo_core::fpca::{fit_pca, MomentaMatrix};
use actigeo_core::ingest::{fmt_f64, write_curves_csv, SubjectCurves};
use actigeo_core::matching::match_curves;
use actigeo_core::render::{Figure, LineStyle, RenderOptions, BASELINE_COLOR, PLUS_COLOR};
use actigeo_core::synth::{
    compare_recovery_cohort, momenta_reconstruction_error, showcase_subject, simulate_cohort, vertical_diff_pca,
    vertical_reconstruction_error, write_activity_csv, write_truth_csv, ModeRecipes, RecoveryReport, SynthCohort,
};
use actigeo_core::Error as CoreError;
use anyhow::Context;
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::ScaleSidecar;
use crate::config::PipelineConfig;
use crate::failure::{Classify, ClassifyCore, CmdResult};
use crate::output::{csv_bytes, Outputs};

#[derive(Serialize)]
struct Reconstruction {
    /// Number of leading PCs used to rebuild the follow-up curves.
    n_pc: usize,
    proposed_mse: f64,
    vertical_mse: f64,
    /// `1 - proposed / vertical`.
    reduction: f64,
}

#[derive(Serialize)]
struct Evaluation<'a> {
    n_subjects: usize,
    n_converged: usize,
    mode_names: &'a [String],
    proposed: &'a RecoveryReport,
    vertical: &'a RecoveryReport,
    /// One entry per number of leading PCs, up to the number of modes.
    reconstruction: Vec<Reconstruction>,
}

fn recipes(cfg: &PipelineConfig) -> CmdResult<ModeRecipes> {
    match &cfg.simulate.modes {
        None => Ok(ModeRecipes::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read mode recipes {}", p.display()))
                .invalid()?;
            ModeRecipes::from_toml_str(&text).classify(&format!("mode recipes {}", p.display()))
        }
    }
}

fn evaluate(cfg: &PipelineConfig, out: &mut Outputs, cohort: &SynthCohort) -> CmdResult<()> {
    let mc = cfg.matching;
    let results = cohort
        .subjects
        .par_iter()
        .map(|s| {
            match_curves(&cohort.baseline, &s.follow_up, &mc).map_err(|e| CoreError::Subject {
                subject: s.subject_id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<actigeo_core::Result<Vec<_>>>()
        .classify("matching simulated subjects")?;
    let fields: Vec<_> = results.iter().map(|r| r.momenta.clone()).collect();
    let data = MomentaMatrix::from_fields(cohort.subject_ids(), &fields).classify("stacking momenta")?;
    let n_modes = cohort.modes.len();
    let n_pc = cfg.simulate.n_pc.max(n_modes).min(data.n_subjects() - 1);
    let model = fit_pca(&data, n_pc).classify("fitting PCA")?;
    let proposed = compare_recovery_cohort(cohort, &model).classify("comparing recovery")?;
    let vmodel = vertical_diff_pca(cohort, n_pc).classify("vertical-difference PCA")?;
    let vertical = compare_recovery_cohort(cohort, &vmodel).classify("comparing recovery")?;
    let targets = cohort.follow_ups();
    let mut reconstruction = Vec::with_capacity(n_modes);
    for k in 1..=n_modes {
        let pe = momenta_reconstruction_error(&cohort.baseline, &targets, &model, k, mc.n_steps, mc.sigma_v)
            .classify("reconstructing follow-ups")?;
        let ve = vertical_reconstruction_error(&cohort.baseline, &targets, &vmodel, k);
        reconstruction.push(Reconstruction {
            n_pc: k,
            proposed_mse: pe,
            vertical_mse: ve,
            reduction: 1.0 - pe / ve,
        });
    }
    info!(
        "recovery: min score correlation {:.3} (vertical {:.3})",
        proposed.min_score_corr(),
        vertical.min_score_corr()
    );

    let mut rows = Vec::new();
    for (method, rep) in [("proposed", &proposed), ("vertical", &vertical)] {
        for m in &rep.modes {
            rows.push(vec![
                method.to_string(),
                (m.mode + 1).to_string(),
                cohort.mode_names[m.mode].clone(),
                (m.pc_index + 1).to_string(),
                fmt_f64(m.sign),
                fmt_f64(m.score_corr),
                m.momenta_corr.map(fmt_f64).unwrap_or_default(),
            ]);
        }
    }
    let header = ["method", "mode", "mode_name", "pc_index", "sign", "score_corr", "momenta_corr"];
    out.write("sim/recovery.csv", &csv_bytes(&header, rows).runtime()?).runtime()?;
    let eval = Evaluation {
        n_subjects: results.len(),
        n_converged: results.iter().filter(|r| r.converged).count(),
        mode_names: &cohort.mode_names,
        proposed: &proposed,
        vertical: &vertical,
        reconstruction,
    };
    out.write_json("sim/recovery.json", &eval).runtime()?;
    out.write_json("sim/pca_model.json", &model).runtime()?;
    Ok(())
}

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let sc = &cfg.simulate.cohort;
    let cohort = simulate_cohort(sc, &recipes(cfg)?).classify("simulating cohort")?;
    info!("simulated {} subjects on {} grid points", cohort.subjects.len(), cohort.grid_minutes.len());

    let mut buf = Vec::new();
    write_activity_csv(&cohort, &mut buf).runtime()?;
    out.write("sim/activity.csv", &buf).runtime()?;
    let mut buf = Vec::new();
    write_truth_csv(&cohort, &mut buf).runtime()?;
    out.write("sim/truth.csv", &buf).runtime()?;
    let pairs: Vec<SubjectCurves> = cohort
        .subjects
        .iter()
        .map(|s| SubjectCurves {
            subject_id: s.subject_id.clone(),
            baseline: cohort.baseline.clone(),
            follow_up: s.follow_up.clone(),
        })
        .collect();
    let mut buf = Vec::new();
    write_curves_csv(&mut buf, &pairs).runtime()?;
    out.write("sim/curves.csv", &buf).runtime()?;
    out.write_json(
        "sim/scale.json",
        &ScaleSidecar {
            scale: cohort.scale,
            epoch_min: sc.epoch_min,
            achieved_df: None,
            n_subjects: cohort.subjects.len(),
            incomplete_subjects: Vec::new(),
        },
    )
    .runtime()?;

    let show = showcase_subject(sc, &cohort, &cfg.simulate.showcase_weights).classify("showcase subject")?;
    let mut opts = RenderOptions::new(cohort.scale, sc.epoch_min as f64);
    opts.arrow_stride_min = cfg.render.arrow_stride_min;
    opts.width = cfg.render.width;
    opts.height = cfg.render.height;
    opts.title = "Simulated baseline and follow-up".into();
    let mut fig = Figure::new(opts);
    fig.curve(&cohort.baseline, BASELINE_COLOR, LineStyle::Solid, "baseline")
        .curve(&show.follow_up, PLUS_COLOR, LineStyle::Dashed, "follow-up")
        .momenta(&show.momenta);
    out.write("sim/showcase.svg", fig.to_svg().as_bytes()).runtime()?;

    if cfg.simulate.evaluate {
        evaluate(cfg, out, &cohort)?;
    }
    Ok(())
}
