use std::collections::HashMap;

use actigeo_core::fpca::{mean_curve, pc_flow_curves};
use actigeo_core::ingest::ScaleParams;
use actigeo_core::matching::select_control_points;
use actigeo_core::render::{
    Figure, LineStyle, RenderOptions, BASELINE_COLOR, MINUS_COLOR, PLUS_COLOR, TARGET_COLOR,
};
use actigeo_core::shooting::shoot_and_flow;
use actigeo_core::{Curve, MomentaField};
use anyhow::anyhow;
use log::info;

use crate::artifacts::{load_curves, load_matches, load_model, load_scale, momenta_fields};
use crate::config::{PipelineConfig, PCA_MODEL_FILE};
use crate::failure::{ClassifyCore, Classify, CmdResult, Failure};
use crate::output::{file_stem, Outputs};

fn options(cfg: &PipelineConfig, scale: ScaleParams, field: &MomentaField, title: String) -> RenderOptions {
    let q = field.q0.as_slice();
    let spacing = if q.len() >= 2 { scale.from_x(q[1].x) - scale.from_x(q[0].x) } else { 1.0 };
    let mut o = RenderOptions::new(scale, (spacing * 1e6).round() / 1e6);
    o.arrow_stride_min = cfg.render.arrow_stride_min;
    o.width = cfg.render.width;
    o.height = cfg.render.height;
    o.title = title;
    o
}

pub fn run(cfg: &PipelineConfig, out: &mut Outputs) -> CmdResult<()> {
    let scale = load_scale(&cfg.scale_path())?.scale;
    let curves: HashMap<String, (Curve, Curve)> = load_curves(&cfg.curves_path())?
        .into_iter()
        .filter_map(|(id, r)| r.ok().map(|c| (id, (c.baseline, c.follow_up))))
        .collect();
    let records = load_matches(&cfg.paths.out_dir)?;
    let fields = momenta_fields(&records)?;

    let chosen: Vec<usize> = if cfg.render.subjects.is_empty() {
        (0..records.len().min(3)).collect()
    } else {
        cfg.render
            .subjects
            .iter()
            .map(|s| {
                records
                    .iter()
                    .position(|r| &r.subject_id == s)
                    .ok_or_else(|| Failure::Invalid(anyhow!("subject {s} has no successful match")))
            })
            .collect::<CmdResult<_>>()?
    };
    let mc = &cfg.matching;
    for k in chosen {
        let id = &records[k].subject_id;
        let (baseline, follow_up) = curves
            .get(id)
            .ok_or_else(|| Failure::Invalid(anyhow!("subject {id} missing from the curves file")))?;
        let deformed = shoot_and_flow(&fields[k], baseline.points(), mc.n_steps, mc.sigma_v)
            .classify(&format!("flowing subject {id}"))?;
        let mut fig = Figure::new(options(cfg, scale, &fields[k], format!("Subject {id}")));
        fig.curve(baseline, BASELINE_COLOR, LineStyle::Solid, "baseline")
            .curve(follow_up, TARGET_COLOR, LineStyle::Dashed, "follow-up")
            .curve(&Curve::new_unchecked(deformed), PLUS_COLOR, LineStyle::Dashed, "deformed baseline")
            .momenta(&fields[k]);
        out.write(&format!("figures/match_{}.svg", file_stem(id)), fig.to_svg().as_bytes())
            .runtime()?;
    }

    if !cfg.paths.out_dir.join(PCA_MODEL_FILE).is_file() {
        info!("no PCA model; skipping component figures");
        return Ok(());
    }
    let model = load_model(&cfg.paths.out_dir)?;
    let baselines: Vec<&Curve> = model
        .subject_ids
        .iter()
        .filter_map(|id| curves.get(id).map(|c| &c.0))
        .collect();
    if baselines.len() != model.subject_ids.len() {
        return Err(Failure::Invalid(anyhow!("PCA model subjects are missing from the curves file")));
    }
    let template = mean_curve(baselines).classify("averaging baselines")?;
    let q0 = select_control_points(&template, mc.control_stride).classify("template control points")?;
    for l in 0..cfg.render.n_pc.min(model.n_pc()) {
        let flows = pc_flow_curves(&model, l, &template, &[1.0, -1.0], &cfg.flow_options())
            .classify(&format!("flowing template along PC {}", l + 1))?;
        let field = MomentaField::from_flat(q0.clone(), &model.components[l]).classify("component momenta")?;
        let title = format!(
            "PC {} ({:.1}% of variance)",
            l + 1,
            100.0 * model.eigenvalues[l] / model.eigenvalues.iter().sum::<f64>()
        );
        let mut fig = Figure::new(options(cfg, scale, &field, title));
        fig.curve(&template, BASELINE_COLOR, LineStyle::Solid, "mean baseline")
            .curve(&flows[0], PLUS_COLOR, LineStyle::Dashed, "+1 x PC")
            .curve(&flows[1], MINUS_COLOR, LineStyle::Dashed, "-1 x PC")
            .momenta(&field);
        out.write(&format!("figures/pc{}.svg", l + 1), fig.to_svg().as_bytes()).runtime()?;
    }
    Ok(())
}
