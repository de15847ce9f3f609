//! Pipeline configuration file.
//!
//! One TOML file with a section per stage. Every key has a default, unknown
//! keys are rejected, and relative paths are resolved against the directory
//! containing the file. The effective configuration (after command-line
//! overrides) is echoed into every run manifest.

use std::path::{Path, PathBuf};

use actigeo_core::fpca::FlowOptions;
use actigeo_core::ingest::PreprocessConfig;
use actigeo_core::stats::funreg::FunRegOptions;
use actigeo_core::stats::lasso::LassoOptions;
use actigeo_core::synth::SynthConfig;
use actigeo_core::MatchConfig;
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every random stage (simulation, CV folds); overrides the
    /// per-stage seeds when set.
    pub seed: Option<u64>,
    /// Worker threads for per-subject work.
    pub jobs: usize,
    pub paths: Paths,
    pub preprocess: PreprocessConfig,
    pub matching: MatchConfig,
    pub fpca: FpcaOptions,
    pub regress: RegressOptions,
    pub simulate: SimulateOptions,
    pub render: RenderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            jobs: 1,
            paths: Paths::default(),
            preprocess: PreprocessConfig::default(),
            matching: MatchConfig::default(),
            fpca: FpcaOptions::default(),
            regress: RegressOptions::default(),
            simulate: SimulateOptions::default(),
            render: RenderConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Minute-level activity CSV read by `preprocess`.
    pub activity: Option<PathBuf>,
    /// Covariate table read by `regress`.
    pub covariates: Option<PathBuf>,
    /// Normalized curves read by `match`; defaults to the `preprocess` output.
    pub curves: Option<PathBuf>,
    /// Scale parameters matching `curves`; defaults to the `preprocess` output.
    pub scale: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpcaOptions {
    pub n_pc: usize,
}

impl Default for FpcaOptions {
    fn default() -> Self {
        Self { n_pc: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressOptions {
    /// Responses modelled on the covariates: `pc<k>` names a score column,
    /// anything else a covariate-table column.
    pub responses: Vec<String>,
    /// Covariates kept in the final model whether or not they are selected.
    pub forced: Vec<String>,
    /// Candidate covariates; empty means every non-response column.
    pub candidates: Vec<String>,
    /// Run Lasso selection before the OLS refit; otherwise OLS on all
    /// candidates.
    pub select: bool,
    pub lasso: LassoOptions,
    pub functional: Option<FunctionalOptions>,
}

impl Default for RegressOptions {
    fn default() -> Self {
        Self {
            responses: vec!["pc1".into()],
            forced: Vec::new(),
            candidates: Vec::new(),
            select: true,
            lasso: LassoOptions::default(),
            functional: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalOptions {
    pub response: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub options: FunRegOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub cohort: SynthConfig,
    /// Mode recipe TOML; the bundled recipes when absent.
    pub modes: Option<PathBuf>,
    /// Match the simulated pairs, fit PCA and report mode recovery against
    /// the vertical-difference comparator.
    pub evaluate: bool,
    pub n_pc: usize,
    /// Score weights of the rendered showcase subject.
    pub showcase_weights: Vec<f64>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            cohort: SynthConfig::default(),
            modes: None,
            evaluate: true,
            n_pc: 6,
            showcase_weights: vec![0.40, 0.15, 0.45],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Subjects drawn individually; empty means the first three matched.
    pub subjects: Vec<String>,
    /// Minutes between momenta arrows.
    pub arrow_stride_min: f64,
    /// Number of leading PCs drawn as template flows.
    pub n_pc: usize,
    pub width: f64,
    pub height: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            subjects: Vec::new(),
            arrow_stride_min: 10.0,
            n_pc: 3,
            width: 900.0,
            height: 480.0,
        }
    }
}

impl PipelineConfig {
    /// Reads, resolves and validates a configuration file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for v in [&mut p.activity, &mut p.covariates, &mut p.curves, &mut p.scale].into_iter().flatten() {
            fix(v);
        }
        if p.out_dir.as_os_str().is_empty() {
            p.out_dir = PathBuf::from("out");
        }
        fix(&mut p.out_dir);
        if let Some(m) = &mut self.simulate.modes {
            fix(m);
        }
    }

    /// Applies `--seed`, `--jobs` and `--out`.
    pub fn apply_overrides(&mut self, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) {
        if seed.is_some() {
            self.seed = seed;
        }
        if let Some(j) = jobs {
            self.jobs = j;
        }
        if let Some(o) = out {
            self.paths.out_dir = o;
        }
        if let Some(s) = self.seed {
            self.simulate.cohort.seed = s;
            self.regress.lasso.seed = s;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        self.preprocess.validate()?;
        self.matching.validate()?;
        self.simulate.cohort.validate()?;
        if self.fpca.n_pc == 0 || self.simulate.n_pc == 0 {
            bail!("n_pc must be >= 1");
        }
        if self.render.arrow_stride_min <= 0.0 || !self.render.arrow_stride_min.is_finite() {
            bail!("render.arrow_stride_min must be positive");
        }
        if !(self.render.width > 0.0 && self.render.height > 0.0) {
            bail!("render width and height must be positive");
        }
        if self.simulate.showcase_weights.len() != self.simulate.cohort.scale_factors.len() {
            bail!(
                "simulate.showcase_weights has {} entries for {} modes",
                self.simulate.showcase_weights.len(),
                self.simulate.cohort.scale_factors.len()
            );
        }
        if self.regress.lasso.folds < 2 {
            bail!("regress.lasso.folds must be >= 2");
        }
        Ok(())
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            control_stride: self.matching.control_stride,
            n_steps: self.matching.n_steps,
            sigma_v: self.matching.sigma_v,
        }
    }

    pub fn curves_path(&self) -> PathBuf {
        self.paths.curves.clone().unwrap_or_else(|| self.paths.out_dir.join(CURVES_FILE))
    }

    pub fn scale_path(&self) -> PathBuf {
        self.paths.scale.clone().unwrap_or_else(|| self.paths.out_dir.join(SCALE_FILE))
    }
}

pub const CURVES_FILE: &str = "curves.csv";
pub const SCALE_FILE: &str = "scale.json";
pub const MATCH_DIR: &str = "match";
pub const MATCH_SUMMARY_FILE: &str = "match_summary.json";
pub const PCA_MODEL_FILE: &str = "pca_model.json";
pub const SCORES_FILE: &str = "scores.csv";
