//! `actigeo`: staged pipeline from raw activity counts to momenta PCA,
//! regression tables and figures.

mod artifacts;
mod config;
mod failure;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::failure::{require_file, Classify, CmdResult};
use crate::output::Outputs;

#[derive(Parser)]
#[command(name = "actigeo", version, about = "Diffeomorphic analysis of longitudinal daily activity curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for all random stages; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Average, smooth and normalize raw activity into curves.
    Preprocess(Common),
    /// Estimate initial momenta from baseline to follow-up per subject.
    Match(Common),
    /// PCA of the stacked momenta.
    Fpca(Common),
    /// Lasso selection, OLS refit and functional regression.
    Regress(Common),
    /// Simulate a cohort with known deformation modes.
    Simulate(Common),
    /// Draw curves, momenta and component flows as SVG.
    Render(Common),
    /// preprocess, match, fpca, regress (when covariates are given), render.
    All(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Preprocess(c) => ("preprocess", c),
            Command::Match(c) => ("match", c),
            Command::Fpca(c) => ("fpca", c),
            Command::Regress(c) => ("regress", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Render(c) => ("render", c),
            Command::All(c) => ("all", c),
        }
    }
}

type Stage = fn(&PipelineConfig, &mut Outputs) -> CmdResult<()>;

fn stage(name: &str) -> Stage {
    match name {
        "preprocess" => stages::preprocess::run,
        "match" => stages::matching::run,
        "fpca" => stages::fpca::run,
        "regress" => stages::regress::run,
        "simulate" => stages::simulate::run,
        _ => stages::render::run,
    }
}

fn run(cli: &Cli) -> CmdResult<()> {
    let (name, common) = cli.command.parts();
    require_file(&common.config, "config file")?;
    let mut cfg = PipelineConfig::load(&common.config).invalid()?;
    cfg.apply_overrides(common.seed, common.jobs, common.out.clone());
    cfg.validate().invalid()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().runtime()?;
    pool.install(|| {
        let mut out = Outputs::new(&cfg.paths.out_dir).runtime()?;
        let plan: Vec<&str> = if name == "all" {
            let mut p = vec!["preprocess", "match", "fpca"];
            if cfg.paths.covariates.is_some() {
                p.push("regress");
            }
            p.push("render");
            p
        } else {
            vec![name]
        };
        for s in plan {
            log::info!("stage {s}");
            out.timed(s, |o| stage(s)(&cfg, o))?;
        }
        out.write_manifest(name, &cfg).runtime()?;
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
