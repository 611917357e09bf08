//! Argument parsing and command dispatch. Flags override config file values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dasal_core::dataset::{load_manifest, PatchZone};
use dasal_core::evaluation::{grouped_kfold, render_table, write_plan};
use dasal_core::imaging::io::read_png;
use dasal_core::region::Geometry;
use dasal_core::saliency::SaliencyMethod;
use dasal_core::Background;

use crate::config::{resolve_methods, PipelineConfig};
use crate::derive::{self, DeriveOptions};
use crate::evaluate::{self, EnsembleSpec, EvalOptions, FuseOptions, ReportOptions};
use crate::score::{self, ScoreOptions};
use crate::synth::{self, SynthOptions};
use crate::tools;
use crate::util::{resolve_workers, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "dasal",
    version,
    about = "Saliency-based dopamine-release detection pipeline"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        match (self.quiet, self.verbose) {
            (true, _) => "warn",
            (false, 0) => "info",
            (false, 1) => "debug",
            _ => "trace",
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline TOML configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(self.config.as_deref())
    }

    fn workers(&self, cfg: &PipelineConfig) -> Result<usize> {
        resolve_workers(self.workers.or(cfg.workers))
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Pipeline output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl DataArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Comma-separated method ids or groups (all, global, patch, saliency, detector).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Comma-separated backgrounds.
    #[arg(long, value_delimiter = ',')]
    pub backgrounds: Option<Vec<Background>>,
}

impl SelectArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(b) = &self.backgrounds {
            cfg.backgrounds = b.clone();
        }
    }
}

#[derive(Debug, Args)]
pub struct FoldArgs {
    /// Fold plan CSV (`experiment_id,fold`); overrides --k and --seed.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FoldArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

#[derive(Debug, Args)]
pub struct FusionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Score directory; defaults to `<out>/scores`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Where results go; defaults to a directory under `<out>`.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ZoneArg {
    Common,
    Concat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled FSCV dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        experiments: usize,
        /// Recordings per class and experiment.
        #[arg(long = "per-exp", default_value_t = 10)]
        per_exp: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Image size relative to 875x600.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        force: bool,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Build the derived datasets for every method and background.
    Derive {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        select: SelectArgs,
        /// Recompute everything, ignoring the cache.
        #[arg(long)]
        force: bool,
    },
    /// Saliency map, mask and FG/FG-ROI/ROI images of one image.
    Saliency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image: PathBuf,
        /// Comma-separated detectors; all by default.
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<SaliencyMethod>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Common and concatenated zones of one image.
    Zones {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sliding-window (or manual) patches of one image.
    Patches {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = ZoneArg::Common)]
        zone: ZoneArg,
        /// Emit the single manual patch centered on this column.
        #[arg(long)]
        peak_x: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Experiment-grouped k-fold plan.
    Foldplan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Plan CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fold-wise baseline scores for every derived variant and the detector.
    ScoreBaseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        folds: FoldArgs,
    },
    /// Sum-rule fusion of an ensemble over all samples.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fusion: FusionArgs,
        /// Named ensemble (e.g. AllMethods, "Global(A)") or a TOML config.
        ensemble: String,
    },
    /// Cross-validated evaluation of an ensemble.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long, default_value = "AllMethods")]
        ensemble: String,
    },
    /// Results table of every named ensemble plus single-member accuracies.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        folds: FoldArgs,
    },
}

fn slug(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
        .collect::<String>()
        .replace('+', "-")
        .to_ascii_lowercase()
}

struct FusionPaths {
    manifest: PathBuf,
    scores: PathBuf,
    results: PathBuf,
}

fn fusion_paths(cfg: &mut PipelineConfig, args: &FusionArgs, default_results: &str) -> Result<FusionPaths> {
    args.data.apply(cfg);
    let manifest = cfg.manifest()?.to_path_buf();
    let out = cfg.output.clone();
    let under_out = |sub: &str| -> Result<PathBuf> {
        Ok(out
            .as_deref()
            .with_context(|| format!("pass --out, or --{sub} explicitly"))?
            .join(sub))
    };
    let scores = match &args.scores {
        Some(s) => s.clone(),
        None => under_out("scores")?,
    };
    let results = match &args.results {
        Some(r) => r.clone(),
        None => under_out("results")?.join(default_results),
    };
    Ok(FusionPaths {
        manifest,
        scores,
        results,
    })
}

fn image_geometry(cfg: &PipelineConfig, image: &Path) -> Result<Geometry> {
    match cfg.geometry {
        Some(g) => Ok(g),
        None => Ok(Geometry::for_width(read_png(image)?.width())?),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            experiments,
            per_exp,
            seed,
            scale,
            force,
            workers,
        } => {
            let s = synth::run(&SynthOptions {
                out,
                experiments,
                per_experiment: per_exp,
                seed,
                scale,
                force,
                workers: resolve_workers(workers)?,
            })?;
            eprintln!("{} recordings, {} images", s.recordings, s.images);
        }
        Command::Derive {
            common,
            data,
            select,
            force,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            select.apply(&mut cfg);
            cfg.validate()?;
            let (methods, _) = resolve_methods(&cfg.methods)?;
            let s = derive::run(&DeriveOptions {
                manifest: cfg.manifest()?.to_path_buf(),
                out: cfg.output()?.to_path_buf(),
                methods,
                backgrounds: cfg.backgrounds.clone(),
                geometry: cfg.geometry,
                saliency: cfg.saliency.clone(),
                cosal_group_size: cfg.cosal_group_size,
                force,
                workers: common.workers(&cfg)?,
            })?;
            eprintln!(
                "{} derived variants ({} computed, {} cached, {} crop substitutions, {} saliency failures)",
                s.variants, s.computed, s.cached, s.roi_substitutions, s.saliency_failures
            );
        }
        Command::Saliency {
            common,
            image,
            method,
            out,
        } => {
            let cfg = common.load()?;
            let methods = method.unwrap_or_else(|| SaliencyMethod::ALL.to_vec());
            for p in tools::saliency(&image, &methods, &cfg.saliency, &out)? {
                eprintln!("{}", p.display());
            }
        }
        Command::Zones { common, image, out } => {
            let cfg = common.load()?;
            for p in tools::zones(&image, &image_geometry(&cfg, &image)?, &out)? {
                eprintln!("{}", p.display());
            }
        }
        Command::Patches {
            common,
            image,
            zone,
            peak_x,
            out,
        } => {
            let cfg = common.load()?;
            let zone = match zone {
                ZoneArg::Common => PatchZone::Common,
                ZoneArg::Concat => PatchZone::Concat,
            };
            for p in tools::patches(&image, zone, &image_geometry(&cfg, &image)?, peak_x, &out)? {
                eprintln!("{}", p.display());
            }
        }
        Command::Foldplan {
            common,
            manifest,
            k,
            seed,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            let records = load_manifest(cfg.manifest()?)?;
            let plan = grouped_kfold(&records, k.unwrap_or(cfg.k), seed.unwrap_or(cfg.seed))?;
            plan.check_grouping(&records)?;
            write_plan(&out, &plan)?;
            eprintln!(
                "{} experiments in {} folds -> {}",
                plan.assignment.len(),
                plan.k,
                out.display()
            );
        }
        Command::ScoreBaseline {
            common,
            data,
            select,
            folds,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            select.apply(&mut cfg);
            folds.apply(&mut cfg);
            cfg.validate()?;
            let (methods, detector) = resolve_methods(&cfg.methods)?;
            let s = score::run(&ScoreOptions {
                manifest: cfg.manifest()?.to_path_buf(),
                out: cfg.output()?.to_path_buf(),
                methods,
                detector,
                backgrounds: cfg.backgrounds.clone(),
                plan: folds.plan.clone(),
                k: cfg.k,
                seed: cfg.seed,
                scorer: cfg.scorer.clone(),
                workers: common.workers(&cfg)?,
            })?;
            eprintln!(
                "{} members scored, {} rows, plan {}",
                s.members,
                s.rows,
                s.plan.display()
            );
        }
        Command::Fuse {
            common,
            fusion,
            ensemble,
        } => {
            let mut cfg = common.load()?;
            let spec: EnsembleSpec = ensemble.parse()?;
            let paths = fusion_paths(&mut cfg, &fusion, &format!("fuse-{}", slug(&ensemble)))?;
            let row = evaluate::fuse(&FuseOptions {
                manifest: paths.manifest,
                scores: paths.scores,
                ensemble: spec,
                out: paths.results.clone(),
            })?;
            eprintln!("Scores Fused: {}", row.scores_fused);
            eprint!("{}", render_table(&[row]));
        }
        Command::Eval {
            common,
            fusion,
            folds,
            ensemble,
        } => {
            let mut cfg = common.load()?;
            folds.apply(&mut cfg);
            let spec: EnsembleSpec = ensemble.parse()?;
            let paths = fusion_paths(&mut cfg, &fusion, &format!("eval-{}", slug(&ensemble)))?;
            let r = evaluate::eval(&EvalOptions {
                manifest: paths.manifest,
                scores: paths.scores,
                ensemble: spec.clone(),
                plan: folds.plan.clone(),
                k: cfg.k,
                seed: cfg.seed,
                out: paths.results.clone(),
            })?;
            eprintln!("Scores Fused: {}", r.members);
            eprint!("{}", std::fs::read_to_string(paths.results.join("table.txt"))?);
        }
        Command::Report { common, fusion, folds } => {
            let mut cfg = common.load()?;
            folds.apply(&mut cfg);
            let paths = fusion_paths(&mut cfg, &fusion, "report")?;
            let r = evaluate::report(&ReportOptions {
                manifest: paths.manifest,
                scores: paths.scores,
                plan: folds.plan.clone(),
                k: cfg.k,
                seed: cfg.seed,
                out: paths.results,
            })?;
            eprint!("{}", render_table(&r.ensembles));
            eprintln!("median single-member accuracy: {:.2}", 100.0 * r.median_member_accuracy);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Global(A)"), "globala");
        assert_eq!(slug("Global+Patch"), "global-patch");
    }
}
