use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dasal_core::dataset::{write_manifest, ManifestSummary};
use dasal_core::imaging::io::write_png;
use dasal_core::region::Geometry;
use dasal_core::synth::{background_subtract, false_color, synthesize_sample, Palette, SynthParams};
use dasal_core::{Background, SampleRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::DatasetInfo;
use crate::util::{prepare_output_dir, thread_pool};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub out: PathBuf,
    pub experiments: usize,
    /// Recordings per class and experiment.
    pub per_experiment: usize,
    pub seed: u64,
    /// Image size relative to 875x600.
    pub scale: f64,
    pub force: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    pub recordings: usize,
    pub images: usize,
    pub release: usize,
    pub no_release: usize,
}

struct Job {
    index: usize,
    experiment: usize,
    release: bool,
    sample_id: String,
}

pub fn run(opts: &SynthOptions) -> Result<SynthSummary> {
    if opts.experiments == 0 || opts.per_experiment == 0 {
        bail!("--experiments and --per-exp must both be at least 1");
    }
    let geometry = Geometry::scaled(opts.scale)?;
    let height = (600.0 * opts.scale).round() as usize;
    if height < geometry.min_image_height() {
        bail!("scale {} yields images shorter than the zone geometry", opts.scale);
    }
    prepare_output_dir(&opts.out, opts.force)?;
    for bg in Background::ALL {
        fs::create_dir_all(opts.out.join("images").join(bg.as_str()))?;
    }

    let mut jobs = Vec::new();
    for e in 0..opts.experiments {
        for release in [true, false] {
            for i in 0..opts.per_experiment {
                let tag = if release { 'r' } else { 'n' };
                jobs.push(Job {
                    index: jobs.len(),
                    experiment: e,
                    release,
                    sample_id: format!("e{e:02}-{tag}{i:03}"),
                });
            }
        }
    }

    let base = SynthParams {
        width: geometry.width,
        height,
        release_rows: geometry.common_rows,
        ..Default::default()
    };
    let palette = Palette::default();
    let records: Vec<Vec<SampleRecord>> = thread_pool(opts.workers)?.install(|| {
        jobs.par_iter()
            .map(|job| render(job, &base, opts, &palette))
            .collect::<Result<_>>()
    })?;
    let mut records: Vec<SampleRecord> = records.into_iter().flatten().collect();
    records.sort_by(|a, b| (a.background, &a.sample_id).cmp(&(b.background, &b.sample_id)));
    write_manifest(&opts.out.join("manifest.csv"), &records)?;
    DatasetInfo {
        width: geometry.width,
        height,
        experiments: opts.experiments,
        per_experiment: opts.per_experiment,
        seed: opts.seed,
        geometry,
    }
    .save(&opts.out)?;

    let s = ManifestSummary::of(&records);
    let summary = SynthSummary {
        recordings: jobs.len(),
        images: records.len(),
        release: s.release,
        no_release: s.no_release,
    };
    log::info!(
        "synthesized {} recordings x 3 backgrounds = {} images ({} release, {} no-release) in {}",
        summary.recordings,
        summary.images,
        summary.release,
        summary.no_release,
        opts.out.display()
    );
    Ok(summary)
}

/// Per-experiment acquisition conditions, shared by all its recordings.
fn experiment_params(base: &SynthParams, seed: u64, experiment: usize) -> SynthParams {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.rotate_left(17) ^ (experiment as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    SynthParams {
        ramp: rng.gen_range(0.1..0.3),
        drift: rng.gen_range(0.02..0.08),
        noise: rng.gen_range(0.02..0.04),
        ..base.clone()
    }
}

fn render(job: &Job, base: &SynthParams, opts: &SynthOptions, palette: &Palette) -> Result<Vec<SampleRecord>> {
    let params = SynthParams {
        seed: opts.seed ^ job.index as u64,
        ..experiment_params(base, opts.seed, job.experiment)
    };
    let experiment_id = format!("exp{:02}", job.experiment);
    let (matrix, record) = synthesize_sample(&params, job.release, &job.sample_id, &experiment_id)?;
    Background::ALL
        .iter()
        .map(|&bg| {
            let img = false_color(&background_subtract(&matrix, bg), palette);
            let path = image_path(&opts.out, bg, &job.sample_id);
            write_png(&img, &path).with_context(|| format!("writing {}", path.display()))?;
            Ok(SampleRecord {
                background: bg,
                image_path: path,
                ..record.clone()
            })
        })
        .collect()
}

fn image_path(root: &Path, bg: Background, sample_id: &str) -> PathBuf {
    root.join("images").join(bg.as_str()).join(format!("{sample_id}.png"))
}
