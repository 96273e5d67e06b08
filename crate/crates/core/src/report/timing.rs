use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::evaluate::CaseKey;
use super::manifest::{resolve, CohortManifest, SCHEMA_VERSION};
use super::tables::format_summary;
use crate::atlasreg::{register_best_atlas, AtlasEntry};
use crate::io::{load_mask, load_minip};
use crate::maskops::{derive_territories, MorphologyParams};
use crate::metrics::evaluate;
use crate::stats::{mean_ci95, SummaryStat};
use crate::{Error, Method, Result};

/// Shortest interval a single measurement may cover; faster paths are
/// repeated until it is reached.
pub const MIN_MEASUREMENT: Duration = Duration::from_millis(1);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseTiming {
    pub key: String,
    pub pipeline_s: f64,
    pub pipeline_repeats: usize,
    pub atlas_s: f64,
    pub atlas_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub schema_version: u32,
    pub n: usize,
    /// Mask derivation and metrics.
    pub pipeline: SummaryStat,
    /// Best-atlas registration, mask warping and metrics.
    pub atlas: SummaryStat,
    pub ordering_holds: bool,
    pub cases: Vec<CaseTiming>,
}

impl TimingTable {
    pub fn to_text(&self) -> String {
        format!(
            "path      n   mean [95% CI] s\npipeline  {n:<3} {}\natlas     {n:<3} {}\natlas slower than pipeline: {}\n",
            format_summary(&self.pipeline, 4),
            format_summary(&self.atlas, 3),
            if self.ordering_holds { "yes" } else { "no" },
            n = self.n,
        )
    }
}

/// Runs `f` until at least [`MIN_MEASUREMENT`] has elapsed; returns the
/// mean seconds per call and the number of calls.
fn time_repeated(mut f: impl FnMut() -> Result<()>) -> Result<(f64, usize)> {
    let start = Instant::now();
    let mut n = 0;
    while n == 0 || start.elapsed() < MIN_MEASUREMENT {
        f()?;
        n += 1;
    }
    Ok((start.elapsed().as_secs_f64() / n as f64, n))
}

/// Wall-clock comparison of the two segmentation paths on the same cases.
///
/// Cases run one after another so the measurements do not compete for
/// cores. File loading is not timed.
pub fn run_timing(
    manifest: &CohortManifest,
    base: &Path,
    config: &ExperimentConfig,
    library: &[AtlasEntry],
) -> Result<TimingTable> {
    let mut jobs: Vec<_> = manifest
        .cases_in(config.split)
        .into_iter()
        .flat_map(|c| c.acquisitions.iter().map(move |a| (CaseKey::new(c, a), a)))
        .collect();
    jobs.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(cap) = config.timing_cases {
        jobs.truncate(cap);
    }
    if jobs.len() < config.min_timing_cases.max(1) {
        return Err(Error::InsufficientData(format!(
            "timing needs at least {} cases, got {}",
            config.min_timing_cases,
            jobs.len()
        )));
    }
    let params = MorphologyParams::default();
    let mut cases = Vec::with_capacity(jobs.len());
    for (key, acq) in jobs {
        let reference = load_mask(resolve(base, &acq.reference))?;
        let source = match acq.predictions.get(&Method::Model) {
            Some(p) => load_mask(resolve(base, p))?,
            None => reference.clone(),
        };
        let minip = load_minip(resolve(base, &acq.minip))?;
        let (ica, mca) = (source.ica(), source.mca());

        let (pipeline_s, pipeline_repeats) = time_repeated(|| {
            let (derived, _) = derive_territories(&ica, &mca, &params)?;
            evaluate(&derived, &reference)?;
            Ok(())
        })?;
        let start = Instant::now();
        let best = register_best_atlas(library, &minip, acq.view)?;
        evaluate(&best.warped_masks, &reference)?;
        let atlas_s = start.elapsed().as_secs_f64();
        cases.push(CaseTiming {
            key: key.key,
            pipeline_s,
            pipeline_repeats,
            atlas_s,
            atlas_id: best.result.atlas_id,
        });
    }
    let p: Vec<f64> = cases.iter().map(|c| c.pipeline_s).collect();
    let a: Vec<f64> = cases.iter().map(|c| c.atlas_s).collect();
    let pipeline = mean_ci95(&p)?;
    let atlas = mean_ci95(&a)?;
    Ok(TimingTable {
        schema_version: SCHEMA_VERSION,
        n: cases.len(),
        ordering_holds: atlas.center > pipeline.center,
        pipeline,
        atlas,
        cases,
    })
}
