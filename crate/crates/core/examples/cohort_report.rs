//! Builds a small synthetic cohort, then produces the method comparison
//! table, the phase-dependency table and the runtime comparison.
//!
//!     cargo run --release --example cohort_report [patients]

use dsa_territory::report::{
    build_cohort, run_phase_analysis, run_table1, run_timing, split_cohort, CohortSpec, ExperimentConfig,
    Split, SplitFractions,
};
use dsa_territory::synth::atlas_library;
use dsa_territory::{Result, Stage};

fn main() -> Result<()> {
    let patients = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let dir = tempfile::tempdir().expect("temp dir");
    let library = atlas_library(6, 1_000_000)?;

    let mut spec = CohortSpec::new(patients, 42);
    spec.acquisitions.retain(|(_, stage)| *stage == Stage::PostEvt);
    let manifest = build_cohort(&spec, dir.path(), Some(&library))?;
    println!("{} patients, {} acquisitions", manifest.cases.len(), manifest.cases.iter().map(|c| c.acquisitions.len()).sum::<usize>());

    let (split, warnings) = split_cohort(&manifest, SplitFractions::default(), 7)?;
    for w in warnings {
        println!("split warning: {w:?}");
    }
    for s in [Split::Train, Split::Val, Split::Test] {
        println!("{s:?}: {} patients", split.cases_in(Some(s)).len());
    }

    let config = ExperimentConfig::default();
    let (table, _) = run_table1(&manifest, dir.path(), &config)?;
    println!("\n{}", table.to_text());
    let (phases, _) = run_phase_analysis(&manifest, dir.path(), &config)?;
    println!("{}", phases.to_text());

    let timing = run_timing(&manifest, dir.path(), &config, &library)?;
    println!("{}", timing.to_text());
    Ok(())
}
