//! Cohort experiments: splits, metric tables, phase dependency and runtime.

mod cohort;
mod config;
mod evaluate;
mod manifest;
mod surrogate;
mod tables;
mod timing;

use std::path::Path;

pub use cohort::{build_cohort, CohortSpec};
pub use config::{ExperimentConfig, Metric};
pub use evaluate::{evaluate_methods, evaluate_phases, CaseEvaluation, CaseKey, EvaluationSet, Exclusion, Subject};
pub use manifest::{resolve, split_cohort, CohortManifest, Split, SplitFractions, SplitWarning, SCHEMA_VERSION};
pub use surrogate::{surrogate_predict, SurrogateParams};
pub use tables::{
    phase_table_from_evaluations, significance_stars, table1_from_evaluations, Cell, Comparison, PhaseTable, Row,
    Table1,
};
pub use timing::{run_timing, CaseTiming, TimingTable, MIN_MEASUREMENT};

use crate::io::write_json;
use crate::Result;

/// Table 1 with the per-case evaluations it was computed from.
pub fn run_table1(manifest: &CohortManifest, base: &Path, config: &ExperimentConfig) -> Result<(Table1, EvaluationSet)> {
    config.validate(manifest)?;
    let set = evaluate_methods(manifest, base, config)?;
    Ok((table1_from_evaluations(&set, config)?, set))
}

/// Phase table with the per-case evaluations it was computed from.
pub fn run_phase_analysis(
    manifest: &CohortManifest,
    base: &Path,
    config: &ExperimentConfig,
) -> Result<(PhaseTable, EvaluationSet)> {
    let set = evaluate_phases(manifest, base, config)?;
    Ok((phase_table_from_evaluations(&set, config)?, set))
}

/// Writes `<name>.json`, `<name>.txt` and, when given, `<name>_cases.json`.
pub fn write_outputs<T: serde::Serialize>(
    out: &Path,
    name: &str,
    table: &T,
    text: &str,
    cases: Option<&EvaluationSet>,
) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| crate::Error::io(out, e))?;
    write_json(table, out.join(format!("{name}.json")))?;
    let txt = out.join(format!("{name}.txt"));
    std::fs::write(&txt, text).map_err(|e| crate::Error::io(&txt, e))?;
    if let Some(set) = cases {
        set.save(out.join(format!("{name}_cases.json")))?;
    }
    Ok(())
}
