use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{CohortManifest, Split};
use crate::io::read_json;
use crate::metrics::TerritoryMetrics;
use crate::stats::TestKind;
use crate::{Error, Method, Phase, Result, Territory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "DSC")]
    Dsc,
    #[serde(rename = "JI")]
    Ji,
    #[serde(rename = "ASD")]
    Asd,
    #[serde(rename = "HD")]
    Hd,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Dsc, Metric::Ji, Metric::Asd, Metric::Hd];

    pub fn of(self, m: &TerritoryMetrics) -> Option<f64> {
        match self {
            Metric::Dsc => Some(m.dsc),
            Metric::Ji => Some(m.ji),
            Metric::Asd => m.asd,
            Metric::Hd => m.hd,
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Dsc | Metric::Ji)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "DSC",
            Metric::Ji => "JI",
            Metric::Asd => "ASD",
            Metric::Hd => "HD",
        }
    }

    pub(crate) fn decimals(self) -> usize {
        match self {
            Metric::Dsc | Metric::Ji => 2,
            Metric::Asd => 1,
            Metric::Hd => 0,
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Model, Method::Atlas]
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_phases() -> Vec<Phase> {
    Phase::ALL.to_vec()
}
fn default_territories() -> Vec<Territory> {
    vec![Territory::Ica, Territory::Mca]
}
fn default_test() -> TestKind {
    TestKind::Wilcoxon
}
fn default_phase_method() -> Method {
    Method::Model
}
fn default_min_timing_cases() -> usize {
    5
}

/// What an experiment compares and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Paired test used for method comparisons.
    #[serde(default = "default_test")]
    pub test: TestKind,
    #[serde(default = "default_phases")]
    pub phases: Vec<Phase>,
    #[serde(default = "default_territories")]
    pub territories: Vec<Territory>,
    /// Full-phase prediction the phase predictions are compared against.
    #[serde(default = "default_phase_method")]
    pub phase_method: Method,
    /// Restrict to one split; all cases when absent.
    #[serde(default)]
    pub split: Option<Split>,
    /// Atlas library directory for the timing experiment, relative to the
    /// config file.
    #[serde(default)]
    pub atlas_library: Option<PathBuf>,
    /// Cap on the number of cases timed.
    #[serde(default)]
    pub timing_cases: Option<usize>,
    #[serde(default = "default_min_timing_cases")]
    pub min_timing_cases: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            metrics: default_metrics(),
            test: default_test(),
            phases: default_phases(),
            territories: default_territories(),
            phase_method: default_phase_method(),
            split: None,
            atlas_library: None,
            timing_cases: None,
            min_timing_cases: default_min_timing_cases(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    /// Every named method must appear in at least one acquisition.
    pub fn validate(&self, manifest: &CohortManifest) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods configured".into()));
        }
        if self.territories.contains(&Territory::Aca) {
            return Err(Error::Invalid("ACA is not an evaluated territory".into()));
        }
        for m in &self.methods {
            let present = manifest
                .cases
                .iter()
                .flat_map(|c| &c.acquisitions)
                .any(|a| a.predictions.contains_key(m));
            if !present {
                return Err(Error::Invalid(format!("method {m} not present in manifest")));
            }
        }
        Ok(())
    }
}
