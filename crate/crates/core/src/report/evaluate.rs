use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{resolve, CohortManifest, SCHEMA_VERSION};
use crate::io::{load_mask, read_json, write_json};
use crate::metrics::{evaluate, OverlapReport};
use crate::model::{AcquisitionRecord, CaseRecord};
use crate::{Method, Occlusion, Phase, Result, Stage, View};

/// Identifies one acquisition in per-case output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaseKey {
    pub key: String,
    pub patient_id: String,
    pub view: View,
    pub stage: Stage,
    pub occlusion: Occlusion,
}

impl CaseKey {
    pub fn new(case: &CaseRecord, acq: &AcquisitionRecord) -> Self {
        Self {
            key: acq.key(&case.patient_id),
            patient_id: case.patient_id.clone(),
            view: acq.view,
            stage: acq.stage,
            occlusion: case.occlusion,
        }
    }
}

/// What a comparison was made for: a method against the reference, or a
/// phase prediction against the full-phase prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Method(Method),
    Phase(Phase),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEvaluation {
    #[serde(flatten)]
    pub case: CaseKey,
    pub subject: Subject,
    pub metrics: OverlapReport,
}

/// A case left out of a table, and why.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub key: String,
    pub subject: Subject,
    pub reason: String,
}

/// Per-case results; every table cell is a function of this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    pub schema_version: u32,
    pub evaluations: Vec<CaseEvaluation>,
    pub exclusions: Vec<Exclusion>,
}

impl EvaluationSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    fn from_parts(parts: Vec<std::result::Result<CaseEvaluation, Exclusion>>) -> Self {
        let mut evaluations = Vec::new();
        let mut exclusions = Vec::new();
        for p in parts {
            match p {
                Ok(e) => evaluations.push(e),
                Err(x) => exclusions.push(x),
            }
        }
        evaluations.sort_by(|a, b| (&a.case.key, a.subject).cmp(&(&b.case.key, b.subject)));
        exclusions.sort();
        Self {
            schema_version: SCHEMA_VERSION,
            evaluations,
            exclusions,
        }
    }
}

fn acquisitions<'a>(
    manifest: &'a CohortManifest,
    config: &ExperimentConfig,
) -> Vec<(&'a CaseRecord, &'a AcquisitionRecord)> {
    manifest
        .cases_in(config.split)
        .into_iter()
        .flat_map(|c| c.acquisitions.iter().map(move |a| (c, a)))
        .collect()
}

/// Evaluates every configured method prediction against its reference.
/// Missing or unreadable predictions become exclusions.
pub fn evaluate_methods(
    manifest: &CohortManifest,
    base: &Path,
    config: &ExperimentConfig,
) -> Result<EvaluationSet> {
    let jobs: Vec<_> = acquisitions(manifest, config)
        .into_iter()
        .flat_map(|(c, a)| config.methods.iter().map(move |&m| (c, a, m)))
        .collect();
    let parts = jobs
        .into_par_iter()
        .map(|(c, a, m)| {
            let case = CaseKey::new(c, a);
            let subject = Subject::Method(m);
            let exclude = |reason: String| Exclusion {
                key: case.key.clone(),
                subject,
                reason,
            };
            let Some(path) = a.predictions.get(&m) else {
                return Err(exclude("missing prediction".into()));
            };
            let pred = load_mask(resolve(base, path)).map_err(|e| exclude(e.to_string()))?;
            let reference =
                load_mask(resolve(base, &a.reference)).map_err(|e| exclude(e.to_string()))?;
            let metrics = evaluate(&pred, &reference).map_err(|e| exclude(e.to_string()))?;
            Ok(CaseEvaluation {
                case,
                subject,
                metrics,
            })
        })
        .collect();
    Ok(EvaluationSet::from_parts(parts))
}

/// Evaluates every phase prediction against the full-phase prediction of the
/// same model: `phase_reference` when present, else `config.phase_method`.
pub fn evaluate_phases(
    manifest: &CohortManifest,
    base: &Path,
    config: &ExperimentConfig,
) -> Result<EvaluationSet> {
    let jobs: Vec<_> = acquisitions(manifest, config)
        .into_iter()
        .flat_map(|(c, a)| config.phases.iter().map(move |&p| (c, a, p)))
        .collect();
    let parts = jobs
        .into_par_iter()
        .map(|(c, a, p)| {
            let case = CaseKey::new(c, a);
            let subject = Subject::Phase(p);
            let exclude = |reason: String| Exclusion {
                key: case.key.clone(),
                subject,
                reason,
            };
            let Some(path) = a.phase_predictions.get(&p) else {
                return Err(exclude("missing phase prediction".into()));
            };
            let Some(full) = a.phase_reference.as_ref().or(a.predictions.get(&config.phase_method)) else {
                return Err(exclude(format!("missing {} prediction", config.phase_method)));
            };
            let pred = load_mask(resolve(base, path)).map_err(|e| exclude(e.to_string()))?;
            let full = load_mask(resolve(base, full)).map_err(|e| exclude(e.to_string()))?;
            let metrics = evaluate(&pred, &full).map_err(|e| exclude(e.to_string()))?;
            Ok(CaseEvaluation {
                case,
                subject,
                metrics,
            })
        })
        .collect();
    Ok(EvaluationSet::from_parts(parts))
}
