use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::CohortManifest;
use super::surrogate::{surrogate_predict, SurrogateParams};
use crate::atlasreg::{register_best_atlas, AtlasEntry, RegistrationResult};
use crate::io::{save_mask, save_minip, write_json};
use crate::maskops::DEFAULT_RADIUS;
use crate::model::{AcquisitionRecord, CaseRecord};
use crate::synth::{generate, simulate_model_prediction, PhantomSpec};
use crate::{Error, Method, Occlusion, Result, Stage, View};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub patients: usize,
    pub seed: u64,
    pub canvas: usize,
    /// Acquisitions generated for every patient.
    pub acquisitions: Vec<(View, Stage)>,
    /// Cleanup radius of the simulated model predictions.
    pub model_radius: u32,
    /// Write phase MinIPs and surrogate predictions on them.
    pub phases: bool,
    pub surrogate: SurrogateParams,
}

impl CohortSpec {
    pub fn new(patients: usize, seed: u64) -> Self {
        Self {
            patients,
            seed,
            canvas: 512,
            acquisitions: [View::Ap, View::Lateral]
                .into_iter()
                .flat_map(|v| [(v, Stage::PreEvt), (v, Stage::PostEvt)])
                .collect(),
            model_radius: DEFAULT_RADIUS,
            phases: true,
            surrogate: SurrogateParams::default(),
        }
    }
}

fn patient_occlusion(rng: &mut ChaCha8Rng) -> Occlusion {
    match rng.random_range(0..10) {
        0..=2 => Occlusion::Ica,
        3..=7 => Occlusion::M1,
        _ => Occlusion::M2,
    }
}

fn view_salt(view: View) -> u64 {
    match view {
        View::Ap => 0,
        View::Lateral => 0x5151,
    }
}

/// Generates a synthetic cohort under `out`, writes `manifest.json` and
/// returns the manifest. With a library, every acquisition also gets an
/// ATLAS prediction from best-atlas registration.
pub fn build_cohort(spec: &CohortSpec, out: &Path, library: Option<&[AtlasEntry]>) -> Result<CohortManifest> {
    if spec.patients == 0 || spec.acquisitions.is_empty() {
        return Err(Error::InsufficientData("cohort needs patients and acquisitions".into()));
    }
    fs::create_dir_all(out).map_err(|e| crate::Error::io(out, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let patients: Vec<(String, Occlusion, u64)> = (0..spec.patients)
        .map(|i| {
            let occ = patient_occlusion(&mut rng);
            (format!("P{:04}", i + 1), occ, rng.random())
        })
        .collect();

    let cases = patients
        .par_iter()
        .map(|(pid, occlusion, pseed)| {
            let acquisitions = spec
                .acquisitions
                .iter()
                .map(|&(view, stage)| build_acquisition(spec, out, library, pid, *occlusion, *pseed, view, stage))
                .collect::<Result<Vec<_>>>()?;
            Ok(CaseRecord {
                patient_id: pid.clone(),
                occlusion: *occlusion,
                acquisitions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = CohortManifest::new(cases);
    manifest.save(out.join("manifest.json"))?;
    Ok(manifest)
}

#[allow(clippy::too_many_arguments)]
fn build_acquisition(
    spec: &CohortSpec,
    out: &Path,
    library: Option<&[AtlasEntry]>,
    pid: &str,
    occlusion: Occlusion,
    pseed: u64,
    view: View,
    stage: Stage,
) -> Result<AcquisitionRecord> {
    let phantom_spec = PhantomSpec {
        canvas: spec.canvas,
        patient_id: pid.to_string(),
        ..PhantomSpec::new(pseed ^ view_salt(view), view, stage, occlusion)
    };
    let phantom = generate(&phantom_spec)?;
    let case = phantom.standardized_case()?;
    let rel = PathBuf::from(pid).join(format!("{view}_{stage}"));
    let dir = out.join(&rel);
    fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;

    save_minip(&case.minip, dir.join("minip.png"))?;
    save_mask(&case.territories, dir.join("reference.png"))?;
    let mut predictions = BTreeMap::new();
    let model = simulate_model_prediction(&case.territories, pseed ^ view_salt(view) ^ 0xA5A5, spec.model_radius)?;
    save_mask(&model, dir.join("pred_MODEL.png"))?;
    predictions.insert(Method::Model, rel.join("pred_MODEL.png"));
    if let Some(lib) = library {
        let best = register_best_atlas(lib, &case.minip, view)?;
        save_mask(&best.warped_masks, dir.join("pred_ATLAS.png"))?;
        write_json::<RegistrationResult>(&best.result, dir.join("atlas.json"))?;
        predictions.insert(Method::Atlas, rel.join("pred_ATLAS.png"));
    }

    let mut phase_minips = BTreeMap::new();
    let mut phase_predictions = BTreeMap::new();
    let mut phase_reference = None;
    if spec.phases {
        let full = surrogate_predict(&case.minip, view, &spec.surrogate)?;
        save_mask(&full, dir.join("phase_pred_FULL.png"))?;
        phase_reference = Some(rel.join("phase_pred_FULL.png"));
        for (phase, img) in &case.phase_minips {
            let name = format!("phase_{phase}.png");
            save_minip(img, dir.join(&name))?;
            phase_minips.insert(*phase, rel.join(name));
            let pred = surrogate_predict(img, view, &spec.surrogate)?;
            let name = format!("phase_pred_{phase}.png");
            save_mask(&pred, dir.join(&name))?;
            phase_predictions.insert(*phase, rel.join(name));
        }
    }
    Ok(AcquisitionRecord {
        view,
        stage,
        minip: rel.join("minip.png"),
        reference: rel.join("reference.png"),
        predictions,
        phase_minips,
        phase_predictions,
        phase_reference,
    })
}
