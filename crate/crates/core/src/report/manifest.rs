use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json};
use crate::model::CaseRecord;
use crate::{Error, Occlusion, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Cases of a cohort plus the patient-level split, if one was made.
///
/// Paths inside the records are relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub schema_version: u32,
    pub cases: Vec<CaseRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub splits: BTreeMap<String, Split>,
    /// Keys the split was stratified on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<String>,
}

impl CohortManifest {
    pub fn new(cases: Vec<CaseRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            cases,
            splits: BTreeMap::new(),
            strata: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    pub fn split_of(&self, patient_id: &str) -> Option<Split> {
        self.splits.get(patient_id).copied()
    }

    /// Cases in `split`, or all cases when `split` is `None`.
    pub fn cases_in(&self, split: Option<Split>) -> Vec<&CaseRecord> {
        self.cases
            .iter()
            .filter(|c| split.is_none() || self.split_of(&c.patient_id) == split)
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.values().filter(|&&s| s == split).count()
    }
}

/// Resolves a manifest-relative path.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Test fraction of all patients; validation fraction of the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub test: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { test: 0.1, val: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub stratum: String,
    pub patients: usize,
    pub message: String,
}

/// Strata smaller than this are pooled before allocation.
pub const MIN_STRATUM: usize = 2;

/// Largest-remainder apportionment of `total` over `weights`.
fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights
        .iter()
        .map(|&w| total as f64 * w as f64 / sum as f64)
        .collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - out.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if out[i] < weights[i] {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

/// Patient-level split stratified on occlusion location.
///
/// Patient counts per split are fixed globally (rounded), then apportioned
/// over strata, so a 90/10 split of 100 patients is exactly 90/10.
pub fn split_cohort(
    manifest: &CohortManifest,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(CohortManifest, Vec<SplitWarning>)> {
    if manifest.cases.is_empty() {
        return Err(Error::InsufficientData("empty manifest".into()));
    }
    if !(0.0..=1.0).contains(&fractions.test) || !(0.0..=1.0).contains(&fractions.val) {
        return Err(Error::Invalid("split fractions must lie in [0, 1]".into()));
    }
    let mut patients: BTreeMap<&str, Occlusion> = BTreeMap::new();
    for c in &manifest.cases {
        if let Some(prev) = patients.insert(&c.patient_id, c.occlusion) {
            if prev != c.occlusion {
                return Err(Error::Invalid(format!(
                    "patient {} listed with two occlusion locations",
                    c.patient_id
                )));
            }
        }
    }

    let mut strata: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for (&p, occ) in &patients {
        strata.entry(occ.to_string()).or_default().push(p);
    }
    let mut warnings = Vec::new();
    let small: Vec<String> = strata
        .iter()
        .filter(|(_, v)| v.len() < MIN_STRATUM)
        .map(|(k, _)| k.clone())
        .collect();
    if !small.is_empty() && strata.len() > 1 {
        let mut pooled = Vec::new();
        for k in &small {
            let members = strata.remove(k).unwrap();
            warnings.push(SplitWarning {
                stratum: k.clone(),
                patients: members.len(),
                message: "stratum too small, merged into pooled stratum".into(),
            });
            pooled.extend(members);
        }
        strata.entry("POOLED".into()).or_default().extend(pooled);
    }

    let n = patients.len();
    let n_test = (n as f64 * fractions.test).round() as usize;
    let n_val = ((n - n_test) as f64 * fractions.val).round() as usize;
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let test_alloc = apportion(n_test, &sizes);
    let rest: Vec<usize> = sizes.iter().zip(&test_alloc).map(|(s, t)| s - t).collect();
    let val_alloc = apportion(n_val, &rest);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = BTreeMap::new();
    for (i, members) in strata.values().enumerate() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for (j, p) in members.into_iter().enumerate() {
            let s = if j < test_alloc[i] {
                Split::Test
            } else if j < test_alloc[i] + val_alloc[i] {
                Split::Val
            } else {
                Split::Train
            };
            splits.insert(p.to_string(), s);
        }
    }
    let mut out = manifest.clone();
    out.splits = splits;
    out.strata = vec!["occlusion".into()];
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_sums_to_total() {
        assert_eq!(apportion(10, &[50, 30, 20]), vec![5, 3, 2]);
        assert_eq!(apportion(3, &[1, 1, 1, 1]).iter().sum::<usize>(), 3);
        assert_eq!(apportion(0, &[4, 5]), vec![0, 0]);
    }
}
