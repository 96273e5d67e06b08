//! Atlas libraries and best-atlas selection.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{load_mask, load_minip, read_json, save_mask, save_minip, write_json};
use crate::{Error, MinIpImage, Result, TerritoryMask, View};

use super::optimize::{optimize_with, RegistrationParams, RegistrationResult};
use super::warp::warp_mask;

/// A reference MinIP with its territory labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AtlasEntry {
    pub id: String,
    pub view: View,
    pub minip: MinIpImage,
    pub masks: TerritoryMask,
}

impl AtlasEntry {
    pub fn new(id: impl Into<String>, view: View, minip: MinIpImage, masks: TerritoryMask) -> Result<Self> {
        if minip.shape() != masks.shape() {
            return Err(Error::ShapeMismatch(minip.shape(), masks.shape()));
        }
        Ok(Self {
            id: id.into(),
            view,
            minip,
            masks,
        })
    }
}

pub const LIBRARY_FILE: &str = "library.json";

/// `library.json` layout; paths are relative to the library directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryIndex {
    pub schema_version: u32,
    pub entries: Vec<LibraryIndexEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryIndexEntry {
    pub id: String,
    pub view: View,
    pub minip: PathBuf,
    pub mask: PathBuf,
}

pub fn load_library(dir: impl AsRef<Path>) -> Result<Vec<AtlasEntry>> {
    let dir = dir.as_ref();
    let index: LibraryIndex = read_json(dir.join(LIBRARY_FILE))?;
    index
        .entries
        .into_iter()
        .map(|e| {
            AtlasEntry::new(
                e.id,
                e.view,
                load_minip(dir.join(&e.minip))?,
                load_mask(dir.join(&e.mask))?,
            )
        })
        .collect()
}

pub fn save_library(entries: &[AtlasEntry], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = LibraryIndex {
        schema_version: 1,
        entries: Vec::with_capacity(entries.len()),
    };
    for e in entries {
        let minip = PathBuf::from(format!("{}_minip.png", e.id));
        let mask = PathBuf::from(format!("{}_mask.png", e.id));
        save_minip(&e.minip, dir.join(&minip))?;
        save_mask(&e.masks, dir.join(&mask))?;
        index.entries.push(LibraryIndexEntry {
            id: e.id.clone(),
            view: e.view,
            minip,
            mask,
        });
    }
    write_json(&index, dir.join(LIBRARY_FILE))
}

/// Outcome of registering every view-matched atlas to one patient image.
#[derive(Clone, Debug)]
pub struct BestAtlas {
    pub result: RegistrationResult,
    /// Atlas territories warped into patient space.
    pub warped_masks: TerritoryMask,
    /// `(atlas id, similarity)` for every atlas tried, sorted by id.
    pub candidates: Vec<(String, f64)>,
}

pub fn register_best_atlas(library: &[AtlasEntry], patient: &MinIpImage, view: View) -> Result<BestAtlas> {
    register_best_atlas_with(library, patient, view, &RegistrationParams::default())
}

/// Runs the registration against every atlas of `view` and keeps the one
/// with the highest similarity (ties go to the lowest id).
pub fn register_best_atlas_with(
    library: &[AtlasEntry],
    patient: &MinIpImage,
    view: View,
    params: &RegistrationParams,
) -> Result<BestAtlas> {
    let mut matched: Vec<&AtlasEntry> = library.iter().filter(|e| e.view == view).collect();
    if matched.is_empty() {
        return Err(Error::NoViewMatch(view.to_string()));
    }
    matched.sort_by(|a, b| a.id.cmp(&b.id));
    let runs: Vec<(&AtlasEntry, RegistrationResult)> = matched
        .par_iter()
        .map(|&e| {
            let mut r = optimize_with(&e.minip, patient, params)?;
            r.atlas_id = Some(e.id.clone());
            Ok((e, r))
        })
        .collect::<Result<_>>()?;

    let candidates = runs
        .iter()
        .map(|(e, r)| (e.id.clone(), r.similarity))
        .collect();
    let mut best = 0;
    for (i, (_, r)) in runs.iter().enumerate() {
        if r.similarity > runs[best].1.similarity {
            best = i;
        }
    }
    let (entry, result) = runs.into_iter().nth(best).expect("index in range");
    let warped_masks = warp_mask(&entry.masks, result.transform)?;
    Ok(BestAtlas {
        result,
        warped_masks,
        candidates,
    })
}
