//! Territory segmentation toolkit for digital subtraction angiography (DSA).
//!
//! The crate covers the non-neural half of a territory segmentation pipeline:
//!
//! * [`minip`]: minimum intensity projections over whole sequences or single
//!   vascular phases, and standardization to a 1024×1024 grid.
//! * [`maskops`]: ICA/MCA/ACA mask algebra and morphological cleanup.
//! * [`metrics`]: DSC, Jaccard, average surface distance and Hausdorff
//!   distance on an exact Euclidean distance transform.
//! * [`stats`]: summaries and the paired/unpaired tests used to compare methods.
//! * [`atlasreg`]: the atlas-registration baseline (affine NCC registration).
//! * [`synth`]: deterministic DSA phantoms with ground-truth territories.
//! * [`report`]: cohort splitting and table generation.
//!
//! Every image lives on a [`Grid`], and all file formats are plain PNG plus
//! JSON sidecars (see [`io`]).

pub mod atlasreg;
pub mod edt;
mod error;
pub mod grid;
pub mod io;
pub mod maskops;
pub mod metrics;
pub mod minip;
pub mod model;
pub mod morphology;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use grid::Grid;
pub use model::{
    BinaryMask, CaseRecord, DsaSequence, Method, MinIpImage, Occlusion, Phase, PhaseScope,
    Stage, Territory, TerritoryMask, View, STANDARD_SIZE,
};
