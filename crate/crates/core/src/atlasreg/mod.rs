//! Atlas-registration baseline.
//!
//! Atlas MinIPs are aligned to a patient MinIP with a rotation / scale /
//! translation transform that maximizes normalized cross-correlation, and
//! the atlas territory labels are carried along with the same transform.

mod library;
mod optimize;
mod transform;
mod warp;

pub use library::{
    load_library, register_best_atlas, register_best_atlas_with, save_library, AtlasEntry,
    BestAtlas, LibraryIndex, LibraryIndexEntry, LIBRARY_FILE,
};
pub use optimize::{
    optimize, optimize_with, register_pre_to_post, LevelTrace, RegistrationParams,
    RegistrationResult,
};
pub use transform::{image_center, AffineTransform2D, CenteredAffine};
pub use warp::{ncc, warp, warp_binary, warp_mask, warped_ncc};
