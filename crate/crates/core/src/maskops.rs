//! Territory mask algebra.
//!
//! The ACA territory is what remains of the ICA territory after removing the
//! MCA territory. That difference leaves thin residual lines along the MCA
//! border, which [`cleanup`] removes with erosion, largest-component
//! selection and dilation.

use serde::{Deserialize, Serialize};

use crate::morphology::{dilate_disk, erode_disk, largest_component, Connectivity};
use crate::{BinaryMask, Grid, Result, TerritoryMask};

/// `ica AND NOT mca`
pub fn subtract(ica: &BinaryMask, mca: &BinaryMask) -> Result<BinaryMask> {
    ica.check_shape(mca)?;
    Ok(BinaryMask::from_grid(
        ica.grid().zip_map(mca.grid(), |&i, &m| i && !m),
    ))
}

/// `aca OR mca`
pub fn reconstruct_ica(aca: &BinaryMask, mca: &BinaryMask) -> Result<BinaryMask> {
    aca.check_shape(mca)?;
    Ok(BinaryMask::from_grid(
        aca.grid().zip_map(mca.grid(), |&a, &m| a || m),
    ))
}

/// Label 1 where `mca`, 2 where `aca` but not `mca`, 0 elsewhere.
pub fn assemble_label_map(mca: &BinaryMask, aca: &BinaryMask) -> Result<TerritoryMask> {
    mca.check_shape(aca)?;
    let labels: Grid<u8> = mca.grid().zip_map(aca.grid(), |&m, &a| {
        if m {
            TerritoryMask::MCA
        } else if a {
            TerritoryMask::ACA
        } else {
            TerritoryMask::BACKGROUND
        }
    });
    TerritoryMask::new(labels)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeepPolicy {
    #[default]
    LargestComponent,
    /// Skip component selection (plain opening).
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphologyParams {
    pub erosion_radius: u32,
    pub dilation_radius: u32,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default)]
    pub keep: KeepPolicy,
}

/// Default disk radius at 1024×1024.
pub const DEFAULT_RADIUS: u32 = 3;

impl MorphologyParams {
    /// Equal erosion and dilation radius, 8-connectivity, keep largest.
    pub fn with_radius(radius: u32) -> Self {
        Self {
            erosion_radius: radius,
            dilation_radius: radius,
            connectivity: Connectivity::Eight,
            keep: KeepPolicy::LargestComponent,
        }
    }
}

impl Default for MorphologyParams {
    fn default() -> Self {
        Self::with_radius(DEFAULT_RADIUS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CleanupWarning {
    /// Nothing survived the erosion; the output is empty.
    EmptyAfterErosion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cleaned {
    pub mask: BinaryMask,
    pub warning: Option<CleanupWarning>,
}

/// Erode, keep the largest connected component, dilate.
pub fn cleanup(raw: &BinaryMask, params: &MorphologyParams) -> Cleaned {
    let eroded = erode_disk(raw, params.erosion_radius);
    if eroded.is_empty() {
        return Cleaned {
            mask: BinaryMask::empty(raw.width(), raw.height()),
            warning: Some(CleanupWarning::EmptyAfterErosion),
        };
    }
    let kept = match params.keep {
        KeepPolicy::LargestComponent => largest_component(&eroded, params.connectivity),
        KeepPolicy::All => eroded,
    };
    Cleaned {
        mask: dilate_disk(&kept, params.dilation_radius),
        warning: None,
    }
}

/// Full reference-mask derivation: ACA = cleanup(ICA − MCA), then assembled
/// with the MCA into a label map.
pub fn derive_territories(
    ica: &BinaryMask,
    mca: &BinaryMask,
    params: &MorphologyParams,
) -> Result<(TerritoryMask, Option<CleanupWarning>)> {
    let raw = subtract(ica, mca)?;
    let cleaned = cleanup(&raw, params);
    Ok((assemble_label_map(mca, &cleaned.mask)?, cleaned.warning))
}

/// Applies the same cleanup to the ACA label of a predicted label map.
pub fn postprocess_prediction(
    mask: &TerritoryMask,
    params: &MorphologyParams,
) -> Result<(TerritoryMask, Option<CleanupWarning>)> {
    let mca = mask.mca();
    let cleaned = cleanup(&mask.aca(), params);
    Ok((assemble_label_map(&mca, &cleaned.mask)?, cleaned.warning))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{close_disk, label_components};
    use crate::Error;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64, w: usize, h: usize) -> BinaryMask {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(0.5))
    }

    #[test]
    fn subtract_cases() {
        let a = random(1, 32, 32);
        assert!(subtract(&a, &a).unwrap().is_empty());
        assert_eq!(subtract(&a, &BinaryMask::empty(32, 32)).unwrap(), a);
        let b = random(2, 32, 32);
        let d = subtract(&a, &b).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(d.get(x, y), a.get(x, y) && !b.get(x, y));
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = BinaryMask::empty(4, 4);
        let b = BinaryMask::empty(4, 5);
        assert!(matches!(subtract(&a, &b), Err(Error::ShapeMismatch(..))));
        assert!(matches!(reconstruct_ica(&a, &b), Err(Error::ShapeMismatch(..))));
        assert!(matches!(assemble_label_map(&a, &b), Err(Error::ShapeMismatch(..))));
    }

    #[test]
    fn reconstruct_cases() {
        let m = random(3, 16, 16);
        assert_eq!(reconstruct_ica(&BinaryMask::empty(16, 16), &m).unwrap(), m);
        let left = BinaryMask::from_fn(16, 16, |x, _| x < 8);
        let right = BinaryMask::from_fn(16, 16, |x, _| x >= 8);
        assert_eq!(reconstruct_ica(&left, &right).unwrap().count(), 256);
    }

    #[test]
    fn subtract_then_reconstruct_is_identity() {
        for seed in 0..20 {
            let ica = random(seed, 24, 24);
            let extra = random(seed + 100, 24, 24);
            let mca = BinaryMask::from_fn(24, 24, |x, y| ica.get(x, y) && extra.get(x, y));
            let aca = subtract(&ica, &mca).unwrap();
            assert_eq!(reconstruct_ica(&aca, &mca).unwrap(), ica);
        }
    }

    #[test]
    fn assemble_precedence() {
        let mca = BinaryMask::from_fn(3, 1, |x, _| x == 0 || x == 1);
        let aca = BinaryMask::from_fn(3, 1, |x, _| x == 1 || x == 2);
        let m = assemble_label_map(&mca, &aca).unwrap();
        assert_eq!(m.labels().as_slice(), &[1, 1, 2]);

        let a = random(4, 20, 20);
        let b = random(5, 20, 20);
        let m = assemble_label_map(&a, &b).unwrap();
        for (x, y, &l) in m.labels().enumerate() {
            let expected = if a.get(x, y) { 1 } else if b.get(x, y) { 2 } else { 0 };
            assert_eq!(l, expected);
        }
    }

    #[test]
    fn cleanup_removes_attached_line() {
        // 100×100 block with a 1-px, 200-px line attached to its right edge
        let m = BinaryMask::from_fn(340, 140, |x, y| {
            let block = (20..120).contains(&x) && (20..120).contains(&y);
            let line = y == 70 && (120..320).contains(&x);
            block || line
        });
        let out = cleanup(&m, &MorphologyParams::with_radius(2));
        assert!(out.warning.is_none());
        assert!((120..320).all(|x| x < 123 || !out.mask.get(x, 70)));
        let ratio = out.mask.count() as f64 / 10_000.0;
        assert!((ratio - 1.0).abs() <= 0.05, "area ratio {ratio}");
    }

    #[test]
    fn cleanup_of_empty_warns() {
        let out = cleanup(&BinaryMask::empty(10, 10), &MorphologyParams::default());
        assert!(out.mask.is_empty());
        assert_eq!(out.warning, Some(CleanupWarning::EmptyAfterErosion));
    }

    #[test]
    fn cleanup_keeps_largest_blob() {
        // 500-px blob (20×25) and 50-px blob (5×10)
        let m = BinaryMask::from_fn(80, 60, |x, y| {
            ((5..25).contains(&x) && (5..30).contains(&y))
                || ((50..55).contains(&x) && (40..50).contains(&y))
        });
        let comps = label_components(&m, Connectivity::Eight);
        assert_eq!(comps.sizes, vec![500, 50]);
        let out = cleanup(&m, &MorphologyParams::with_radius(1));
        assert!(out.mask.get(15, 15));
        assert!((50..55).all(|x| (40..50).all(|y| !out.mask.get(x, y))));
    }

    #[test]
    fn plain_opening_is_within_closing() {
        let params = MorphologyParams {
            keep: KeepPolicy::All,
            ..MorphologyParams::with_radius(2)
        };
        for seed in 0..10 {
            let m = random(seed, 40, 40);
            let out = cleanup(&m, &params).mask;
            let closed = close_disk(&m, 2);
            assert!(out.points().iter().all(|&(x, y)| closed.get(x, y)));
        }
    }
}
