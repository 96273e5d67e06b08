//! Overlap and surface-distance metrics between two masks.
//!
//! Surfaces are inner boundaries: foreground pixels with at least one
//! 4-neighbor outside the mask (the image border counts as outside).
//! Distances are Euclidean, in pixels.

use serde::{Deserialize, Serialize};

use crate::edt::squared_distance_to;
use crate::{BinaryMask, Error, Result, Territory, TerritoryMask};

fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    a.check_shape(b)?;
    let (mut na, mut nb, mut both) = (0, 0, 0);
    for (&x, &y) in a.grid().iter().zip(b.grid().iter()) {
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    Ok((na, nb, both))
}

/// Dice coefficient `2|a∩b| / (|a|+|b|)`; 1.0 when both are empty.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (na, nb, both) = overlap_counts(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Jaccard index `|a∩b| / |a∪b|`; 1.0 when both are empty.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (na, nb, both) = overlap_counts(a, b)?;
    let union = na + nb - both;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / union as f64)
}

/// Inner 4-connected boundary of a non-empty mask.
pub fn boundary(a: &BinaryMask) -> Result<BinaryMask> {
    if a.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = a.shape();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        a.get(x, y)
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !a.get(x - 1, y)
                || !a.get(x + 1, y)
                || !a.get(x, y - 1)
                || !a.get(x, y + 1))
    }))
}

/// Distances from each boundary pixel of `from` to the boundary of `to`.
fn directed_surface_distances(from: &BinaryMask, to: &BinaryMask) -> Vec<f64> {
    let d2 = squared_distance_to(to.grid());
    from.grid()
        .iter()
        .zip(d2.iter())
        .filter(|(&f, _)| f)
        .map(|(_, &d)| d.sqrt())
        .collect()
}

fn surfaces(a: &BinaryMask, b: &BinaryMask) -> Result<(Vec<f64>, Vec<f64>)> {
    a.check_shape(b)?;
    let ba = boundary(a)?;
    let bb = boundary(b)?;
    Ok((
        directed_surface_distances(&ba, &bb),
        directed_surface_distances(&bb, &ba),
    ))
}

/// Symmetric average surface distance.
pub fn asd(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (ab, ba) = surfaces(a, b)?;
    let total: f64 = ab.iter().sum::<f64>() + ba.iter().sum::<f64>();
    Ok(total / (ab.len() + ba.len()) as f64)
}

/// Symmetric Hausdorff distance between the boundaries.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (ab, ba) = surfaces(a, b)?;
    Ok(ab.iter().chain(&ba).copied().fold(0.0, f64::max))
}

/// All four metrics for one territory. Surface distances are `None` when
/// either mask is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerritoryMetrics {
    pub dsc: f64,
    pub ji: f64,
    pub asd: Option<f64>,
    pub hd: Option<f64>,
}

impl TerritoryMetrics {
    pub fn compute(pred: &BinaryMask, reference: &BinaryMask) -> Result<Self> {
        let dsc = dsc(pred, reference)?;
        let ji = jaccard(pred, reference)?;
        let (asd, hd) = match surfaces(pred, reference) {
            Ok((ab, ba)) => {
                let n = (ab.len() + ba.len()) as f64;
                let asd = (ab.iter().sum::<f64>() + ba.iter().sum::<f64>()) / n;
                let hd = ab.iter().chain(&ba).copied().fold(0.0, f64::max);
                (Some(asd), Some(hd))
            }
            Err(Error::EmptyMask) => (None, None),
            Err(e) => return Err(e),
        };
        Ok(Self { dsc, ji, asd, hd })
    }
}

/// Metrics for the ICA and MCA territories of a predicted label map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    #[serde(rename = "ICA")]
    pub ica: TerritoryMetrics,
    #[serde(rename = "MCA")]
    pub mca: TerritoryMetrics,
}

impl OverlapReport {
    pub fn get(&self, territory: Territory) -> Option<&TerritoryMetrics> {
        match territory {
            Territory::Ica => Some(&self.ica),
            Territory::Mca => Some(&self.mca),
            Territory::Aca => None,
        }
    }
}

/// Compares a prediction against a reference label map.
pub fn evaluate(pred: &TerritoryMask, reference: &TerritoryMask) -> Result<OverlapReport> {
    if pred.shape() != reference.shape() {
        return Err(Error::ShapeMismatch(pred.shape(), reference.shape()));
    }
    Ok(OverlapReport {
        ica: TerritoryMetrics::compute(&pred.ica(), &reference.ica())?,
        mca: TerritoryMetrics::compute(&pred.mca(), &reference.mca())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Grid;

    fn pixels(w: usize, h: usize, pts: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| pts.contains(&(x, y)))
    }

    #[test]
    fn dsc_cases() {
        let a = pixels(4, 4, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        assert_eq!(dsc(&a, &a).unwrap(), 1.0);
        let b = pixels(4, 4, &[(0, 3)]);
        assert_eq!(dsc(&a, &b).unwrap(), 0.0);
        let c = pixels(4, 4, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(dsc(&a, &c).unwrap(), 0.5);
        assert_eq!(jaccard(&a, &c).unwrap(), 1.0 / 3.0);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.0);
        let e = BinaryMask::empty(4, 4);
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn boundary_cases() {
        assert_eq!(boundary(&pixels(5, 5, &[(2, 2)])).unwrap().points(), vec![(2, 2)]);
        let block = BinaryMask::from_fn(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        let b = boundary(&block).unwrap();
        assert_eq!(b.count(), 8);
        assert!(!b.get(3, 3));
        let full = BinaryMask::from_grid(Grid::new(6, 5, true));
        assert_eq!(boundary(&full).unwrap().count(), 2 * 6 + 2 * 3);
        assert!(matches!(boundary(&BinaryMask::empty(3, 3)), Err(Error::EmptyMask)));
    }

    #[test]
    fn single_pixels_five_apart() {
        let a = pixels(10, 10, &[(1, 4)]);
        let b = pixels(10, 10, &[(6, 4)]);
        assert_eq!(asd(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(asd(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn one_empty_mask_is_reported() {
        let a = pixels(4, 4, &[(1, 1)]);
        let e = BinaryMask::empty(4, 4);
        assert!(matches!(asd(&a, &e), Err(Error::EmptyMask)));
        let m = TerritoryMetrics::compute(&a, &e).unwrap();
        assert_eq!(m.dsc, 0.0);
        assert!(m.asd.is_none() && m.hd.is_none());
    }

    #[test]
    fn identical_label_maps_are_perfect() {
        let m = TerritoryMask::new(Grid::from_fn(20, 20, |x, y| {
            if x < 5 { 0 } else if y < 10 { 1 } else { 2 }
        }))
        .unwrap();
        let r = evaluate(&m, &m).unwrap();
        for t in [r.ica, r.mca] {
            assert_eq!((t.dsc, t.ji, t.asd, t.hd), (1.0, 1.0, Some(0.0), Some(0.0)));
        }
    }
}
