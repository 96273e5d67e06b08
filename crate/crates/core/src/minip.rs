//! Minimum intensity projections and grid standardization.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::model::STANDARD_SIZE;
use crate::{BinaryMask, DsaSequence, Error, Grid, MinIpImage, Phase, PhaseScope, Result, TerritoryMask};

/// Per-pixel minimum over `frames` (any order, duplicates ignored).
///
/// The scope is [`PhaseScope::Full`] when every frame is selected and
/// [`PhaseScope::Subset`] otherwise.
pub fn compute_minip(seq: &DsaSequence, frames: &[usize]) -> Result<MinIpImage> {
    let mut selected = frames.to_vec();
    selected.sort_unstable();
    selected.dedup();
    let scope = if selected.len() == seq.len() && selected.last() == Some(&(seq.len() - 1)) {
        PhaseScope::Full
    } else {
        PhaseScope::Subset
    };
    minip_with_scope(seq, selected, scope)
}

/// MinIP over every frame.
pub fn full_minip(seq: &DsaSequence) -> MinIpImage {
    minip_with_scope(seq, (0..seq.len()).collect(), PhaseScope::Full)
        .expect("sequences have at least one frame")
}

fn minip_with_scope(seq: &DsaSequence, selected: Vec<usize>, scope: PhaseScope) -> Result<MinIpImage> {
    if selected.is_empty() {
        return Err(Error::EmptyFrameSet);
    }
    if let Some(&bad) = selected.iter().find(|&&t| t >= seq.len()) {
        return Err(Error::FrameIndex {
            index: bad,
            len: seq.len(),
        });
    }
    let (w, h) = seq.shape();
    let mut out = seq.frame(selected[0]).clone();
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for &t in &selected[1..] {
                for (o, &v) in row.iter_mut().zip(seq.frame(t).row(y)) {
                    if v < *o {
                        *o = v;
                    }
                }
            }
        });
    debug_assert_eq!(out.shape(), (w, h));
    MinIpImage::new(out, scope, selected)
}

/// Per-frame phase labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseBoundaries(Vec<Phase>);

impl PhaseBoundaries {
    /// Annotated labels are taken verbatim.
    pub fn new(labels: Vec<Phase>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[Phase] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn frames_of(&self, phase: Phase) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == phase)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when labels follow non-contrast → arterial → capillary → venous.
    pub fn is_canonical(&self) -> bool {
        self.0.windows(2).all(|w| w[0].order() <= w[1].order())
    }
}

/// One MinIP per phase present in `boundaries`.
pub fn phase_minips(
    seq: &DsaSequence,
    boundaries: &PhaseBoundaries,
) -> Result<BTreeMap<Phase, MinIpImage>> {
    if boundaries.len() != seq.len() {
        return Err(Error::PhaseLabelCount {
            labels: boundaries.len(),
            frames: seq.len(),
        });
    }
    let mut out = BTreeMap::new();
    for &phase in Phase::ALL {
        let frames = boundaries.frames_of(phase);
        if frames.is_empty() {
            continue;
        }
        out.insert(phase, minip_with_scope(seq, frames, phase.into())?);
    }
    Ok(out)
}

/// Result of the opacity-curve phase heuristic.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseEstimate {
    pub boundaries: PhaseBoundaries,
    /// Opacified pixel count per frame.
    pub opacity_curve: Vec<usize>,
    /// Set when no frame reached the contrast onset level; every frame is
    /// then labeled non-contrast.
    pub no_contrast: bool,
}

/// Fraction of pixels that must be opacified before contrast counts as arrived.
pub const CONTRAST_ONSET_FRACTION: f64 = 0.01;
/// Venous phase starts once opacity drops below this fraction of its peak.
pub const VENOUS_DROP_FRACTION: f64 = 0.8;
/// Contrast threshold as a fraction of the frame-0 background level.
pub const CONTRAST_THRESHOLD_FRACTION: f64 = 0.1;

/// Assigns phases from the temporal opacity curve.
///
/// The background level is the median of frame 0, and a pixel counts as
/// opacified when it is darker than that level by more than 10 % of it.
/// Frames before the first frame with at least 1 % opacified pixels are
/// non-contrast; arterial runs from there up to the steepest rise of the
/// curve; capillary from the steepest rise until the curve falls below 80 %
/// of its peak; venous afterwards.
pub fn estimate_phases(seq: &DsaSequence) -> Result<PhaseEstimate> {
    let t_len = seq.len();
    if t_len < 4 {
        return Err(Error::InsufficientData(format!(
            "phase estimation needs at least 4 frames, got {t_len}"
        )));
    }
    let baseline = median_u16(seq.frame(0).as_slice()) as f64;
    let cutoff = baseline - CONTRAST_THRESHOLD_FRACTION * baseline;
    let curve: Vec<usize> = seq
        .frames()
        .par_iter()
        .map(|f| f.iter().filter(|&&v| (v as f64) < cutoff).count())
        .collect();

    let npix = seq.frame(0).len() as f64;
    let onset = curve
        .iter()
        .position(|&c| c as f64 >= CONTRAST_ONSET_FRACTION * npix);
    let Some(onset) = onset else {
        return Ok(PhaseEstimate {
            boundaries: PhaseBoundaries(vec![Phase::NonContrast; t_len]),
            opacity_curve: curve,
            no_contrast: true,
        });
    };

    let peak_value = *curve.iter().max().unwrap();
    let peak = curve.iter().position(|&c| c == peak_value).unwrap();
    let mut steepest = onset;
    let mut best_rise = i64::MIN;
    for t in onset..=peak {
        let prev = if t == 0 { 0 } else { curve[t - 1] as i64 };
        let rise = curve[t] as i64 - prev;
        if rise > best_rise {
            best_rise = rise;
            steepest = t;
        }
    }
    let venous_start = (peak + 1..t_len)
        .find(|&t| (curve[t] as f64) < VENOUS_DROP_FRACTION * peak_value as f64)
        .unwrap_or(t_len);

    let labels = (0..t_len)
        .map(|t| {
            if t < onset {
                Phase::NonContrast
            } else if t < steepest {
                Phase::Arterial
            } else if t < venous_start {
                Phase::Capillary
            } else {
                Phase::Venous
            }
        })
        .collect();
    Ok(PhaseEstimate {
        boundaries: PhaseBoundaries(labels),
        opacity_curve: curve,
        no_contrast: false,
    })
}

/// Median via a 16-bit histogram (lower median for even counts).
///
/// Panics on an empty slice.
pub fn median_u16(values: &[u16]) -> u16 {
    assert!(!values.is_empty());
    let mut hist = vec![0usize; 1 << 16];
    for &v in values {
        hist[v as usize] += 1;
    }
    let target = (values.len() - 1) / 2;
    let mut seen = 0;
    for (v, &n) in hist.iter().enumerate() {
        seen += n;
        if seen > target {
            return v as u16;
        }
    }
    unreachable!()
}

/// Resampling to the standard 1024×1024 grid.
pub trait Standardize: Sized {
    /// Letterboxes to a square (centered, background padding) and resamples
    /// to [`STANDARD_SIZE`]. Inputs already at that size are returned as is.
    fn standardize(&self) -> Result<Self>;
}

fn check_dims(w: usize, h: usize) -> Result<()> {
    if w < 2 || h < 2 {
        return Err(Error::DegenerateShape(w, h));
    }
    Ok(())
}

/// Pads to a centered square.
pub fn letterbox<T: Copy>(grid: &Grid<T>, fill: T) -> Grid<T> {
    let (w, h) = grid.shape();
    let side = w.max(h);
    let ox = (side - w) / 2;
    let oy = (side - h) / 2;
    Grid::from_fn(side, side, |x, y| {
        if x >= ox && y >= oy && x - ox < w && y - oy < h {
            *grid.get(x - ox, y - oy)
        } else {
            fill
        }
    })
}

/// Nearest-neighbor resampling with pixel-center alignment.
pub fn resize_nearest<T: Copy + Send + Sync>(grid: &Grid<T>, width: usize, height: usize) -> Grid<T> {
    let (w, h) = grid.shape();
    let sx = w as f64 / width as f64;
    let sy = h as f64 / height as f64;
    Grid::par_from_fn(width, height, |x, y| {
        let src_x = (((x as f64 + 0.5) * sx).floor() as usize).min(w - 1);
        let src_y = (((y as f64 + 0.5) * sy).floor() as usize).min(h - 1);
        *grid.get(src_x, src_y)
    })
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(grid: &Grid<u16>, width: usize, height: usize) -> Grid<u16> {
    let (w, h) = grid.shape();
    let sx = w as f64 / width as f64;
    let sy = h as f64 / height as f64;
    Grid::par_from_fn(width, height, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let ax = fx - x0 as f64;
        let ay = fy - y0 as f64;
        let v = |xx, yy| *grid.get(xx, yy) as f64;
        let top = v(x0, y0) * (1.0 - ax) + v(x1, y0) * ax;
        let bottom = v(x0, y1) * (1.0 - ax) + v(x1, y1) * ax;
        (top * (1.0 - ay) + bottom * ay).round().clamp(0.0, u16::MAX as f64) as u16
    })
}

impl Standardize for MinIpImage {
    fn standardize(&self) -> Result<Self> {
        let (w, h) = self.shape();
        check_dims(w, h)?;
        if self.is_standard() {
            return Ok(self.clone());
        }
        let fill = median_u16(self.pixels().as_slice());
        let square = letterbox(self.pixels(), fill);
        Ok(self.with_pixels(resize_bilinear(&square, STANDARD_SIZE, STANDARD_SIZE)))
    }
}

impl Standardize for TerritoryMask {
    fn standardize(&self) -> Result<Self> {
        let (w, h) = self.shape();
        check_dims(w, h)?;
        if self.is_standard() {
            return Ok(self.clone());
        }
        let square = letterbox(self.labels(), TerritoryMask::BACKGROUND);
        TerritoryMask::new(resize_nearest(&square, STANDARD_SIZE, STANDARD_SIZE))
    }
}

impl Standardize for BinaryMask {
    fn standardize(&self) -> Result<Self> {
        let (w, h) = self.shape();
        check_dims(w, h)?;
        if self.shape() == (STANDARD_SIZE, STANDARD_SIZE) {
            return Ok(self.clone());
        }
        let square = letterbox(self.grid(), false);
        Ok(BinaryMask::from_grid(resize_nearest(
            &square,
            STANDARD_SIZE,
            STANDARD_SIZE,
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Occlusion, SequenceMeta, Stage, View};
    use rand::{Rng, SeedableRng};

    fn seq(frames: Vec<Grid<u16>>) -> DsaSequence {
        DsaSequence::new(
            frames,
            SequenceMeta {
                view: View::Ap,
                stage: Stage::PostEvt,
                occlusion: Occlusion::M1,
                patient_id: "t".into(),
                phase_labels: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_frames() {
        let s = seq(vec![Grid::new(4, 4, 100); 3]);
        let m = compute_minip(&s, &[0, 1, 2]).unwrap();
        assert!(m.pixels().iter().all(|&v| v == 100));
        assert_eq!(m.phase_scope(), PhaseScope::Full);
    }

    #[test]
    fn picks_minimum_value() {
        let s = seq(vec![
            Grid::new(1, 1, 5),
            Grid::new(1, 1, 3),
            Grid::new(1, 1, 7),
        ]);
        assert_eq!(*full_minip(&s).pixels().get(0, 0), 3);
        let sub = compute_minip(&s, &[2, 0]).unwrap();
        assert_eq!(*sub.pixels().get(0, 0), 5);
        assert_eq!(sub.phase_scope(), PhaseScope::Subset);
        assert_eq!(sub.source_frames(), &[0, 2]);
    }

    #[test]
    fn matches_per_pixel_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<_> = (0..8)
            .map(|_| Grid::from_fn(16, 16, |_, _| rng.random::<u16>()))
            .collect();
        let s = seq(frames.clone());
        let m = full_minip(&s);
        for y in 0..16 {
            for x in 0..16 {
                let mut lo = u16::MAX;
                for f in &frames {
                    lo = lo.min(*f.get(x, y));
                }
                assert_eq!(*m.pixels().get(x, y), lo);
            }
        }
    }

    #[test]
    fn empty_and_out_of_range_frame_sets() {
        let s = seq(vec![Grid::new(2, 2, 1); 2]);
        assert!(matches!(compute_minip(&s, &[]), Err(Error::EmptyFrameSet)));
        assert!(matches!(
            compute_minip(&s, &[2]),
            Err(Error::FrameIndex { index: 2, len: 2 })
        ));
    }

    #[test]
    fn phase_minips_single_phase_equals_full() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<_> = (0..5)
            .map(|_| Grid::from_fn(8, 8, |_, _| rng.random::<u16>()))
            .collect();
        let s = seq(frames);
        let b = PhaseBoundaries::new(vec![Phase::Capillary; 5]);
        let map = phase_minips(&s, &b).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map[&Phase::Capillary].pixels(), full_minip(&s).pixels());
    }

    #[test]
    fn phase_minips_one_frame_each() {
        let frames: Vec<_> = (0..4).map(|t| Grid::new(3, 3, 10 * t as u16 + 1)).collect();
        let s = seq(frames.clone());
        let b = PhaseBoundaries::new(vec![
            Phase::NonContrast,
            Phase::Arterial,
            Phase::Capillary,
            Phase::Venous,
        ]);
        let map = phase_minips(&s, &b).unwrap();
        assert_eq!(map.len(), 4);
        for (i, p) in Phase::ALL.iter().enumerate() {
            assert_eq!(map[p].pixels(), &frames[i]);
            assert_eq!(map[p].source_frames(), &[i]);
            assert_eq!(map[p].phase_scope(), PhaseScope::from(*p));
        }
    }

    #[test]
    fn phase_minips_rejects_wrong_length() {
        let s = seq(vec![Grid::new(2, 2, 1); 3]);
        let b = PhaseBoundaries::new(vec![Phase::Arterial; 2]);
        assert!(matches!(
            phase_minips(&s, &b),
            Err(Error::PhaseLabelCount { .. })
        ));
    }

    #[test]
    fn constant_sequence_is_all_non_contrast() {
        let s = seq(vec![Grid::new(10, 10, 20000); 6]);
        let est = estimate_phases(&s).unwrap();
        assert!(est.no_contrast);
        assert_eq!(est.boundaries.labels(), &[Phase::NonContrast; 6]);
    }

    #[test]
    fn phase_estimation_needs_four_frames() {
        let s = seq(vec![Grid::new(4, 4, 1); 3]);
        assert!(estimate_phases(&s).is_err());
    }

    #[test]
    fn standardize_identity_and_constant() {
        let img = MinIpImage::from_pixels(Grid::from_fn(1024, 1024, |x, y| (x ^ y) as u16));
        assert_eq!(img.standardize().unwrap(), img);
        let c = MinIpImage::from_pixels(Grid::new(512, 512, 7));
        let s = c.standardize().unwrap();
        assert_eq!(s.shape(), (1024, 1024));
        assert!(s.pixels().iter().all(|&v| v == 7));
    }

    #[test]
    fn nearest_round_trip_at_two_x() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = TerritoryMask::new(Grid::from_fn(512, 512, |_, _| rng.random_range(0..3u8)))
            .unwrap();
        let up = m.standardize().unwrap();
        let down = resize_nearest(up.labels(), 512, 512);
        assert_eq!(&down, m.labels());
    }

    #[test]
    fn letterbox_centers_non_square_input() {
        let m = TerritoryMask::new(Grid::new(512, 256, 1)).unwrap();
        let s = m.standardize().unwrap();
        assert_eq!(*s.labels().get(512, 0), 0);
        assert_eq!(*s.labels().get(512, 512), 1);
        assert_eq!(*s.labels().get(512, 1023), 0);
        // 256 rows of padding top and bottom at 512 → 512 rows of mask at 1024
        assert_eq!(s.mca().count(), 1024 * 512);
    }

    #[test]
    fn degenerate_dimension_rejected() {
        let m = TerritoryMask::new(Grid::new(1, 5, 0)).unwrap();
        assert!(matches!(m.standardize(), Err(Error::DegenerateShape(1, 5))));
    }

    #[test]
    fn median_of_histogram() {
        assert_eq!(median_u16(&[5, 1, 3]), 3);
        assert_eq!(median_u16(&[4, 1, 3, 2]), 2);
    }
}
