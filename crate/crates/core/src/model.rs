//! Domain types shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Result};

/// Side length of standardized MinIPs and masks.
pub const STANDARD_SIZE: usize = 1024;

macro_rules! symbol_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let upper = s.trim().to_ascii_uppercase().replace('-', "_");
                match upper.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Invalid(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        s
                    ))),
                }
            }
        }
    };
}

symbol_enum!(
    /// Projection direction of the acquisition.
    View { Ap => "AP", Lateral => "LATERAL" }
);
symbol_enum!(
    /// Acquisition time relative to endovascular treatment.
    Stage { PreEvt => "PRE_EVT", PostEvt => "POST_EVT" }
);
symbol_enum!(
    /// Occlusion location of the patient.
    Occlusion { Ica => "ICA", M1 => "M1", M2 => "M2" }
);
symbol_enum!(
    /// Vascular phase of a single frame.
    Phase {
        NonContrast => "NON_CONTRAST",
        Arterial => "ARTERIAL",
        Capillary => "CAPILLARY",
        Venous => "VENOUS",
    }
);
symbol_enum!(
    /// Which frames contributed to a MinIP. `Subset` covers arbitrary selections
    /// that are neither the whole sequence nor a single phase.
    PhaseScope {
        Full => "FULL",
        NonContrast => "NON_CONTRAST",
        Arterial => "ARTERIAL",
        Capillary => "CAPILLARY",
        Venous => "VENOUS",
        Subset => "SUBSET",
    }
);
symbol_enum!(
    /// Vascular territory. ICA is the union of MCA and ACA.
    Territory { Ica => "ICA", Mca => "MCA", Aca => "ACA" }
);
symbol_enum!(
    /// Source of a predicted segmentation.
    Method { Model => "MODEL", Atlas => "ATLAS" }
);

impl Phase {
    /// Position in the canonical non-contrast → arterial → capillary → venous order.
    pub fn order(self) -> usize {
        match self {
            Phase::NonContrast => 0,
            Phase::Arterial => 1,
            Phase::Capillary => 2,
            Phase::Venous => 3,
        }
    }
}

impl From<Phase> for PhaseScope {
    fn from(p: Phase) -> Self {
        match p {
            Phase::NonContrast => PhaseScope::NonContrast,
            Phase::Arterial => PhaseScope::Arterial,
            Phase::Capillary => PhaseScope::Capillary,
            Phase::Venous => PhaseScope::Venous,
        }
    }
}

/// Acquisition metadata; this is also the `meta.json` sidecar layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub view: View,
    pub stage: Stage,
    pub occlusion: Occlusion,
    pub patient_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_labels: Option<Vec<Phase>>,
}

/// A 2D+time DSA acquisition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsaSequence {
    frames: Vec<Grid<u16>>,
    meta: SequenceMeta,
}

impl DsaSequence {
    pub fn new(frames: Vec<Grid<u16>>, meta: SequenceMeta) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Invalid("sequence needs at least one frame".into()))?;
        let shape = first.shape();
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape {
                return Err(Error::FrameShape {
                    file: format!("frame {i}"),
                    expected: shape,
                    got: f.shape(),
                });
            }
        }
        if let Some(labels) = &meta.phase_labels {
            if labels.len() != frames.len() {
                return Err(Error::PhaseLabelCount {
                    labels: labels.len(),
                    frames: frames.len(),
                });
            }
        }
        Ok(Self { frames, meta })
    }

    pub fn frames(&self) -> &[Grid<u16>] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Grid<u16> {
        &self.frames[t]
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of every frame.
    pub fn shape(&self) -> (usize, usize) {
        self.frames[0].shape()
    }

    pub fn meta(&self) -> &SequenceMeta {
        &self.meta
    }

    pub fn view(&self) -> View {
        self.meta.view
    }

    pub fn stage(&self) -> Stage {
        self.meta.stage
    }

    pub fn occlusion(&self) -> Occlusion {
        self.meta.occlusion
    }

    pub fn patient_id(&self) -> &str {
        &self.meta.patient_id
    }

    pub fn phase_labels(&self) -> Option<&[Phase]> {
        self.meta.phase_labels.as_deref()
    }

    /// Replaces the per-frame phase labels.
    pub fn with_phase_labels(mut self, labels: Option<Vec<Phase>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.frames.len() {
                return Err(Error::PhaseLabelCount {
                    labels: l.len(),
                    frames: self.frames.len(),
                });
            }
        }
        self.meta.phase_labels = labels;
        Ok(self)
    }
}

/// A per-pixel minimum over a subset of frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinIpImage {
    pixels: Grid<u16>,
    phase_scope: PhaseScope,
    source_frames: Vec<usize>,
}

impl MinIpImage {
    pub fn new(pixels: Grid<u16>, phase_scope: PhaseScope, source_frames: Vec<usize>) -> Result<Self> {
        if source_frames.is_empty() {
            return Err(Error::EmptyFrameSet);
        }
        if source_frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "source frames must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            pixels,
            phase_scope,
            source_frames,
        })
    }

    /// Wraps a bare image, e.g. one loaded from a PNG without provenance.
    pub fn from_pixels(pixels: Grid<u16>) -> Self {
        Self {
            pixels,
            phase_scope: PhaseScope::Full,
            source_frames: vec![0],
        }
    }

    pub fn pixels(&self) -> &Grid<u16> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Grid<u16> {
        self.pixels
    }

    pub fn phase_scope(&self) -> PhaseScope {
        self.phase_scope
    }

    pub fn source_frames(&self) -> &[usize] {
        &self.source_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pixels.shape()
    }

    pub fn is_standard(&self) -> bool {
        self.shape() == (STANDARD_SIZE, STANDARD_SIZE)
    }

    /// Same provenance, new pixels.
    pub fn with_pixels(&self, pixels: Grid<u16>) -> Self {
        Self {
            pixels,
            phase_scope: self.phase_scope,
            source_frames: self.source_frames.clone(),
        }
    }
}

/// A boolean region.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask(Grid<bool>);

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self(Grid::new(width, height, false))
    }

    pub fn from_grid(grid: Grid<bool>) -> Self {
        Self(grid)
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> bool) -> Self {
        Self(Grid::from_fn(width, height, f))
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<bool> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        *self.0.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.0.set(x, y, v)
    }

    /// Foreground pixel count.
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&v| v)
    }

    /// Foreground coordinates in raster order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.0
            .enumerate()
            .filter(|(_, _, &v)| v)
            .map(|(x, y, _)| (x, y))
            .collect()
    }

    /// Mean foreground coordinate, `None` when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (x, y, &v) in self.0.enumerate() {
            if v {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    pub(crate) fn check_shape(&self, other: &BinaryMask) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(self.shape(), other.shape()));
        }
        Ok(())
    }
}

/// Label map with 0 = background, 1 = MCA, 2 = ACA.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TerritoryMask {
    labels: Grid<u8>,
}

impl TerritoryMask {
    pub const BACKGROUND: u8 = 0;
    pub const MCA: u8 = 1;
    pub const ACA: u8 = 2;

    /// Validates that only labels {0, 1, 2} occur.
    pub fn new(labels: Grid<u8>) -> Result<Self> {
        if let Some((x, y, &value)) = labels.enumerate().find(|(_, _, &v)| v > Self::ACA) {
            return Err(Error::InvalidLabel { value, x, y });
        }
        Ok(Self { labels })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            labels: Grid::new(width, height, Self::BACKGROUND),
        }
    }

    pub fn labels(&self) -> &Grid<u8> {
        &self.labels
    }

    pub fn into_labels(self) -> Grid<u8> {
        self.labels
    }

    pub fn shape(&self) -> (usize, usize) {
        self.labels.shape()
    }

    pub fn is_standard(&self) -> bool {
        self.shape() == (STANDARD_SIZE, STANDARD_SIZE)
    }

    pub fn region(&self, territory: Territory) -> BinaryMask {
        BinaryMask::from_grid(self.labels.map(|&l| match territory {
            Territory::Ica => l == Self::MCA || l == Self::ACA,
            Territory::Mca => l == Self::MCA,
            Territory::Aca => l == Self::ACA,
        }))
    }

    pub fn ica(&self) -> BinaryMask {
        self.region(Territory::Ica)
    }

    pub fn mca(&self) -> BinaryMask {
        self.region(Territory::Mca)
    }

    pub fn aca(&self) -> BinaryMask {
        self.region(Territory::Aca)
    }
}

/// One patient's acquisitions and the files that describe them.
///
/// Paths are relative to the manifest that lists the record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub patient_id: String,
    pub occlusion: Occlusion,
    pub acquisitions: Vec<AcquisitionRecord>,
}

/// Files for one `(view, stage)` acquisition of a patient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionRecord {
    pub view: View,
    pub stage: Stage,
    /// Full-phase standardized MinIP (16-bit PNG).
    pub minip: PathBuf,
    /// Reference territory mask.
    pub reference: PathBuf,
    #[serde(default)]
    pub predictions: BTreeMap<Method, PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phase_minips: BTreeMap<Phase, PathBuf>,
    /// Predictions made on the phase MinIPs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phase_predictions: BTreeMap<Phase, PathBuf>,
    /// Full-MinIP prediction of the model that produced `phase_predictions`,
    /// when it differs from the method predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_reference: Option<PathBuf>,
}

impl AcquisitionRecord {
    /// `patient/VIEW/STAGE`, the stable key used in reports.
    pub fn key(&self, patient_id: &str) -> String {
        format!("{patient_id}/{}/{}", self.view, self.stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip_through_text() {
        for p in Phase::ALL {
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), *p);
        }
        assert_eq!("non-contrast".parse::<Phase>().unwrap(), Phase::NonContrast);
        assert_eq!("ap".parse::<View>().unwrap(), View::Ap);
        assert!("oblique".parse::<View>().is_err());
        assert_eq!(serde_json::to_string(&Stage::PreEvt).unwrap(), "\"PRE_EVT\"");
    }

    #[test]
    fn territory_regions_partition_ica() {
        let labels = Grid::from_vec(3, 1, vec![0, 1, 2]);
        let m = TerritoryMask::new(labels).unwrap();
        assert_eq!(m.ica().points(), vec![(1, 0), (2, 0)]);
        assert_eq!(m.mca().points(), vec![(1, 0)]);
        assert_eq!(m.aca().points(), vec![(2, 0)]);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let labels = Grid::from_vec(2, 1, vec![0, 3]);
        assert!(matches!(
            TerritoryMask::new(labels),
            Err(Error::InvalidLabel { value: 3, x: 1, y: 0 })
        ));
    }

    #[test]
    fn sequence_rejects_label_count_mismatch() {
        let meta = SequenceMeta {
            view: View::Ap,
            stage: Stage::PostEvt,
            occlusion: Occlusion::M1,
            patient_id: "p".into(),
            phase_labels: Some(vec![Phase::Arterial; 2]),
        };
        let err = DsaSequence::new(vec![Grid::new(2, 2, 0u16); 3], meta).unwrap_err();
        assert!(err.to_string().contains("phase label count mismatch"));
    }

    #[test]
    fn minip_requires_increasing_frames() {
        let g = Grid::new(2, 2, 1u16);
        assert!(MinIpImage::new(g.clone(), PhaseScope::Full, vec![]).is_err());
        assert!(MinIpImage::new(g.clone(), PhaseScope::Full, vec![1, 1]).is_err());
        assert!(MinIpImage::new(g, PhaseScope::Full, vec![0, 2]).is_ok());
    }
}
