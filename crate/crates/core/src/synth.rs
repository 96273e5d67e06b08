//! Deterministic synthetic DSA phantoms.
//!
//! A phantom is built in three steps. First the territories: an ICA region
//! (a jittered ellipse, clipped at the midline in AP views) split by a
//! smooth curve into ACA and MCA. Then vessel trees are grown from the
//! carotid bifurcation into each territory by recursive bifurcation. Finally
//! frames are rendered as subtracted angiograms: a flat background, vessels
//! and a territory blush darkening according to the bolus schedule, a faint
//! skull edge from patient motion, and Gaussian noise.
//!
//! Everything is a pure function of the [`PhantomSpec`], including its seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::atlasreg::{warp, warp_mask, AtlasEntry, CenteredAffine};
use crate::edt::squared_distance_to;
use crate::maskops::{assemble_label_map, cleanup, derive_territories, MorphologyParams};
use crate::morphology::fill_holes;
use crate::minip::{full_minip, phase_minips, PhaseBoundaries, Standardize};
use crate::model::SequenceMeta;
use crate::{
    BinaryMask, DsaSequence, Error, Grid, MinIpImage, Occlusion, Phase, Result, Stage, Territory,
    TerritoryMask, View,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkullSpec {
    /// Center in canvas fractions.
    pub center: (f64, f64),
    /// Semi-axes in canvas fractions.
    pub axes: (f64, f64),
    /// Ring thickness in canvas fractions.
    pub thickness: f64,
    /// Edge darkening per pixel of motion.
    pub attenuation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub depth: u32,
    pub branch_angle_deg: f64,
    pub angle_jitter_deg: f64,
    /// Root vessel width at a 512 px canvas.
    pub root_width_px: f64,
    pub width_decay: f64,
    pub length_decay: f64,
    pub trunk_width_px: f64,
}

/// Frames per phase and contrast strength. A phase with zero frames is
/// absent from the acquisition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BolusSpec {
    pub non_contrast: usize,
    pub arterial: usize,
    pub capillary: usize,
    pub venous: usize,
    pub vessel_attenuation: f64,
    pub blush_attenuation: f64,
}

impl BolusSpec {
    /// Only non-contrast frames.
    pub fn absent(frames: usize) -> Self {
        Self {
            non_contrast: frames,
            arterial: 0,
            capillary: 0,
            venous: 0,
            ..Self::default()
        }
    }

    pub fn count(&self, phase: Phase) -> usize {
        match phase {
            Phase::NonContrast => self.non_contrast,
            Phase::Arterial => self.arterial,
            Phase::Capillary => self.capillary,
            Phase::Venous => self.venous,
        }
    }

    pub fn total_frames(&self) -> usize {
        self.non_contrast + self.arterial + self.capillary + self.venous
    }

    /// Ground-truth label of every frame.
    pub fn schedule(&self) -> Vec<Phase> {
        Phase::ALL
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, self.count(p)))
            .collect()
    }
}

impl Default for BolusSpec {
    fn default() -> Self {
        Self {
            non_contrast: 2,
            arterial: 3,
            capillary: 4,
            venous: 3,
            vessel_attenuation: 10_000.0,
            blush_attenuation: 4_000.0,
        }
    }
}

/// Random patient positioning applied to the whole head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseJitter {
    pub rotation_deg: f64,
    pub scale: f64,
    /// In canvas pixels.
    pub shift_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub view: View,
    pub stage: Stage,
    pub occlusion: Occlusion,
    /// Square canvas side in pixels.
    pub canvas: usize,
    pub skull: SkullSpec,
    pub tree: TreeSpec,
    pub bolus: BolusSpec,
    /// Maximum skull displacement between frames, in pixels.
    pub motion_px: f64,
    pub noise_sigma: f64,
    pub background: f64,
    pub pose: PoseJitter,
    /// Scales the anatomical variation between seeds (0 = identical shapes).
    pub shape_jitter: f64,
    /// Patient identifier written into the sequence metadata.
    pub patient_id: String,
}

impl PhantomSpec {
    pub fn new(seed: u64, view: View, stage: Stage, occlusion: Occlusion) -> Self {
        Self {
            seed,
            view,
            stage,
            occlusion,
            canvas: 512,
            skull: SkullSpec {
                center: (0.5, 0.5),
                axes: (0.44, 0.46),
                thickness: 0.012,
                attenuation: 700.0,
            },
            tree: TreeSpec {
                depth: 6,
                branch_angle_deg: 28.0,
                angle_jitter_deg: 10.0,
                root_width_px: 6.0,
                width_decay: 0.8,
                length_decay: 0.74,
                trunk_width_px: 8.0,
            },
            bolus: BolusSpec::default(),
            motion_px: 2.0,
            noise_sigma: 150.0,
            background: 20_000.0,
            pose: PoseJitter {
                rotation_deg: 4.0,
                scale: 0.04,
                shift_px: 10.0,
            },
            shape_jitter: 1.0,
            patient_id: format!("SYN{seed:05}"),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.canvas < 32 {
            return Err(Error::Invalid("canvas must be at least 32 px".into()));
        }
        if self.bolus.total_frames() == 0 {
            return Err(Error::Invalid("bolus schedule has no frames".into()));
        }
        if self.noise_sigma < 0.0 || self.motion_px < 0.0 {
            return Err(Error::Invalid("noise and motion must be non-negative".into()));
        }
        Ok(())
    }
}

/// A generated acquisition with its ground truth.
#[derive(Clone, Debug)]
pub struct Phantom {
    /// Frames carry the ground-truth phase labels in their metadata.
    pub sequence: DsaSequence,
    pub territories: TerritoryMask,
    pub phases: PhaseBoundaries,
}

impl Phantom {
    /// Full-phase MinIP and territories at 1024×1024.
    pub fn standardized_case(&self) -> Result<SynthCase> {
        let minip = full_minip(&self.sequence).standardize()?;
        let phase_images = phase_minips(&self.sequence, &self.phases)?
            .into_iter()
            .map(|(p, m)| Ok((p, m.standardize()?)))
            .collect::<Result<_>>()?;
        Ok(SynthCase {
            minip,
            territories: self.territories.standardize()?,
            phase_minips: phase_images,
        })
    }
}

/// Images and masks of one acquisition that are moved together by
/// [`perturb`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCase {
    pub minip: MinIpImage,
    pub territories: TerritoryMask,
    pub phase_minips: BTreeMap<Phase, MinIpImage>,
}

/// Applies the same transform to every image and mask of a case.
pub fn perturb(case: &SynthCase, t: impl Into<CenteredAffine>) -> Result<SynthCase> {
    let t = t.into();
    Ok(SynthCase {
        minip: warp(&case.minip, t)?,
        territories: warp_mask(&case.territories, t)?,
        phase_minips: case
            .phase_minips
            .iter()
            .map(|(p, m)| Ok((*p, warp(m, t)?)))
            .collect::<Result<_>>()?,
    })
}

fn sym(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// Territory geometry in canonical canvas fractions.
struct Anatomy {
    view: View,
    center: (f64, f64),
    axes: (f64, f64),
    harmonics: [(f64, f64); 3],
    midline: f64,
    split_offset: f64,
    split_amp: f64,
    split_phase: f64,
    split_limit: f64,
}

impl Anatomy {
    fn sample(view: View, j: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut harmonics = [(0.0, 0.0); 3];
        for h in &mut harmonics {
            *h = (rng.random_range(0.0..=0.045) * j, rng.random_range(0.0..2.0 * PI));
        }
        match view {
            View::Ap => Self {
                view,
                center: (0.64 + 0.03 * j * sym(rng), 0.47 + 0.03 * j * sym(rng)),
                axes: (0.19 + 0.025 * j * sym(rng), 0.27 + 0.03 * j * sym(rng)),
                harmonics,
                midline: 0.5 + 0.01 * j * sym(rng),
                split_offset: 0.09 + 0.02 * j * sym(rng),
                split_amp: 0.015 * j,
                split_phase: rng.random_range(0.0..2.0 * PI),
                split_limit: 0.6 + 0.04 * j * sym(rng),
            },
            View::Lateral => Self {
                view,
                center: (0.5 + 0.03 * j * sym(rng), 0.45 + 0.03 * j * sym(rng)),
                axes: (0.3 + 0.03 * j * sym(rng), 0.24 + 0.025 * j * sym(rng)),
                harmonics,
                midline: 0.0,
                split_offset: 0.35 + 0.08 * j * sym(rng),
                split_amp: 0.02 * j,
                split_phase: rng.random_range(0.0..2.0 * PI),
                split_limit: 0.6 + 0.1 * j * sym(rng),
            },
        }
    }

    /// Label at canonical fractional coordinates.
    fn label(&self, u: f64, v: f64) -> u8 {
        let du = (u - self.center.0) / self.axes.0;
        let dv = (v - self.center.1) / self.axes.1;
        let r = (du * du + dv * dv).sqrt();
        let phi = dv.atan2(du);
        let bound = 1.0
            + self
                .harmonics
                .iter()
                .enumerate()
                .map(|(k, (a, ph))| a * ((k as f64 + 2.0) * phi + ph).cos())
                .sum::<f64>();
        if r > bound {
            return TerritoryMask::BACKGROUND;
        }
        match self.view {
            View::Ap => {
                if u < self.midline + 0.01 {
                    return TerritoryMask::BACKGROUND;
                }
                let split = self.midline
                    + self.split_offset
                    + self.split_amp * (2.0 * PI * 1.5 * v + self.split_phase).sin();
                let top = self.center.1 + (self.split_limit - 0.47);
                if u < split && v < top {
                    TerritoryMask::ACA
                } else {
                    TerritoryMask::MCA
                }
            }
            View::Lateral => {
                let split = self.center.1 - self.split_offset * self.axes.1
                    + self.split_amp * (2.0 * PI * 1.5 * u + self.split_phase).sin();
                let front = self.center.0 + self.split_limit * self.axes.0;
                if v < split && u < front {
                    TerritoryMask::ACA
                } else {
                    TerritoryMask::MCA
                }
            }
        }
    }
}

struct Segment {
    a: (f64, f64),
    b: (f64, f64),
    width: f64,
    depth: u32,
    /// Index of the first-generation branch this segment descends from.
    branch: u8,
}

/// Rasterized vessel layer: for each pixel the shallowest covering depth
/// and its first-generation branch.
struct VesselLayer {
    depth: Grid<u8>,
    branch: Grid<u8>,
}

const NO_VESSEL: u8 = u8::MAX;

impl VesselLayer {
    fn new(n: usize) -> Self {
        Self {
            depth: Grid::new(n, n, NO_VESSEL),
            branch: Grid::new(n, n, 0),
        }
    }

    fn draw(&mut self, seg: &Segment, clip: Option<&BinaryMask>) {
        let n = self.depth.width() as f64;
        let r = (seg.width / 2.0).max(0.5);
        let x0 = (seg.a.0.min(seg.b.0) - r).floor().max(0.0) as usize;
        let x1 = (seg.a.0.max(seg.b.0) + r).ceil().min(n - 1.0).max(0.0) as usize;
        let y0 = (seg.a.1.min(seg.b.1) - r).floor().max(0.0) as usize;
        let y1 = (seg.a.1.max(seg.b.1) + r).ceil().min(n - 1.0).max(0.0) as usize;
        let (dx, dy) = (seg.b.0 - seg.a.0, seg.b.1 - seg.a.1);
        let len2 = (dx * dx + dy * dy).max(1e-12);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if clip.is_some_and(|c| !c.get(x, y)) {
                    continue;
                }
                let (px, py) = (x as f64 - seg.a.0, y as f64 - seg.a.1);
                let t = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
                let (ex, ey) = (px - t * dx, py - t * dy);
                if ex * ex + ey * ey <= r * r {
                    let d = seg.depth.min(254) as u8;
                    if d < *self.depth.get(x, y) {
                        self.depth.set(x, y, d);
                        self.branch.set(x, y, seg.branch);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    out: &mut Vec<Segment>,
    rng: &mut ChaCha8Rng,
    tree: &TreeSpec,
    start: (f64, f64),
    angle: f64,
    length: f64,
    width: f64,
    depth: u32,
    branch: u8,
) {
    let end = (start.0 + length * angle.cos(), start.1 + length * angle.sin());
    out.push(Segment {
        a: start,
        b: end,
        width,
        depth,
        branch,
    });
    if depth >= tree.depth {
        return;
    }
    for (i, side) in [-1.0, 1.0].into_iter().enumerate() {
        let jitter = tree.angle_jitter_deg * sym(rng);
        let a = angle + side * (tree.branch_angle_deg + jitter).to_radians();
        let b = if depth == 0 { i as u8 } else { branch };
        grow(
            out,
            rng,
            tree,
            end,
            a,
            length * tree.length_decay,
            width * tree.width_decay,
            depth + 1,
            b,
        );
    }
}

/// Per-territory rendering strength for the acquisition stage.
#[derive(Clone, Copy)]
struct Perfusion {
    vessels: f64,
    blush: f64,
    /// First-generation branch removed from the tree (M2 occlusion).
    cut_branch: Option<u8>,
}

const FULL: Perfusion = Perfusion {
    vessels: 1.0,
    blush: 1.0,
    cut_branch: None,
};
const BLOCKED: Perfusion = Perfusion {
    vessels: 0.0,
    blush: 0.0,
    cut_branch: None,
};

fn phase_weights(phase: Phase, progress: f64) -> (f64, f64, f64) {
    // (vessel strength, blush strength, venous drainage strength)
    match phase {
        Phase::NonContrast => (0.0, 0.0, 0.0),
        Phase::Arterial => (0.55 + 0.45 * progress, 0.25 * progress, 0.0),
        Phase::Capillary => (
            0.6 - 0.3 * progress,
            0.85 + 0.15 * (PI * progress).sin(),
            0.1 * progress,
        ),
        Phase::Venous => (0.1 * (1.0 - progress), 0.45 - 0.3 * progress, 0.7),
    }
}

/// Renders a phantom.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let n = spec.canvas;
    let nf = n as f64;
    let k = nf / 512.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = spec.shape_jitter;
    let anatomy = Anatomy::sample(spec.view, j, &mut rng);

    // canonical → image pose
    let pose_theta = (spec.pose.rotation_deg * sym(&mut rng)).to_radians();
    let pose_scale = 1.0 + spec.pose.scale * sym(&mut rng);
    let pose_shift = (
        spec.pose.shift_px * k * sym(&mut rng),
        spec.pose.shift_px * k * sym(&mut rng),
    );
    let c = ((nf - 1.0) / 2.0, (nf - 1.0) / 2.0);
    let (ps, pc) = pose_theta.sin_cos();
    let to_canonical = |x: f64, y: f64| -> (f64, f64) {
        let (dx, dy) = (x - c.0 - pose_shift.0, y - c.1 - pose_shift.1);
        let u = (pc * dx + ps * dy) / pose_scale + c.0;
        let v = (-ps * dx + pc * dy) / pose_scale + c.1;
        (u / nf, v / nf)
    };
    let to_image = |u: f64, v: f64| -> (f64, f64) {
        let (dx, dy) = ((u * nf - c.0) * pose_scale, (v * nf - c.1) * pose_scale);
        (
            pc * dx - ps * dy + c.0 + pose_shift.0,
            ps * dx + pc * dy + c.1 + pose_shift.1,
        )
    };

    let labels = Grid::from_fn(n, n, |x, y| {
        let (u, v) = to_canonical(x as f64, y as f64);
        anatomy.label(u, v)
    });
    let territories = TerritoryMask::new(labels)?;
    let mca = territories.mca();
    let aca = territories.aca();
    if mca.is_empty() || aca.is_empty() {
        return Err(Error::Invalid(format!(
            "seed {} produced an empty territory",
            spec.seed
        )));
    }
    let ica = territories.ica();

    // vessel trees from the carotid bifurcation
    let root = ica
        .points()
        .into_iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| b.0.abs_diff(n / 2).cmp(&a.0.abs_diff(n / 2)))
        })
        .map(|(x, y)| (x as f64, y as f64))
        .expect("non-empty ICA");
    let trunk_base = (root.0 + 0.02 * nf * sym(&mut rng), nf - 1.0);
    let mut trunk_layer = VesselLayer::new(n);
    trunk_layer.draw(
        &Segment {
            a: trunk_base,
            b: root,
            width: spec.tree.trunk_width_px * k,
            depth: 0,
            branch: 0,
        },
        None,
    );

    let mut layers = Vec::new();
    for (territory, region) in [(Territory::Mca, &mca), (Territory::Aca, &aca)] {
        let (cx, cy) = region.centroid().expect("non-empty territory");
        let start = region
            .points()
            .into_iter()
            .min_by(|a, b| {
                let da = (a.0 as f64 - root.0).powi(2) + (a.1 as f64 - root.1).powi(2);
                let db = (b.0 as f64 - root.0).powi(2) + (b.1 as f64 - root.1).powi(2);
                da.total_cmp(&db)
            })
            .map(|(x, y)| (x as f64, y as f64))
            .unwrap();
        let angle = (cy - start.1).atan2(cx - start.0);
        let length = 0.38 * (region.count() as f64).sqrt();
        let mut segs = Vec::new();
        grow(
            &mut segs,
            &mut rng,
            &spec.tree,
            start,
            angle,
            length,
            spec.tree.root_width_px * k,
            0,
            0,
        );
        let mut layer = VesselLayer::new(n);
        for s in &segs {
            layer.draw(s, Some(region));
        }
        layers.push((territory, layer));
    }

    // venous sinus along the inner skull, upper arc
    let mut sinus = VesselLayer::new(n);
    let arc_steps = 48;
    let (sa, sb) = match spec.view {
        View::Ap => (1.15 * PI, 1.85 * PI),
        View::Lateral => (1.05 * PI, 2.0 * PI),
    };
    for i in 0..arc_steps {
        let p = |t: f64| {
            let ang = sa + (sb - sa) * t;
            to_image(
                spec.skull.center.0 + 0.9 * spec.skull.axes.0 * ang.cos(),
                spec.skull.center.1 + 0.9 * spec.skull.axes.1 * ang.sin(),
            )
        };
        sinus.draw(
            &Segment {
                a: p(i as f64 / arc_steps as f64),
                b: p((i + 1) as f64 / arc_steps as f64),
                width: 7.0 * k,
                depth: 0,
                branch: 0,
            },
            None,
        );
    }

    // blush with soft edges
    let blush_of = |region: &BinaryMask| {
        let outside = BinaryMask::from_grid(region.grid().map(|&v| !v));
        let d2 = squared_distance_to(outside.grid());
        let edge = 4.0 * k;
        Grid::from_fn(n, n, |x, y| {
            if region.get(x, y) {
                (0.5 + d2.get(x, y).sqrt() / (2.0 * edge)).min(1.0)
            } else {
                0.0
            }
        })
    };
    let blush_mca = blush_of(&mca);
    let blush_aca = blush_of(&aca);

    let pre = spec.stage == Stage::PreEvt;
    let (perf_mca, perf_aca, perf_trunk, perf_sinus) = match (pre, spec.occlusion) {
        (false, _) => (FULL, FULL, 1.0, 1.0),
        (true, Occlusion::Ica) => (BLOCKED, BLOCKED, 0.0, 0.0),
        (true, Occlusion::M1) => (BLOCKED, FULL, 1.0, 0.4),
        (true, Occlusion::M2) => (
            Perfusion {
                vessels: 1.0,
                blush: 0.5,
                cut_branch: Some(rng.random_range(0..2u8)),
            },
            FULL,
            1.0,
            0.8,
        ),
    };

    // skull edge profile in canonical coordinates
    let skull_profile = |x: f64, y: f64| {
        let (u, v) = to_canonical(x, y);
        let du = (u - spec.skull.center.0) / spec.skull.axes.0;
        let dv = (v - spec.skull.center.1) / spec.skull.axes.1;
        let r = (du * du + dv * dv).sqrt();
        let t = (r - 1.0) / (spec.skull.thickness / spec.skull.axes.0.min(spec.skull.axes.1));
        (-t * t).exp()
    };
    let skull_static = Grid::from_fn(n, n, |x, y| skull_profile(x as f64, y as f64));

    let schedule = spec.bolus.schedule();
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("valid sigma"))
    } else {
        None
    };
    let va = spec.bolus.vessel_attenuation;
    let ba = spec.bolus.blush_attenuation;
    let depth_factor = |d: u8| 1.0 - 0.08 * d as f64;
    let max_depth = spec.tree.depth;

    let mut frames = Vec::with_capacity(schedule.len());
    for (t, &phase) in schedule.iter().enumerate() {
        let index_in_phase = schedule[..t].iter().filter(|&&p| p == phase).count();
        let count = spec.bolus.count(phase);
        let progress = (index_in_phase as f64 + 1.0) / count as f64;
        let (w_vessel, w_blush, w_venous) = phase_weights(phase, progress);
        let shift = (
            spec.motion_px * sym(&mut rng),
            spec.motion_px * sym(&mut rng),
        );
        let mut frame_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(t as u64 + 1)));
        let mut frame = Grid::new(n, n, 0u16);
        for y in 0..n {
            for x in 0..n {
                let mut v = spec.background;
                let mut vessel: f64 = 0.0;
                for (territory, layer) in &layers {
                    let perf = if *territory == Territory::Mca { perf_mca } else { perf_aca };
                    let d = *layer.depth.get(x, y);
                    if d != NO_VESSEL && perf.vessels > 0.0 {
                        let cut = perf.cut_branch.is_some_and(|b| {
                            d >= 1 && *layer.branch.get(x, y) == b
                        });
                        if !cut {
                            vessel = vessel.max(perf.vessels * depth_factor(d.min(max_depth as u8)));
                        }
                    }
                }
                if *trunk_layer.depth.get(x, y) != NO_VESSEL {
                    vessel = vessel.max(perf_trunk);
                }
                v -= va * w_vessel * vessel;
                let blush = blush_mca.get(x, y) * perf_mca.blush + blush_aca.get(x, y) * perf_aca.blush;
                v -= ba * w_blush * blush;
                if *sinus.depth.get(x, y) != NO_VESSEL {
                    v -= va * w_venous * perf_sinus;
                }
                if spec.motion_px > 0.0 {
                    let moved = skull_profile(x as f64 - shift.0, y as f64 - shift.1);
                    v += spec.skull.attenuation * spec.motion_px * (moved - skull_static.get(x, y));
                }
                if let Some(nd) = &noise {
                    v += nd.sample(&mut frame_rng);
                }
                frame.set(x, y, v.round().clamp(0.0, u16::MAX as f64) as u16);
            }
        }
        frames.push(frame);
    }

    let meta = SequenceMeta {
        view: spec.view,
        stage: spec.stage,
        occlusion: spec.occlusion,
        patient_id: spec.patient_id.clone(),
        phase_labels: Some(schedule.clone()),
    };
    let sequence = DsaSequence::new(frames, meta)?;

    // internal consistency: MCA and ACA disjoint, union = ICA
    let rebuilt = assemble_label_map(&mca, &aca)?;
    if rebuilt != territories || mca.grid().zip_map(aca.grid(), |a, b| *a && *b).iter().any(|&v| v) {
        return Err(Error::Invalid("generated territories overlap".into()));
    }
    Ok(Phantom {
        sequence,
        territories,
        phases: PhaseBoundaries::new(schedule),
    })
}

/// Maximum boundary displacement of [`simulate_model_prediction`] relative
/// to the mask width.
pub const MODEL_DISPLACEMENT: f64 = 4.0 / 1024.0;

/// Imitates a trained model's prediction: the ground-truth label map
/// resampled through a smooth random displacement field (boundaries move by
/// up to about 4 px at 1024×1024), with speckle sprinkled on the background,
/// then cleaned with
/// the standard morphology of radius `radius`.
pub fn simulate_model_prediction(truth: &TerritoryMask, seed: u64, radius: u32) -> Result<TerritoryMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = truth.shape();
    let amp = MODEL_DISPLACEMENT * w.max(h) as f64;
    // three random plane waves per axis
    let waves: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                amp / 3.0 * rng.random_range(0.5..1.0),
                rng.random_range(1.0..4.0) * 2.0 * PI / w as f64,
                rng.random_range(1.0..4.0) * 2.0 * PI / h as f64,
                rng.random_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    let field = |x: f64, y: f64, ws: &[[f64; 4]]| ws.iter().map(|[a, fx, fy, ph]| a * (fx * x + fy * y + ph).sin()).sum::<f64>();
    let labels = Grid::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let sx = (xf + field(xf, yf, &waves[..3])).round().clamp(0.0, (w - 1) as f64) as usize;
        let sy = (yf + field(xf, yf, &waves[3..])).round().clamp(0.0, (h - 1) as f64) as usize;
        let mut v = *truth.labels().get(sx, sy);
        if v == TerritoryMask::BACKGROUND && rng.random_bool(0.002) {
            v = rng.random_range(1..=2);
        }
        v
    });
    let params = MorphologyParams::with_radius(radius);
    let displaced = TerritoryMask::new(labels)?;
    let ica = cleanup(&displaced.ica(), &params).mask;
    let mca = cleanup(&displaced.mca(), &params).mask;
    let mca = BinaryMask::from_grid(mca.grid().zip_map(ica.grid(), |m, i| *m && *i));
    let derived = derive_territories(&ica, &mca, &params)?.0;
    // slivers dropped by the ACA cleanup would otherwise leave holes
    let filled = fill_holes(&derived.ica());
    let labels = derived.labels().zip_map(filled.grid(), |&l, &f| {
        if f && l == TerritoryMask::BACKGROUND { TerritoryMask::MCA } else { l }
    });
    TerritoryMask::new(labels)
}

/// Number of AP entries in a synthetic library of `n` atlases
/// (views alternate, AP first).
pub fn library_view(index: usize) -> View {
    if index % 2 == 0 {
        View::Ap
    } else {
        View::Lateral
    }
}

/// Synthetic atlas library of `n` post-treatment phantoms at 1024×1024.
pub fn atlas_library(n: usize, seed: u64) -> Result<Vec<AtlasEntry>> {
    (0..n)
        .map(|i| {
            let view = library_view(i);
            let spec = PhantomSpec::new(seed.wrapping_add(i as u64), view, Stage::PostEvt, Occlusion::M1);
            let case = generate(&spec)?.standardized_case()?;
            AtlasEntry::new(format!("atlas{:02}", i + 1), view, case.minip, case.territories)
        })
        .collect()
}
