use dsa_territory::io::{load_mask, save_mask};
use dsa_territory::maskops::*;
use dsa_territory::minip::{compute_minip, estimate_phases, full_minip, phase_minips, PhaseBoundaries, Standardize};
use dsa_territory::model::SequenceMeta;
use dsa_territory::morphology::{erode_disk, label_components, largest_component, Connectivity};
use dsa_territory::synth::{generate, BolusSpec, PhantomSpec};
use dsa_territory::{BinaryMask, DsaSequence, Grid, Occlusion, Phase, Stage, TerritoryMask, View};
use proptest::prelude::*;

fn sequence(frames: Vec<Grid<u16>>) -> DsaSequence {
    let meta = SequenceMeta {
        view: View::Ap,
        stage: Stage::PostEvt,
        occlusion: Occlusion::M1,
        patient_id: "P1".into(),
        phase_labels: None,
    };
    DsaSequence::new(frames, meta).unwrap()
}

fn frames_strategy() -> impl Strategy<Value = Vec<Grid<u16>>> {
    (2usize..12, 2usize..12, 1usize..9).prop_flat_map(|(w, h, t)| {
        prop::collection::vec(prop::collection::vec(any::<u16>(), w * h), t)
            .prop_map(move |fs| fs.into_iter().map(|f| Grid::from_vec(w, h, f)).collect())
    })
}

fn nested_masks() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (4usize..40, 4usize..40).prop_flat_map(|(w, h)| {
        (prop::collection::vec(any::<bool>(), w * h), prop::collection::vec(any::<bool>(), w * h)).prop_map(
            move |(i, m)| {
                let ica = BinaryMask::from_fn(w, h, |x, y| i[y * w + x]);
                let mca = BinaryMask::from_fn(w, h, |x, y| i[y * w + x] && m[y * w + x]);
                (ica, mca)
            },
        )
    })
}

/// The line-removal fixture: a solid block with a 1-px line attached.
fn block_with_line(radius_block: usize) -> (BinaryMask, usize) {
    let (w, h) = (400, 200);
    let block = |x: usize, y: usize| (20..20 + radius_block).contains(&x) && (50..50 + radius_block).contains(&y);
    let line = |x: usize, y: usize| y == 90 && (20 + radius_block..20 + radius_block + 200).contains(&x);
    let area = radius_block * radius_block;
    (BinaryMask::from_fn(w, h, |x, y| block(x, y) || line(x, y)), area)
}

#[test]
fn cleanup_removes_line_and_keeps_block() {
    for radius in [2, 3] {
        let (raw, area) = block_with_line(100);
        let cleaned = cleanup(&raw, &MorphologyParams::with_radius(radius)).mask;
        assert!((0..400).filter(|&x| x >= 125).all(|x| !cleaned.get(x, 90)));
        let kept = cleaned.count() as f64;
        assert!((kept - area as f64).abs() / area as f64 <= 0.05, "radius {radius}: {kept} vs {area}");
    }
}

#[test]
fn cleanup_keeps_the_500_blob() {
    let big = |x: usize, y: usize| (5..25).contains(&x) && (5..30).contains(&y);
    let small = |x: usize, y: usize| (40..50).contains(&x) && (40..45).contains(&y);
    let raw = BinaryMask::from_fn(64, 64, |x, y| big(x, y) || small(x, y));
    let out = cleanup(&raw, &MorphologyParams::with_radius(1)).mask;
    assert!(out.points().iter().all(|&(x, y)| big(x, y)));
    assert_eq!(label_components(&out, Connectivity::Eight).len(), 1);
}

#[test]
fn minip_phase_fixtures() {
    let frames: Vec<Grid<u16>> = (0..4).map(|i| Grid::from_fn(6, 5, |x, y| (x * 10 + y + 7 * i) as u16)).collect();
    let seq = sequence(frames.clone());
    let labels = PhaseBoundaries::new(vec![Phase::NonContrast, Phase::Arterial, Phase::Capillary, Phase::Venous]);
    let phases = phase_minips(&seq, &labels).unwrap();
    assert_eq!(phases.len(), 4);
    for (i, p) in Phase::ALL.iter().enumerate() {
        assert_eq!(phases[p].pixels(), &frames[i]);
    }
    let all_cap = PhaseBoundaries::new(vec![Phase::Capillary; 4]);
    let one = phase_minips(&seq, &all_cap).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[&Phase::Capillary].pixels(), full_minip(&seq).pixels());
}

#[test]
fn phase_estimate_on_synthetic_schedules() {
    for seed in 0..6 {
        for view in [View::Ap, View::Lateral] {
            let p = generate(&PhantomSpec::new(seed, view, Stage::PostEvt, Occlusion::M1)).unwrap();
            let est = estimate_phases(&p.sequence).unwrap();
            let agree = est.boundaries.labels().iter().zip(p.phases.labels()).filter(|(a, b)| a == b).count();
            assert!(agree * 4 >= 3 * p.sequence.len(), "seed {seed} {view}: {agree}/{}", p.sequence.len());
        }
    }
}

#[test]
fn contrast_from_frame_zero_has_no_non_contrast_frames() {
    let mut spec = PhantomSpec::new(4, View::Ap, Stage::PostEvt, Occlusion::M1);
    spec.bolus = BolusSpec {
        non_contrast: 0,
        ..spec.bolus
    };
    let p = generate(&spec).unwrap();
    let est = estimate_phases(&p.sequence).unwrap();
    assert!(!est.boundaries.labels().contains(&Phase::NonContrast), "{:?}", est.boundaries.labels());
}

#[test]
fn label_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let zero = TerritoryMask::new(Grid::new(1024, 1024, 0u8)).unwrap();
    let checker = TerritoryMask::new(Grid::from_fn(33, 17, |x, y| 1 + ((x + y) % 2) as u8)).unwrap();
    for (i, m) in [zero, checker].iter().enumerate() {
        let path = dir.path().join(format!("m{i}.png"));
        save_mask(m, &path).unwrap();
        assert_eq!(&load_mask(&path).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minip_is_pixelwise_min_and_order_free(frames in frames_strategy(), seed in any::<u64>()) {
        let seq = sequence(frames.clone());
        let all: Vec<usize> = (0..frames.len()).collect();
        let m = compute_minip(&seq, &all).unwrap();
        let (w, h) = frames[0].shape();
        for y in 0..h {
            for x in 0..w {
                let oracle = frames.iter().map(|f| *f.get(x, y)).min().unwrap();
                prop_assert_eq!(*m.pixels().get(x, y), oracle);
            }
        }
        let mut shuffled = frames.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let again = full_minip(&sequence(shuffled));
        prop_assert_eq!(again.pixels(), m.pixels());
    }

    #[test]
    fn partition_law(frames in frames_strategy(), labels in prop::collection::vec(0usize..4, 9)) {
        let seq = sequence(frames.clone());
        let boundaries = PhaseBoundaries::new((0..frames.len()).map(|i| Phase::ALL[labels[i]]).collect());
        let phases = phase_minips(&seq, &boundaries).unwrap();
        let combined = phases.values().map(|m| m.pixels().clone()).reduce(|a, b| a.zip_map(&b, |x, y| *x.min(y))).unwrap();
        let full = full_minip(&seq);
        prop_assert_eq!(&combined, full.pixels());
    }

    #[test]
    fn standardize_masks_adds_no_labels(w in 2usize..80, h in 2usize..80, seed in any::<u64>()) {
        let labels = Grid::from_fn(w, h, |x, y| (((x as u64 * 31 + y as u64 * 17) ^ seed) % 2) as u8 * 2);
        let m = TerritoryMask::new(labels).unwrap();
        let s = m.standardize().unwrap();
        prop_assert!(s.labels().iter().all(|&l| l == 0 || l == 2));
    }

    #[test]
    fn mask_algebra((ica, mca) in nested_masks()) {
        let aca = subtract(&ica, &mca).unwrap();
        prop_assert_eq!(reconstruct_ica(&aca, &mca).unwrap(), ica.clone());
        let labels = assemble_label_map(&mca, &ica).unwrap();
        for (x, y, &l) in labels.labels().enumerate() {
            let oracle = if mca.get(x, y) { 1 } else if ica.get(x, y) { 2 } else { 0 };
            prop_assert_eq!(l, oracle);
        }
    }

    #[test]
    fn cleanup_is_one_component_before_dilation((raw, _) in nested_masks(), radius in 0u32..3) {
        let params = MorphologyParams::with_radius(radius);
        let kept = largest_component(&erode_disk(&raw, radius), params.connectivity);
        prop_assert!(label_components(&kept, params.connectivity).len() <= 1);
        let out = cleanup(&raw, &params);
        prop_assert_eq!(out.mask.is_empty(), kept.is_empty());
    }
}
