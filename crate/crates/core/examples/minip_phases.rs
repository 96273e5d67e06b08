//! Writes a synthetic acquisition to disk, reads it back, estimates the
//! vascular phases from the opacity curve and builds phase MinIPs.
//!
//!     cargo run --release --example minip_phases [out_dir]

use dsa_territory::io::{load_sequence, save_minip, save_sequence};
use dsa_territory::minip::{estimate_phases, full_minip, phase_minips, Standardize};
use dsa_territory::synth::{generate, PhantomSpec};
use dsa_territory::{Occlusion, Phase, Result, Stage, View};

fn main() -> Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());

    let phantom = generate(&PhantomSpec::new(1, View::Ap, Stage::PostEvt, Occlusion::M1))?;
    let dir = out.join("sequence");
    save_sequence(&phantom.sequence, &dir)?;
    let seq = load_sequence(&dir)?;
    println!("{} frames of {}x{} read from {}", seq.len(), seq.frame(0).width(), seq.frame(0).height(), dir.display());

    let estimate = estimate_phases(&seq)?;
    println!("opacity curve: {:?}", estimate.opacity_curve);
    let agree = estimate
        .boundaries
        .labels()
        .iter()
        .zip(phantom.phases.labels())
        .filter(|(a, b)| a == b)
        .count();
    println!("estimated phases agree with ground truth on {agree}/{} frames", seq.len());

    let full = full_minip(&seq);
    let phases = phase_minips(&seq, &estimate.boundaries)?;
    for (phase, img) in &phases {
        println!("{phase:<13} {} frames", estimate.boundaries.frames_of(*phase).len());
        save_minip(&img.standardize()?, out.join(format!("minip_{phase}.png")))?;
    }
    save_minip(&full.standardize()?, out.join("minip.png"))?;

    // the full MinIP is the pixelwise minimum of the phase MinIPs
    let combined = phases
        .values()
        .map(|m| m.pixels().clone())
        .reduce(|a, b| a.zip_map(&b, |x, y| *x.min(y)))
        .expect("at least one phase");
    assert_eq!(&combined, full.pixels());
    println!("partition law holds; {} contrast-free frames", estimate.boundaries.frames_of(Phase::NonContrast).len());
    println!("standardized MinIPs written to {}", out.display());
    Ok(())
}
