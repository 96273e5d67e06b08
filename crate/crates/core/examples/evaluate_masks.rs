//! Overlap and surface-distance metrics between a reference label map and
//! shifted copies of it.
//!
//!     cargo run --release --example evaluate_masks

use dsa_territory::atlasreg::{warp_mask, AffineTransform2D};
use dsa_territory::metrics::evaluate;
use dsa_territory::minip::Standardize;
use dsa_territory::synth::{generate, PhantomSpec};
use dsa_territory::{Occlusion, Result, Stage, View};

fn main() -> Result<()> {
    let phantom = generate(&PhantomSpec::new(3, View::Lateral, Stage::PostEvt, Occlusion::M1))?;
    let reference = phantom.territories.standardize()?;
    println!("shift  territory  DSC     JI      ASD     HD");
    for shift in [0.0, 5.0, 10.0, 20.0, 40.0] {
        let pred = warp_mask(&reference, AffineTransform2D::translation(shift, 0.0))?;
        let r = evaluate(&pred, &reference)?;
        for (name, m) in [("ICA", r.ica), ("MCA", r.mca)] {
            println!(
                "{shift:>5}  {name:<9}  {:.4}  {:.4}  {:>6.2}  {:>5.1}",
                m.dsc,
                m.ji,
                m.asd.unwrap_or(f64::NAN),
                m.hd.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
