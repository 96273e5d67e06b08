//! Recovers a known affine perturbation of a phantom by registration, then
//! picks the best atlas for a new patient from a small generated library.
//!
//!     cargo run --release --example atlas_registration

use dsa_territory::atlasreg::{optimize, register_best_atlas, warp_mask, AffineTransform2D};
use dsa_territory::metrics::dsc;
use dsa_territory::synth::{atlas_library, generate, perturb, PhantomSpec};
use dsa_territory::{Occlusion, Result, Stage, View};

fn main() -> Result<()> {
    let moving = generate(&PhantomSpec::new(11, View::Ap, Stage::PostEvt, Occlusion::M1))?.standardized_case()?;
    let t = AffineTransform2D::new(6.0, 1.05, 0.97, 25.0, -18.0);
    let fixed = perturb(&moving, t)?;

    let result = optimize(&moving.minip, &fixed.minip)?;
    let r = result.transform;
    println!("applied   {t:?}");
    println!(
        "recovered theta {:.2} sx {:.3} sy {:.3} tx {:.1} ty {:.1} (NCC {:.4}, {:.2} s)",
        r.theta_deg, r.sx, r.sy, r.tx, r.ty, result.similarity, result.elapsed_s
    );
    let warped = warp_mask(&moving.territories, r)?;
    println!("ICA DSC after registration: {:.4}", dsc(&warped.ica(), &fixed.territories.ica())?);

    let library = atlas_library(4, 1_000_000)?;
    let patient = generate(&PhantomSpec::new(12, View::Ap, Stage::PostEvt, Occlusion::M1))?.standardized_case()?;
    let best = register_best_atlas(&library, &patient.minip, View::Ap)?;
    for (id, ncc) in &best.candidates {
        println!("  {id}: NCC {ncc:.4}");
    }
    println!(
        "best {} -> ICA DSC {:.3}, MCA DSC {:.3}",
        best.result.atlas_id.as_deref().unwrap_or("?"),
        dsc(&best.warped_masks.ica(), &patient.territories.ica())?,
        dsc(&best.warped_masks.mca(), &patient.territories.mca())?
    );
    Ok(())
}
