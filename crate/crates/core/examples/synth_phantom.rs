//! Generates the same anatomy under each occlusion stage and writes the
//! standardized MinIPs and territory masks as PNGs. Only perfusion changes
//! between stages, visible as the mean darkening inside each territory.
//!
//!     cargo run --release --example synth_phantom [out_dir]

use dsa_territory::io::{save_mask, save_minip};
use dsa_territory::synth::{generate, PhantomSpec};
use dsa_territory::{Occlusion, Result, Stage, View};

fn main() -> Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "phantoms".into()));
    std::fs::create_dir_all(&out).map_err(|e| dsa_territory::Error::Io { path: out.clone(), source: e })?;
    for view in [View::Ap, View::Lateral] {
        for (stage, occlusion) in [
            (Stage::PreEvt, Occlusion::Ica),
            (Stage::PreEvt, Occlusion::M1),
            (Stage::PreEvt, Occlusion::M2),
            (Stage::PostEvt, Occlusion::M1),
        ] {
            let phantom = generate(&PhantomSpec::new(5, view, stage, occlusion))?;
            let case = phantom.standardized_case()?;
            let name = format!("{view}_{stage}_{occlusion}");
            save_minip(&case.minip, out.join(format!("{name}.png")))?;
            save_mask(&case.territories, out.join(format!("{name}_mask.png")))?;
            let px = case.minip.pixels();
            let background = dsa_territory::minip::median_u16(px.as_slice()) as f64;
            let darkening = |mask: &dsa_territory::BinaryMask| {
                let pts = mask.points();
                pts.iter().map(|&(x, y)| background - *px.get(x, y) as f64).sum::<f64>() / pts.len() as f64
            };
            println!(
                "{name:<24} {} frames, darkening MCA {:>6.0}, ACA {:>6.0}",
                phantom.sequence.len(),
                darkening(&case.territories.mca()),
                darkening(&case.territories.aca())
            );
        }
    }
    println!("written to {}", out.display());
    Ok(())
}
