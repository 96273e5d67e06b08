//! Derives the ACA territory from ICA and MCA annotations and shows the
//! radius-3 cleanup removing a thin annotation slip.
//!
//!     cargo run --release --example derive_aca

use dsa_territory::maskops::{derive_territories, subtract, MorphologyParams};
use dsa_territory::{BinaryMask, Result};

fn main() -> Result<()> {
    let (w, h) = (160, 120);
    let ica = BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - 80.0, y as f64 - 60.0);
        dx * dx / 70.0f64.powi(2) + dy * dy / 50.0f64.powi(2) <= 1.0
    });
    // MCA covers the lower part; its upper edge misses a 1-px line that
    // would otherwise leak into the ACA
    let mca = BinaryMask::from_fn(w, h, |x, y| ica.get(x, y) && (y >= 50 && y != 80));

    let raw = subtract(&ica, &mca)?;
    let (labels, warning) = derive_territories(&ica, &mca, &MorphologyParams::default())?;
    let aca = labels.aca();
    println!("ICA {} px, MCA {} px", ica.count(), mca.count());
    println!("raw ICA - MCA: {} px, cleaned ACA: {} px, warning: {warning:?}", raw.count(), aca.count());
    println!("line row 80 in ACA after cleanup: {}", (0..w).any(|x| aca.get(x, 80)));

    for y in (0..h).step_by(6) {
        let row: String = (0..w)
            .step_by(3)
            .map(|x| match *labels.labels().get(x, y) {
                1 => 'M',
                2 => 'A',
                _ => '.',
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
