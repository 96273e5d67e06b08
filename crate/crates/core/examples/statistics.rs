//! The summaries and hypothesis tests used to compare methods.
//!
//!     cargo run --release --example statistics

use dsa_territory::stats::{
    chi2_proportions, mcnemar, mean_ci95, median_iqr, paired_t, wilcoxon_signed_rank,
};
use dsa_territory::Result;

fn main() -> Result<()> {
    let model = [0.96, 0.95, 0.97, 0.93, 0.98, 0.96, 0.94, 0.97, 0.95, 0.96];
    let atlas = [0.82, 0.78, 0.85, 0.62, 0.80, 0.84, 0.71, 0.79, 0.88, 0.81];

    let m = median_iqr(&model)?;
    let a = median_iqr(&atlas)?;
    println!("model DSC {:.2} [{:.2}-{:.2}]", m.center, m.low, m.high);
    println!("atlas DSC {:.2} [{:.2}-{:.2}]", a.center, a.low, a.high);
    let c = mean_ci95(&model)?;
    println!("model mean {:.3} (95% CI {:.3}-{:.3})", c.center, c.low, c.high);

    let w = wilcoxon_signed_rank(&model, &atlas)?;
    println!("Wilcoxon W = {}, p = {:.5} ({:?})", w.statistic, w.p_value, w.p_method);
    let t = paired_t(&model, &atlas)?;
    println!("paired t = {:.3}, p = {:.2e}", t.statistic, t.p_value);

    // 15 cases succeed only with the model, 5 only with the atlas
    let mc = mcnemar(15, 5)?;
    println!("McNemar chi2 = {:.2}, p = {:.4} ({:?})", mc.statistic, mc.p_value, mc.p_method);

    let x = chi2_proportions(80, 100, 66, 100)?;
    println!("success 80/100 vs 66/100: chi2 = {:.3}, p = {:.4}", x.statistic, x.p_value);
    Ok(())
}
