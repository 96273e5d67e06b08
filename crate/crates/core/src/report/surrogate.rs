//! A simple threshold segmenter standing in for a trained model on phase
//! MinIPs. It finds the opacified territory (dark relative to the image
//! median) and splits it geometrically, so its output degrades with the
//! contrast content of the image.

use serde::{Deserialize, Serialize};

use crate::maskops::assemble_label_map;
use crate::morphology::{close_disk, fill_holes, largest_component, Connectivity};
use crate::{BinaryMask, MinIpImage, Result, TerritoryMask, View};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// Threshold in units of the robust noise sigma (scaled MAD).
    pub noise_multiple: f64,
    /// Fraction of darkest pixels used when the threshold selects nothing.
    pub fallback_fraction: f64,
    pub closing_radius: u32,
    /// Share of the territory's extent assigned to the ACA.
    pub aca_fraction: f64,
    /// AP views: the ACA only occupies this upper share of the height.
    pub ap_aca_height: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            noise_multiple: 4.0,
            fallback_fraction: 0.01,
            closing_radius: 6,
            aca_fraction: 0.3,
            ap_aca_height: 0.65,
        }
    }
}

fn quantile(values: &mut [f64], q: f64) -> f64 {
    let k = ((values.len() - 1) as f64 * q).round() as usize;
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

pub fn surrogate_predict(minip: &MinIpImage, view: View, params: &SurrogateParams) -> Result<TerritoryMask> {
    let px = minip.pixels();
    let median = crate::minip::median_u16(px.as_slice()) as f64;
    let dark = px.map(|&v| (median - v as f64).max(0.0));
    let mut deviations: Vec<f64> = px.iter().map(|&v| (v as f64 - median).abs()).collect();
    let sigma = 1.4826 * quantile(&mut deviations, 0.5);
    let mut values = dark.as_slice().to_vec();
    let mut threshold = params.noise_multiple * sigma;
    let (w, h) = px.shape();
    let count = dark.iter().filter(|&&d| d > threshold).count();
    if threshold <= 0.0 || count == 0 {
        threshold = quantile(&mut values, 1.0 - params.fallback_fraction);
    }
    let raw = BinaryMask::from_fn(w, h, |x, y| *dark.get(x, y) > threshold);
    let closed = close_disk(&raw, params.closing_radius);
    let ica = largest_component(&fill_holes(&closed), Connectivity::Eight);

    let pts = ica.points();
    if pts.is_empty() {
        return Ok(TerritoryMask::empty(w, h));
    }
    let (x0, x1) = pts.iter().fold((usize::MAX, 0), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.iter().fold((usize::MAX, 0), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let xs = x0 as f64 + params.aca_fraction * (x1 - x0) as f64;
    let ys = y0 as f64 + params.aca_fraction * (y1 - y0) as f64;
    let yh = y0 as f64 + params.ap_aca_height * (y1 - y0) as f64;
    let aca = BinaryMask::from_fn(w, h, |x, y| {
        ica.get(x, y)
            && match view {
                View::Ap => (x as f64) < xs && (y as f64) < yh,
                View::Lateral => (y as f64) < ys,
            }
    });
    let mca = BinaryMask::from_fn(w, h, |x, y| ica.get(x, y) && !aca.get(x, y));
    assemble_label_map(&mca, &aca)
}
