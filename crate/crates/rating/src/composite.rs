use std::io::Cursor;

use dsa_territory::{Grid, MinIpImage, TerritoryMask};
use image::{ImageFormat, Rgb, RgbImage};

const MCA_COLOR: [f32; 3] = [230.0, 60.0, 40.0];
const ACA_COLOR: [f32; 3] = [40.0, 120.0, 230.0];
const FILL_ALPHA: f32 = 0.3;

/// Grayscale MinIP windowed to its 1st-99th percentile, with translucent
/// territory fills and solid outlines when `overlay` is set.
pub fn composite_png(minip: &MinIpImage, mask: Option<&TerritoryMask>) -> Vec<u8> {
    let px = minip.pixels();
    let (w, h) = px.shape();
    let mut sorted = px.as_slice().to_vec();
    sorted.sort_unstable();
    let lo = sorted[sorted.len() / 100] as f32;
    let hi = (sorted[sorted.len() * 99 / 100] as f32).max(lo + 1.0);
    let labels = mask.map(|m| m.labels());
    let edge = |g: &Grid<u8>, x: usize, y: usize| {
        let v = *g.get(x, y);
        v != 0
            && [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| g.try_get(x as isize + dx, y as isize + dy).is_none_or(|&n| n != v))
    };
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let g = ((*px.get(x, y) as f32 - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0);
        let mut c = [g, g, g];
        if let Some(l) = labels {
            let color = match *l.get(x, y) {
                TerritoryMask::MCA => Some(MCA_COLOR),
                TerritoryMask::ACA => Some(ACA_COLOR),
                _ => None,
            };
            if let Some(col) = color {
                let a = if edge(l, x, y) { 1.0 } else { FILL_ALPHA };
                for i in 0..3 {
                    c[i] = c[i] * (1.0 - a) + col[i] * a;
                }
            }
        }
        Rgb(c.map(|v| v.round() as u8))
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encode");
    out.into_inner()
}
