//! Inverse-mapping resampling and normalized cross-correlation.

use crate::minip::median_u16;
use crate::{BinaryMask, Error, Grid, MinIpImage, Result, TerritoryMask};

use super::transform::{image_center, CenteredAffine};

/// Bilinear sample, `None` outside `[0, w-1] × [0, h-1]`.
#[inline]
pub(crate) fn sample_bilinear<T: Copy + Into<f64>>(grid: &Grid<T>, x: f64, y: f64) -> Option<f64> {
    let (w, h) = grid.shape();
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    let v = |xx, yy| (*grid.get(xx, yy)).into();
    let top = v(x0, y0) * (1.0 - ax) + v(x1, y0) * ax;
    let bottom = v(x0, y1) * (1.0 - ax) + v(x1, y1) * ax;
    Some(top * (1.0 - ay) + bottom * ay)
}

/// Nearest sample, `None` outside the image.
#[inline]
fn sample_nearest<T: Copy>(grid: &Grid<T>, x: f64, y: f64) -> Option<T> {
    let xr = x.round();
    let yr = y.round();
    grid.try_get(xr as isize, yr as isize)
        .filter(|_| xr.is_finite() && yr.is_finite())
        .copied()
}

fn inverse_map(shape: (usize, usize), t: &CenteredAffine) -> Result<(CenteredAffine, (f64, f64))> {
    Ok((t.inverse()?, image_center(shape.0, shape.1)))
}

/// Resamples `img` so that its content moves by `t`. Pixels that map
/// outside the source take the background level (the source median).
pub fn warp(img: &MinIpImage, t: impl Into<CenteredAffine>) -> Result<MinIpImage> {
    let t = t.into();
    let src = img.pixels();
    let (inv, c) = inverse_map(src.shape(), &t)?;
    let fill = median_u16(src.as_slice()) as f64;
    let (w, h) = src.shape();
    let out = Grid::par_from_fn(w, h, |x, y| {
        let (sx, sy) = inv.apply(c, (x as f64, y as f64));
        sample_bilinear(src, sx, sy)
            .unwrap_or(fill)
            .round()
            .clamp(0.0, u16::MAX as f64) as u16
    });
    Ok(img.with_pixels(out))
}

fn warp_nearest<T: Copy + Send + Sync>(grid: &Grid<T>, t: &CenteredAffine, fill: T) -> Result<Grid<T>> {
    let (inv, c) = inverse_map(grid.shape(), t)?;
    let (w, h) = grid.shape();
    Ok(Grid::par_from_fn(w, h, |x, y| {
        let (sx, sy) = inv.apply(c, (x as f64, y as f64));
        sample_nearest(grid, sx, sy).unwrap_or(fill)
    }))
}

/// Nearest-neighbor warp of a label map; outside pixels become background.
pub fn warp_mask(mask: &TerritoryMask, t: impl Into<CenteredAffine>) -> Result<TerritoryMask> {
    TerritoryMask::new(warp_nearest(mask.labels(), &t.into(), TerritoryMask::BACKGROUND)?)
}

pub fn warp_binary(mask: &BinaryMask, t: impl Into<CenteredAffine>) -> Result<BinaryMask> {
    Ok(BinaryMask::from_grid(warp_nearest(mask.grid(), &t.into(), false)?))
}

/// Running sums for a correlation over paired samples.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CorrSums {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl CorrSums {
    #[inline]
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
    }

    /// `None` when either side has zero variance.
    pub fn correlation(&self) -> Option<f64> {
        if self.n < 2.0 {
            return None;
        }
        let va = self.aa - self.a * self.a / self.n;
        let vb = self.bb - self.b * self.b / self.n;
        if va <= 0.0 || vb <= 0.0 {
            return None;
        }
        let cov = self.ab - self.a * self.b / self.n;
        Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Normalized cross-correlation of two same-shape images.
pub fn ncc(a: &MinIpImage, b: &MinIpImage) -> Result<f64> {
    ncc_grids(a.pixels(), b.pixels())
}

pub(crate) fn ncc_grids(a: &Grid<u16>, b: &Grid<u16>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(a.shape(), b.shape()));
    }
    let mean = |g: &Grid<u16>| g.iter().map(|&v| v as f64).sum::<f64>() / g.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let mut sums = CorrSums::default();
    for (&x, &y) in a.iter().zip(b.iter()) {
        sums.push(x as f64 - ma, y as f64 - mb);
    }
    sums.correlation().ok_or(Error::ZeroVariance)
}

/// NCC between `warp(moving, t)` and `fixed`, over the pixels whose
/// pre-image lies inside `moving`.
pub fn warped_ncc(moving: &MinIpImage, fixed: &MinIpImage, t: impl Into<CenteredAffine>) -> Result<f64> {
    let t = t.into();
    let m = moving.pixels();
    let f = fixed.pixels();
    if m.shape() != f.shape() {
        return Err(Error::ShapeMismatch(m.shape(), f.shape()));
    }
    let (inv, c) = inverse_map(m.shape(), &t)?;
    let mut sums = CorrSums::default();
    let offset = 32768.0;
    for (x, y, &fv) in f.enumerate() {
        let (sx, sy) = inv.apply(c, (x as f64, y as f64));
        if let Some(mv) = sample_bilinear(m, sx, sy) {
            sums.push(mv - offset, fv as f64 - offset);
        }
    }
    sums.correlation().ok_or(Error::ZeroVariance)
}
