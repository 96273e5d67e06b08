//! Multi-resolution affine registration maximizing normalized
//! cross-correlation.
//!
//! The search runs on a three-level pyramid (¼, ½ and full resolution). On
//! the coarsest level an exhaustive grid over rotation, isotropic scale and
//! translation picks the best few starting points; each is refined by
//! coordinate descent with shrinking steps, and the winner is refined again
//! on every finer level.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Grid, MinIpImage, Result};

use super::transform::{image_center, AffineTransform2D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationParams {
    /// Downsampling divisors, coarsest first.
    pub pyramid: Vec<usize>,
    pub theta_range_deg: (f64, f64),
    pub theta_step_deg: f64,
    pub scale_range: (f64, f64),
    pub scale_step: f64,
    /// Translation grid in full-resolution pixels.
    pub translation_range: (f64, f64),
    pub translation_step: f64,
    /// Number of grid-search winners refined on the coarsest level.
    pub seeds: usize,
    pub max_iterations_per_level: usize,
    /// A sweep that gains less than this shrinks the step sizes.
    pub min_improvement: f64,
    /// Similarity is evaluated on about `n × n` regularly spaced pixels.
    pub grid_search_samples: usize,
    /// Sampling used while refining the grid-search seeds.
    pub seed_samples: usize,
    pub refine_samples: usize,
    /// Minimum fraction of sampled pixels whose pre-image must be in bounds.
    pub min_overlap: f64,
    /// Registrations below this similarity are flagged as failed.
    pub failure_threshold: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            pyramid: vec![4, 2, 1],
            theta_range_deg: (-15.0, 15.0),
            theta_step_deg: 3.0,
            scale_range: (0.85, 1.15),
            scale_step: 0.05,
            translation_range: (-60.0, 60.0),
            translation_step: 10.0,
            seeds: 5,
            max_iterations_per_level: 200,
            min_improvement: 1e-5,
            grid_search_samples: 32,
            seed_samples: 48,
            refine_samples: 96,
            min_overlap: 0.5,
            failure_threshold: 0.2,
        }
    }
}

/// Accepted similarities on one pyramid level, in acceptance order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub size: (usize, usize),
    pub accepted: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Maps the moving image onto the fixed image (apply with `warp`).
    pub transform: AffineTransform2D,
    /// NCC at full resolution over all overlapping pixels.
    pub similarity: f64,
    pub atlas_id: Option<String>,
    pub iterations: usize,
    pub elapsed_s: f64,
    /// Similarity fell below the failure threshold.
    pub failed: bool,
    pub trace: Vec<LevelTrace>,
}

/// One pyramid level, intensities standardized to zero mean, unit variance.
struct Level {
    moving: Grid<f32>,
    fixed: Grid<f32>,
    /// Level size divided by full size.
    factor: f64,
}

fn normalize(g: &Grid<u16>) -> Result<Grid<f32>> {
    let n = g.len() as f64;
    let mean = g.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = g.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(g.map(|&v| ((v as f64 - mean) / sd) as f32))
}

fn downsample(g: &Grid<f32>, divisor: usize) -> Grid<f32> {
    if divisor == 1 {
        return g.clone();
    }
    let (w, h) = g.shape();
    let (lw, lh) = ((w / divisor).max(1), (h / divisor).max(1));
    let norm = 1.0 / (divisor * divisor) as f32;
    Grid::par_from_fn(lw, lh, |x, y| {
        let mut s = 0.0f32;
        for dy in 0..divisor {
            let row = g.row((y * divisor + dy).min(h - 1));
            for dx in 0..divisor {
                s += row[(x * divisor + dx).min(w - 1)];
            }
        }
        s * norm
    })
}

impl Level {
    /// NCC of the warped moving level against the fixed level, on pixels
    /// spaced `stride` apart. Returns −1 when the overlap is too small.
    fn similarity(&self, t: &AffineTransform2D, stride: usize, min_overlap: f64) -> f64 {
        let Ok(inv) = t.to_affine().rescaled(self.factor).inverse() else {
            return -1.0;
        };
        let (w, h) = self.fixed.shape();
        let (mw, mh) = self.moving.shape();
        let c = image_center(w, h);
        let (xmax, ymax) = ((mw - 1) as f64, (mh - 1) as f64);
        let start = stride / 2;
        let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0u32, 0f64, 0f64, 0f64, 0f64, 0f64);
        let mut total = 0u32;
        let dx = (inv.m[0][0] * stride as f64, inv.m[1][0] * stride as f64);
        let mdata = self.moving.as_slice();
        for y in (start..h).step_by(stride) {
            let frow = self.fixed.row(y);
            let (mut px, mut py) = inv.apply(c, (start as f64, y as f64));
            let (mut ra, mut rb, mut raa, mut rbb, mut rab) = (0f32, 0f32, 0f32, 0f32, 0f32);
            for x in (start..w).step_by(stride) {
                total += 1;
                if px >= 0.0 && py >= 0.0 && px <= xmax && py <= ymax {
                    let x0 = px as usize;
                    let y0 = py as usize;
                    let x1 = (x0 + 1).min(mw - 1);
                    let y1 = (y0 + 1).min(mh - 1);
                    let ax = (px - x0 as f64) as f32;
                    let ay = (py - y0 as f64) as f32;
                    let r0 = y0 * mw;
                    let r1 = y1 * mw;
                    let top = mdata[r0 + x0] + (mdata[r0 + x1] - mdata[r0 + x0]) * ax;
                    let bot = mdata[r1 + x0] + (mdata[r1 + x1] - mdata[r1 + x0]) * ax;
                    let a = top + (bot - top) * ay;
                    let b = frow[x];
                    n += 1;
                    ra += a;
                    rb += b;
                    raa += a * a;
                    rbb += b * b;
                    rab += a * b;
                }
                px += dx.0;
                py += dx.1;
            }
            sa += ra as f64;
            sb += rb as f64;
            saa += raa as f64;
            sbb += rbb as f64;
            sab += rab as f64;
        }
        if total == 0 || (n as f64) < min_overlap * total as f64 || n < 2 {
            return -1.0;
        }
        let nf = n as f64;
        let va = saa - sa * sa / nf;
        let vb = sbb - sb * sb / nf;
        if va <= 0.0 || vb <= 0.0 {
            return -1.0;
        }
        ((sab - sa * sb / nf) / (va * vb).sqrt()).clamp(-1.0, 1.0)
    }

    fn stride_for(&self, samples: usize) -> usize {
        let (w, h) = self.fixed.shape();
        (w.max(h) / samples.max(1)).max(1)
    }
}

fn steps(params: &RegistrationParams, level: usize) -> [f64; 5] {
    let k = 0.5f64.powi(level as i32 + 1);
    [
        params.theta_step_deg * k,
        params.scale_step * k,
        params.scale_step * k,
        params.translation_step * k,
        params.translation_step * k,
    ]
}

const MIN_STEPS: [f64; 5] = [0.01, 0.0002, 0.0002, 0.05, 0.05];

fn with_param(t: &AffineTransform2D, i: usize, v: f64) -> AffineTransform2D {
    let mut t = *t;
    match i {
        0 => t.theta_deg = v,
        1 => t.sx = v,
        2 => t.sy = v,
        3 => t.tx = v,
        _ => t.ty = v,
    }
    t
}

fn param(t: &AffineTransform2D, i: usize) -> f64 {
    [t.theta_deg, t.sx, t.sy, t.tx, t.ty][i]
}

/// Coordinate descent with step halving.
fn refine(
    level: &Level,
    start: AffineTransform2D,
    mut step: [f64; 5],
    stride: usize,
    params: &RegistrationParams,
) -> (AffineTransform2D, f64, LevelTrace) {
    let mut best = start;
    let mut best_sim = level.similarity(&best, stride, params.min_overlap);
    let mut trace = LevelTrace {
        size: level.fixed.shape(),
        accepted: vec![best_sim],
        iterations: 0,
    };
    while trace.iterations < params.max_iterations_per_level {
        trace.iterations += 1;
        let before = best_sim;
        for i in 0..5 {
            let base = param(&best, i);
            let mut local_best: Option<(AffineTransform2D, f64)> = None;
            for dir in [1.0, -1.0] {
                let cand = with_param(&best, i, base + dir * step[i]);
                if !cand.is_valid() {
                    continue;
                }
                let s = level.similarity(&cand, stride, params.min_overlap);
                if s > best_sim && local_best.is_none_or(|(_, ls)| s > ls) {
                    local_best = Some((cand, s));
                }
            }
            if let Some((cand, s)) = local_best {
                best = cand;
                best_sim = s;
                trace.accepted.push(s);
            }
        }
        if best_sim - before < params.min_improvement {
            let mut all_small = true;
            for (s, m) in step.iter_mut().zip(MIN_STEPS) {
                *s *= 0.5;
                // coarse levels cannot resolve sub-pixel steps
                all_small &= *s < m / level.factor;
            }
            if all_small {
                break;
            }
        }
    }
    (best, best_sim, trace)
}

fn range_values(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Registers `moving` onto `fixed`.
pub fn optimize(moving: &MinIpImage, fixed: &MinIpImage) -> Result<RegistrationResult> {
    optimize_with(moving, fixed, &RegistrationParams::default())
}

pub fn optimize_with(
    moving: &MinIpImage,
    fixed: &MinIpImage,
    params: &RegistrationParams,
) -> Result<RegistrationResult> {
    let started = Instant::now();
    if moving.shape() != fixed.shape() {
        return Err(Error::ShapeMismatch(moving.shape(), fixed.shape()));
    }
    if params.pyramid.is_empty() {
        return Err(Error::Invalid("empty pyramid".into()));
    }
    let full_m = normalize(moving.pixels())?;
    let full_f = normalize(fixed.pixels())?;
    let full_w = full_f.width() as f64;
    let levels: Vec<Level> = params
        .pyramid
        .iter()
        .map(|&d| {
            let fixed = downsample(&full_f, d);
            Level {
                factor: fixed.width() as f64 / full_w,
                moving: downsample(&full_m, d),
                fixed,
            }
        })
        .collect();

    // grid search on the coarsest level
    let coarse = &levels[0];
    let grid_stride = coarse.stride_for(params.grid_search_samples);
    let thetas = range_values(params.theta_range_deg.0, params.theta_range_deg.1, params.theta_step_deg);
    let scales = range_values(params.scale_range.0, params.scale_range.1, params.scale_step);
    let shifts = range_values(
        params.translation_range.0,
        params.translation_range.1,
        params.translation_step,
    );
    let mut candidates: Vec<(f64, AffineTransform2D)> = thetas
        .par_iter()
        .flat_map_iter(|&theta| {
            let mut out = Vec::with_capacity(scales.len() * shifts.len() * shifts.len());
            for &s in &scales {
                for &tx in &shifts {
                    for &ty in &shifts {
                        let t = AffineTransform2D::new(theta, s, s, tx, ty);
                        out.push((coarse.similarity(&t, grid_stride, params.min_overlap), t));
                    }
                }
            }
            out
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut seeds: Vec<AffineTransform2D> = Vec::new();
    for (_, t) in &candidates {
        if seeds.len() >= params.seeds.max(1) {
            break;
        }
        let near = seeds.iter().any(|s| {
            (s.theta_deg - t.theta_deg).abs() <= params.theta_step_deg + 1e-9
                && (s.sx - t.sx).abs() <= params.scale_step + 1e-9
                && (s.tx - t.tx).abs() <= params.translation_step + 1e-9
                && (s.ty - t.ty).abs() <= params.translation_step + 1e-9
        });
        if !near {
            seeds.push(*t);
        }
    }

    let seed_stride = coarse.stride_for(params.seed_samples);
    let refined: Vec<_> = seeds
        .par_iter()
        .map(|&s| refine(coarse, s, steps(params, 0), seed_stride, params))
        .collect();
    let mut iterations: usize = refined.iter().map(|r| r.2.iterations).sum();
    let (seed_best, _, _) = refined
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one seed");
    let (mut best, _, first_trace) = refine(
        coarse,
        seed_best,
        steps(params, 1),
        coarse.stride_for(params.refine_samples),
        params,
    );
    iterations += first_trace.iterations;
    let mut trace = vec![first_trace];

    for (i, level) in levels.iter().enumerate().skip(1) {
        let stride = level.stride_for(params.refine_samples);
        let (t, _, tr) = refine(level, best, steps(params, i), stride, params);
        iterations += tr.iterations;
        best = t;
        trace.push(tr);
    }

    let finest = levels.last().expect("non-empty pyramid");
    let similarity = finest.similarity(&best, 1, 0.0);
    Ok(RegistrationResult {
        transform: best,
        similarity,
        atlas_id: None,
        iterations,
        elapsed_s: started.elapsed().as_secs_f64(),
        failed: similarity < params.failure_threshold,
        trace,
    })
}

/// Registers a pre-treatment MinIP onto the post-treatment MinIP of the
/// same acquisition view.
pub fn register_pre_to_post(pre: &MinIpImage, post: &MinIpImage) -> Result<RegistrationResult> {
    optimize(pre, post)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_values_are_inclusive() {
        assert_eq!(range_values(-15.0, 15.0, 3.0).len(), 11);
        assert_eq!(range_values(0.85, 1.15, 0.05).len(), 7);
        assert_eq!(range_values(-60.0, 60.0, 10.0).len(), 13);
    }

    #[test]
    fn zero_variance_rejected() {
        let flat = MinIpImage::from_pixels(Grid::new(64, 64, 5));
        let other = MinIpImage::from_pixels(Grid::from_fn(64, 64, |x, _| x as u16));
        assert!(matches!(optimize(&flat, &other), Err(Error::ZeroVariance)));
    }

    #[test]
    fn downsample_averages_blocks() {
        let g = Grid::from_fn(4, 2, |x, _| x as f32);
        let d = downsample(&g, 2);
        assert_eq!(d.as_slice(), &[0.5, 2.5]);
    }
}
