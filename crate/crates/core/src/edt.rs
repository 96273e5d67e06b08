//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas algorithm: a 1D transform along each
//! column followed by one along each row. Distances are squared pixel
//! distances and are exact for every image that fits in memory.

use rayon::prelude::*;

use crate::Grid;

/// Squared distance from every pixel to the nearest `true` pixel of
/// `features`. Pixels are `f64::INFINITY` when there are no features.
pub fn squared_distance_to(features: &Grid<bool>) -> Grid<f64> {
    let (w, h) = features.shape();
    let mut out = features.map(|&f| if f { 0.0 } else { f64::INFINITY });
    if w == 0 || h == 0 {
        return out;
    }

    // columns
    let mut cols: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|x| {
            let f: Vec<f64> = (0..h).map(|y| *out.get(x, y)).collect();
            let mut d = vec![0.0; h];
            transform_1d(&f, &mut d);
            d
        })
        .collect();
    for (x, col) in cols.iter_mut().enumerate() {
        for (y, v) in col.iter().enumerate() {
            out.set(x, y, *v);
        }
    }

    // rows
    out.as_mut_slice().par_chunks_mut(w).for_each(|row| {
        let f = row.to_vec();
        transform_1d(&f, row);
    });
    out
}

/// Euclidean (not squared) distance to the nearest feature.
pub fn distance_to(features: &Grid<bool>) -> Grid<f64> {
    squared_distance_to(features).map(|d| d.sqrt())
}

/// `d[q] = min_p (q - p)^2 + f[p]` over finite `f[p]`.
fn transform_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);

    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let fp = f[p] + (p * p) as f64;
                    let s = (fq - fp) / (2.0 * (q as f64 - p as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                        continue;
                    }
                    v.push(q);
                    z.push(s);
                    break;
                }
            }
        }
    }

    if v.is_empty() {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}
