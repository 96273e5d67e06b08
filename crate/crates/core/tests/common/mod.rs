//! Brute-force oracles shared by the test targets.
#![allow(dead_code)]

use dsa_territory::BinaryMask;

/// Inner 4-neighbor boundary, by definition.
pub fn boundary_points(m: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = (m.width(), m.height());
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m.get(x as usize, y as usize);
    m.points()
        .into_iter()
        .filter(|&(x, y)| {
            let (x, y) = (x as isize, y as isize);
            !(inside(x - 1, y) && inside(x + 1, y) && inside(x, y - 1) && inside(x, y + 1))
        })
        .collect()
}

pub fn directed(from: &[(usize, usize)], to: &[(usize, usize)]) -> Vec<f64> {
    from.iter()
        .map(|&(x, y)| {
            to.iter()
                .map(|&(u, v)| ((x as f64 - u as f64).powi(2) + (y as f64 - v as f64).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn brute_asd_hd(a: &BinaryMask, b: &BinaryMask) -> (f64, f64) {
    let (ba, bb) = (boundary_points(a), boundary_points(b));
    let mut all = directed(&ba, &bb);
    all.extend(directed(&bb, &ba));
    let asd = all.iter().sum::<f64>() / all.len() as f64;
    let hd = all.iter().copied().fold(0.0, f64::max);
    (asd, hd)
}

pub fn counts(a: &BinaryMask, b: &BinaryMask) -> (usize, usize, usize) {
    let both = a.points().into_iter().filter(|&(x, y)| b.get(x, y)).count();
    (a.count(), b.count(), both)
}

/// Average ranks of `|d|`, computed by counting.
pub fn ranks(abs: &[f64]) -> Vec<f64> {
    abs.iter()
        .map(|&v| {
            let below = abs.iter().filter(|&&u| u < v).count() as f64;
            let equal = abs.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p by enumerating all 2ⁿ sign assignments of the ranks.
pub fn wilcoxon_enumeration(xs: &[f64], ys: &[f64]) -> f64 {
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    let r = ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let mean = r.iter().sum::<f64>() / 2.0;
    let observed: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let dev = (observed - mean).abs();
    let mut extreme = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if (w - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Two-sided exact binomial p for `k` successes out of `n` at one half.
pub fn binomial_two_sided(n: u64, k: u64) -> f64 {
    let mut c = 1.0f64;
    let mut cdf = 0.0;
    for i in 0..=k {
        if i > 0 {
            c *= (n - i + 1) as f64 / i as f64;
        }
        cdf += c;
    }
    (2.0 * cdf / 2f64.powi(n as i32)).min(1.0)
}
