//! Descriptive summaries and hypothesis tests for method comparisons.
//!
//! All tests are two-sided.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SummaryKind {
    MedianIqr,
    MeanCi95,
}

/// A point estimate with an interval, `low ≤ center ≤ high`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub kind: SummaryKind,
    pub center: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestKind {
    Wilcoxon,
    PairedT,
    Mcnemar,
    Chi2,
}

/// How the p-value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PMethod {
    Exact,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Sample size the test was computed on (after dropping zero
    /// differences for Wilcoxon, discordant pairs for McNemar).
    pub n: usize,
    pub p_method: PMethod,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Invalid("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// Percentile with linear interpolation between closest ranks
/// (`h = (n-1)·q`). `sorted` must be ascending and non-empty.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median with 25th and 75th percentiles.
pub fn median_iqr(xs: &[f64]) -> Result<SummaryStat> {
    if xs.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let v = sorted(xs)?;
    Ok(SummaryStat {
        kind: SummaryKind::MedianIqr,
        center: percentile_sorted(&v, 0.5),
        low: percentile_sorted(&v, 0.25),
        high: percentile_sorted(&v, 0.75),
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean with a normal-approximation 95 % interval, `mean ± 1.96·sd/√n`.
pub fn mean_ci95(xs: &[f64]) -> Result<SummaryStat> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "mean CI needs n >= 2, got {}",
            xs.len()
        )));
    }
    let (mean, sd) = mean_sd(xs);
    let half = 1.96 * sd / (xs.len() as f64).sqrt();
    Ok(SummaryStat {
        kind: SummaryKind::MeanCi95,
        center: mean,
        low: mean - half,
        high: mean + half,
    })
}

pub fn summarize(kind: SummaryKind, xs: &[f64]) -> Result<SummaryStat> {
    match kind {
        SummaryKind::MedianIqr => median_iqr(xs),
        SummaryKind::MeanCi95 => mean_ci95(xs),
    }
}

fn check_paired(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Invalid(format!(
            "paired samples differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

/// Largest sample size (after dropping zeros) for which the Wilcoxon p-value
/// is computed exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied absolute differences get averaged
/// ranks. For at most [`WILCOXON_EXACT_MAX_N`] remaining pairs the p-value
/// is the exact permutation p-value under random signs; above that a normal
/// approximation with tie and continuity correction is used. The reported
/// statistic is `min(W+, W-)`.
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    check_paired(xs, ys)?;
    let diffs: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::Invalid("sample contains NaN".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::InsufficientData("all differences are zero".into()));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);

    if n <= WILCOXON_EXACT_MAX_N {
        // doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let sum2: usize = doubled.iter().sum();
        let mut counts = vec![0u64; sum2 + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=sum2).rev() {
                counts[s] += counts[s - r];
            }
        }
        let w2 = (w_plus * 2.0).round() as i64;
        let mid2 = sum2 as i64; // 2·mean of doubled sum is sum2
        let dev = (2 * w2 - mid2).abs();
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (2 * *s as i64 - mid2).abs() >= dev)
            .map(|(_, c)| c)
            .sum();
        let p = extreme as f64 / 2f64.powi(n as i32);
        return Ok(TestResult {
            test: TestKind::Wilcoxon,
            statistic,
            p_value: p.min(1.0),
            n,
            p_method: PMethod::Exact,
        });
    }

    let nf = n as f64;
    let mut tie_term = 0.0;
    let mut sorted_abs = abs.clone();
    sorted_abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted_abs[j + 1] == sorted_abs[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let mean = total / 2.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z)).min(1.0);
    Ok(TestResult {
        test: TestKind::Wilcoxon,
        statistic,
        p_value: p,
        n,
        p_method: PMethod::Asymptotic,
    })
}

/// Paired Student's t-test.
pub fn paired_t(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    check_paired(xs, ys)?;
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "paired t-test needs n >= 2, got {n}"
        )));
    }
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_sd(&d);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::InsufficientData(
            "differences have zero variance".into(),
        ));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        test: TestKind::PairedT,
        statistic: t,
        p_value: p,
        n,
        p_method: PMethod::Asymptotic,
    })
}

/// Below this many discordant pairs McNemar uses the exact binomial p-value.
pub const MCNEMAR_EXACT_BELOW: u64 = 25;

/// `P(X ≤ k)` for `X ~ Binomial(n, 1/2)`, exact for `n ≤ 60`.
fn binomial_half_cdf(n: u64, k: u64) -> f64 {
    let mut coef: u128 = 1;
    let mut acc: u128 = 0;
    for i in 0..=k.min(n) {
        if i > 0 {
            coef = coef * (n - i + 1) as u128 / i as u128;
        }
        acc += coef;
    }
    acc as f64 / 2f64.powi(n as i32)
}

/// McNemar test on the discordant counts `b` and `c` of a paired 2×2 table.
///
/// The statistic is the continuity-corrected `(|b−c|−1)² / (b+c)`. The
/// p-value is exact binomial when `b + c < 25` and χ²(1) otherwise.
pub fn mcnemar(b: u64, c: u64) -> Result<TestResult> {
    let n = b + c;
    if n == 0 {
        return Err(Error::InsufficientData("no discordant pairs".into()));
    }
    let diff = b.abs_diff(c) as f64;
    let statistic = (diff - 1.0).max(0.0).powi(2) / n as f64;
    let (p, method) = if n < MCNEMAR_EXACT_BELOW {
        ((2.0 * binomial_half_cdf(n, b.min(c))).min(1.0), PMethod::Exact)
    } else {
        (chi2_sf(statistic), PMethod::Asymptotic)
    };
    Ok(TestResult {
        test: TestKind::Mcnemar,
        statistic,
        p_value: p,
        n: n as usize,
        p_method: method,
    })
}

/// Upper tail of χ² with one degree of freedom.
pub fn chi2_sf(x: f64) -> f64 {
    ChiSquared::new(1.0).expect("one degree of freedom").sf(x)
}

/// Pearson χ² test (no Yates correction) comparing two independent
/// proportions `successes_a / n_a` and `successes_b / n_b`.
pub fn chi2_proportions(successes_a: u64, n_a: u64, successes_b: u64, n_b: u64) -> Result<TestResult> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::InsufficientData("both groups need n >= 1".into()));
    }
    if successes_a > n_a || successes_b > n_b {
        return Err(Error::Invalid("successes exceed group size".into()));
    }
    let (a, b) = (successes_a as f64, (n_a - successes_a) as f64);
    let (c, d) = (successes_b as f64, (n_b - successes_b) as f64);
    let total = a + b + c + d;
    let margins = [a + b, c + d, a + c, b + d];
    if margins.iter().any(|&m| m == 0.0) {
        return Err(Error::InsufficientData("table has a zero margin".into()));
    }
    let statistic = total * (a * d - b * c).powi(2) / margins.iter().product::<f64>();
    Ok(TestResult {
        test: TestKind::Chi2,
        statistic,
        p_value: chi2_sf(statistic).min(1.0),
        n: total as usize,
        p_method: PMethod::Asymptotic,
    })
}

/// Paired comparison with the named test.
pub fn paired_test(kind: TestKind, xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    match kind {
        TestKind::Wilcoxon => wilcoxon_signed_rank(xs, ys),
        TestKind::PairedT => paired_t(xs, ys),
        other => Err(Error::Invalid(format!("{other:?} is not a paired sample test"))),
    }
}
