use dsa_territory::stats::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

mod common;
use common::*;

fn samples(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..n)
        .map(|_| if ties { rng.random_range(0..6) as f64 } else { rng.random::<f64>() })
        .collect();
    let ys: Vec<f64> = (0..n)
        .map(|_| if ties { rng.random_range(0..5) as f64 } else { rng.random::<f64>() * 0.8 })
        .collect();
    (xs, ys)
}

#[test]
fn wilcoxon_exact_branch_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for n in 1..=WILCOXON_EXACT_MAX_N {
        for trial in 0..30 {
            let (xs, ys) = samples(&mut rng, n, trial % 2 == 0);
            let Ok(r) = wilcoxon_signed_rank(&xs, &ys) else {
                continue;
            };
            assert_eq!(r.p_method, PMethod::Exact);
            let oracle = wilcoxon_enumeration(&xs, &ys);
            assert!((r.p_value - oracle).abs() < 1e-12, "n={n}: {} vs {oracle}", r.p_value);
            checked += 1;
        }
    }
    assert!(checked > 300);
}

#[test]
fn wilcoxon_normal_branch_close_to_enumeration_at_switch() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = WILCOXON_EXACT_MAX_N + 1;
    for _ in 0..20 {
        let (xs, ys) = samples(&mut rng, n, false);
        let r = wilcoxon_signed_rank(&xs, &ys).unwrap();
        assert_eq!(r.p_method, PMethod::Asymptotic);
        let oracle = wilcoxon_enumeration(&xs, &ys);
        assert!((r.p_value - oracle).abs() <= 0.02, "{} vs {oracle}", r.p_value);
    }
}

#[test]
fn wilcoxon_swap_and_degenerate() {
    let xs = [1.0, 2.5, 3.0, 4.2, 0.3];
    let ys = [0.5, 2.0, 3.9, 1.0, 0.1];
    let a = wilcoxon_signed_rank(&xs, &ys).unwrap();
    let b = wilcoxon_signed_rank(&ys, &xs).unwrap();
    assert_eq!(a.p_value, b.p_value);
    assert!(wilcoxon_signed_rank(&xs, &xs).is_err());
}

/// Two-sided t tail by Simpson integration of the unnormalized density.
fn t_two_sided_quadrature(t: f64, dof: f64) -> f64 {
    let f = |x: f64| (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let upper = 2000.0;
    let total = simpson(0.0, upper, 2_000_000);
    let tail = simpson(t.abs(), upper, 2_000_000);
    tail / total
}

#[test]
fn paired_t_matches_quadrature() {
    // paired measurements of ten subjects
    let before = [200.1, 190.9, 192.7, 213.0, 241.4, 196.9, 172.2, 185.5, 205.2, 193.7];
    let after = [392.9, 393.2, 345.1, 393.0, 434.0, 427.9, 422.0, 383.9, 392.3, 352.2];
    let r = paired_t(&after, &before).unwrap();
    let oracle = t_two_sided_quadrature(r.statistic, 9.0);
    assert!((r.p_value - oracle).abs() < 1e-9, "{} vs {oracle}", r.p_value);

    let a = [2.1, 3.4, 1.9, 5.5, 4.0, 3.3];
    let b = [1.8, 3.9, 1.0, 4.1, 3.2, 3.4];
    let r = paired_t(&a, &b).unwrap();
    let oracle = t_two_sided_quadrature(r.statistic, 5.0);
    assert!((r.p_value - oracle).abs() < 1e-9);
}

#[test]
fn paired_t_zero_mean_and_scale_invariance() {
    let r = paired_t(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_value, 1.0);
    let a = [2.1, 3.4, 1.9, 5.5, 4.0];
    let b = [1.8, 3.9, 1.0, 4.1, 3.2];
    let r1 = paired_t(&a, &b).unwrap();
    let s = |v: &[f64]| v.iter().map(|x| x * 7.5).collect::<Vec<_>>();
    let r2 = paired_t(&s(&a), &s(&b)).unwrap();
    assert!((r1.statistic - r2.statistic).abs() < 1e-12);
    assert!((r1.p_value - r2.p_value).abs() < 1e-12);
}

/// Standard normal upper tail by Simpson integration.
fn normal_sf(z: f64) -> f64 {
    let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b, n) = (z, z + 40.0, 400_000);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn mcnemar_fixture_and_exact_cross_check() {
    let r = mcnemar(15, 5).unwrap();
    assert!((r.statistic - 4.05).abs() < 1e-12);
    let exact = binomial_two_sided(20, 5);
    assert!((r.p_value - exact).abs() < 1e-12);
    let chi2_p = 2.0 * normal_sf(r.statistic.sqrt());
    assert!((chi2_p - exact).abs() <= 0.005, "asymptotic {chi2_p} vs exact {exact}");

    assert_eq!(mcnemar(9, 9).unwrap().p_value, 1.0);
    assert!(mcnemar(0, 0).is_err());
    let big = mcnemar(40, 20).unwrap();
    assert_eq!(big.p_method, PMethod::Asymptotic);
    assert!((big.p_value - 2.0 * normal_sf(big.statistic.sqrt())).abs() < 1e-9);
}

#[test]
fn chi2_fixtures() {
    let r = chi2_proportions(40, 80, 25, 50).unwrap();
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    // a=90 b=10 c=60 d=40: 200·(90·40−10·60)² / (100·100·150·50)
    let r = chi2_proportions(90, 100, 60, 100).unwrap();
    assert!((r.statistic - 24.0).abs() < 1e-12);
    assert!((r.p_value - 2.0 * normal_sf(24f64.sqrt())).abs() < 1e-9);
    assert_eq!(chi2_proportions(60, 100, 90, 100).unwrap().statistic, r.statistic);
}

#[test]
fn summaries() {
    let s = median_iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!((s.center, s.low, s.high), (3.0, 2.0, 4.0));
    let s = median_iqr(&[4.5]).unwrap();
    assert_eq!((s.center, s.low, s.high), (4.5, 4.5, 4.5));
    let s = median_iqr(&[2.0; 7]).unwrap();
    assert_eq!(s.low, s.high);
    let c = mean_ci95(&[0.0, 2.0]).unwrap();
    assert!((c.center - 1.0).abs() < 1e-12);
    assert!((c.high - c.center - 1.96).abs() < 1e-12);
    let c = mean_ci95(&[3.0; 5]).unwrap();
    assert_eq!(c.low, c.high);
}

#[test]
fn mean_ci_covers_true_mean_about_95_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dist = Normal::new(10.0, 3.0).unwrap();
    let covered = (0..1000)
        .filter(|_| {
            let xs: Vec<f64> = (0..100).map(|_| dist.sample(&mut rng)).collect();
            let c = mean_ci95(&xs).unwrap();
            c.low <= 10.0 && 10.0 <= c.high
        })
        .count();
    assert!((930..=970).contains(&covered), "coverage {covered}/1000");
}

proptest! {
    #[test]
    fn p_values_are_probabilities(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40),
        b in 0u64..60, c in 0u64..60,
        sa in 0u64..50, sb in 0u64..50,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for r in [wilcoxon_signed_rank(&xs, &ys), paired_t(&xs, &ys)].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
        if let Ok(r) = mcnemar(b, c) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert_eq!(r.p_value, mcnemar(c, b).unwrap().p_value);
        }
        if let Ok(r) = chi2_proportions(sa, 50, sb, 50) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
