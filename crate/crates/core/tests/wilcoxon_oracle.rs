mod common;

use laylens_core::survey::{wilcoxon_signed_rank, wilcoxon_signed_rank_using, WilcoxonMethod};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_dataset(rng: &mut StdRng) -> Vec<(f64, f64)> {
    let n = rng.random_range(1..=12);
    (0..n).map(|_| (rng.random_range(1..=5) as f64, rng.random_range(1..=5) as f64)).collect()
}

#[test]
fn exact_matches_enumeration_on_fifty_datasets() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0;
    let mut with_ties = 0;
    let mut with_zeros = 0;
    while checked < 50 {
        let pairs = random_dataset(&mut rng);
        let Some((w_plus, w_minus, p)) = common::brute_force_wilcoxon(&pairs) else { continue };
        let r = wilcoxon_signed_rank_using(&pairs, WilcoxonMethod::Exact).unwrap();
        assert_eq!((r.w_plus, r.w_minus), (w_plus, w_minus), "{pairs:?}");
        assert!((r.p_two_sided - p).abs() <= 1e-12, "{pairs:?}: {} vs {p}", r.p_two_sided);
        let diffs: Vec<i64> = pairs.iter().map(|(a, b)| (b - a) as i64).collect();
        with_zeros += diffs.contains(&0) as usize;
        let mut mags: Vec<i64> = diffs.iter().filter(|d| **d != 0).map(|d| d.abs()).collect();
        let len = mags.len();
        mags.sort();
        mags.dedup();
        with_ties += (mags.len() < len) as usize;
        checked += 1;
    }
    assert!(with_ties > 10 && with_zeros > 10, "ties {with_ties}, zeros {with_zeros}");
}

#[test]
fn symmetric_example_is_exactly_one() {
    let pairs = [(0.0, 1.0), (0.0, -1.0), (0.0, 2.0), (0.0, -2.0)];
    let r = wilcoxon_signed_rank(&pairs).unwrap();
    assert_eq!(r.p_two_sided, 1.0);
    assert_eq!(common::brute_force_wilcoxon(&pairs).unwrap().2, 1.0);
}

#[test]
fn exact_and_approx_agree_at_n_25_without_ties() {
    let mut rng = StdRng::seed_from_u64(25);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let pairs: Vec<(f64, f64)> = (1..=25)
            .map(|m| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (0.0, sign * m as f64)
            })
            .collect();
        let exact = wilcoxon_signed_rank_using(&pairs, WilcoxonMethod::Exact).unwrap();
        let approx = wilcoxon_signed_rank_using(&pairs, WilcoxonMethod::NormalApprox).unwrap();
        assert_eq!(exact.n_used, 25);
        worst = worst.max((exact.p_two_sided - approx.p_two_sided).abs());
    }
    assert!(worst <= 0.01, "max |exact - approx| = {worst}");
}

#[test]
fn method_switches_after_twenty_five() {
    let pairs = |n: usize| (1..=n).map(|i| (0.0, i as f64)).collect::<Vec<_>>();
    assert_eq!(wilcoxon_signed_rank(&pairs(25)).unwrap().method, WilcoxonMethod::Exact);
    assert_eq!(wilcoxon_signed_rank(&pairs(26)).unwrap().method, WilcoxonMethod::NormalApprox);
}

fn arb_pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1i32..=5, 1i32..=5).prop_map(|(a, b)| (a as f64, b as f64)), 1..60)
}

proptest! {
    #[test]
    fn rank_sum_identity(pairs in arb_pairs()) {
        if let Ok(r) = wilcoxon_signed_rank(&pairs) {
            let n = r.n_used as f64;
            prop_assert_eq!(r.w_plus + r.w_minus, n * (n + 1.0) / 2.0);
            prop_assert!((0.0..=1.0).contains(&r.p_two_sided));
            prop_assert_eq!(r.method == WilcoxonMethod::Exact, r.n_used <= 25);
        }
    }

    #[test]
    fn swapping_sides_mirrors_the_statistic(pairs in arb_pairs()) {
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        match (wilcoxon_signed_rank(&pairs), wilcoxon_signed_rank(&swapped)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x.w_plus, y.w_minus);
                prop_assert_eq!(x.w_minus, y.w_plus);
                prop_assert!((x.p_two_sided - y.p_two_sided).abs() < 1e-15);
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "asymmetric outcome {:?}", other),
        }
    }
}
