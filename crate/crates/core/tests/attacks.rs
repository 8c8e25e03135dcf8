//! Flip and StatP properties against brute-force references.

use proptest::prelude::*;
use regpoison_core::attacks::poison_count;
use regpoison_core::{flip_attack, statp_attack, AttackConfig, Dataset, FeasibilityDomain, Matrix};

fn dataset(targets: &[f64]) -> Dataset {
    let n = targets.len();
    let x = Matrix::from_vec(n, 2, (0..2 * n).map(|v| v as f64 / (2 * n) as f64).collect()).unwrap();
    Dataset::new(x, targets.to_vec()).unwrap()
}

fn potential(y: f64, dom: &FeasibilityDomain) -> f64 {
    (y - dom.gamma_min).max(dom.gamma_max - y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flip_picks_an_optimal_subset(ys in proptest::collection::vec(0.0f64..=1.0, 1..11), pct in 1u32..100) {
        let eps = pct as f64 / 100.0;
        let m = ys.len();
        let p = (pct as usize * m).div_ceil(100);
        let cfg = AttackConfig::new(eps, m, 0);
        let set = flip_attack(&dataset(&ys), &cfg).unwrap();
        prop_assert_eq!(set.size(), p);

        // brute force over all p-subsets for the largest total potential
        let dom = FeasibilityDomain::default();
        let best = (0u32..1 << m)
            .filter(|mask| mask.count_ones() as usize == p)
            .map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).map(|i| potential(ys[i], &dom)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let got: f64 = set.source_indices.iter().map(|&i| potential(ys[i], &dom)).sum();
        prop_assert!((got - best).abs() < 1e-12);
    }

    #[test]
    fn flip_crosses_the_midpoint(
        ys in proptest::collection::vec(-3.0f64..=5.0, 1..80),
        pct in 1u32..100,
        lo in -3.0f64..0.0,
        width in 0.5f64..5.0,
    ) {
        let dom = FeasibilityDomain::new(lo, lo + width).unwrap();
        let m = ys.len();
        let cfg = AttackConfig { domain: dom, ..AttackConfig::new(pct as f64 / 100.0, m, 0) };
        let data = dataset(&ys);
        let set = flip_attack(&data, &cfg).unwrap();
        let mid = (dom.gamma_min + dom.gamma_max) / 2.0;
        prop_assert!(set.source_indices.windows(2).all(|w| w[0] < w[1]));
        for (k, &i) in set.source_indices.iter().enumerate() {
            let want = if ys[i] > mid { dom.gamma_min } else { dom.gamma_max };
            prop_assert_eq!(set.targets[k], want);
            prop_assert_eq!(set.features.row(k), data.features.row(i));
        }
        // nothing left behind has a strictly larger potential than something taken
        let taken_min = set.source_indices.iter().map(|&i| potential(ys[i], &dom)).fold(f64::INFINITY, f64::min);
        for i in (0..m).filter(|i| !set.source_indices.contains(i)) {
            prop_assert!(potential(ys[i], &dom) <= taken_min);
        }
    }

    #[test]
    fn poison_count_is_the_exact_ceiling(pct in 1u32..100, n in 1usize..5000) {
        prop_assert_eq!(poison_count(pct as f64 / 100.0, n), (pct as usize * n).div_ceil(100));
    }

    #[test]
    fn statp_lands_on_corners_opposite_the_oracle(seed in 0u64..1_000_000, pct in 1u32..60) {
        let n = 40;
        let x = Matrix::from_vec(n, 3, (0..3 * n).map(|v| ((v * 37 + seed as usize) % 101) as f64 / 100.0).collect()).unwrap();
        let sub = Dataset::new(x, vec![0.5; n]).unwrap();
        let cfg = AttackConfig::new(pct as f64 / 100.0, 100, seed);
        let oracle = |q: &Matrix| Ok(q.iter_rows().map(|r| r.iter().sum::<f64>() / 3.0).collect());
        let set = statp_attack(&sub, &cfg, oracle).unwrap();
        prop_assert_eq!(set.size(), pct as usize);
        for (k, row) in set.features.iter_rows().enumerate() {
            prop_assert!(row.iter().all(|v| *v == 0.0 || *v == 1.0));
            let pred = row.iter().sum::<f64>() / 3.0;
            prop_assert_eq!(set.targets[k], if pred <= 0.5 { 1.0 } else { 0.0 });
        }
        prop_assert_eq!(statp_attack(&sub, &cfg, oracle).unwrap(), set);
    }
}
