mod common;

use common::{random_dataset, rel_close, rng, Plain};
use proptest::prelude::*;
use stratboost::likelihood::score_statistics;
use stratboost::{
    build_stratum_index, first_derivative, first_derivative_all, linear_predictor,
    log_partial_likelihood, second_derivative, validate_dataset, RawColumns,
};

fn instance() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 2usize..=60, 1usize..=6, 1usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweep_matches_risk_set_enumeration((seed, n, p, g) in instance()) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, n, p, g);
        let beta: Vec<f64> = (0..p).map(|_| common::normal(&mut r) * 0.5).collect();
        let plain = Plain::of(&data);
        let index = build_stratum_index(&data);
        let eta = linear_predictor(&data, &beta).unwrap();

        let ll = log_partial_likelihood(&data, &index, &beta).unwrap();
        prop_assert!(rel_close(ll, plain.loglik(&beta), 1e-10), "{ll} vs {}", plain.loglik(&beta));
        let all = first_derivative_all(&data, &index, &eta).unwrap();
        for j in 0..p {
            let oracle = plain.score(&beta, j);
            prop_assert!(rel_close(first_derivative(&data, &index, &eta, j).unwrap(), oracle, 1e-10));
            prop_assert!(rel_close(all[j], oracle, 1e-10));
            let h = second_derivative(&data, &index, &eta, j).unwrap();
            prop_assert!(rel_close(h, plain.information(&beta, j, j), 1e-10));
            prop_assert!(h >= 0.0);
        }
    }

    #[test]
    fn finite_differences((seed, n, p, g) in instance()) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, n, p, g);
        let beta: Vec<f64> = (0..p).map(|_| common::normal(&mut r) * 0.3).collect();
        let index = build_stratum_index(&data);
        let eta = linear_predictor(&data, &beta).unwrap();
        let h = 1e-5;
        for j in 0..p {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (log_partial_likelihood(&data, &index, &up).unwrap()
                - log_partial_likelihood(&data, &index, &dn).unwrap()) / (2.0 * h);
            let l1 = first_derivative(&data, &index, &eta, j).unwrap();
            prop_assert!((fd - l1).abs() <= 1e-6 * l1.abs().max(1.0), "{fd} vs {l1}");

            let eu = linear_predictor(&data, &up).unwrap();
            let ed = linear_predictor(&data, &dn).unwrap();
            let fd2 = -(first_derivative(&data, &index, &eu, j).unwrap()
                - first_derivative(&data, &index, &ed, j).unwrap()) / (2.0 * h);
            let l2 = second_derivative(&data, &index, &eta, j).unwrap();
            prop_assert!((fd2 - l2).abs() <= 1e-5 * l2.abs().max(1.0), "{fd2} vs {l2}");
        }
    }

    #[test]
    fn risk_set_moments_obey_cauchy_schwarz((seed, n, p, g) in instance()) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, n, p, g);
        let beta: Vec<f64> = (0..p).map(|_| common::normal(&mut r)).collect();
        let index = build_stratum_index(&data);
        let eta = linear_predictor(&data, &beta).unwrap();
        for i in 0..n {
            for j in 0..p {
                let s = score_statistics(&data, &index, &eta, i, j).unwrap();
                prop_assert!(s.s0 > 0.0);
                prop_assert!(s.s1 * s.s1 <= s.s0 * s.s2 * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn subject_order_does_not_matter((seed, n, p, g) in instance(), rot in 0usize..1000) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, n, p, g);
        let beta: Vec<f64> = (0..p).map(|_| common::normal(&mut r) * 0.5).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let shuffled = data.subset(&perm).unwrap();
        let a = log_partial_likelihood(&data, &build_stratum_index(&data), &beta).unwrap();
        let b = log_partial_likelihood(&shuffled, &build_stratum_index(&shuffled), &beta).unwrap();
        prop_assert!(rel_close(a, b, 1e-12));
    }

    #[test]
    fn covariate_shift_leaves_likelihood_unchanged((seed, n, p, g) in instance(), c in -5.0f64..5.0) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, n, p, g);
        let beta: Vec<f64> = (0..p).map(|_| common::normal(&mut r) * 0.5).collect();
        let shifted = validate_dataset(RawColumns {
            time: data.time().to_vec(),
            status: data.status().iter().map(|&e| i64::from(e)).collect(),
            stratum: Some(data.stratum().iter().map(|s| s.to_string()).collect()),
            covariates: (0..p).map(|j| data.column(j).iter().map(|x| x + c).collect()).collect(),
            names: data.names().to_vec(),
        }).unwrap();
        let a = log_partial_likelihood(&data, &build_stratum_index(&data), &beta).unwrap();
        let b = log_partial_likelihood(&shifted, &build_stratum_index(&shifted), &beta).unwrap();
        prop_assert!(rel_close(a, b, 1e-9));
    }
}

#[test]
fn single_stratum_equals_unstratified() {
    let mut r = rng(7);
    for _ in 0..20 {
        let data = random_dataset(&mut r, 40, 3, 1);
        let raw = |stratum| RawColumns {
            time: data.time().to_vec(),
            status: data.status().iter().map(|&e| i64::from(e)).collect(),
            stratum,
            covariates: (0..3).map(|j| data.column(j).to_vec()).collect(),
            names: data.names().to_vec(),
        };
        let flat = validate_dataset(raw(None)).unwrap();
        let one = validate_dataset(raw(Some(vec!["s".to_string(); 40]))).unwrap();
        let beta = [0.3, -0.2, 0.7];
        let a = log_partial_likelihood(&flat, &build_stratum_index(&flat), &beta).unwrap();
        let b = log_partial_likelihood(&one, &build_stratum_index(&one), &beta).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn stratification_splits_the_likelihood() {
    // ℓ over G strata equals the sum of per-stratum likelihoods.
    let mut r = rng(11);
    let data = random_dataset(&mut r, 60, 2, 3);
    let beta = [0.4, -0.6];
    let total = log_partial_likelihood(&data, &build_stratum_index(&data), &beta).unwrap();
    let mut sum = 0.0;
    for members in data.stratum_members() {
        if let Ok(part) = data.subset(&members) {
            sum += log_partial_likelihood(&part, &build_stratum_index(&part), &beta).unwrap();
        }
    }
    assert!(rel_close(total, sum, 1e-12));
}
