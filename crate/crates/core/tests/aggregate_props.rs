mod common;

use common::{metric_value, oracle_group, oracle_top_k, shuffled, synthetic_rows};
use nact::aggregate::{
    architecture_comparison, category_performance, group_stats, model_summary, scale_table, top_k,
    Direction, GroupProfile, Metric,
};
use nact::metrics::MetricRow;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn check_profiles(
    profiles: &[GroupProfile],
    rows: &[MetricRow],
    key: impl Fn(&MetricRow) -> String + Copy,
) {
    for metric in Metric::ALL {
        let want = oracle_group(rows, key, metric);
        assert_eq!(profiles.len(), want.len());
        for (k, mean, std, count) in want {
            let p = profiles.iter().find(|p| p.group_key == k).unwrap();
            let s = p.stat(metric);
            assert!(close(s.mean, mean), "{k} {metric:?}: {} vs {mean}", s.mean);
            assert!(close(s.std, std), "{k} {metric:?}: {} vs {std}", s.std);
            assert_eq!(s.count, count);
        }
    }
}

#[test]
fn views_match_brute_force_oracles() {
    for seed in 0..5 {
        let rows = synthetic_rows(seed);
        assert_eq!(rows.len(), 144);

        let arch = architecture_comparison(&rows);
        check_profiles(&arch, &rows, |r| r.architecture.as_str().to_string());
        let keys: Vec<_> = arch
            .iter()
            .map(|p| (p.group_key.as_str(), p.count()))
            .collect();
        assert_eq!(keys, vec![("decoder", 120), ("encoder", 24)]);

        let cats = category_performance(&rows);
        check_profiles(&cats, &rows, |r| r.category.clone());
        assert_eq!(cats.len(), 12);
        for w in cats.windows(2) {
            assert!(
                w[0].stat(Metric::AttentionEntropy).mean
                    >= w[1].stat(Metric::AttentionEntropy).mean
            );
        }

        let scale = scale_table(&rows).unwrap();
        check_profiles(&scale, &rows, |r| r.model_name.clone());
        for w in scale.windows(2) {
            assert!(w[0].param_count <= w[1].param_count);
        }

        let summary = model_summary(&rows).unwrap();
        check_profiles(&summary, &rows, |r| r.model_name.clone());
        for p in &summary {
            let r = rows.iter().find(|r| r.model_name == p.group_key).unwrap();
            assert_eq!(p.param_count, Some(r.param_count));
            assert_eq!(p.architecture, Some(r.architecture));
            assert_eq!(p.count(), 24);
        }

        for metric in Metric::ALL {
            for direction in [Direction::Highest, Direction::Lowest] {
                let got = top_k(&rows, metric, 10, direction).unwrap();
                let want = oracle_top_k(&rows, metric, 10, direction);
                assert_eq!(got.len(), want.len());
                for (i, (g, (m, c, v))) in got.iter().zip(&want).enumerate() {
                    assert_eq!(g.rank, i + 1);
                    assert_eq!((&g.model_name, &g.category), (m, c));
                    assert!(close(g.value, *v));
                }
            }
        }
    }
}

#[test]
fn group_stats_match_oracle_for_single_metrics() {
    let rows = synthetic_rows(42);
    for metric in Metric::ALL {
        let got = group_stats(&rows, |r| r.category.clone(), metric).unwrap();
        for (k, mean, std, count) in oracle_group(&rows, |r| r.category.clone(), metric) {
            let g = got.iter().find(|g| g.group_key == k).unwrap();
            assert!(close(g.mean, mean) && close(g.std, std) && g.count == count);
        }
    }
}

#[test]
fn ten_thousand_rows_match_oracle() {
    let mut rows = Vec::new();
    for seed in 0..70 {
        rows.extend(synthetic_rows(1000 + seed));
    }
    assert!(rows.len() >= 10_000);
    let got = architecture_comparison(&rows);
    for metric in Metric::ALL {
        for (k, mean, std, count) in
            oracle_group(&rows, |r| r.architecture.as_str().to_string(), metric)
        {
            let s = got.iter().find(|p| p.group_key == k).unwrap().stat(metric);
            // long sums: allow for reassociation error
            assert!((s.mean - mean).abs() <= 1e-10 * (1.0 + mean.abs()));
            assert!((s.std - std).abs() <= 1e-10 * (1.0 + std.abs()));
            assert_eq!(s.count, count);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregates_are_bitwise_permutation_invariant(seed in any::<u64>(), shuffle in any::<u64>()) {
        let rows = synthetic_rows(seed);
        let perm = shuffled(&rows, shuffle);
        prop_assert_eq!(architecture_comparison(&rows), architecture_comparison(&perm));
        prop_assert_eq!(category_performance(&rows), category_performance(&perm));
        prop_assert_eq!(scale_table(&rows).unwrap(), scale_table(&perm).unwrap());
        prop_assert_eq!(model_summary(&rows).unwrap(), model_summary(&perm).unwrap());
        for metric in Metric::ALL {
            prop_assert_eq!(
                top_k(&rows, metric, 10, Direction::Highest).unwrap(),
                top_k(&perm, metric, 10, Direction::Highest).unwrap()
            );
        }
    }

    #[test]
    fn highest_is_reverse_of_lowest_over_all_pairs(seed in any::<u64>()) {
        let rows = synthetic_rows(seed);
        for metric in Metric::ALL {
            let hi = top_k(&rows, metric, usize::MAX, Direction::Highest).unwrap();
            let mut lo = top_k(&rows, metric, usize::MAX, Direction::Lowest).unwrap();
            lo.reverse();
            prop_assert_eq!(hi.len(), 72);
            let hi: Vec<_> = hi.iter().map(|e| (e.model_name.clone(), e.category.clone())).collect();
            let lo: Vec<_> = lo.iter().map(|e| (e.model_name.clone(), e.category.clone())).collect();
            // random values: no ties, so the orders are exact mirrors
            prop_assert_eq!(hi, lo);
        }
    }

    #[test]
    fn group_means_lie_within_member_range(seed in any::<u64>()) {
        let rows = synthetic_rows(seed);
        for p in category_performance(&rows) {
            for metric in Metric::ALL {
                let values: Vec<f64> = rows.iter().filter(|r| r.category == p.group_key).map(|r| metric_value(r, metric)).collect();
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let m = p.stat(metric).mean;
                prop_assert!(lo <= m && m <= hi);
                prop_assert!(p.stat(metric).std >= 0.0);
            }
        }
    }
}
