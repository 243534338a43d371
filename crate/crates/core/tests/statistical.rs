mod common;

use arcutoff_core::cutoff::{coupon_collector_tail, coupon_collector_time, tv_upper_bound_coupling};
use arcutoff_core::sphere::estimate_alpha;
use arcutoff_core::stationary::{
    backward_partial_sum_with, sample_stationary, sample_stationary_with, stationarity_self_test,
    stationarity_self_test_with_kernel, TruncationPolicy,
};
use arcutoff_core::stats::MeanVar;
use arcutoff_core::streams::stream_rng;
use arcutoff_core::ScanPolicy;
use common::{complete3, swap_model};
use rand::Rng;

#[test]
fn forward_average_matches_mean_after_updates() {
    let m = complete3();
    let seq = vec![2, 0, 0, 1, 2, 1, 0];
    let scan = ScanPolicy::ExplicitSequence(seq.clone());
    let x0 = [3.0, -1.0, 0.5];
    let mean = m.mean_after_updates(&x0, &seq).unwrap();
    let replicas = 20_000;
    let mut acc = vec![MeanVar::default(); 3];
    for r in 0..replicas {
        let run = m.simulate_forward_with(&x0, seq.len(), &scan, &mut stream_rng(77, r), false).unwrap();
        assert_eq!(run.indices, seq);
        for c in 0..3 {
            acc[c].push(run.state[c]);
        }
    }
    for c in 0..3 {
        assert!((acc[c].mean - mean[c]).abs() <= 3.0 * acc[c].std_error(), "coordinate {c}: {:?} vs {}", acc[c], mean[c]);
    }
}

#[test]
fn doubling_steps_shrinks_standard_error() {
    let m = complete3();
    let scan = ScanPolicy::RandomScan;
    let (mut short, mut long) = (0.0, 0.0);
    for seed in 0..8 {
        short += estimate_alpha(&m, &scan, 1_000, 100_000, seed).unwrap().std_error;
        long += estimate_alpha(&m, &scan, 1_000, 200_000, 1_000 + seed).unwrap().std_error;
    }
    let ratio = short / long;
    assert!((1.2..=1.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn halved_damping_fails_the_stationarity_test() {
    let m = complete3();
    let wrong = m.with_damping_scaled(0.5).unwrap();
    let bad = stationarity_self_test_with_kernel(&m, &wrong, &ScanPolicy::RandomScan, 20_000, 5, 3).unwrap();
    assert!(!bad.passes && bad.max_abs_z > 4.0, "{bad:?}");
    let good = stationarity_self_test(&m, &ScanPolicy::RandomScan, 20_000, 5, 3).unwrap();
    assert!(good.passes, "{good:?}");
}

#[test]
fn tighter_tolerance_barely_moves_samples() {
    for (m, scan) in [(swap_model(), ScanPolicy::RandomScan), (complete3(), ScanPolicy::RandomScan), (swap_model(), ScanPolicy::DeterministicCycle)] {
        let d = m.dim();
        let tol = 1e-8;
        let coarse = TruncationPolicy::new(tol, d, 10_000).unwrap();
        let fine = TruncationPolicy::new(tol / 10.0, d, 10_000).unwrap();
        for r in 0..1_000 {
            let a = sample_stationary_with(&m, &scan, 0, &coarse, &mut stream_rng(5, r)).unwrap();
            let b = sample_stationary_with(&m, &scan, 0, &fine, &mut stream_rng(5, r)).unwrap();
            assert!(!a.truncated && !b.truncated);
            for c in 0..d {
                assert!((a.x[c] - b.x[c]).abs() < 10.0 * tol, "replica {r}: {:?} vs {:?}", a.x, b.x);
            }
        }
    }
}

#[test]
fn sampler_is_deterministic() {
    let m = complete3();
    let p = TruncationPolicy::default_for(3);
    assert_eq!(
        sample_stationary(&m, &ScanPolicy::RandomScan, 0, &p, 42).unwrap(),
        sample_stationary(&m, &ScanPolicy::RandomScan, 0, &p, 42).unwrap()
    );
}

#[test]
fn backward_increments_decay_geometrically() {
    let m = complete3();
    let terms = 60;
    let mut per_term: Vec<Vec<f64>> = vec![Vec::new(); terms];
    for r in 0..2_000 {
        let (_, norms) = backward_partial_sum_with(&m, &ScanPolicy::RandomScan, 0, terms, &mut stream_rng(8, r)).unwrap();
        for (m, v) in norms.into_iter().enumerate() {
            per_term[m].push(v);
        }
    }
    let medians: Vec<f64> = per_term
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect();
    // Log-median drops at a steady rate: compare decades of terms.
    let rate = |a: usize, b: usize| (medians[b].ln() - medians[a].ln()) / (b - a) as f64;
    let (early, late) = (rate(10, 30), rate(30, 50));
    assert!(early < -0.05 && late < -0.05, "{early} {late}");
    assert!((early - late).abs() < 0.5 * early.abs(), "{early} {late}");
}

#[test]
fn coupon_collector_matches_inclusion_exclusion() {
    let d = 4;
    let n = 50_000u64;
    for k in [4usize, 6, 8, 12, 20] {
        let hits = (0..n)
            .filter(|&r| {
                let mut rng = stream_rng(13, r);
                let seq: Vec<usize> = (0..k).map(|_| rng.random_range(0..d)).collect();
                coupon_collector_time(&seq, d).is_none()
            })
            .count();
        let p = coupon_collector_tail(d, k);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() <= 3.0 * se, "k={k}: {} vs {p}", hits as f64 / n as f64);
    }
}

#[test]
fn upper_bound_does_not_grow_with_time() {
    let m = complete3();
    let x0 = [30.0, -10.0, 5.0];
    let bounds: Vec<_> = (3..=30)
        .step_by(3)
        .map(|k| tv_upper_bound_coupling(&m, &ScanPolicy::RandomScan, &x0, k, 4_000, 17).unwrap())
        .collect();
    for w in bounds.windows(2) {
        assert!(w[1].value <= w[0].value + w[0].ci + w[1].ci, "{:?} then {:?}", w[0], w[1]);
    }
    assert!(bounds.last().unwrap().value < 0.2 && bounds[0].value > 0.9);
    // Uncollected replicas track the coupon-collector tail.
    for b in &bounds {
        let p = coupon_collector_tail(3, b.k);
        assert!((b.uncollected_fraction - p).abs() <= 3.0 * (p * (1.0 - p) / 4_000.0).sqrt() + 1e-12);
    }
}
