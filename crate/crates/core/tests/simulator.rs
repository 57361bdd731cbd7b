use treesir_core::discrete::DiscreteModelSpec;
use treesir_core::simulator::{self, Boundary, TruncationConfig};
use treesir_core::{RateFunction, RecoveryDistribution, TimeGrid};

fn constant(v: f64) -> RateFunction {
    RateFunction::constant(v).unwrap()
}

fn spec(
    n: u32,
    p: f64,
    eps: f64,
    lambda: f64,
    recovery: RecoveryDistribution,
) -> DiscreteModelSpec {
    DiscreteModelSpec::new(n, p, constant(eps), constant(lambda), recovery).unwrap()
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn subtrees_are_exchangeable() {
    let sp = spec(
        3,
        0.05,
        1.0,
        0.2,
        RecoveryDistribution::exponential(0.5).unwrap(),
    );
    let trunc = TruncationConfig::new(8).unwrap();
    let outcomes =
        simulator::sample_outcomes(&sp, &trunc, 4.0, 40_000, 5, Boundary::Optimistic, false)
            .unwrap();

    let mut by_subtree: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for o in &outcomes {
        if let Some(v) = o.via {
            by_subtree[v as usize].push(o.tau);
        }
    }
    let counts: Vec<f64> = by_subtree.iter().map(|v| v.len() as f64).collect();
    let total: f64 = counts.iter().sum();
    assert!(total > 5_000.0, "too few neighbour infections: {total}");
    let expected = total / 4.0;
    let chi2: f64 = counts
        .iter()
        .map(|c| (c - expected).powi(2) / expected)
        .sum();
    // 3 degrees of freedom, upper 0.1% point
    assert!(chi2 < 16.27, "chi-square {chi2} for counts {counts:?}");

    // infection times delivered through each subtree share one law
    let (first, rest) = by_subtree.split_first_mut().unwrap();
    for other in rest {
        let (n1, n2) = (first.len() as f64, other.len() as f64);
        let critical = 1.95 * ((n1 + n2) / (n1 * n2)).sqrt();
        let d = ks_distance(first, other);
        assert!(d < critical, "KS distance {d} above {critical}");
    }
}

#[test]
fn boundaries_bracket_every_replica() {
    let sp = spec(
        2,
        0.1,
        1.5,
        0.1,
        RecoveryDistribution::deterministic(0.7).unwrap(),
    );
    let trunc = TruncationConfig::new(5).unwrap();
    let run = |b| simulator::sample_outcomes(&sp, &trunc, 3.0, 5_000, 9, b, false).unwrap();
    let (opt, pes) = (run(Boundary::Optimistic), run(Boundary::Pessimistic));
    assert!(opt.iter().zip(&pes).all(|(o, p)| o.tau >= p.tau));
}

#[test]
fn bracket_shrinks_with_depth() {
    let sp = spec(4, 0.0, 1.0, 0.5, RecoveryDistribution::Never);
    let grid = TimeGrid::new(5.0, 0.1).unwrap();
    let widths: Vec<f64> = [2, 4, 6, 8, 10, 12]
        .into_iter()
        .map(|d| {
            let trunc = TruncationConfig::new(d).unwrap();
            let r =
                simulator::estimate_expected_susceptible(&sp, &trunc, &grid, 20_000, 3).unwrap();
            r.survival_hi
                .iter()
                .zip(&r.survival_lo)
                .map(|(h, l)| h - l)
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(widths.windows(2).all(|w| w[1] <= w[0]), "{widths:?}");
    assert!(widths[0] > 10.0 * widths[5], "{widths:?}");
}

#[test]
fn no_transmission_leaves_initial_state() {
    let sp = spec(4, 0.3, 0.0, 0.0, RecoveryDistribution::Never);
    let grid = TimeGrid::new(2.0, 0.1).unwrap();
    let trunc = TruncationConfig::new(4).unwrap();
    let replicas = 20_000;
    let r = simulator::estimate_expected_susceptible(&sp, &trunc, &grid, replicas, 1).unwrap();
    let first = r.survival_lo[0];
    assert!(r
        .survival_lo
        .iter()
        .chain(&r.survival_hi)
        .all(|&v| v == first));
    let se = (0.3 * 0.7 / replicas as f64).sqrt();
    assert!((first - 0.7).abs() < 4.0 * se, "{first}");

    let report = simulator::recursion_check(&sp, &trunc, &grid, replicas, 2).unwrap();
    let tail = &report.result.survival_lo;
    assert!(tail.iter().all(|&v| v == tail[0]));
    assert!(report.comparison.z_max < 4.0);
}

#[test]
fn nearly_certain_initial_infection() {
    let sp = spec(2, 0.999, 1.0, 0.0, RecoveryDistribution::Never);
    let grid = TimeGrid::new(1.0, 0.1).unwrap();
    let trunc = TruncationConfig::new(3).unwrap();
    let r = simulator::simulate_time_to_infection(&sp, &trunc, &grid, 100_000, 4).unwrap();
    // binomial(1e5, 1e-3): mean 100, sd 10
    let susceptible = r.survival_hi[0] * 1e5;
    assert!((susceptible - 100.0).abs() < 50.0, "{susceptible}");
}

#[test]
fn results_depend_only_on_seed_and_replicas() {
    let sp = spec(
        3,
        0.02,
        1.0,
        0.3,
        RecoveryDistribution::exponential(1.0).unwrap(),
    );
    let grid = TimeGrid::new(2.0, 0.05).unwrap();
    let trunc = TruncationConfig::new(6).unwrap();
    let run = |threads, seed| {
        simulator::with_threads(Some(threads), || {
            simulator::simulate_time_to_infection(&sp, &trunc, &grid, 3_000, seed).unwrap()
        })
        .unwrap()
    };
    let a = run(1, 17);
    assert_eq!(a, run(3, 17));
    assert_eq!(a, run(8, 17));
    assert_ne!(a.survival_lo, run(2, 18).survival_lo);
}
