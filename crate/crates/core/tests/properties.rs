use proptest::prelude::*;
use treesir_core::continuum::{self, ContinuousModelSpec};
use treesir_core::discrete::{self, DiscreteModelSpec};
use treesir_core::{RateFunction, RecoveryDistribution, TimeGrid};

const STEP: f64 = 0.02;

fn rate() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        (0.0f64..3.0).prop_map(|v| RateFunction::constant(v).unwrap()),
        (0.0f64..3.0, 0.0f64..3.0, 1u32..50).prop_map(|(a, b, k)| {
            RateFunction::piecewise(vec![k as f64 * STEP], vec![a, b]).unwrap()
        }),
        (0.0f64..3.0, 1u32..50)
            .prop_map(|(level, k)| RateFunction::latent(level, k as f64 * STEP).unwrap()),
    ]
}

/// Recovery times land on multiples of `STEP`.
fn recovery() -> impl Strategy<Value = RecoveryDistribution> {
    prop_oneof![
        Just(RecoveryDistribution::Never),
        (0.1f64..3.0).prop_map(|r| RecoveryDistribution::exponential(r).unwrap()),
        (1u32..80).prop_map(|k| RecoveryDistribution::deterministic(k as f64 * STEP).unwrap()),
    ]
}

fn grid() -> TimeGrid {
    TimeGrid::new(3.0, STEP).unwrap()
}

fn non_increasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_solution_is_a_survival_function(
        n in 1u32..12, p in 0.0f64..0.9, eps in rate(), lambda in rate(), rec in recovery(),
    ) {
        let spec = DiscreteModelSpec::new(n, p, eps, lambda, rec).unwrap();
        let traj = discrete::survival_curve(&spec, &grid()).unwrap();
        let (s, survival) = (traj.values("s"), traj.values("survival"));
        prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((survival[0] - (1.0 - p)).abs() < 1e-15);
        prop_assert!(non_increasing(s, 1e-9));
        prop_assert!(non_increasing(survival, 1e-9));
    }

    #[test]
    fn more_infectivity_means_earlier_infection(
        n in 1u32..8, eps in 0.1f64..2.0, extra in 0.1f64..2.0, lambda in 0.0f64..1.0, rec in recovery(),
    ) {
        let fine = TimeGrid::new(2.0, 0.005).unwrap();
        let run = |e: f64| {
            let spec = DiscreteModelSpec::new(
                n, 0.0, RateFunction::constant(e).unwrap(), RateFunction::constant(lambda).unwrap(), rec.clone(),
            ).unwrap();
            discrete::solve_s(&spec, &fine).unwrap().into_values("s")
        };
        let (low, high) = (run(eps), run(eps + extra));
        // near s = 1 the ordering holds only up to the quadrature error,
        // which is ~1e-7 on this grid and grows fast with the step
        prop_assert!(low.iter().zip(&high).all(|(a, b)| b <= &(a + 1e-6)));
    }

    #[test]
    fn continuum_compartments_are_conserved(
        eps in rate(), lambda in rate(), rec in recovery(), s0 in 0.05f64..1.0,
    ) {
        let spec = ContinuousModelSpec::new(eps, rec, lambda, s0).unwrap();
        let traj = continuum::solve_compartments(&spec, &grid()).unwrap();
        let (s, i, r) = (traj.values("S"), traj.values("I"), traj.values("R"));
        prop_assert!(s.iter().all(|&v| v > 0.0 && v <= s0));
        prop_assert!(non_increasing(s, 0.0));
        for k in 0..s.len() {
            prop_assert!((s[k] + i[k] + r[k] - 1.0).abs() <= continuum::CONSERVATION_TOL);
            prop_assert!(i[k] >= -1e-12 && r[k] >= -1e-12);
        }
    }

    #[test]
    fn stationary_root_solves_its_equation(eps in 0.2f64..5.0, mu in 0.1f64..3.0, s0 in 0.5f64..0.999) {
        let spec = ContinuousModelSpec::classic(eps, mu, s0).unwrap();
        let report = continuum::stationary_state(&spec).unwrap();
        let f = 1.0 - report.s_inf + (mu / eps) * (report.s_inf / s0).ln();
        prop_assert!(f.abs() <= 1e-10);
        prop_assert!(report.s_inf > 0.0 && report.s_inf <= s0);
        prop_assert!(report.bracket.0 <= report.s_inf && report.s_inf <= report.bracket.1);
    }

    #[test]
    fn cumulative_rate_inverts(r in rate(), t in 0.0f64..5.0) {
        let total = r.cumulative(t).unwrap();
        if total > 1e-9 {
            let back = r.inverse_cumulative(total).unwrap();
            prop_assert!((r.cumulative(back).unwrap() - total).abs() < 1e-9 * total.max(1.0));
        }
    }
}
