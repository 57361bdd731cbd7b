//! Rates, recovery laws and the survival primitives built from them.
//!
//! With `A(t) = ∫₀ᵗ ε_u du` and `β_t = P(H > t)`:
//!
//! * `f_t = exp(-∫₀ᵗ λ_u du)`: no self-infection by `t`,
//! * `φ_t = E exp(-A(t ∧ H))`: a given infectious neighbour (infected at 0)
//!   has not transmitted by `t`,
//! * `φ'_t = -ε_t e^{-A(t)} β_t`,
//! * `γ_t = ε_t β_t = d/dt E A(t ∧ H)`,
//! * `ε̃_t = -φ'_t / φ_t`.
//!
//! All functions are pure; every type here is immutable after construction.

mod rate;
mod recovery;

pub use rate::{RateFunction, RateKind};
pub use recovery::RecoveryDistribution;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Sub-step of the composite trapezoid used by pointwise evaluations that
/// have no grid to inherit a step from.
pub const POINTWISE_QUAD_STEP: f64 = 1e-4;

/// Sub-steps per grid cell when a quantity is tabulated on a [`TimeGrid`].
const GRID_SUBSTEPS: usize = 4;

/// Composite trapezoid on `[a, b]` with mandatory split points. Segment ends
/// use one-sided limits so jumps at split points are integrated exactly.
pub(crate) fn trapezoid_split(
    a: f64,
    b: f64,
    splits: impl IntoIterator<Item = f64>,
    step: f64,
    f_right: impl Fn(f64) -> f64,
    f_left: impl Fn(f64) -> f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut points: Vec<f64> = splits.into_iter().filter(|&x| x > a && x < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.insert(0, a);
    points.push(b);
    let mut total = 0.0;
    for w in points.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let n = ((x1 - x0) / step).ceil().max(1.0) as usize;
        let h = (x1 - x0) / n as f64;
        let mut acc = 0.5 * (f_right(x0) + f_left(x1));
        for i in 1..n {
            acc += f_right(x0 + i as f64 * h);
        }
        total += acc * h;
    }
    total
}

fn split_points(eps: &RateFunction, rec: &RecoveryDistribution) -> Vec<f64> {
    eps.breakpoints().chain(rec.breakpoints()).collect()
}

/// `A(t) = ∫₀ᵗ r_u du`; negative `t` is a domain error.
pub fn cumulative_rate(r: &RateFunction, t: f64) -> Result<f64> {
    r.cumulative(t)
}

/// `f_t = exp(-∫₀ᵗ λ_u du)`, and 1 for `t < 0`.
pub fn self_survival(lambda: &RateFunction, t: f64) -> f64 {
    if t < 0.0 {
        1.0
    } else {
        (-lambda.cumulative_unchecked(t)).exp()
    }
}

/// Closed form of `φ_t` when one is available.
fn neighbor_survival_closed(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Option<f64> {
    match rec {
        RecoveryDistribution::Never => Some((-eps.cumulative_unchecked(t)).exp()),
        RecoveryDistribution::Deterministic { duration } => {
            Some((-eps.cumulative_unchecked(t.min(*duration))).exp())
        }
        RecoveryDistribution::Exponential { rate } if *rate == 0.0 => {
            Some((-eps.cumulative_unchecked(t)).exp())
        }
        RecoveryDistribution::Exponential { rate } => eps.as_constant().map(|e| {
            let total = rate + e;
            if total == 0.0 {
                1.0
            } else {
                rate / total + e / total * (-total * t).exp()
            }
        }),
        RecoveryDistribution::Tabulated { .. } => None,
    }
}

fn phi_integrand(eps: &RateFunction, rec: &RecoveryDistribution, u: f64, left: bool) -> f64 {
    let (e, b) = if left {
        (eps.value_left(u), rec.tail_left(u))
    } else {
        (eps.value(u), rec.tail(u))
    };
    e * (-eps.cumulative_unchecked(u)).exp() * b.unwrap_or(f64::NAN)
}

fn check_known(rec: &RecoveryDistribution, t: f64) -> Result<()> {
    match rec.known_until() {
        Some(end) if t > end => Err(Error::Horizon { t, grid_end: end }),
        _ => Ok(()),
    }
}

/// `φ_t = E exp(-A(t ∧ H))`, 1 for `t < 0`.
///
/// Exact for `H = ∞`, deterministic `H` and exponential `H` with constant
/// `ε`; otherwise `1 - ∫₀ᵗ ε_u e^{-A(u)} β_u du` by composite trapezoid with
/// step [`POINTWISE_QUAD_STEP`].
pub fn neighbor_survival(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Ok(1.0);
    }
    check_known(rec, t)?;
    if let Some(v) = neighbor_survival_closed(eps, rec, t) {
        return Ok(v);
    }
    let integral = trapezoid_split(
        0.0,
        t,
        split_points(eps, rec),
        POINTWISE_QUAD_STEP,
        |u| phi_integrand(eps, rec, u, false),
        |u| phi_integrand(eps, rec, u, true),
    );
    Ok(1.0 - integral)
}

/// `φ` on every node of `grid`; quadrature (when needed) uses
/// `GRID_SUBSTEPS` trapezoid panels per grid cell.
pub fn neighbor_survival_on_grid(
    eps: &RateFunction,
    rec: &RecoveryDistribution,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    check_known(rec, grid.horizon())?;
    if neighbor_survival_closed(eps, rec, 0.0).is_some() {
        return Ok(grid
            .times()
            .map(|t| neighbor_survival_closed(eps, rec, t).unwrap())
            .collect());
    }
    let splits = split_points(eps, rec);
    let step = grid.step() / GRID_SUBSTEPS as f64;
    let mut out = Vec::with_capacity(grid.len());
    let mut phi = 1.0;
    out.push(phi);
    for k in 1..grid.len() {
        phi -= trapezoid_split(
            grid.time(k - 1),
            grid.time(k),
            splits.iter().copied(),
            step,
            |u| phi_integrand(eps, rec, u, false),
            |u| phi_integrand(eps, rec, u, true),
        );
        out.push(phi);
    }
    Ok(out)
}

/// `φ'_t = -ε_t e^{-A(t)} β_t`, right-continuous at jumps of `ε` or `β`.
pub fn neighbor_survival_derivative(
    eps: &RateFunction,
    rec: &RecoveryDistribution,
    t: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok(-eps.value(t) * (-eps.cumulative_unchecked(t)).exp() * rec.tail(t)?)
}

/// Left limit `φ'(t-)`; used by the solvers on the far side of a jump.
pub fn neighbor_survival_derivative_left(
    eps: &RateFunction,
    rec: &RecoveryDistribution,
    t: f64,
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(-eps.value_left(t) * (-eps.cumulative_unchecked(t)).exp() * rec.tail_left(t)?)
}

/// `γ_t = ε_t β_t`.
pub fn gamma_rate(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok(eps.value(t) * rec.tail(t)?)
}

/// Left limit `γ(t-)`.
pub fn gamma_rate_left(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(eps.value_left(t) * rec.tail_left(t)?)
}

/// `∫₀ᵗ γ_u du = E A(t ∧ H)`.
pub fn gamma_integral(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(match rec {
        RecoveryDistribution::Never => eps.cumulative(t)?,
        RecoveryDistribution::Deterministic { duration } => eps.cumulative(t.min(*duration))?,
        RecoveryDistribution::Exponential { rate } => eps.exp_weighted_integral(*rate, t),
        RecoveryDistribution::Tabulated { .. } => {
            check_known(rec, t)?;
            trapezoid_split(
                0.0,
                t,
                split_points(eps, rec),
                POINTWISE_QUAD_STEP,
                |u| eps.value(u) * rec.tail(u).unwrap_or(f64::NAN),
                |u| eps.value_left(u) * rec.tail_left(u).unwrap_or(f64::NAN),
            )
        }
    })
}

/// `∫₀^∞ γ_u du`, or `None` when it diverges.
pub fn gamma_total(eps: &RateFunction, rec: &RecoveryDistribution) -> Result<Option<f64>> {
    Ok(match rec {
        RecoveryDistribution::Never => eps.total_integral(),
        RecoveryDistribution::Deterministic { duration } => Some(eps.cumulative(*duration)?),
        RecoveryDistribution::Exponential { rate } if *rate == 0.0 => eps.total_integral(),
        RecoveryDistribution::Exponential { rate } => {
            Some(eps.exp_weighted_integral(*rate, f64::INFINITY))
        }
        RecoveryDistribution::Tabulated { grid, .. } => {
            let end = *grid.last().unwrap();
            if let Some(known) = rec.known_until() {
                return Err(Error::Horizon {
                    t: f64::INFINITY,
                    grid_end: known,
                });
            }
            Some(gamma_integral(eps, rec, end)?)
        }
    })
}

/// `ε̃_t = -φ'_t / φ_t`; the rate of an equivalent model without recovery.
pub fn effective_rate(eps: &RateFunction, rec: &RecoveryDistribution, t: f64) -> Result<f64> {
    let phi = neighbor_survival(eps, rec, t)?;
    if !(phi > 0.0) {
        return Err(Error::Singular { t });
    }
    Ok(-neighbor_survival_derivative(eps, rec, t)? / phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> RateFunction {
        RateFunction::constant(v).unwrap()
    }

    #[test]
    fn self_survival_values() {
        assert_eq!(self_survival(&RateFunction::zero(), 3.0), 1.0);
        assert_eq!(self_survival(&c(0.5), -1.0), 1.0);
        assert!((self_survival(&c(0.5), 2.0) - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn neighbor_survival_special_cases() {
        let never = RecoveryDistribution::Never;
        assert_eq!(
            neighbor_survival(&RateFunction::zero(), &never, 5.0).unwrap(),
            1.0
        );
        assert_eq!(neighbor_survival(&c(1.0), &never, -2.0).unwrap(), 1.0);

        let exp = RecoveryDistribution::exponential(1.0).unwrap();
        assert!((neighbor_survival(&c(1.0), &exp, 60.0).unwrap() - 0.5).abs() < 1e-15);

        let det = RecoveryDistribution::deterministic(1.5).unwrap();
        let v = neighbor_survival(&c(0.8), &det, 4.0).unwrap();
        assert!((v - (-0.8f64 * 1.5).exp()).abs() < 1e-15);
    }

    #[test]
    fn derivative_special_cases() {
        let never = RecoveryDistribution::Never;
        assert_eq!(
            neighbor_survival_derivative(&c(1.7), &never, 0.0).unwrap(),
            -1.7
        );
        let det = RecoveryDistribution::deterministic(1.0).unwrap();
        assert_eq!(
            neighbor_survival_derivative(&c(1.0), &det, 1.2).unwrap(),
            0.0
        );
        assert_eq!(
            neighbor_survival_derivative(&c(1.0), &det, 1.0).unwrap(),
            0.0
        );
        assert!(
            (neighbor_survival_derivative_left(&c(1.0), &det, 1.0).unwrap() + (-1.0f64).exp())
                .abs()
                < 1e-15
        );
        let (e, mu, t) = (1.3, 0.7, 0.9);
        let exp = RecoveryDistribution::exponential(mu).unwrap();
        let d = neighbor_survival_derivative(&c(e), &exp, t).unwrap();
        assert!((d + e * (-(mu + e) * t).exp()).abs() < 1e-15);
    }

    #[test]
    fn gamma_special_cases() {
        let (e, mu) = (2.0, 0.5);
        let exp = RecoveryDistribution::exponential(mu).unwrap();
        for t in [0.0, 0.3, 4.0] {
            let g = gamma_rate(&c(e), &exp, t).unwrap();
            assert!((g - e * (-mu * t).exp()).abs() < 1e-15);
        }
        let det = RecoveryDistribution::deterministic(1.0).unwrap();
        assert_eq!(gamma_rate(&c(e), &det, 0.5).unwrap(), e);
        assert_eq!(gamma_rate(&c(e), &det, 1.0).unwrap(), 0.0);
        assert_eq!(gamma_rate_left(&c(e), &det, 1.0).unwrap(), e);
        let eps = RateFunction::piecewise(vec![1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(
            gamma_rate(&eps, &RecoveryDistribution::Never, 2.0).unwrap(),
            3.0
        );
        assert_eq!(gamma_total(&c(e), &exp).unwrap(), Some(e / mu));
        assert_eq!(gamma_total(&c(e), &det).unwrap(), Some(e));
        assert_eq!(
            gamma_total(&c(e), &RecoveryDistribution::Never).unwrap(),
            None
        );
    }

    #[test]
    fn effective_rate_closed_forms() {
        let never = RecoveryDistribution::Never;
        let eps = RateFunction::piecewise(vec![1.0], vec![2.0, 0.5]).unwrap();
        for t in [0.0, 0.5, 1.0, 3.0] {
            assert!((effective_rate(&eps, &never, t).unwrap() - eps.value(t)).abs() < 1e-12);
        }
        let det = RecoveryDistribution::deterministic(1.0).unwrap();
        assert!((effective_rate(&c(0.7), &det, 0.4).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(effective_rate(&c(0.7), &det, 1.4).unwrap(), 0.0);
        let (e, mu) = (1.0, 2.0);
        let exp = RecoveryDistribution::exponential(mu).unwrap();
        for t in [0.0, 0.25, 1.0, 5.0] {
            let expect = e * (mu + e) / (mu * ((mu + e) * t).exp() + e);
            assert!((effective_rate(&c(e), &exp, t).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_rate_singularity() {
        let huge = c(1e6);
        assert!(matches!(
            effective_rate(&huge, &RecoveryDistribution::Never, 1.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn quadrature_route_matches_closed_form() {
        // exponential H with a non-constant ε forces the quadrature route;
        // a piecewise ε equal to a constant checks it against the closed form.
        let flat = RateFunction::piecewise(vec![0.7, 2.0], vec![1.2, 1.2, 1.2]).unwrap();
        let exp = RecoveryDistribution::exponential(0.9).unwrap();
        for t in [0.3, 1.0, 3.5] {
            let q = neighbor_survival(&flat, &exp, t).unwrap();
            let cf = neighbor_survival(&c(1.2), &exp, t).unwrap();
            // composite trapezoid at step 1e-4: error of order t·h²/12
            assert!((q - cf).abs() < 1e-8, "{t}: {q} vs {cf}");
        }
    }

    #[test]
    fn grid_table_matches_pointwise() {
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let eps = RateFunction::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.2, 0.6]).unwrap();
        let rec =
            RecoveryDistribution::tabulated(vec![0.0, 1.0, 4.0], vec![1.0, 0.5, 0.0]).unwrap();
        let table = neighbor_survival_on_grid(&eps, &rec, &grid).unwrap();
        for k in [0, 50, 100, 250, 300] {
            let p = neighbor_survival(&eps, &rec, grid.time(k)).unwrap();
            // both sides are second order; the table uses panels of 2.5e-3
            assert!((table[k] - p).abs() < 5e-6, "node {k}");
        }
    }
}
