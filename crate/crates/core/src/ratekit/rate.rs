use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four supported shapes of a time-varying rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateKind {
    Constant {
        value: f64,
    },
    /// `values[0]` on `[0, breakpoints[0])`, …, `values[k]` on `[breakpoints[k-1], ∞)`.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Zero on `[0, latency)`, `level` afterwards.
    Latent {
        level: f64,
        latency: f64,
    },
    /// Linear interpolation between nodes; the last value is held beyond the
    /// final node. The first node must be 0.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

/// `rate(t) = slope0 + slope1 * (t - start)` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    start: f64,
    end: f64,
    c0: f64,
    c1: f64,
    /// Integral of the rate over `[0, start]`.
    cum: f64,
}

impl Piece {
    fn value_at(&self, t: f64) -> f64 {
        self.c0 + self.c1 * (t - self.start)
    }

    fn integral_to(&self, t: f64) -> f64 {
        let x = t - self.start;
        self.cum + self.c0 * x + 0.5 * self.c1 * x * x
    }
}

/// A non-negative deterministic rate `t ↦ r_t` (zero for `t < 0`).
///
/// Every kind is stored as a list of linear pieces, which makes the
/// cumulative integral, its inverse and exponentially weighted integrals
/// exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RateKind", into = "RateKind")]
pub struct RateFunction {
    kind: RateKind,
    pieces: Vec<Piece>,
}

impl PartialEq for RateFunction {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl From<RateFunction> for RateKind {
    fn from(r: RateFunction) -> Self {
        r.kind
    }
}

impl TryFrom<RateKind> for RateFunction {
    type Error = Error;

    fn try_from(kind: RateKind) -> Result<Self> {
        RateFunction::from_kind(kind)
    }
}

fn check_rate(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("rates must be finite and non-negative, got {v}"),
        ))
    }
}

fn check_increasing(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::param(name, "nodes must be finite"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(name, "nodes must be strictly increasing"));
    }
    Ok(())
}

impl RateFunction {
    pub fn constant(value: f64) -> Result<Self> {
        Self::from_kind(RateKind::Constant { value })
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero is a valid rate")
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_kind(RateKind::Piecewise {
            breakpoints,
            values,
        })
    }

    pub fn latent(level: f64, latency: f64) -> Result<Self> {
        Self::from_kind(RateKind::Latent { level, latency })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_kind(RateKind::Tabulated { grid, values })
    }

    pub fn from_kind(kind: RateKind) -> Result<Self> {
        let mut raw: Vec<(f64, f64, f64, f64)> = Vec::new();
        match &kind {
            RateKind::Constant { value } => {
                check_rate("value", *value)?;
                raw.push((0.0, f64::INFINITY, *value, 0.0));
            }
            RateKind::Piecewise {
                breakpoints,
                values,
            } => {
                if values.len() != breakpoints.len() + 1 {
                    return Err(Error::param(
                        "values",
                        format!(
                            "{} breakpoints need {} values, got {}",
                            breakpoints.len(),
                            breakpoints.len() + 1,
                            values.len()
                        ),
                    ));
                }
                check_increasing("breakpoints", breakpoints)?;
                if breakpoints.first().is_some_and(|&b| b <= 0.0) {
                    return Err(Error::param("breakpoints", "must be positive"));
                }
                for v in values {
                    check_rate("values", *v)?;
                }
                let mut start = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let end = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    raw.push((start, end, v, 0.0));
                    start = end;
                }
            }
            RateKind::Latent { level, latency } => {
                check_rate("level", *level)?;
                if !(*latency >= 0.0 && latency.is_finite()) {
                    return Err(Error::param(
                        "latency",
                        format!("must be finite and non-negative, got {latency}"),
                    ));
                }
                if *latency > 0.0 {
                    raw.push((0.0, *latency, 0.0, 0.0));
                }
                raw.push((*latency, f64::INFINITY, *level, 0.0));
            }
            RateKind::Tabulated { grid, values } => {
                if grid.is_empty() || grid.len() != values.len() {
                    return Err(Error::param(
                        "grid",
                        "needs as many nodes as values, at least one",
                    ));
                }
                if grid[0] != 0.0 {
                    return Err(Error::param("grid", "first node must be 0"));
                }
                check_increasing("grid", grid)?;
                for v in values {
                    check_rate("values", *v)?;
                }
                for i in 0..grid.len() - 1 {
                    let slope = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
                    raw.push((grid[i], grid[i + 1], values[i], slope));
                }
                raw.push((
                    *grid.last().unwrap(),
                    f64::INFINITY,
                    *values.last().unwrap(),
                    0.0,
                ));
            }
        }
        let mut cum = 0.0;
        let pieces = raw
            .into_iter()
            .map(|(start, end, c0, c1)| {
                let p = Piece {
                    start,
                    end,
                    c0,
                    c1,
                    cum,
                };
                if end.is_finite() {
                    cum = p.integral_to(end);
                }
                p
            })
            .collect();
        Ok(RateFunction { kind, pieces })
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    /// Piece containing `t` under the right-continuous convention.
    fn piece_right(&self, t: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.start <= t);
        &self.pieces[idx.saturating_sub(1)]
    }

    /// Piece whose half-open interval `(start, end]` contains `t`.
    fn piece_left(&self, t: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.start < t);
        &self.pieces[idx.saturating_sub(1)]
    }

    /// Right-continuous value; 0 for `t < 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.piece_right(t).value_at(t)
    }

    /// Left limit `r(t-)`; 0 for `t <= 0`.
    pub fn value_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.piece_left(t).value_at(t)
    }

    /// `∫₀ᵗ r_u du`, exact for every kind.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain {
                t,
                reason: "cumulative rate needs t >= 0",
            });
        }
        if t.is_infinite() {
            return Ok(self.total_integral().unwrap_or(f64::INFINITY));
        }
        Ok(self.piece_right(t).integral_to(t))
    }

    /// Clamped version used internally where `t` is known to be valid.
    pub(crate) fn cumulative_unchecked(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.piece_right(t).integral_to(t)
        }
    }

    /// Smallest `t` with `∫₀ᵗ r = target`, or `None` when the total mass
    /// never reaches `target`.
    pub fn inverse_cumulative(&self, target: f64) -> Option<f64> {
        if target <= 0.0 {
            return Some(0.0);
        }
        let idx = self
            .pieces
            .partition_point(|p| p.end.is_finite() && p.integral_to(p.end) < target);
        let p = &self.pieces[idx];
        let rem = target - p.cum;
        let x = if p.c1 == 0.0 {
            if p.c0 == 0.0 {
                return None;
            }
            rem / p.c0
        } else {
            // c0 x + c1 x²/2 = rem, stable root
            let disc = (p.c0 * p.c0 + 2.0 * p.c1 * rem).max(0.0);
            2.0 * rem / (p.c0 + disc.sqrt())
        };
        Some(p.start + x.max(0.0))
    }

    /// `∫₀^∞ r_u du` if finite.
    pub fn total_integral(&self) -> Option<f64> {
        let last = self.pieces.last().expect("at least one piece");
        (last.c0 == 0.0 && last.c1 == 0.0).then_some(last.cum)
    }

    /// `∫₀ᵗ r_u e^{-μu} du` for `μ >= 0`, exact; `t` may be infinite.
    pub fn exp_weighted_integral(&self, mu: f64, t: f64) -> f64 {
        if mu == 0.0 {
            return if t.is_infinite() {
                self.total_integral().unwrap_or(f64::INFINITY)
            } else {
                self.cumulative_unchecked(t)
            };
        }
        let mut acc = 0.0;
        for p in &self.pieces {
            if p.start >= t {
                break;
            }
            let end = p.end.min(t);
            let scale = (-mu * p.start).exp();
            if end.is_infinite() {
                // last piece is constant
                acc += scale * p.c0 / mu;
            } else {
                let x = mu * (end - p.start);
                let w0 = -(-x).exp_m1() / mu;
                let w1 = if x < 1e-3 {
                    x * x * (0.5 - x / 3.0 + x * x / 8.0) / (mu * mu)
                } else {
                    (1.0 - (-x).exp() * (1.0 + x)) / (mu * mu)
                };
                acc += scale * (p.c0 * w0 + p.c1 * w1);
            }
        }
        acc
    }

    /// Times where the rate jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        self.pieces
            .windows(2)
            .filter(|w| {
                let left = w[0].value_at(w[0].end);
                (left - w[1].c0).abs() > 0.0
            })
            .map(|w| w[1].start)
            .collect()
    }

    /// Every piece boundary (jumps and slope changes).
    pub(crate) fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().skip(1).map(|p| p.start)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            RateKind::Constant { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.c0 == 0.0 && p.c1 == 0.0)
    }

    /// The same shape multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_rate("factor", factor)?;
        let kind = match &self.kind {
            RateKind::Constant { value } => RateKind::Constant {
                value: value * factor,
            },
            RateKind::Piecewise {
                breakpoints,
                values,
            } => RateKind::Piecewise {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
            RateKind::Latent { level, latency } => RateKind::Latent {
                level: level * factor,
                latency: *latency,
            },
            RateKind::Tabulated { grid, values } => RateKind::Tabulated {
                grid: grid.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Self::from_kind(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constant_cumulative() {
        let r = RateFunction::constant(1.0).unwrap();
        assert_eq!(r.cumulative(2.0).unwrap(), 2.0);
    }

    #[test]
    fn latent_window_is_zero_before_latency() {
        let r = RateFunction::latent(2.0, 1.5).unwrap();
        assert_eq!(r.cumulative(1.0).unwrap(), 0.0);
        assert_eq!(r.cumulative(1.5).unwrap(), 0.0);
        assert!(close(r.cumulative(2.0).unwrap(), 1.0, 1e-15));
        assert_eq!(r.value(1.5), 2.0);
        assert_eq!(r.value_left(1.5), 0.0);
    }

    #[test]
    fn piecewise_rectangles() {
        let r = RateFunction::piecewise(vec![1.0], vec![1.0, 0.5]).unwrap();
        assert!(close(r.cumulative(3.0).unwrap(), 2.0, 1e-15));
        assert_eq!(r.discontinuities(), vec![1.0]);
    }

    #[test]
    fn negative_time_is_domain_error() {
        let r = RateFunction::constant(1.0).unwrap();
        assert!(matches!(r.cumulative(-0.1), Err(Error::Domain { .. })));
        assert_eq!(r.value(-1.0), 0.0);
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(RateFunction::constant(-1.0).is_err());
        assert!(RateFunction::piecewise(vec![2.0, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(RateFunction::piecewise(vec![1.0], vec![1.0]).is_err());
        assert!(RateFunction::tabulated(vec![0.5, 1.0], vec![1.0, 1.0]).is_err());
        assert!(RateFunction::latent(1.0, -1.0).is_err());
    }

    #[test]
    fn tabulated_trapezoid_is_exact_for_linear_pieces() {
        let r = RateFunction::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert!(close(r.cumulative(1.0).unwrap(), 1.0, 1e-15));
        assert!(close(r.cumulative(3.0).unwrap(), 3.0, 1e-15));
        assert!(close(r.cumulative(5.0).unwrap(), 3.0, 1e-15));
        assert_eq!(r.total_integral(), Some(3.0));
        assert!(close(r.value(2.0), 1.0, 1e-15));
    }

    #[test]
    fn inverse_cumulative_round_trips() {
        let rates = [
            RateFunction::constant(0.7).unwrap(),
            RateFunction::piecewise(vec![0.5, 2.0], vec![1.0, 0.0, 3.0]).unwrap(),
            RateFunction::latent(2.0, 0.4).unwrap(),
            RateFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.5, 2.0, 1.0]).unwrap(),
        ];
        for r in &rates {
            for &target in &[0.01, 0.3, 1.0, 2.5, 7.0] {
                let t = r.inverse_cumulative(target).unwrap();
                assert!(
                    close(r.cumulative(t).unwrap(), target, 1e-12),
                    "{r:?} {target}"
                );
            }
        }
    }

    #[test]
    fn inverse_cumulative_reports_finite_mass() {
        let r = RateFunction::piecewise(vec![1.0], vec![2.0, 0.0]).unwrap();
        assert_eq!(r.total_integral(), Some(2.0));
        assert!(r.inverse_cumulative(1.9).is_some());
        assert_eq!(r.inverse_cumulative(2.1), None);
        assert_eq!(RateFunction::zero().inverse_cumulative(0.5), None);
    }

    #[test]
    fn exp_weighted_integral_matches_closed_forms() {
        let mu = 0.8;
        let c = RateFunction::constant(2.0).unwrap();
        assert!(close(
            c.exp_weighted_integral(mu, f64::INFINITY),
            2.0 / mu,
            1e-14
        ));
        assert!(close(
            c.exp_weighted_integral(mu, 1.5),
            2.0 * (1.0 - (-mu * 1.5f64).exp()) / mu,
            1e-14
        ));
        let l = RateFunction::latent(1.0, 2.0).unwrap();
        assert!(close(
            l.exp_weighted_integral(mu, f64::INFINITY),
            (-mu * 2.0f64).exp() / mu,
            1e-14
        ));
        // linear ramp r(t) = t on [0,1]: ∫ t e^{-μt} = (1 - e^{-μ}(1+μ))/μ²
        let ramp = RateFunction::tabulated(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let expect = (1.0 - (-mu).exp() * (1.0 + mu)) / (mu * mu);
        assert!(close(ramp.exp_weighted_integral(mu, 1.0), expect, 1e-14));
    }

    #[test]
    fn scaling_preserves_shape() {
        let r = RateFunction::piecewise(vec![1.0], vec![1.0, 0.5]).unwrap();
        let s = r.scaled(0.2).unwrap();
        assert!(close(s.cumulative(3.0).unwrap(), 0.4, 1e-15));
    }
}
