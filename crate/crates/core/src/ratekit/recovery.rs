use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the recovery time `H`, described through its tail `β_t = P(H > t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecoveryRepr", into = "RecoveryRepr")]
pub enum RecoveryDistribution {
    /// `H = ∞`.
    #[default]
    Never,
    Deterministic {
        duration: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Tail values on a grid starting at 0, interpolated log-linearly.
    Tabulated {
        grid: Vec<f64>,
        tail: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RecoveryRepr {
    Never {},
    Deterministic { duration: f64 },
    Exponential { rate: f64 },
    Tabulated { grid: Vec<f64>, tail: Vec<f64> },
}

impl TryFrom<RecoveryRepr> for RecoveryDistribution {
    type Error = Error;

    fn try_from(r: RecoveryRepr) -> Result<Self> {
        match r {
            RecoveryRepr::Never {} => Ok(RecoveryDistribution::Never),
            RecoveryRepr::Deterministic { duration } => {
                RecoveryDistribution::deterministic(duration)
            }
            RecoveryRepr::Exponential { rate } => RecoveryDistribution::exponential(rate),
            RecoveryRepr::Tabulated { grid, tail } => RecoveryDistribution::tabulated(grid, tail),
        }
    }
}

impl From<RecoveryDistribution> for RecoveryRepr {
    fn from(r: RecoveryDistribution) -> Self {
        match r {
            RecoveryDistribution::Never => RecoveryRepr::Never {},
            RecoveryDistribution::Deterministic { duration } => {
                RecoveryRepr::Deterministic { duration }
            }
            RecoveryDistribution::Exponential { rate } => RecoveryRepr::Exponential { rate },
            RecoveryDistribution::Tabulated { grid, tail } => {
                RecoveryRepr::Tabulated { grid, tail }
            }
        }
    }
}

/// Tail on one cell of a tabulated law: log-linear, or linear when an end is 0.
fn cell_tail(b0: f64, b1: f64, frac: f64) -> f64 {
    if b0 == b1 {
        b0
    } else if b1 == 0.0 {
        b0 * (1.0 - frac)
    } else {
        b0 * (b1 / b0).powf(frac)
    }
}

/// `∫` of [`cell_tail`] over the first `frac` of a cell of width `width`.
fn cell_tail_integral(b0: f64, b1: f64, width: f64, frac: f64) -> f64 {
    if b0 == b1 {
        b0 * width * frac
    } else if b1 == 0.0 {
        b0 * width * (frac - 0.5 * frac * frac)
    } else {
        let k = (b1 / b0).ln();
        b0 * width * (k * frac).exp_m1() / k
    }
}

impl RecoveryDistribution {
    pub fn deterministic(duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::param(
                "duration",
                format!("must be positive and finite, got {duration}"),
            ));
        }
        Ok(RecoveryDistribution::Deterministic { duration })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param(
                "rate",
                format!("must be finite and non-negative, got {rate}"),
            ));
        }
        Ok(RecoveryDistribution::Exponential { rate })
    }

    pub fn tabulated(grid: Vec<f64>, tail: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != tail.len() {
            return Err(Error::param(
                "tail",
                "needs at least two nodes and one tail value per node",
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::param("grid", "first node must be 0"));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "grid",
                "nodes must be finite and strictly increasing",
            ));
        }
        if tail[0] != 1.0 {
            return Err(Error::param("tail", "tail at 0 must equal 1"));
        }
        if tail.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::param("tail", "values must lie in [0, 1]"));
        }
        if tail.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("tail", "must be non-increasing"));
        }
        Ok(RecoveryDistribution::Tabulated { grid, tail })
    }

    fn horizon_error(t: f64, grid: &[f64]) -> Error {
        Error::Horizon {
            t,
            grid_end: *grid.last().unwrap(),
        }
    }

    /// Locates `t` in a tabulated grid: `(cell, fraction)`, or `None` past the end.
    fn locate(grid: &[f64], t: f64) -> Option<(usize, f64)> {
        let end = *grid.last().unwrap();
        if t >= end {
            return None;
        }
        let i = grid.partition_point(|&g| g <= t) - 1;
        Some((i, (t - grid[i]) / (grid[i + 1] - grid[i])))
    }

    /// `β_t = P(H > t)`, right-continuous; 1 for `t < 0`.
    pub fn tail(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(1.0);
        }
        Ok(match self {
            RecoveryDistribution::Never => 1.0,
            RecoveryDistribution::Deterministic { duration } => {
                if t < *duration {
                    1.0
                } else {
                    0.0
                }
            }
            RecoveryDistribution::Exponential { rate } => (-rate * t).exp(),
            RecoveryDistribution::Tabulated { grid, tail } => match Self::locate(grid, t) {
                Some((i, frac)) => cell_tail(tail[i], tail[i + 1], frac),
                None => {
                    let last = *tail.last().unwrap();
                    if t == *grid.last().unwrap() || last == 0.0 {
                        last
                    } else {
                        return Err(Self::horizon_error(t, grid));
                    }
                }
            },
        })
    }

    /// Left limit `β(t-)`.
    pub fn tail_left(&self, t: f64) -> Result<f64> {
        match self {
            RecoveryDistribution::Deterministic { duration } => {
                Ok(if t <= *duration { 1.0 } else { 0.0 })
            }
            _ => self.tail(t),
        }
    }

    /// `∫₀ᵗ β_u du`, exact for every kind.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            RecoveryDistribution::Never => t,
            RecoveryDistribution::Deterministic { duration } => t.min(*duration),
            RecoveryDistribution::Exponential { rate } => {
                if *rate == 0.0 {
                    t
                } else {
                    -(-rate * t).exp_m1() / rate
                }
            }
            RecoveryDistribution::Tabulated { grid, tail } => {
                let mut acc = 0.0;
                for i in 0..grid.len() - 1 {
                    let width = grid[i + 1] - grid[i];
                    if t >= grid[i + 1] {
                        acc += cell_tail_integral(tail[i], tail[i + 1], width, 1.0);
                    } else {
                        acc +=
                            cell_tail_integral(tail[i], tail[i + 1], width, (t - grid[i]) / width);
                        return Ok(acc);
                    }
                }
                if t > *grid.last().unwrap() && *tail.last().unwrap() > 0.0 {
                    return Err(Self::horizon_error(t, grid));
                }
                acc
            }
        })
    }

    /// Smallest `t` with `β_t <= u` for `u ∈ (0, 1)`: inversion sampling of `H`.
    /// Returns `None` when the answer lies beyond a tabulated grid.
    pub fn quantile_tail(&self, u: f64) -> Option<f64> {
        match self {
            RecoveryDistribution::Never => Some(f64::INFINITY),
            RecoveryDistribution::Deterministic { duration } => Some(*duration),
            RecoveryDistribution::Exponential { rate } => {
                if *rate == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(-u.ln() / rate)
                }
            }
            RecoveryDistribution::Tabulated { grid, tail } => {
                let i = tail.iter().position(|&b| b <= u)?;
                if i == 0 {
                    return Some(0.0);
                }
                let (b0, b1) = (tail[i - 1], tail[i]);
                let width = grid[i] - grid[i - 1];
                let frac = if b1 == 0.0 {
                    (b0 - u) / b0
                } else {
                    (u / b0).ln() / (b1 / b0).ln()
                };
                Some(grid[i - 1] + width * frac.clamp(0.0, 1.0))
            }
        }
    }

    /// Times where `β` jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            RecoveryDistribution::Deterministic { duration } => vec![*duration],
            _ => Vec::new(),
        }
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match self {
            RecoveryDistribution::Deterministic { duration } => vec![*duration],
            RecoveryDistribution::Tabulated { grid, .. } => grid[1..].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Last time at which the tail is known, if the law is tabulated with
    /// positive remaining mass.
    pub fn known_until(&self) -> Option<f64> {
        match self {
            RecoveryDistribution::Tabulated { grid, tail } if *tail.last().unwrap() > 0.0 => {
                grid.last().copied()
            }
            _ => None,
        }
    }

    pub fn is_never(&self) -> bool {
        matches!(self, RecoveryDistribution::Never)
            || matches!(self, RecoveryDistribution::Exponential { rate } if *rate == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_tail_is_right_continuous() {
        let h = RecoveryDistribution::deterministic(2.0).unwrap();
        assert_eq!(h.tail(1.999).unwrap(), 1.0);
        assert_eq!(h.tail(2.0).unwrap(), 0.0);
        assert_eq!(h.tail_left(2.0).unwrap(), 1.0);
        assert_eq!(h.tail(-1.0).unwrap(), 1.0);
    }

    #[test]
    fn never_tail_is_one() {
        for t in [0.0, 1.0, 1e6] {
            assert_eq!(RecoveryDistribution::Never.tail(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn tabulated_interpolates_log_linearly() {
        let h = RecoveryDistribution::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.25, 0.0]).unwrap();
        assert!((h.tail(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((h.tail(1.5).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(h.tail(10.0).unwrap(), 0.0);
        // tail integral over the log-linear cell: ∫₀¹ 4^{-u} du = 3/(4 ln 4)
        let first = 0.75 / 4f64.ln();
        assert!((h.tail_integral(1.0).unwrap() - first).abs() < 1e-14);
        assert!((h.tail_integral(2.0).unwrap() - (first + 0.125)).abs() < 1e-14);
    }

    #[test]
    fn tabulated_horizon_error() {
        let h = RecoveryDistribution::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        assert!(h.tail(1.0).is_ok());
        assert!(matches!(h.tail(1.5), Err(Error::Horizon { .. })));
        assert!(matches!(h.tail_integral(1.5), Err(Error::Horizon { .. })));
        assert_eq!(h.quantile_tail(0.4), None);
        assert_eq!(h.known_until(), Some(1.0));
    }

    #[test]
    fn rejects_invalid_tails() {
        assert!(RecoveryDistribution::tabulated(vec![0.0, 1.0], vec![0.9, 0.5]).is_err());
        assert!(RecoveryDistribution::tabulated(vec![0.0, 1.0], vec![1.0, 1.2]).is_err());
        assert!(RecoveryDistribution::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.2, 0.3]).is_err());
        assert!(RecoveryDistribution::deterministic(0.0).is_err());
        assert!(RecoveryDistribution::exponential(-1.0).is_err());
    }

    #[test]
    fn quantile_inverts_tail() {
        let laws = [
            RecoveryDistribution::exponential(1.3).unwrap(),
            RecoveryDistribution::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.6, 0.1, 0.0])
                .unwrap(),
        ];
        for h in &laws {
            for u in [0.05, 0.3, 0.7, 0.99] {
                let t = h.quantile_tail(u).unwrap();
                assert!((h.tail(t).unwrap() - u).abs() < 1e-12, "{h:?} {u}");
            }
        }
    }

    #[test]
    fn serde_shape() {
        let h: RecoveryDistribution =
            serde_json::from_str(r#"{"kind":"exponential","rate":1.0}"#).unwrap();
        assert_eq!(h, RecoveryDistribution::Exponential { rate: 1.0 });
        assert!(serde_json::from_str::<RecoveryDistribution>(
            r#"{"kind":"exponential","rate":-1.0}"#
        )
        .is_err());
        assert!(serde_json::from_str::<RecoveryDistribution>(r#"{"kind":"never","x":1}"#).is_err());
    }
}
