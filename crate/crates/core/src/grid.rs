use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a time sits on a grid node.
const ALIGN_TOL: f64 = 1e-9;

/// Uniform time grid `{0, h, 2h, …, T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct TimeGrid {
    horizon: f64,
    step: f64,
    nodes: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    horizon: f64,
    step: f64,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        TimeGrid::new(r.horizon, r.step)
    }
}

impl From<TimeGrid> for GridRepr {
    fn from(g: TimeGrid) -> Self {
        GridRepr {
            horizon: g.horizon,
            step: g.step,
        }
    }
}

impl TimeGrid {
    /// The step must divide the horizon (up to rounding).
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::param(
                "step",
                format!("must be positive and finite, got {step}"),
            ));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::param(
                "horizon",
                format!("must be non-negative and finite, got {horizon}"),
            ));
        }
        let ratio = horizon / step;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(Error::GridAlignment {
                what: "horizon",
                at: horizon,
                step,
            });
        }
        Ok(TimeGrid {
            horizon,
            step,
            nodes: intervals as usize + 1,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of nodes `m = T/h + 1`.
    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.nodes).map(move |k| self.time(k))
    }

    /// Index of the node at `t`, if `t` lies on the grid (within rounding).
    pub fn node_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let ratio = t / self.step;
        let k = ratio.round();
        ((ratio - k).abs() <= ALIGN_TOL * ratio.max(1.0)).then_some(k as usize)
    }

    /// Checks that `t` is a multiple of the step; times beyond the horizon are
    /// accepted only when aligned as well.
    pub fn require_node(&self, what: &'static str, t: f64) -> Result<usize> {
        self.node_of(t).ok_or(Error::GridAlignment {
            what,
            at: t,
            step: self.step,
        })
    }

    /// Same step, different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        TimeGrid::new(horizon, self.step)
    }
}

/// A named series aligned with a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// Time grid plus one or more aligned value series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    series: Vec<Series>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid) -> Self {
        Trajectory {
            grid,
            series: Vec::new(),
        }
    }

    /// Panics if the length does not match the grid or the name is taken.
    pub fn with_series(mut self, name: &str, values: Vec<f64>) -> Self {
        self.push(name, values);
        self
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            self.grid.len(),
            "series `{name}` has {} values for {} grid nodes",
            values.len(),
            self.grid.len()
        );
        assert!(self.get(name).is_none(), "duplicate series `{name}`");
        self.series.push(Series {
            name: name.to_owned(),
            values,
        });
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    /// Like [`Trajectory::get`] but panics on a missing series.
    pub fn values(&self, name: &str) -> &[f64] {
        self.get(name)
            .unwrap_or_else(|| panic!("trajectory has no series `{name}`"))
    }

    pub fn into_values(self, name: &str) -> Vec<f64> {
        self.series
            .into_iter()
            .find(|s| s.name == name)
            .map(|s| s.values)
            .unwrap_or_else(|| panic!("trajectory has no series `{name}`"))
    }

    /// Appends every series of `other`; grids must match.
    pub fn merge(mut self, other: Trajectory) -> Self {
        assert_eq!(
            self.grid, other.grid,
            "merging trajectories on different grids"
        );
        for s in other.series {
            self.push(&s.name, s.values);
        }
        self
    }
}

/// Largest absolute pointwise difference between two equally long slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
