//! Monte Carlo estimates of the time-to-infection law on truncated trees.
//!
//! Each replica samples the centre vertex together with its neighbours'
//! subtrees down to depth `D`. The tree is never materialised: vertices are
//! addressed arithmetically and their randomness is keyed by
//! `(seed, replica, vertex id)`. Every replica is run twice on the same
//! random numbers, once with the depth-`D` layer infected at time 0
//! (pessimistic) and once with that layer cut off from its own children
//! (optimistic); the infinite-tree survival lies between the two.

mod rng;
mod tree;

use rayon::prelude::*;

use crate::discrete::{self, DiscreteModelSpec};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ratekit;

use rng::ReplicaRng;
pub use tree::ReplicaOutcome;
use tree::{Sampler, Shape};

/// Treatment of the depth-`D` layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Boundary vertices keep only their own initial state and
    /// self-infection; their children are absent.
    Optimistic,
    /// Boundary vertices are infected at time 0.
    Pessimistic,
}

/// Depth of the simulated subtrees; both boundary treatments are always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationConfig {
    depth: u32,
}

impl TruncationConfig {
    pub fn new(depth: u32) -> Result<Self> {
        if depth < 1 {
            return Err(Error::param("depth", "truncation depth must be at least 1"));
        }
        Ok(TruncationConfig { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

/// Bracketing survival estimates on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub grid: TimeGrid,
    /// Pessimistic boundary.
    pub survival_lo: Vec<f64>,
    /// Optimistic boundary.
    pub survival_hi: Vec<f64>,
    /// `sqrt(q(1-q)/N)` at the bracket midpoint `q`.
    pub stderr: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
}

/// How a reference curve sits relative to a [`SimulationResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct BracketComparison {
    /// Largest distance from the reference to the bracket, in standard
    /// errors (0 when inside).
    pub z_max: f64,
    /// Largest `survival_hi - survival_lo`.
    pub bracket_width: f64,
    /// Largest bracket width in standard errors.
    pub width_in_se: f64,
    /// Reference within `[lo - 3 SE, hi + 3 SE]` at every node.
    pub inside: bool,
    /// Bracket width below `2 SE` at every node.
    pub tight: bool,
}

impl SimulationResult {
    /// Standard error used to judge a reference value `r` at node `k`: the
    /// larger of the empirical one and `sqrt(r(1-r)/N)`, floored at `1/N`.
    /// The reference-based term keeps nodes where the sample saw no events
    /// (empirical error 0) from turning a small expected count into an
    /// arbitrarily large z-score.
    pub fn effective_stderr(&self, k: usize, reference: f64) -> f64 {
        let n = self.replicas as f64;
        let null = (reference * (1.0 - reference) / n).max(0.0).sqrt();
        self.stderr[k].max(null).max(1.0 / n)
    }

    pub fn compare(&self, reference: &[f64]) -> BracketComparison {
        assert_eq!(
            reference.len(),
            self.grid.len(),
            "reference must live on the result grid"
        );
        let mut out = BracketComparison {
            z_max: 0.0,
            bracket_width: 0.0,
            width_in_se: 0.0,
            inside: true,
            tight: true,
        };
        for (k, &r) in reference.iter().enumerate() {
            let se = self.effective_stderr(k, r);
            let (lo, hi) = (self.survival_lo[k], self.survival_hi[k]);
            let z = (lo - r).max(r - hi).max(0.0) / se;
            let width = hi - lo;
            out.z_max = out.z_max.max(z);
            out.bracket_width = out.bracket_width.max(width);
            out.width_in_se = out.width_in_se.max(width / se);
            out.inside &= z <= 3.0;
            out.tight &= width < 2.0 * se;
        }
        out
    }

    /// Per-node z-scores of `reference` against the bracket.
    pub fn z_scores(&self, reference: &[f64]) -> Vec<f64> {
        reference
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let (lo, hi) = (self.survival_lo[k], self.survival_hi[k]);
                (lo - r).max(r - hi).max(0.0) / self.effective_stderr(k, r)
            })
            .collect()
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores for `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::param("threads", "need at least one worker"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    Ok(pool.install(f))
}

fn sampler<'a>(
    spec: &'a DiscreteModelSpec,
    trunc: &TruncationConfig,
    horizon: f64,
    rooted: bool,
) -> Result<Sampler<'a>> {
    let shape = Shape {
        n: spec.n(),
        depth: trunc.depth,
        centre_children: if rooted { spec.n() } else { spec.n() + 1 },
    };
    if shape.max_id().is_none() {
        return Err(Error::param(
            "depth",
            format!(
                "a depth-{} tree of degree {} has too many vertices to address",
                trunc.depth,
                spec.n() + 1
            ),
        ));
    }
    if let Some(end) = spec.recovery().known_until() {
        if end < horizon {
            return Err(Error::Horizon {
                t: horizon,
                grid_end: end,
            });
        }
    }
    Ok(Sampler {
        spec,
        shape,
        horizon,
    })
}

/// Per-replica outcomes in replica order (the centre has `n + 1`
/// neighbours, or `n` when `rooted`).
pub fn sample_outcomes(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    horizon: f64,
    replicas: u64,
    seed: u64,
    boundary: Boundary,
    rooted: bool,
) -> Result<Vec<ReplicaOutcome>> {
    let sampler = sampler(spec, trunc, horizon, rooted)?;
    Ok((0..replicas)
        .into_par_iter()
        .map_init(tree::new_heap, |heap, r| {
            sampler.sample(&mut ReplicaRng::new(seed, r), boundary, heap)
        })
        .collect())
}

/// Number of grid nodes strictly before `tau`.
fn nodes_before(grid: &TimeGrid, tau: f64) -> usize {
    let m = grid.len();
    if !tau.is_finite() {
        return m;
    }
    let mut c = ((tau / grid.step()).ceil().max(0.0) as usize).min(m);
    while c > 0 && grid.time(c - 1) >= tau {
        c -= 1;
    }
    while c < m && grid.time(c) < tau {
        c += 1;
    }
    c
}

#[derive(Clone)]
struct Counts {
    lo: Vec<u64>,
    hi: Vec<u64>,
}

impl Counts {
    fn new(m: usize) -> Self {
        Counts {
            lo: vec![0; m + 1],
            hi: vec![0; m + 1],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.lo.iter_mut().zip(&other.lo) {
            *a += b;
        }
        for (a, b) in self.hi.iter_mut().zip(&other.hi) {
            *a += b;
        }
        self
    }
}

/// `#{τ > t_k}` from the histogram of `nodes_before(τ)`.
fn survival_counts(hist: &[u64]) -> Vec<u64> {
    let m = hist.len() - 1;
    let mut out = vec![0; m];
    let mut acc = hist[m];
    for k in (0..m).rev() {
        out[k] = acc;
        acc += hist[k];
    }
    out
}

fn simulate(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    grid: &TimeGrid,
    replicas: u64,
    seed: u64,
    rooted: bool,
) -> Result<SimulationResult> {
    if replicas < 1 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let sampler = sampler(spec, trunc, grid.horizon(), rooted)?;
    let m = grid.len();
    let counts = (0..replicas)
        .into_par_iter()
        .fold(
            || (Counts::new(m), tree::new_heap()),
            |(mut counts, mut heap), r| {
                let mut rng = ReplicaRng::new(seed, r);
                let lo = sampler.sample(&mut rng, Boundary::Pessimistic, &mut heap);
                let hi = sampler.sample(&mut rng, Boundary::Optimistic, &mut heap);
                debug_assert!(lo.tau <= hi.tau);
                counts.lo[nodes_before(grid, lo.tau)] += 1;
                counts.hi[nodes_before(grid, hi.tau)] += 1;
                (counts, heap)
            },
        )
        .map(|(c, _)| c)
        .reduce(|| Counts::new(m), Counts::merge);

    let n = replicas as f64;
    let lo: Vec<f64> = survival_counts(&counts.lo)
        .iter()
        .map(|&c| c as f64 / n)
        .collect();
    let hi: Vec<f64> = survival_counts(&counts.hi)
        .iter()
        .map(|&c| c as f64 / n)
        .collect();
    let stderr = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| {
            let q = 0.5 * (a + b);
            (q * (1.0 - q) / n).sqrt()
        })
        .collect();
    Ok(SimulationResult {
        grid: *grid,
        survival_lo: lo,
        survival_hi: hi,
        stderr,
        replicas,
        seed,
    })
}

/// Bracketing estimates of `P(τ > t)` for the centre of the tree.
pub fn simulate_time_to_infection(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    grid: &TimeGrid,
    replicas: u64,
    seed: u64,
) -> Result<SimulationResult> {
    simulate(spec, trunc, grid, replicas, seed, false)
}

/// Bracketing estimates of `S_{t,n}`: the centre's survival with per-edge
/// rate `ε/(n+1)`.
pub fn estimate_expected_susceptible(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    grid: &TimeGrid,
    replicas: u64,
    seed: u64,
) -> Result<SimulationResult> {
    simulate(&spec.with_scaled_eps()?, trunc, grid, replicas, seed, false)
}

/// Bracketing estimates of the law of the root's infection time on the
/// rooted tree, whose root has `n` children.
pub fn simulate_root_infection(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    grid: &TimeGrid,
    replicas: u64,
    seed: u64,
) -> Result<SimulationResult> {
    simulate(spec, trunc, grid, replicas, seed, true)
}

/// Largest step used when solving for reference curves.
const REFERENCE_STEP: f64 = 1e-3;

/// `(1 - p) f_t s_t^{power}` on `grid`, with `s` solved on a refinement of
/// `grid` whose step is at most `1e-3`.
pub fn reference_survival(
    spec: &DiscreteModelSpec,
    grid: &TimeGrid,
    power: u32,
) -> Result<Vec<f64>> {
    let refine = (grid.step() / REFERENCE_STEP).ceil().max(1.0) as usize;
    let fine = TimeGrid::new(grid.horizon(), grid.step() / refine as f64)?;
    let s = discrete::solve_s(spec, &fine)?.into_values("s");
    Ok(grid
        .times()
        .enumerate()
        .map(|(k, t)| {
            (1.0 - spec.p())
                * ratekit::self_survival(spec.lambda(), t)
                * s[k * refine].powi(power as i32)
        })
        .collect())
}

/// Empirical law of the root's infection time on the rooted tree (root of
/// degree `n`) against `(1 - p) f_t s_t^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionReport {
    pub result: SimulationResult,
    pub expected: Vec<f64>,
    pub comparison: BracketComparison,
}

pub fn recursion_check(
    spec: &DiscreteModelSpec,
    trunc: &TruncationConfig,
    grid: &TimeGrid,
    replicas: u64,
    seed: u64,
) -> Result<RecursionReport> {
    let result = simulate_root_infection(spec, trunc, grid, replicas, seed)?;
    let expected = reference_survival(spec, grid, spec.n())?;
    let comparison = result.compare(&expected);
    Ok(RecursionReport {
        result,
        expected,
        comparison,
    })
}
