//! Continuous limit of the tree model as the degree grows.
//!
//! The susceptible proportion solves the master equation
//!
//! ```text
//! log(S_t / S_0) = -∫₀ᵗ λ_u du - ∫₀ᵗ (1 - S_u) γ_{t-u} du,
//! ```
//!
//! and the infected and recovered proportions follow from `S` and the
//! recovery tail `β`:
//!
//! ```text
//! I_t = I_0 β_t - ∫₀ᵗ S'_u β_{t-u} du,
//! R_t = I_0 (1 - β_t) - ∫₀ᵗ S'_u (1 - β_{t-u}) du.
//! ```
//!
//! The classic SIR system, its one-dimensional master form, the latent and
//! deterministic-recovery delay equations and the stationary equation are
//! provided as independent oracles.

use crate::discrete::{self, DiscreteModelSpec};
use crate::error::{Error, Result};
use crate::grid::{max_abs_diff, TimeGrid, Trajectory};
use crate::ode::{hermite_mid, rk4_grid, rk4_step};
use crate::ratekit::{self, RateFunction, RecoveryDistribution};
use crate::volterra::LagKernel;

const MASTER_TOL: f64 = 1e-14;
const MASTER_MAX_ITER: usize = 50;
/// Absolute tolerance for `S + I + R = 1` and for the sign of `I`, `R`.
pub const CONSERVATION_TOL: f64 = 1e-12;
const STATIONARY_FLOOR: f64 = 1e-12;
const STATIONARY_SCAN: usize = 4000;

/// Parameters of the continuum model; `γ_t = w_t β_t` with the infectivity
/// profile `w` given by `eps` and the tail `β` by `recovery`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModelSpec {
    eps: RateFunction,
    recovery: RecoveryDistribution,
    lambda: RateFunction,
    s0: f64,
}

impl ContinuousModelSpec {
    pub fn new(
        eps: RateFunction,
        recovery: RecoveryDistribution,
        lambda: RateFunction,
        s0: f64,
    ) -> Result<Self> {
        if !(s0 > 0.0 && s0 <= 1.0) {
            return Err(Error::param(
                "s0",
                format!("initial susceptible proportion must lie in (0, 1], got {s0}"),
            ));
        }
        Ok(ContinuousModelSpec {
            eps,
            recovery,
            lambda,
            s0,
        })
    }

    /// `γ_t = ε e^{-μt}`, no self-infection.
    pub fn classic(eps: f64, mu: f64, s0: f64) -> Result<Self> {
        Self::new(
            RateFunction::constant(eps)?,
            RecoveryDistribution::exponential(mu)?,
            RateFunction::zero(),
            s0,
        )
    }

    pub fn eps(&self) -> &RateFunction {
        &self.eps
    }

    pub fn recovery(&self) -> &RecoveryDistribution {
        &self.recovery
    }

    pub fn lambda(&self) -> &RateFunction {
        &self.lambda
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn i0(&self) -> f64 {
        1.0 - self.s0
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        ratekit::gamma_rate(&self.eps, &self.recovery, t)
    }

    /// Jumps of `γ` inside `(0, T]` must sit on grid nodes.
    pub fn check_alignment(&self, grid: &TimeGrid) -> Result<()> {
        for t in self
            .eps
            .discontinuities()
            .into_iter()
            .chain(self.recovery.discontinuities())
        {
            if t <= grid.horizon() {
                grid.require_node("jump of the transmission rate", t)?;
            }
        }
        Ok(())
    }

    fn gamma_kernel(&self, grid: &TimeGrid) -> Result<LagKernel> {
        LagKernel::build(
            grid,
            |t| ratekit::gamma_rate(&self.eps, &self.recovery, t),
            |t| ratekit::gamma_rate_left(&self.eps, &self.recovery, t),
        )
    }
}

/// Trapezoidal product integration of the log form with a fixed-point
/// correction per node (series `"S"`).
pub fn solve_master(spec: &ContinuousModelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    spec.check_alignment(grid)?;
    let kernel = spec.gamma_kernel(grid)?;
    let m = grid.len();
    let s0 = spec.s0;
    let mut s = Vec::with_capacity(m);
    // g_u = 1 - S_u
    let mut g = Vec::with_capacity(m);
    s.push(s0);
    g.push(1.0 - s0);
    let w = kernel.endpoint_weight();
    for k in 1..m {
        let forcing = spec.lambda.cumulative_unchecked(grid.time(k)) + kernel.history(k, &g);
        let mut x = s[k - 1];
        let mut converged = false;
        for _ in 0..MASTER_MAX_ITER {
            let next = s0 * (-forcing - w * (1.0 - x)).exp();
            let delta = (next - x).abs();
            x = next;
            if delta <= MASTER_TOL {
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() {
            return Err(Error::NonConvergence {
                node: k,
                t: grid.time(k),
                iterations: MASTER_MAX_ITER,
            });
        }
        s.push(x);
        g.push(1.0 - x);
    }
    Ok(Trajectory::new(*grid).with_series("S", s))
}

/// Second-order finite-difference derivative on a uniform grid.
fn finite_difference(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len();
    if m < 3 {
        return vec![0.0; m];
    }
    let mut d = Vec::with_capacity(m);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h));
    for k in 1..m - 1 {
        d.push((values[k + 1] - values[k - 1]) / (2.0 * h));
    }
    d.push((3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * h));
    d
}

/// Residual of the differential form
/// `S'/S + λ_t + (1 - S_0)γ_t - ∫₀ᵗ S'_u γ_{t-u} du` with `S'` from finite
/// differences of the `"S"` series (series `"residual"`).
pub fn master_differential_residual(
    s: &Trajectory,
    spec: &ContinuousModelSpec,
) -> Result<Trajectory> {
    let grid = *s.grid();
    spec.check_alignment(&grid)?;
    let values = s.values("S");
    let ds = finite_difference(values, grid.step());
    let kernel = spec.gamma_kernel(&grid)?;
    let residual = (0..grid.len())
        .map(|k| {
            let t = grid.time(k);
            ds[k] / values[k] + spec.lambda.value(t) + spec.i0() * kernel.right(k)
                - kernel.convolve(k, &ds)
        })
        .collect();
    Ok(Trajectory::new(grid).with_series("residual", residual))
}

/// The two differential forms of the master equation for `γ_t = ε e^{-μt}`,
/// with `S` taken piecewise linear between nodes and every convolution
/// integrated exactly. Series `"direct"`:
/// `-λ_t - (1 - S_t)γ_0 - ∫₀ᵗ (1 - S_u) γ'_{t-u} du`; series
/// `"by_parts"`: `-λ_t - (1 - S_0)γ_t + ∫₀ᵗ S'_u γ_{t-u} du`. Both equal
/// `S'_t / S_t`, and integration by parts makes them agree to rounding.
pub fn master_differential_forms_exponential(
    s: &Trajectory,
    spec: &ContinuousModelSpec,
) -> Result<Trajectory> {
    let eps = spec.eps.as_constant().ok_or_else(|| {
        Error::param(
            "eps",
            "exact differential forms need a constant infection rate",
        )
    })?;
    let mu = match spec.recovery {
        RecoveryDistribution::Exponential { rate } => rate,
        RecoveryDistribution::Never => 0.0,
        _ => {
            return Err(Error::param(
                "recovery",
                "exact differential forms need exponential recovery",
            ))
        }
    };
    let grid = *s.grid();
    let h = grid.step();
    let values = s.values("S");
    let decay = (-mu * h).exp();
    // ∫₀ʰ e^{-μ(h-x)} dx and ∫₀ʰ x e^{-μ(h-x)} dx
    let (e0, e1) = if mu == 0.0 {
        (h, 0.5 * h * h)
    } else {
        let e0 = -(-mu * h).exp_m1() / mu;
        (e0, (h - e0) / mu)
    };
    let s0 = spec.s0;
    let mut direct = Vec::with_capacity(grid.len());
    let mut by_parts = Vec::with_capacity(grid.len());
    // running ∫ (1 - S_u) e^{-μ(t-u)} du and ∫ S'_u e^{-μ(t-u)} du
    let (mut j, mut q) = (0.0, 0.0);
    for k in 0..grid.len() {
        if k > 0 {
            let (a, b) = (1.0 - values[k - 1], 1.0 - values[k]);
            j = decay * j + a * e0 + (b - a) / h * e1;
            q = decay * q + (values[k] - values[k - 1]) / h * e0;
        }
        let t = grid.time(k);
        let lam = spec.lambda.value(t);
        direct.push(-lam - (1.0 - values[k]) * eps + mu * eps * j);
        by_parts.push(-lam - (1.0 - s0) * eps * (-mu * t).exp() + eps * q);
    }
    Ok(Trajectory::new(grid)
        .with_series("direct", direct)
        .with_series("by_parts", by_parts))
}

/// Cell slopes of the piecewise-linear interpolant of `S` and the
/// increments `B(t_i) - B(t_{i-1})` of `B(t) = ∫₀ᵗ β`.
fn slopes_and_tail_increments(
    s: &Trajectory,
    beta: &RecoveryDistribution,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let grid = s.grid();
    let values = s
        .get("S")
        .ok_or_else(|| Error::Consistency("trajectory has no `S` series".into()))?;
    let h = grid.step();
    let slopes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut tail = Vec::with_capacity(grid.len());
    let mut increments = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    increments.push(0.0);
    for t in grid.times() {
        tail.push(beta.tail(t)?);
        let b = beta.tail_integral(t)?;
        if t > 0.0 {
            increments.push(b - prev);
        }
        prev = b;
    }
    Ok((slopes, tail, increments))
}

/// `Σ_j slope_j ∫_{cell j} β_{t_k - u} du` for every node `k`.
fn tail_convolution(slopes: &[f64], increments: &[f64]) -> Vec<f64> {
    let m = increments.len();
    let mut out = vec![0.0; m];
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        // cell j = [t_{j-1}, t_j] sees lags in [t_{k-j}, t_{k-j+1}]
        *o = slopes[..k]
            .iter()
            .zip(increments[1..=k].iter().rev())
            .map(|(a, b)| a * b)
            .sum();
    }
    out
}

fn check_nonnegative(name: &str, values: &[f64]) -> Result<()> {
    match values
        .iter()
        .position(|&v| v < -CONSERVATION_TOL || !v.is_finite())
    {
        Some(k) => Err(Error::Consistency(format!(
            "{name} = {} at node {k} is negative beyond tolerance",
            values[k]
        ))),
        None => Ok(()),
    }
}

/// `I_t = I_0 β_t - ∫₀ᵗ S'_u β_{t-u} du` (series `"I"`), with `S` the
/// piecewise-linear interpolant of the `"S"` series.
pub fn infected_trajectory(
    s: &Trajectory,
    beta: &RecoveryDistribution,
    i0: f64,
) -> Result<Trajectory> {
    let (slopes, tail, increments) = slopes_and_tail_increments(s, beta)?;
    let conv = tail_convolution(&slopes, &increments);
    let values: Vec<f64> = tail.iter().zip(&conv).map(|(b, c)| i0 * b - c).collect();
    check_nonnegative("I", &values)?;
    Ok(Trajectory::new(*s.grid()).with_series("I", values))
}

/// `R_t = I_0 (1 - β_t) - ∫₀ᵗ S'_u (1 - β_{t-u}) du` (series `"R"`).
///
/// The `∫ S'` part telescopes to `S_t - S_0` exactly, so
/// `S + I + R = S_0 + I_0` holds up to a few roundings.
pub fn recovered_trajectory(
    s: &Trajectory,
    beta: &RecoveryDistribution,
    i0: f64,
) -> Result<Trajectory> {
    let (slopes, tail, increments) = slopes_and_tail_increments(s, beta)?;
    let conv = tail_convolution(&slopes, &increments);
    let values = s.values("S");
    let s0 = values[0];
    let r: Vec<f64> = (0..values.len())
        .map(|k| (i0 - i0 * tail[k]) + (s0 - values[k]) + conv[k])
        .collect();
    check_nonnegative("R", &r)?;
    Ok(Trajectory::new(*s.grid()).with_series("R", r))
}

/// Fails unless `S + I + R = 1` and `I, R >= 0` within [`CONSERVATION_TOL`].
pub fn check_conservation(traj: &Trajectory) -> Result<()> {
    let (s, i, r) = (traj.values("S"), traj.values("I"), traj.values("R"));
    check_nonnegative("I", i)?;
    check_nonnegative("R", r)?;
    for k in 0..s.len() {
        let total = s[k] + i[k] + r[k];
        if (total - 1.0).abs() > CONSERVATION_TOL {
            return Err(Error::Consistency(format!(
                "S + I + R = {total} at node {k}"
            )));
        }
    }
    Ok(())
}

/// `S` from [`solve_master`] with `I`, `R` derived from it.
pub fn solve_compartments(spec: &ContinuousModelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    let s = solve_master(spec, grid)?;
    let i = infected_trajectory(&s, &spec.recovery, spec.i0())?;
    let r = recovered_trajectory(&s, &spec.recovery, spec.i0())?;
    let out = s.merge(i).merge(r);
    check_conservation(&out)?;
    Ok(out)
}

fn check_rate(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and non-negative, got {v}"),
        ))
    }
}

fn check_proportion(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in [0, 1], got {v}")))
    }
}

/// RK4 for `S' = -εSI`, `I' = εSI - μI`, `R' = μI` (series `"S"`, `"I"`, `"R"`).
pub fn classic_sir_oracle(
    eps: f64,
    mu: f64,
    s0: f64,
    i0: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_rate("eps", eps)?;
    check_rate("mu", mu)?;
    check_proportion("s0", s0)?;
    check_proportion("i0", i0)?;
    if s0 + i0 > 1.0 + CONSERVATION_TOL {
        return Err(Error::param(
            "i0",
            format!("S0 + I0 = {} exceeds 1", s0 + i0),
        ));
    }
    let rhs = |_: f64, y: &[f64; 3]| {
        let infection = eps * y[0] * y[1];
        let recovery = mu * y[1];
        [-infection, infection - recovery, recovery]
    };
    let ys = rk4_grid(rhs, [s0, i0, 1.0 - s0 - i0], grid.step(), grid.len());
    let pick = |c: usize| ys.iter().map(|y| y[c]).collect::<Vec<_>>();
    Ok(Trajectory::new(*grid)
        .with_series("S", pick(0))
        .with_series("I", pick(1))
        .with_series("R", pick(2)))
}

/// RK4 for `S' = -S(ε(1 - S) + μ log(S / S_0))` (series `"S"`).
pub fn classic_master_form(s0: f64, eps: f64, mu: f64, grid: &TimeGrid) -> Result<Trajectory> {
    check_rate("eps", eps)?;
    check_rate("mu", mu)?;
    if !(s0 > 0.0 && s0 <= 1.0) {
        return Err(Error::param("s0", format!("must lie in (0, 1], got {s0}")));
    }
    let rhs = |s: f64| -s * (eps * (1.0 - s) + mu * (s / s0).ln());
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len());
    out.push(s0);
    for k in 1..grid.len() {
        let y = rk4_step(
            |_, y: &[f64; 1]| [rhs(y[0])],
            grid.time(k - 1),
            &[out[k - 1]],
            h,
        )[0];
        if !(y > 0.0) {
            return Err(Error::Underflow {
                node: k,
                reason: "susceptible proportion reached zero",
            });
        }
        out.push(y);
    }
    Ok(Trajectory::new(*grid).with_series("S", out))
}

/// Root of the stationary equation.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub s_inf: f64,
    /// `|F(S_∞)|` for `F(S) = log(S/S_0) + Λ_∞ + (1 - S)Γ_∞`.
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// Smallest root in `(0, S_0)` of `log(S/S_0) + ∫₀^∞ λ + (1 - S)∫₀^∞ γ = 0`.
///
/// `F` is concave with `F(0+) = -∞` and `F(S_0) >= 0`, so the first sign
/// change of a log-spaced scan brackets the root a decreasing trajectory
/// reaches; bisection then runs to machine precision.
pub fn stationary_state(spec: &ContinuousModelSpec) -> Result<StationaryReport> {
    let big_lambda = spec.lambda.total_integral().ok_or_else(|| {
        Error::param(
            "lambda",
            "self-infection has infinite total mass, so S tends to 0",
        )
    })?;
    let big_gamma = ratekit::gamma_total(&spec.eps, &spec.recovery)?
        .ok_or_else(|| Error::param("eps", "∫₀^∞ γ diverges, no stationary state"))?;
    let s0 = spec.s0;
    let f = |s: f64| (s / s0).ln() + big_lambda + (1.0 - s) * big_gamma;

    // F(S_0 e^{-(Λ+Γ)-1}) = -1 - SΓ < 0, so this end always lies below the root
    let lo_end = (s0 * (-(big_lambda + big_gamma) - 1.0).exp()).min(STATIONARY_FLOOR);
    if !(lo_end >= f64::MIN_POSITIVE) {
        return Err(Error::Underflow {
            node: 0,
            reason: "stationary susceptible proportion is below the smallest normal double",
        });
    }
    let hi_end = s0 - STATIONARY_FLOOR;
    if !(hi_end > lo_end) {
        return Err(Error::NoInteriorRoot { lo: lo_end, hi: s0 });
    }
    let ratio = (hi_end / lo_end).ln();
    let point = |i: usize| {
        if i == STATIONARY_SCAN {
            hi_end
        } else {
            lo_end * (ratio * i as f64 / STATIONARY_SCAN as f64).exp()
        }
    };
    if f(lo_end) >= 0.0 {
        return Err(Error::NoInteriorRoot { lo: lo_end, hi: s0 });
    }
    let upper = (1..=STATIONARY_SCAN).find(|&i| f(point(i)) >= 0.0);
    let Some(i) = upper else {
        return Err(Error::NoInteriorRoot { lo: lo_end, hi: s0 });
    };
    let (mut lo, mut hi) = (point(i - 1), point(i));
    let mut iterations = 0;
    while iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let s_inf = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    Ok(StationaryReport {
        s_inf,
        residual: f(s_inf).abs(),
        iterations,
        bracket: (lo, hi),
    })
}

/// What `I_u` means for `u < 0` in the latent model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatentHistory {
    /// `I_u = 0`: the initially infected become contagious at `L`, which
    /// is the master equation with `γ_t = ε 1{t >= L}`.
    #[default]
    Zero,
    /// `I_u = I_0`: the initially infected are contagious from time 0.
    Initial,
}

/// Method of steps for `S'_t = -ε S_t I_{t-L}`, `I = 1 - S`
/// (series `"S"`, `"I"`).
pub fn latent_model_solve(
    eps: f64,
    latency: f64,
    s0: f64,
    grid: &TimeGrid,
    history: LatentHistory,
) -> Result<Trajectory> {
    check_rate("eps", eps)?;
    if !(s0 > 0.0 && s0 <= 1.0) {
        return Err(Error::param("s0", format!("must lie in (0, 1], got {s0}")));
    }
    if !(latency >= 0.0 && latency.is_finite()) {
        return Err(Error::param(
            "latency",
            format!("must be non-negative, got {latency}"),
        ));
    }
    let h = grid.step();
    let m = grid.len();
    let i_hist = match history {
        LatentHistory::Zero => 0.0,
        LatentHistory::Initial => 1.0 - s0,
    };
    let mut s = Vec::with_capacity(m);
    s.push(s0);
    if latency == 0.0 {
        let ys = rk4_grid(|_, y: &[f64; 1]| [-eps * y[0] * (1.0 - y[0])], [s0], h, m);
        s = ys.into_iter().map(|y| y[0]).collect();
    } else {
        let lag = if latency > grid.horizon() {
            usize::MAX
        } else {
            grid.require_node("latency", latency)?
        };
        // right derivative of S at each node
        let mut ds = Vec::with_capacity(m);
        let delayed_at = |k: usize, s: &[f64]| if k >= lag { 1.0 - s[k - lag] } else { i_hist };
        ds.push(-eps * s0 * delayed_at(0, &s));
        for k in 1..m {
            let (d0, d_mid, d1) = if k - 1 < lag {
                (i_hist, i_hist, i_hist)
            } else {
                let j = k - 1 - lag;
                let mid = hermite_mid(s[j], ds[j], s[j + 1], ds[j + 1], h);
                (1.0 - s[j], 1.0 - mid, 1.0 - s[j + 1])
            };
            let y = s[k - 1];
            let k1 = -eps * y * d0;
            let k2 = -eps * (y + 0.5 * h * k1) * d_mid;
            let k3 = -eps * (y + 0.5 * h * k2) * d_mid;
            let k4 = -eps * (y + h * k3) * d1;
            let next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s.push(next);
            ds.push(-eps * next * delayed_at(k, &s));
        }
    }
    let i = s.iter().map(|v| 1.0 - v).collect();
    Ok(Trajectory::new(*grid)
        .with_series("S", s)
        .with_series("I", i))
}

/// `S' = -εSI`, `I' = εSI - εS_{t-H}I_{t-H}`, `R' = εS_{t-H}I_{t-H}` with
/// zero history, plus the initial cohort `I_0` moving from `I` to `R` at
/// `t = H` (series `"S"`, `"I"`, `"R"`).
///
/// Without the cohort transfer the initially infected would never recover;
/// with it the solution coincides with the master equation for
/// `γ_t = ε 1{t < H}`.
pub fn deterministic_recovery_continuum_solve(
    eps: f64,
    duration: f64,
    s0: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_rate("eps", eps)?;
    if !(s0 > 0.0 && s0 <= 1.0) {
        return Err(Error::param("s0", format!("must lie in (0, 1], got {s0}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::param(
            "duration",
            format!("must be positive, got {duration}"),
        ));
    }
    let lag = if duration > grid.horizon() {
        usize::MAX
    } else {
        grid.require_node("recovery time", duration)?
    };
    let i0 = 1.0 - s0;
    let h = grid.step();
    let m = grid.len();

    // Node values: S is continuous, I and R jump at t = H; derivatives jump
    // at multiples of H. Left and right limits are kept separately.
    let mut s = vec![s0; m];
    let mut i_left = vec![i0; m];
    let mut i_right = vec![i0; m];
    let mut r_left = vec![0.0; m];
    let mut r_right = vec![0.0; m];
    // εSI from the left / right, and the derivatives of S and I
    let mut p_left = vec![0.0; m];
    let mut p_right = vec![0.0; m];
    let mut ds_left = vec![0.0; m];
    let mut ds_right = vec![0.0; m];
    let mut di_left = vec![0.0; m];
    let mut di_right = vec![0.0; m];

    let delayed = |k: usize, p: &[f64]| if k >= lag { p[k - lag] } else { 0.0 };
    let fill = |k: usize,
                s: &[f64],
                il: &[f64],
                ir: &[f64],
                pl: &mut [f64],
                pr: &mut [f64],
                dsl: &mut [f64],
                dsr: &mut [f64],
                dil: &mut [f64],
                dir: &mut [f64]| {
        pl[k] = if k == 0 { 0.0 } else { eps * s[k] * il[k] };
        pr[k] = eps * s[k] * ir[k];
        dsl[k] = -pl[k];
        dsr[k] = -pr[k];
        dil[k] = pl[k] - delayed(k, pl);
        dir[k] = pr[k] - delayed(k, pr);
    };
    fill(
        0,
        &s,
        &i_left,
        &i_right,
        &mut p_left,
        &mut p_right,
        &mut ds_left,
        &mut ds_right,
        &mut di_left,
        &mut di_right,
    );

    for k in 1..m {
        let (q0, q_mid, q1) = if k - 1 < lag {
            (0.0, 0.0, 0.0)
        } else {
            let j = k - 1 - lag;
            let sm = hermite_mid(s[j], ds_right[j], s[j + 1], ds_left[j + 1], h);
            let im = hermite_mid(i_right[j], di_right[j], i_left[j + 1], di_left[j + 1], h);
            (p_right[j], eps * sm * im, p_left[j + 1])
        };
        let f = |y: &[f64; 3], q: f64| {
            let p = eps * y[0] * y[1];
            [-p, p - q, q]
        };
        let y0 = [s[k - 1], i_right[k - 1], r_right[k - 1]];
        let axpy = |y: &[f64; 3], d: &[f64; 3], c: f64| {
            [y[0] + c * d[0], y[1] + c * d[1], y[2] + c * d[2]]
        };
        let k1 = f(&y0, q0);
        let k2 = f(&axpy(&y0, &k1, 0.5 * h), q_mid);
        let k3 = f(&axpy(&y0, &k2, 0.5 * h), q_mid);
        let k4 = f(&axpy(&y0, &k3, h), q1);
        let mut y = y0;
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        s[k] = y[0];
        i_left[k] = y[1];
        r_left[k] = y[2];
        if k == lag {
            i_right[k] = y[1] - i0;
            r_right[k] = y[2] + i0;
        } else {
            i_right[k] = y[1];
            r_right[k] = y[2];
        }
        fill(
            k,
            &s,
            &i_left,
            &i_right,
            &mut p_left,
            &mut p_right,
            &mut ds_left,
            &mut ds_right,
            &mut di_left,
            &mut di_right,
        );
    }
    Ok(Trajectory::new(*grid)
        .with_series("S", s)
        .with_series("I", i_right)
        .with_series("R", r_right))
}

/// Max-norm distances from a family of finite-degree curves to a limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub n_list: Vec<u32>,
    pub distances: Vec<f64>,
}

impl ConvergenceReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    /// `log2(d_i / d_{i+1}) / log2(n_{i+1} / n_i)`: empirical convergence
    /// order in `n` between consecutive entries.
    pub fn orders(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .zip(self.n_list.windows(2))
            .map(|(d, n)| (d[0] / d[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
            .collect()
    }
}

fn check_n_list(n_list: &[u32]) -> Result<()> {
    if n_list.is_empty() || n_list[0] < 1 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "n_list",
            "must be a non-empty strictly increasing list of n >= 1",
        ));
    }
    Ok(())
}

/// Distance between `S_{t,n} = (1 - p) f_t s_t^{n+1}` with per-edge rate
/// `ε/(n+1)` and the master-equation solution with `S_0 = 1 - p`.
pub fn finite_n_convergence(
    eps: &RateFunction,
    lambda: &RateFunction,
    recovery: &RecoveryDistribution,
    p: f64,
    grid: &TimeGrid,
    n_list: &[u32],
) -> Result<(ConvergenceReport, Trajectory)> {
    check_n_list(n_list)?;
    let master_spec =
        ContinuousModelSpec::new(eps.clone(), recovery.clone(), lambda.clone(), 1.0 - p)?;
    let limit = solve_master(&master_spec, grid)?;
    let mut distances = Vec::with_capacity(n_list.len());
    let mut out = limit.clone();
    for &n in n_list {
        let spec = DiscreteModelSpec::new(n, p, eps.clone(), lambda.clone(), recovery.clone())?
            .with_scaled_eps()?;
        let finite = discrete::survival_curve(&spec, grid)?.into_values("survival");
        distances.push(max_abs_diff(&finite, limit.values("S")));
        out.push(&format!("S_n{n}"), finite);
    }
    Ok((
        ConvergenceReport {
            n_list: n_list.to_vec(),
            distances,
        },
        out,
    ))
}

/// Distance between `P(τ <= t)` for per-edge rate `c/n` (with `p = 0`) and
/// the logistic limit curve.
pub fn logistic_convergence(
    c: f64,
    lambda: f64,
    grid: &TimeGrid,
    n_list: &[u32],
) -> Result<(ConvergenceReport, Trajectory)> {
    check_n_list(n_list)?;
    let limit = discrete::logistic_limit_curve(c, lambda, grid)?;
    let mut distances = Vec::with_capacity(n_list.len());
    let mut out = limit.clone();
    for &n in n_list {
        let spec = DiscreteModelSpec::new(
            n,
            0.0,
            RateFunction::constant(c / n as f64)?,
            RateFunction::constant(lambda)?,
            RecoveryDistribution::Never,
        )?;
        let infected: Vec<f64> = discrete::survival_curve(&spec, grid)?
            .values("survival")
            .iter()
            .map(|v| 1.0 - v)
            .collect();
        distances.push(max_abs_diff(&infected, limit.values("infected")));
        out.push(&format!("infected_n{n}"), infected);
    }
    Ok((
        ConvergenceReport {
            n_list: n_list.to_vec(),
            distances,
        },
        out,
    ))
}
