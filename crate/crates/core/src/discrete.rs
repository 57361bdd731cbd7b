//! Time to infection on a homogeneous tree of degree `n + 1`.
//!
//! A susceptible vertex survives to `t` with probability
//! `P(τ > t) = (1 - p) f_t s_t^{n+1}` where `s` solves
//!
//! ```text
//! s_t = φ_t - (1 - p) ∫₀ᵗ f_u s_u^n φ'_{t-u} du.
//! ```
//!
//! [`solve_s`] integrates this equation by trapezoidal product integration
//! with a scalar fixed-point correction at every node. The remaining
//! functions are the special cases in which the equation collapses to a
//! closed form, a Bernoulli ODE or a delay equation; they serve as oracles.

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trajectory};
use crate::ode::{hermite_mid, rk4_grid, rk4_step};
use crate::ratekit::{self, RateFunction, RecoveryDistribution};
use crate::volterra::LagKernel;

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 50;

/// Distance outside `[0, 1]` treated as rounding rather than counted as a clamp.
const CLAMP_SLACK: f64 = 1e-12;

/// Parameters of the discrete model. The tree has degree `n + 1`; every
/// vertex is initially infected with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModelSpec {
    n: u32,
    p: f64,
    eps: RateFunction,
    lambda: RateFunction,
    recovery: RecoveryDistribution,
}

impl DiscreteModelSpec {
    pub fn new(
        n: u32,
        p: f64,
        eps: RateFunction,
        lambda: RateFunction,
        recovery: RecoveryDistribution,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("n", "the tree degree n + 1 needs n >= 1"));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(
                "p",
                format!("initial infection probability must lie in [0, 1) since τ is defined for a susceptible vertex, got {p}"),
            ));
        }
        Ok(DiscreteModelSpec {
            n,
            p,
            eps,
            lambda,
            recovery,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> &RateFunction {
        &self.eps
    }

    pub fn lambda(&self) -> &RateFunction {
        &self.lambda
    }

    pub fn recovery(&self) -> &RecoveryDistribution {
        &self.recovery
    }

    /// The same model with the per-edge rate divided by `n + 1`.
    pub fn with_scaled_eps(&self) -> Result<Self> {
        let mut out = self.clone();
        out.eps = self.eps.scaled(1.0 / (self.n as f64 + 1.0))?;
        Ok(out)
    }

    /// Jumps of `φ'` inside `(0, T]` must sit on grid nodes.
    pub fn check_alignment(&self, grid: &TimeGrid) -> Result<()> {
        for t in self
            .eps
            .discontinuities()
            .into_iter()
            .chain(self.recovery.discontinuities())
        {
            if t <= grid.horizon() {
                grid.require_node("jump of the transmission kernel", t)?;
            }
        }
        Ok(())
    }
}

/// Output of [`solve_s_detailed`].
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub s: Vec<f64>,
    /// Nodes at which the quadrature pushed `s` outside `[0, 1]` by more than
    /// rounding before it was projected back. Near `s = 1` this happens by
    /// the local truncation error, `O(h³)`, and is harmless; a large count
    /// away from 1 means the step is too coarse.
    pub clamped_nodes: usize,
    pub max_iterations: usize,
}

/// `s_t` on `grid` (series `"s"`).
pub fn solve_s(spec: &DiscreteModelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    let sol = solve_s_detailed(spec, grid)?;
    Ok(Trajectory::new(*grid).with_series("s", sol.s))
}

pub fn solve_s_detailed(spec: &DiscreteModelSpec, grid: &TimeGrid) -> Result<DiscreteSolution> {
    spec.check_alignment(grid)?;
    let (eps, rec) = (&spec.eps, &spec.recovery);
    let phi = ratekit::neighbor_survival_on_grid(eps, rec, grid)?;
    let dphi = LagKernel::build(
        grid,
        |t| ratekit::neighbor_survival_derivative(eps, rec, t),
        |t| ratekit::neighbor_survival_derivative_left(eps, rec, t),
    )?;
    let f: Vec<f64> = grid
        .times()
        .map(|t| ratekit::self_survival(&spec.lambda, t))
        .collect();

    let m = grid.len();
    let n = spec.n as i32;
    let q = 1.0 - spec.p;
    let mut s: Vec<f64> = Vec::with_capacity(m);
    // g_u = f_u s_u^n
    let mut g = Vec::with_capacity(m);
    s.push(1.0);
    g.push(f[0]);
    let mut clamped = 0;
    let mut max_iter = 0;

    for k in 1..m {
        let base = phi[k] - q * dphi.history(k, &g);
        // s = base + a s^n, a >= 0 since φ'(0) <= 0
        let a = -q * dphi.endpoint_weight() * f[k];
        let mut x = s[k - 1];
        let mut converged = false;
        for it in 1..=FIXED_POINT_MAX_ITER {
            let next = base + a * x.powi(n);
            let delta = (next - x).abs();
            x = next;
            if delta <= FIXED_POINT_TOL {
                max_iter = max_iter.max(it);
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() {
            return Err(Error::NonConvergence {
                node: k,
                t: grid.time(k),
                iterations: FIXED_POINT_MAX_ITER,
            });
        }
        // excursions at rounding level are snapped without being counted
        if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&x) {
            clamped += 1;
        }
        x = x.clamp(0.0, 1.0);
        s.push(x);
        g.push(f[k] * x.powi(n));
    }
    Ok(DiscreteSolution {
        s,
        clamped_nodes: clamped,
        max_iterations: max_iter,
    })
}

/// `s_t` and `P(τ > t) = (1 - p) f_t s_t^{n+1}` (series `"s"`, `"survival"`).
pub fn survival_curve(spec: &DiscreteModelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    let s = solve_s(spec, grid)?.into_values("s");
    let survival = survival_from_s(spec, grid, &s);
    Ok(Trajectory::new(*grid)
        .with_series("s", s)
        .with_series("survival", survival))
}

/// `(1 - p) f_t s_t^{n+1}` from `s` on `grid`.
pub fn survival_from_s(spec: &DiscreteModelSpec, grid: &TimeGrid, s: &[f64]) -> Vec<f64> {
    let q = 1.0 - spec.p;
    let exponent = spec.n as i32 + 1;
    grid.times()
        .zip(s)
        .map(|(t, &x)| q * ratekit::self_survival(&spec.lambda, t) * x.powi(exponent))
        .collect()
}

fn check_const_rate(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and non-negative, got {v}"),
        ))
    }
}

/// `ln(e^a + e^b)`.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Exact `s_t` and `P(τ > t)` without recovery, constant `ε, λ > 0`, `p = 0`.
///
/// For `n >= 2`: `s_t = ((ε(n-1)+λ) / (ε(n-1)e^{-λt} + λe^{ε(n-1)t}))^{1/(n-1)}`;
/// for `n = 1`: `s_t = exp(-(ε/λ)(e^{-λt} - 1 + λt))`. Evaluated in log space.
pub fn closed_form_no_recovery(
    n: u32,
    eps: f64,
    lambda: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if n < 1 {
        return Err(Error::param("n", "closed form needs n >= 1"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param(
            "eps",
            format!("closed form needs a positive rate, got {eps}"),
        ));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("closed form needs a positive rate, got {lambda}"),
        ));
    }
    let log_s = |t: f64| -> f64 {
        if n == 1 {
            -(eps / lambda) * ((-lambda * t).exp_m1() + lambda * t)
        } else {
            let a = eps * (n - 1) as f64;
            let num = (a + lambda).ln();
            let den = log_add_exp(a.ln() - lambda * t, lambda.ln() + a * t);
            (num - den) / (n - 1) as f64
        }
    };
    let (s, survival): (Vec<f64>, Vec<f64>) = grid
        .times()
        .map(|t| {
            let ls = log_s(t);
            (ls.exp(), (-lambda * t + (n + 1) as f64 * ls).exp())
        })
        .unzip();
    Ok(Trajectory::new(*grid)
        .with_series("s", s)
        .with_series("survival", survival))
}

/// RK4 for `s' = -εs + εe^{-λt}s^n`, `s_0 = 1`.
pub fn bernoulli_ode_solve(n: u32, eps: f64, lambda: f64, grid: &TimeGrid) -> Result<Trajectory> {
    exponential_recovery_ode_solve(n, eps, lambda, 0.0, grid)
}

/// RK4 for `s' = -(μ+ε)s + εe^{-λt}s^n + μ`, `s_0 = 1`.
pub fn exponential_recovery_ode_solve(
    n: u32,
    eps: f64,
    lambda: f64,
    mu: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if n < 1 {
        return Err(Error::param("n", "needs n >= 1"));
    }
    check_const_rate("eps", eps)?;
    check_const_rate("lambda", lambda)?;
    check_const_rate("mu", mu)?;
    let ni = n as i32;
    let rhs = |t: f64, y: &[f64; 1]| {
        [-(mu + eps) * y[0] + eps * (-lambda * t).exp() * y[0].powi(ni) + mu]
    };
    let s = rk4_grid(rhs, [1.0], grid.step(), grid.len())
        .into_iter()
        .map(|y| y[0])
        .collect();
    Ok(Trajectory::new(*grid).with_series("s", s))
}

/// Right-hand side of the deterministic-recovery delay equation.
/// `delayed` is `s_{t-H}` and is ignored while `t <= H`.
pub fn deterministic_recovery_rhs(
    n: u32,
    eps: f64,
    lambda: f64,
    duration: f64,
    t: f64,
    s: f64,
    delayed: f64,
) -> f64 {
    let ni = n as i32;
    let plain = -eps * s + eps * (-lambda * t).exp() * s.powi(ni);
    if t <= duration {
        plain
    } else {
        plain + eps * (-eps * duration).exp()
            - eps * (-lambda * (t - duration) - eps * duration).exp() * delayed.powi(ni)
    }
}

/// Method of steps for the deterministic-recovery delay equation.
///
/// On `[0, H]` the equation is the plain Bernoulli ODE; afterwards the terms
/// `εe^{-εH} - εe^{-λ(t-H)-εH} s_{t-H}^n` are added. `H` must be a multiple
/// of the step; the delayed value at RK4 half steps comes from cubic Hermite
/// interpolation of the stored solution.
pub fn deterministic_recovery_dde_solve(
    n: u32,
    eps: f64,
    lambda: f64,
    duration: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if n < 1 {
        return Err(Error::param("n", "needs n >= 1"));
    }
    check_const_rate("eps", eps)?;
    check_const_rate("lambda", lambda)?;
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
    let h = grid.step();
    let rhs = |t: f64, s: f64, delayed: f64| {
        deterministic_recovery_rhs(n, eps, lambda, duration, t, s, delayed)
    };

    let m = grid.len();
    let mut s = vec![1.0; m];
    let mut ds = vec![0.0; m];
    ds[0] = rhs(0.0, 1.0, 1.0);
    for k in 1..m {
        let t = grid.time(k - 1);
        let y = if k - 1 < lag {
            rk4_step(|tt, y: &[f64; 1]| [rhs(tt, y[0], 1.0)], t, &[s[k - 1]], h)[0]
        } else {
            // delayed arguments at t - H, t - H + h/2 and t - H + h
            let j = k - 1 - lag;
            let d0 = s[j];
            let d_mid = hermite_mid(s[j], ds[j], s[j + 1], ds[j + 1], h);
            let d1 = s[j + 1];
            let k1 = rhs(t, s[k - 1], d0);
            let k2 = rhs(t + 0.5 * h, s[k - 1] + 0.5 * h * k1, d_mid);
            let k3 = rhs(t + 0.5 * h, s[k - 1] + 0.5 * h * k2, d_mid);
            let k4 = rhs(t + h, s[k - 1] + h * k3, d1);
            s[k - 1] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        s[k] = y;
        let tk = grid.time(k);
        let delayed = if k >= lag { s[k - lag] } else { 1.0 };
        ds[k] = rhs(tk, y, delayed);
    }
    Ok(Trajectory::new(*grid).with_series("s", s))
}

/// Large-degree limit of `P(τ <= t)` when `n ε_n → c`:
/// `(1 + λ/c) / (1 + (c/λ) e^{-(c+λ)t}) - λ/c` (series `"infected"`).
pub fn logistic_limit_curve(c: f64, lambda: f64, grid: &TimeGrid) -> Result<Trajectory> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("the logistic limit degenerates unless λ > 0, got {lambda}"),
        ));
    }
    let r = lambda / c;
    let values = grid
        .times()
        .map(|t| (1.0 + r) / (1.0 + (-(c + lambda) * t).exp() / r) - r)
        .collect();
    Ok(Trajectory::new(*grid).with_series("infected", values))
}
