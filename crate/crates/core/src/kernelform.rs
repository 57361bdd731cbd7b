//! Kernel form of the compartment equations.
//!
//! For a function `g` of lag and the recovery tail `β`, the kernel `𝒦(g)` is
//! the inverse Laplace transform of `L{g} / L{β}`. With it the compartments
//! evolve as
//!
//! ```text
//! S' = -S (λ + ∫₀ᵗ I_u 𝒦(γ)_{t-u} du)
//! I' =  S (λ + ∫₀ᵗ I_u 𝒦(γ)_{t-u} du) - ∫₀ᵗ I_u 𝒦(-β')_{t-u} du
//! R' =  ∫₀ᵗ I_u 𝒦(-β')_{t-u} du
//! ```
//!
//! Kernels come from a small analytic catalog; ratios of transforms are
//! never inverted numerically.

use std::fmt;

use crate::continuum::ContinuousModelSpec;
use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Trajectory};
use crate::ode::rk4_grid;
use crate::ratekit::RecoveryDistribution;

/// The numerator `g` of the transform ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSource {
    /// `γ_t = ε β_t` with constant `ε`.
    Gamma { eps: f64 },
    /// `-β'_t`, the density of the recovery time.
    RecoveryDensity,
}

impl fmt::Display for KernelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSource::Gamma { eps } => write!(f, "γ = {eps}·β"),
            KernelSource::RecoveryDensity => write!(f, "-β'"),
        }
    }
}

/// Absolutely continuous part of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPart {
    Zero,
    /// Values at lags `0, step, 2·step, …`; zero past the table.
    Tabulated {
        step: f64,
        values: Vec<f64>,
    },
}

/// `𝒦 = atom·δ_0 + smooth`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRepresentation {
    pub atom: f64,
    pub smooth: SmoothPart,
    /// The `(g, β)` pair the kernel was built from.
    pub provenance: String,
}

impl KernelRepresentation {
    pub fn is_atomic(&self) -> bool {
        matches!(self.smooth, SmoothPart::Zero)
    }

    /// `∫₀^{t_k} x_u 𝒦_{t_k - u} du` for a series `x` on a uniform grid;
    /// the smooth part is integrated by the trapezoid rule and must be
    /// tabulated on the same step.
    pub fn convolve(&self, x: &[f64], step: f64, k: usize) -> Result<f64> {
        let point = self.atom * x[k];
        match &self.smooth {
            SmoothPart::Zero => Ok(point),
            SmoothPart::Tabulated { step: ks, values } => {
                if (ks - step).abs() > 1e-12 * step {
                    return Err(Error::UnsupportedKernel(format!(
                        "kernel tabulated with step {ks} convolved on step {step}"
                    )));
                }
                let kernel = |lag: usize| values.get(lag).copied().unwrap_or(0.0);
                if k == 0 {
                    return Ok(point);
                }
                let interior: f64 = (1..k).map(|i| x[i] * kernel(k - i)).sum();
                let acc = 0.5 * (x[0] * kernel(k) + x[k] * kernel(0)) + interior;
                Ok(point + step * acc)
            }
        }
    }
}

/// `𝒦(g)` for the pairs with an exact transform ratio:
///
/// | `β`             | `g`        | kernel   |
/// |-----------------|------------|----------|
/// | `e^{-μt}`       | `εβ`       | `ε δ_0`  |
/// | `e^{-μt}`       | `-β'`      | `μ δ_0`  |
/// | `1{t < H}`      | `εβ`       | `ε δ_0`  |
/// | `1` (never)     | `εβ`       | `ε δ_0`  |
/// | `1` (never)     | `-β' = 0`  | `0`      |
pub fn kernel_of(g: KernelSource, beta: &RecoveryDistribution) -> Result<KernelRepresentation> {
    let atom = match (g, beta) {
        (KernelSource::Gamma { eps }, RecoveryDistribution::Exponential { .. })
        | (KernelSource::Gamma { eps }, RecoveryDistribution::Deterministic { .. })
        | (KernelSource::Gamma { eps }, RecoveryDistribution::Never) => eps,
        (KernelSource::RecoveryDensity, RecoveryDistribution::Exponential { rate }) => *rate,
        (KernelSource::RecoveryDensity, RecoveryDistribution::Never) => 0.0,
        _ => {
            return Err(Error::UnsupportedKernel(format!(
                "g = {g} with recovery {}",
                describe(beta)
            )))
        }
    };
    if !(atom >= 0.0 && atom.is_finite()) {
        return Err(Error::param(
            "eps",
            format!("kernel atom must be non-negative, got {atom}"),
        ));
    }
    Ok(KernelRepresentation {
        atom,
        smooth: SmoothPart::Zero,
        provenance: format!("g = {g}, β = {}", describe(beta)),
    })
}

fn describe(beta: &RecoveryDistribution) -> String {
    match beta {
        RecoveryDistribution::Never => "never".into(),
        RecoveryDistribution::Deterministic { duration } => format!("1{{t < {duration}}}"),
        RecoveryDistribution::Exponential { rate } => format!("exp(-{rate} t)"),
        RecoveryDistribution::Tabulated { .. } => "tabulated".into(),
    }
}

/// Both kernels of the system for `spec`.
pub fn system_kernels(
    spec: &ContinuousModelSpec,
) -> Result<(KernelRepresentation, KernelRepresentation)> {
    let eps = spec
        .eps()
        .as_constant()
        .ok_or_else(|| Error::UnsupportedKernel("time-varying infectivity profile".into()))?;
    let infection = kernel_of(KernelSource::Gamma { eps }, spec.recovery())?;
    let recovery = kernel_of(KernelSource::RecoveryDensity, spec.recovery())?;
    Ok((infection, recovery))
}

/// RK4 integration of the kernel system (series `"S"`, `"I"`, `"R"`).
/// Only point-mass kernels are integrated; a smooth part is rejected.
pub fn solve_kernel_system(spec: &ContinuousModelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    let (infection, recovery) = system_kernels(spec)?;
    if !infection.is_atomic() || !recovery.is_atomic() {
        return Err(Error::UnsupportedKernel(
            "kernels with a smooth part".into(),
        ));
    }
    let lambda = spec.lambda();
    let (a_inf, a_rec) = (infection.atom, recovery.atom);
    let rhs = |t: f64, y: &[f64; 3]| {
        let force = y[0] * (lambda.value(t) + a_inf * y[1]);
        let out = a_rec * y[1];
        [-force, force - out, out]
    };
    let ys = rk4_grid(rhs, [spec.s0(), spec.i0(), 0.0], grid.step(), grid.len());
    let pick = |c: usize| ys.iter().map(|y| y[c]).collect::<Vec<_>>();
    Ok(Trajectory::new(*grid)
        .with_series("S", pick(0))
        .with_series("I", pick(1))
        .with_series("R", pick(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum;
    use crate::grid::max_abs_diff;

    #[test]
    fn catalog_entries() {
        let exp = RecoveryDistribution::exponential(1.5).unwrap();
        let k = kernel_of(KernelSource::Gamma { eps: 2.0 }, &exp).unwrap();
        assert_eq!((k.atom, k.is_atomic()), (2.0, true));
        assert_eq!(
            kernel_of(KernelSource::RecoveryDensity, &exp).unwrap().atom,
            1.5
        );
        let det = RecoveryDistribution::deterministic(1.0).unwrap();
        assert_eq!(
            kernel_of(KernelSource::Gamma { eps: 0.7 }, &det)
                .unwrap()
                .atom,
            0.7
        );
        let err = kernel_of(KernelSource::RecoveryDensity, &det).unwrap_err();
        assert!(matches!(err, Error::UnsupportedKernel(ref m) if m.contains("-β'")));
    }

    #[test]
    fn atomic_convolution_is_pointwise() {
        let k = kernel_of(
            KernelSource::Gamma { eps: 2.0 },
            &RecoveryDistribution::Never,
        )
        .unwrap();
        let x = [0.1, 0.3, 0.2];
        for i in 0..3 {
            assert_eq!(k.convolve(&x, 0.5, i).unwrap(), 2.0 * x[i]);
        }
    }

    #[test]
    fn tabulated_convolution_uses_trapezoid() {
        let k = KernelRepresentation {
            atom: 0.0,
            smooth: SmoothPart::Tabulated {
                step: 0.5,
                values: vec![1.0, 1.0, 1.0],
            },
            provenance: "test".into(),
        };
        // ∫₀¹ u du with x_u = u
        let x = [0.0, 0.5, 1.0];
        assert!((k.convolve(&x, 0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(k.convolve(&x, 0.25, 2).is_err());
    }

    #[test]
    fn no_initial_infection_is_constant() {
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let spec = ContinuousModelSpec::classic(2.0, 1.0, 1.0).unwrap();
        let traj = solve_kernel_system(&spec, &grid).unwrap();
        assert!(traj.values("S").iter().all(|&v| v == 1.0));
        assert!(traj.values("I").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_case_is_classic_sir() {
        let grid = TimeGrid::new(20.0, 1e-3).unwrap();
        let spec = ContinuousModelSpec::classic(2.0, 1.0, 0.99).unwrap();
        let kernel = solve_kernel_system(&spec, &grid).unwrap();
        let sir = continuum::classic_sir_oracle(2.0, 1.0, 0.99, 0.01, &grid).unwrap();
        for name in ["S", "I", "R"] {
            assert!(max_abs_diff(kernel.values(name), sir.values(name)) < 1e-12);
        }
        let derived = continuum::solve_compartments(&spec, &grid).unwrap();
        for name in ["S", "I", "R"] {
            assert!(max_abs_diff(kernel.values(name), derived.values(name)) < 1e-6);
        }
    }

    #[test]
    fn deterministic_recovery_kernel_reproduces_infection_term() {
        // S'/S = -ε I with I from the convolution form
        let grid = TimeGrid::new(6.0, 1e-3).unwrap();
        let spec = ContinuousModelSpec::new(
            crate::RateFunction::constant(2.0).unwrap(),
            RecoveryDistribution::deterministic(1.0).unwrap(),
            crate::RateFunction::zero(),
            0.95,
        )
        .unwrap();
        let infection = kernel_of(KernelSource::Gamma { eps: 2.0 }, spec.recovery()).unwrap();
        let traj = continuum::solve_compartments(&spec, &grid).unwrap();
        let (s, i) = (traj.values("S"), traj.values("I"));
        let h = grid.step();
        for k in (1..grid.len() - 1).step_by(250) {
            if (grid.time(k) - 1.0).abs() < 2.0 * h {
                continue;
            }
            let ds = (s[k + 1] - s[k - 1]) / (2.0 * h);
            let rhs = -s[k] * infection.convolve(i, h, k).unwrap();
            assert!((ds - rhs).abs() < 1e-4, "t = {}", grid.time(k));
        }
        assert!(solve_kernel_system(&spec, &grid).is_err());
    }
}
