//! Trapezoidal product integration of history convolutions
//! `∫₀^{t_k} g_u K_{t_k - u} du` on a uniform grid.
//!
//! The kernel is stored at lag nodes with both one-sided limits. On the cell
//! `[u_i, u_{i+1}]` the lag runs over `(t_{k-i-1}, t_{k-i})`, so the left
//! endpoint sees `K(t_{k-i}-)` and the right endpoint `K(t_{k-i-1}+)`. Jumps
//! of `K` located on grid nodes therefore cost no accuracy.

use crate::error::Result;
use crate::grid::TimeGrid;

#[derive(Debug, Clone)]
pub(crate) struct LagKernel {
    step: f64,
    right: Vec<f64>,
    left: Vec<f64>,
    /// `(left + right) / 2`, the interior trapezoid weight.
    mid: Vec<f64>,
}

impl LagKernel {
    pub(crate) fn build(
        grid: &TimeGrid,
        right: impl Fn(f64) -> Result<f64>,
        left: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let m = grid.len();
        let mut r = Vec::with_capacity(m);
        let mut l = Vec::with_capacity(m);
        for k in 0..m {
            let t = grid.time(k);
            r.push(right(t)?);
            l.push(if k == 0 { r[0] } else { left(t)? });
        }
        let mid = r.iter().zip(&l).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(LagKernel {
            step: grid.step(),
            right: r,
            left: l,
            mid,
        })
    }

    /// Trapezoid sum for node `k` without the implicit `u = t_k` term.
    pub(crate) fn history(&self, k: usize, g: &[f64]) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let interior: f64 = g[1..k]
            .iter()
            .zip(self.mid[1..k].iter().rev())
            .map(|(a, b)| a * b)
            .sum();
        self.step * (0.5 * g[0] * self.left[k] + interior)
    }

    /// Coefficient of `g_k` in the trapezoid sum at node `k >= 1`.
    pub(crate) fn endpoint_weight(&self) -> f64 {
        0.5 * self.step * self.right[0]
    }

    /// Full trapezoid sum at node `k`, `g_k` included.
    pub(crate) fn convolve(&self, k: usize, g: &[f64]) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.history(k, g) + self.endpoint_weight() * g[k]
        }
    }

    pub(crate) fn right(&self, k: usize) -> f64 {
        self.right[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear_integrand_and_step_kernel() {
        // ∫₀^t u·1{t-u < 1} du = (t² - (t-1)²)/2 for t >= 1
        let grid = TimeGrid::new(3.0, 0.25).unwrap();
        let k = LagKernel::build(
            &grid,
            |lag| Ok(if lag < 1.0 { 1.0 } else { 0.0 }),
            |lag| Ok(if lag <= 1.0 { 1.0 } else { 0.0 }),
        )
        .unwrap();
        let g: Vec<f64> = grid.times().collect();
        for node in [4, 6, 12] {
            let t = grid.time(node);
            let expect = (t * t - (t - 1.0) * (t - 1.0)) / 2.0;
            assert!((k.convolve(node, &g) - expect).abs() < 1e-14, "node {node}");
        }
        assert_eq!(k.convolve(0, &g), 0.0);
    }
}
