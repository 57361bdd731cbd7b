//! Fixed-step classical Runge–Kutta and the cubic Hermite midpoint used to
//! feed delayed arguments during the method of steps.

pub(crate) fn rk4_step<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let axpy = |base: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += c * ki;
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `y' = f(t, y)` over every node of a uniform grid.
pub(crate) fn rk4_grid<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    step: f64,
    nodes: usize,
) -> Vec<[f64; N]> {
    let mut out = Vec::with_capacity(nodes);
    out.push(y0);
    for k in 1..nodes {
        let t = (k - 1) as f64 * step;
        let next = rk4_step(&f, t, &out[k - 1], step);
        out.push(next);
    }
    out
}

/// Cubic Hermite value at the midpoint of a cell of width `h`.
pub(crate) fn hermite_mid(y0: f64, d0: f64, y1: f64, d1: f64, h: f64) -> f64 {
    0.5 * (y0 + y1) + h * (d0 - d1) / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_fourth_order_on_exponential() {
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize + 1;
            let ys = rk4_grid(|_, y: &[f64; 1]| [-y[0]], [1.0], h, n);
            (ys[n - 1][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn hermite_exact_for_cubics() {
        let p = |x: f64| x * x * x - 2.0 * x;
        let dp = |x: f64| 3.0 * x * x - 2.0;
        let (a, h) = (0.3, 0.4);
        let mid = hermite_mid(p(a), dp(a), p(a + h), dp(a + h), h);
        assert!((mid - p(a + 0.5 * h)).abs() < 1e-14);
    }
}
