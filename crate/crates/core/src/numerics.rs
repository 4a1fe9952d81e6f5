//! Small numerical kernels shared by the solvers: finite-difference weights,
//! local polynomial interpolation, quadrature, tridiagonal solves and fits.

use std::f64::consts::PI;

/// Finite-difference weights for derivatives `0..=order` at `z` from the
/// nodes `xs` (Fornberg's recursion). `w[k][j]` multiplies `f(xs[j])` in the
/// approximation of the k-th derivative.
pub fn fornberg_weights(z: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Evaluates the Lagrange polynomial through `(xs[k], ys[k])` at `x`.
pub fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (k, (&xk, &yk)) in xs.iter().zip(ys).enumerate() {
        let mut basis = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != k {
                basis *= (x - xm) / (xk - xm);
            }
        }
        acc += basis * yk;
    }
    acc
}

/// Index `k` with `xs[k] <= x <= xs[k + 1]`, clamped to valid intervals.
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(k) => k.min(n - 2),
        Err(k) => k - 1,
    }
}

/// Nodes in the local interpolation window (degree five).
const WINDOW: usize = 6;

/// Start of the interpolation window used on interval `k`.
fn window(n: usize, k: usize) -> usize {
    if n < WINDOW {
        return 0;
    }
    k.saturating_sub(WINDOW / 2 - 1).min(n - WINDOW)
}

/// Piecewise-polynomial interpolation (local degree five) of samples on
/// strictly increasing nodes.
pub fn interp_local(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = locate(xs, x);
    let w = window(xs.len(), k);
    let hi = (w + WINDOW).min(xs.len());
    lagrange(&xs[w..hi], &ys[w..hi], x)
}

const GAUSS3: [(f64, f64); 3] =
    [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// Integral of the local interpolant over `[a, b]` inside interval `k`.
fn piece(xs: &[f64], ys: &[f64], k: usize, a: f64, b: f64) -> f64 {
    let w = window(xs.len(), k);
    let hi = (w + WINDOW).min(xs.len());
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS3.iter().map(|(g, wt)| wt * lagrange(&xs[w..hi], &ys[w..hi], mid + half * g)).sum::<f64>() * half
}

/// Cumulative integral `F[i] = ∫_{xs[0]}^{xs[i]} f` using local degree-five
/// interpolation (sixth order on smooth data).
pub fn cumulative_integral(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    for k in 0..xs.len() - 1 {
        out[k + 1] = out[k] + piece(xs, ys, k, xs[k], xs[k + 1]);
    }
    out
}

/// `∫_{xs[0]}^{x} f` given the cumulative table from [`cumulative_integral`].
pub fn integral_to(xs: &[f64], ys: &[f64], cumulative: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[n - 1] {
        return cumulative[n - 1];
    }
    let k = locate(xs, x);
    cumulative[k] + piece(xs, ys, k, xs[k], x)
}

/// Composite trapezoid rule on arbitrary nodes.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// A quadrature value with its Richardson-style error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
}

/// Sixth-order integral over all nodes, checked against the trapezoid
/// rule: the difference bounds the second-order error term.
pub fn integrate(xs: &[f64], ys: &[f64]) -> Quadrature {
    let cumulative = cumulative_integral(xs, ys);
    let value = cumulative[xs.len() - 1];
    let trap = trapezoid(xs, ys);
    Quadrature { value, error_estimate: (value - trap).abs() }
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
}

/// Ordinary least-squares line `y = intercept + slope x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Area of the unit k-sphere, `2 π^{(k+1)/2} / Γ((k+1)/2)`.
pub fn unit_sphere_area(k: usize) -> f64 {
    let m = k + 1;
    let half_gamma = if m.is_multiple_of(2) {
        (1..m / 2).map(|v| v as f64).product::<f64>()
    } else {
        // Γ(m/2) for odd m: √π (m-2)!! / 2^{(m-1)/2}
        let mut g = PI.sqrt();
        let mut v = 0.5;
        while v < m as f64 / 2.0 - 0.25 {
            g *= v;
            v += 1.0;
        }
        g
    };
    2.0 * PI.powf(m as f64 / 2.0) / half_gamma
}

/// `∫_0^a sin^m(t) dt` by the standard reduction formula.
pub fn sin_power_integral(m: usize, a: f64) -> f64 {
    match m {
        0 => a,
        1 => 1.0 - a.cos(),
        _ => {
            let mf = m as f64;
            -a.sin().powi(m as i32 - 1) * a.cos() / mf + (mf - 1.0) / mf * sin_power_integral(m - 2, a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_reproduces_centered_stencils() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &xs, 2);
        let expected_d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let expected_d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert_relative_eq!(w[1][j], expected_d1[j], epsilon = 1e-14);
            assert_relative_eq!(w[2][j], expected_d2[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn cumulative_integral_is_sixth_order() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).exp()).collect();
            let exact = ((3.0f64).exp() - 1.0) / 3.0;
            (integrate(&xs, &ys).value - exact).abs()
        };
        let order = (err(41) / err(81)).log2();
        assert!(order > 5.5, "observed order {order}");
    }

    #[test]
    fn partial_integral_matches_closed_form() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(5)).collect();
        let cum = cumulative_integral(&xs, &ys);
        let v = integral_to(&xs, &ys, &cum, 0.537);
        assert_relative_eq!(v, 0.537f64.powi(6) / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn thomas_solves_poisson() {
        let n = 5;
        let lower = vec![-1.0; n];
        let diag = vec![2.0; n];
        let upper = vec![-1.0; n];
        let mut rhs = vec![1.0; n];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        // u_i = i(n+1-i)/2 for the 1-based discrete Poisson problem
        for (i, u) in rhs.iter().enumerate() {
            let k = (i + 1) as f64;
            assert_relative_eq!(*u, k * (n as f64 + 1.0 - k) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(2), 4.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(3), 2.0 * PI * PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(4), 8.0 * PI * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sin_powers() {
        let a = 1.1;
        assert_relative_eq!(sin_power_integral(2, a), 0.5 * (a - a.sin() * a.cos()), epsilon = 1e-14);
        assert_relative_eq!(sin_power_integral(2, PI), PI / 2.0, epsilon = 1e-14);
    }
}
