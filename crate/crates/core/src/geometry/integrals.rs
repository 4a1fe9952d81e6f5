//! Volumes and curvature integrals over the whole manifold or a geodesic
//! ball. Integrands are functions of the axis coordinate only.

use serde::Serialize;

use super::quotient::{DistanceField, DEFAULT_BANDS};
use super::{curvature, BallSpec, End, WarpedMetric};
use crate::error::{Error, Result};
use crate::numerics::{cumulative_integral, integral_to, interp_local, sin_power_integral, unit_sphere_area};

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Value of a ball integral with its mesh error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallIntegral {
    pub value: f64,
    /// The radius reached past the whole manifold; `value` is the total.
    pub saturated: bool,
    pub error_bound: f64,
}

fn density(m: &WarpedMetric, f: &[f64]) -> Vec<f64> {
    let k = (m.dim() - 1) as i32;
    f.iter().zip(m.psi()).zip(m.phi()).map(|((f, p), ph)| f * p.powi(k) * ph).collect()
}

/// `∫_M f dV` for a nodal function `f` of the axis coordinate.
pub fn integrate_field(m: &WarpedMetric, f: &[f64]) -> f64 {
    let g = density(m, f);
    let cum = cumulative_integral(m.grid().x(), &g);
    unit_sphere_area(m.dim() - 1) * cum[cum.len() - 1]
}

pub fn total_volume(m: &WarpedMetric) -> f64 {
    integrate_field(m, &vec![1.0; m.grid().node_count()])
}

fn pole_side(m: &WarpedMetric, s: f64) -> Option<bool> {
    let len = m.axis_length();
    let tol = 1e-12 * len.max(1.0);
    if s <= tol {
        Some(false)
    } else if m.grid().far_end() == End::Pole && s >= len - tol {
        Some(true)
    } else {
        None
    }
}

fn pole_ball(m: &WarpedMetric, far: bool, r: f64, f: &[f64]) -> BallIntegral {
    let x = m.grid().x();
    let g = density(m, f);
    let cum = cumulative_integral(x, &g);
    let w = unit_sphere_area(m.dim() - 1);
    let len = m.axis_length();
    let total = w * cum[cum.len() - 1];
    if r >= len {
        return BallIntegral { value: total, saturated: true, error_bound: 0.0 };
    }
    let partial = |r: f64| {
        if far {
            total - w * integral_to(x, &g, &cum, m.x_at(len - r))
        } else {
            w * integral_to(x, &g, &cum, m.x_at(r))
        }
    };
    let value = partial(r);
    // sixth-order quadrature: compare with the same integral on every other node
    let coarse: Vec<usize> = (0..x.len()).step_by(2).collect();
    let error_bound = if *coarse.last().unwrap() == x.len() - 1 && coarse.len() >= 4 {
        let xc: Vec<f64> = coarse.iter().map(|&i| x[i]).collect();
        let gc: Vec<f64> = coarse.iter().map(|&i| g[i]).collect();
        let cc = cumulative_integral(&xc, &gc);
        let tc = w * cc[cc.len() - 1];
        let vc = if far {
            tc - w * integral_to(&xc, &gc, &cc, m.x_at(len - r))
        } else {
            w * integral_to(&xc, &gc, &cc, m.x_at(r))
        };
        (vc - value).abs() / 63.0
    } else {
        0.0
    };
    BallIntegral { value, saturated: false, error_bound }
}

/// `∫_{B} f dV`. Pole-centred balls use the exact one-dimensional reduction;
/// all others integrate over the quotient mesh.
pub fn ball_integral(m: &WarpedMetric, b: &BallSpec, f: &[f64]) -> Result<BallIntegral> {
    b.center.check(m)?;
    if !(b.radius > 0.0) {
        return Err(Error::Parameter(format!("ball radius {} must be positive", b.radius)));
    }
    match pole_side(m, b.center.s) {
        Some(far) => Ok(pole_ball(m, far, b.radius, f)),
        None => ball_integral_quotient(m, b, f, DEFAULT_BANDS),
    }
}

/// Ball integral on the `(s, α)` quotient, whatever the centre. For each
/// axis position the ball covers an α-interval `[0, a(s)]`, over which
/// `sin^{n−2}` is integrated exactly.
pub fn ball_integral_quotient(m: &WarpedMetric, b: &BallSpec, f: &[f64], bands: usize) -> Result<BallIntegral> {
    b.center.check(m)?;
    let field = DistanceField::compute(m, super::QuotientPoint::on_axis(b.center.s), bands)?;
    let max_d = (0..field.rows())
        .flat_map(|i| (0..field.cols()).map(move |j| (i, j)))
        .map(|(i, j)| field.node(i, j))
        .fold(0.0, f64::max);
    if b.radius >= max_d {
        return Ok(BallIntegral { value: integrate_field(m, f), saturated: true, error_bound: 0.0 });
    }
    let eb = field.error_bound();
    let value = quotient_integral(m, &field, b.radius, f);
    let hi = quotient_integral(m, &field, b.radius + eb, f);
    let lo = quotient_integral(m, &field, (b.radius - eb).max(0.0), f);
    Ok(BallIntegral { value, saturated: false, error_bound: (hi - value).abs().max((value - lo).abs()) })
}

fn quotient_integral(m: &WarpedMetric, field: &DistanceField, r: f64, f: &[f64]) -> f64 {
    let s = m.arclength();
    let psi = m.psi();
    let n = m.dim();
    let k = (n - 1) as i32;
    let cols = field.cols();
    let h = field.h_alpha();
    let mut row = vec![0.0; cols];
    let mut total = 0.0;
    for c in 0..s.len() - 1 {
        let lo_row = (field.node(c, 0), field.node(c + 1, 0));
        if lo_row.0 >= r && lo_row.1 >= r {
            continue;
        }
        let (s0, s1) = (s[c], s[c + 1]);
        let half = 0.5 * (s1 - s0);
        let mid = 0.5 * (s0 + s1);
        for (g, w) in GAUSS4 {
            let sg = mid + half * g;
            let t = (sg - s0) / (s1 - s0);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (1.0 - t) * field.node(c, j) + t * field.node(c + 1, j);
            }
            let a = match row.iter().position(|&v| v >= r) {
                Some(0) => continue,
                None => std::f64::consts::PI,
                Some(j) => {
                    let (v0, v1) = (row[j - 1], row[j]);
                    h * ((j - 1) as f64 + (r - v0) / (v1 - v0))
                }
            };
            let fg = interp_local(s, f, sg);
            let pg = interp_local(s, psi, sg).max(0.0);
            total += w * half * fg * pg.powi(k) * sin_power_integral(n - 2, a);
        }
    }
    unit_sphere_area(n - 2) * total
}

pub fn ball_volume(m: &WarpedMetric, b: &BallSpec) -> Result<BallIntegral> {
    ball_integral(m, b, &vec![1.0; m.grid().node_count()])
}

fn region_integral(m: &WarpedMetric, f: &[f64], region: Option<&BallSpec>) -> Result<f64> {
    match region {
        None => Ok(integrate_field(m, f)),
        Some(b) => Ok(ball_integral(m, b, f)?.value),
    }
}

/// `∫ |R|^q dV` over the manifold or a ball.
pub fn scalar_lp(m: &WarpedMetric, q: f64, region: Option<&BallSpec>) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("exponent {q} must be at least 1")));
    }
    let c = curvature(m)?;
    let f: Vec<f64> = c.scalar.iter().map(|r| r.abs().powf(q)).collect();
    region_integral(m, &f, region)
}

/// `∫ |Rm|² dV` over the manifold or a ball.
pub fn riemann_l2(m: &WarpedMetric, region: Option<&BallSpec>) -> Result<f64> {
    let c = curvature(m)?;
    let f: Vec<f64> = c.rm_norm.iter().map(|v| v * v).collect();
    region_integral(m, &f, region)
}

/// `∫_B |Ric|^q dV`.
pub fn ricci_lp_ball(m: &WarpedMetric, b: &BallSpec, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("exponent {q} must be at least 1")));
    }
    let c = curvature(m)?;
    let f: Vec<f64> = c.ric_norm.iter().map(|v| v.powf(q)).collect();
    Ok(ball_integral(m, b, &f)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, QuotientPoint};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_sphere(n: usize) -> WarpedMetric {
        let g = Arc::new(Grid::uniform(n, End::Pole).unwrap());
        WarpedMetric::from_fn(g, 4, |_| PI, |x| (PI * x).sin()).unwrap()
    }

    fn flat_cap(n: usize) -> WarpedMetric {
        let g = Arc::new(Grid::uniform(n, End::Boundary).unwrap());
        WarpedMetric::from_fn(g, 4, |_| 1.0, |x| x).unwrap()
    }

    fn cap_volume(r: f64) -> f64 {
        2.0 * PI * PI * (2.0 / 3.0 - r.cos() + r.cos().powi(3) / 3.0)
    }

    #[test]
    fn sphere_volume() {
        let v = total_volume(&unit_sphere(400));
        assert!((v - 8.0 * PI * PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn hemisphere_pole_ball() {
        let m = unit_sphere(400);
        let b = BallSpec::new(QuotientPoint::on_axis(0.0), PI / 2.0).unwrap();
        let v = ball_volume(&m, &b).unwrap();
        assert!((v.value - 4.0 * PI * PI / 3.0).abs() < 1e-9);
        let far = BallSpec::new(QuotientPoint::on_axis(m.axis_length()), 1.0).unwrap();
        assert!((ball_volume(&m, &far).unwrap().value - cap_volume(1.0)).abs() < 1e-9);
    }

    #[test]
    fn small_balls_are_euclidean() {
        let m = unit_sphere(400);
        for r in [0.05, 0.1, 0.2] {
            let b = BallSpec::new(QuotientPoint::on_axis(0.0), r).unwrap();
            let v = ball_volume(&m, &b).unwrap().value;
            assert!((v - cap_volume(r)).abs() < 1e-9 * cap_volume(r) + 1e-14);
            let ratio = v / r.powi(4);
            assert!((ratio - PI * PI / 2.0).abs() < r * r * PI * PI / 2.0);
        }
    }

    #[test]
    fn saturated_ball_returns_total() {
        let m = unit_sphere(100);
        let b = BallSpec::new(QuotientPoint::on_axis(0.0), 4.0).unwrap();
        let v = ball_volume(&m, &b).unwrap();
        assert!(v.saturated);
        assert!((v.value - total_volume(&m)).abs() < 1e-12);
        let b = BallSpec::new(QuotientPoint::new(1.0, 0.0), 4.0).unwrap();
        assert!(ball_volume(&m, &b).unwrap().saturated);
    }

    #[test]
    fn quotient_and_axis_paths_agree_for_pole_balls() {
        let m = unit_sphere(200);
        for r in [0.3, 1.0, 2.0] {
            let b = BallSpec::new(QuotientPoint::on_axis(0.0), r).unwrap();
            let one = ball_volume(&m, &b).unwrap().value;
            let two = ball_integral_quotient(&m, &b, &vec![1.0; 200], DEFAULT_BANDS).unwrap();
            assert!((one - two.value).abs() <= 10.0 * two.error_bound, "r {r}: {one} vs {two:?}");
        }
    }

    #[test]
    fn off_pole_sphere_balls_match_cap_volume() {
        let m = unit_sphere(400);
        for (s, r) in [(0.8, 0.5), (PI / 2.0, 1.0), (2.0, 0.3)] {
            let b = BallSpec::new(QuotientPoint::on_axis(s), r).unwrap();
            let v = ball_volume(&m, &b).unwrap();
            let exact = cap_volume(r);
            assert!((v.value - exact).abs() < 2e-2 * exact, "s {s} r {r}: {} vs {exact}", v.value);
        }
    }

    #[test]
    fn flat_cap_off_centre_balls() {
        let m = flat_cap(400);
        let b = BallSpec::new(QuotientPoint::on_axis(0.5), 0.2).unwrap();
        let v = ball_volume(&m, &b).unwrap().value;
        let exact = PI * PI * 0.2f64.powi(4) / 2.0;
        assert!((v - exact).abs() < 2e-2 * exact, "{v} vs {exact}");
    }

    #[test]
    fn curvature_integrals_on_the_sphere() {
        let m = unit_sphere(400);
        let v0 = 8.0 * PI * PI / 3.0;
        assert!((scalar_lp(&m, 2.0, None).unwrap() - 144.0 * v0).abs() < 1e-3);
        assert!((riemann_l2(&m, None).unwrap() - 64.0 * PI * PI).abs() < 1e-3);
        let whole = BallSpec::new(QuotientPoint::on_axis(0.0), 10.0).unwrap();
        assert!((ricci_lp_ball(&m, &whole, 2.0).unwrap() - 96.0 * PI * PI).abs() < 1e-3);
        assert!(scalar_lp(&m, 0.5, None).is_err());
    }

    #[test]
    fn flat_cap_integrals_vanish() {
        let m = flat_cap(128);
        assert!(scalar_lp(&m, 2.0, None).unwrap().abs() < 1e-12);
        assert!(riemann_l2(&m, None).unwrap().abs() < 1e-12);
    }

    #[test]
    fn scaling_identities() {
        let m = unit_sphere(200);
        let m4 = m.rescale(4.0).unwrap();
        assert!((total_volume(&m4) - 16.0 * total_volume(&m)).abs() < 1e-9);
        let a = riemann_l2(&m, None).unwrap();
        let b = riemann_l2(&m4, None).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }
}
