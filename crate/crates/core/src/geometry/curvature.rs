use serde::Serialize;

use super::{Parity, WarpedMetric};
use crate::error::{Error, Result};

/// Allowed deviation of `|ψ_s|` from 1 at a pole before the metric is
/// declared singular there.
pub const POLE_SLOPE_TOLERANCE: f64 = 1e-2;

/// Pointwise curvature of a warped metric on its grid.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureField {
    /// Sectional curvature of planes containing the axis direction.
    pub k_radial: Vec<f64>,
    /// Sectional curvature of planes tangent to the fibre sphere.
    pub k_sphere: Vec<f64>,
    pub scalar: Vec<f64>,
    pub ric_radial: Vec<f64>,
    pub ric_sphere: Vec<f64>,
    pub ric_norm: Vec<f64>,
    pub rm_norm: Vec<f64>,
    pub ric_minus: Vec<f64>,
}

impl CurvatureField {
    pub fn len(&self) -> usize {
        self.scalar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalar.is_empty()
    }

    pub fn max_rm(&self) -> f64 {
        self.rm_norm.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    pub fn min_scalar(&self) -> f64 {
        self.scalar.iter().fold(f64::INFINITY, |a: f64, &b| a.min(b))
    }

    fn from_sectional(n: usize, k_radial: Vec<f64>, k_sphere: Vec<f64>) -> Self {
        let nf = n as f64;
        let len = k_radial.len();
        let mut f = CurvatureField {
            scalar: vec![0.0; len],
            ric_radial: vec![0.0; len],
            ric_sphere: vec![0.0; len],
            ric_norm: vec![0.0; len],
            rm_norm: vec![0.0; len],
            ric_minus: vec![0.0; len],
            k_radial,
            k_sphere,
        };
        for i in 0..len {
            let (kr, ks) = (f.k_radial[i], f.k_sphere[i]);
            let rr = (nf - 1.0) * kr;
            let rs = kr + (nf - 2.0) * ks;
            f.ric_radial[i] = rr;
            f.ric_sphere[i] = rs;
            f.scalar[i] = rr + (nf - 1.0) * rs;
            f.ric_norm[i] = (rr * rr + (nf - 1.0) * rs * rs).sqrt();
            f.rm_norm[i] = (4.0 * (nf - 1.0) * kr * kr + 2.0 * (nf - 1.0) * (nf - 2.0) * ks * ks).sqrt();
            f.ric_minus[i] = (-rr.min(rs)).max(0.0);
        }
        f
    }
}

/// The arclength derivatives of ψ at every node, assembled from the
/// x-derivatives of both profiles.
pub(crate) struct ArcDerivatives {
    pub psi_s: Vec<f64>,
    pub psi_ss: Vec<f64>,
    pub psi_sss: Vec<f64>,
}

pub(crate) fn arc_derivatives(m: &WarpedMetric) -> ArcDerivatives {
    let g = m.grid();
    let dp = g.derivatives(m.psi(), Parity::Odd);
    let df = g.derivatives(m.phi(), Parity::Even);
    let n = g.node_count();
    let mut out = ArcDerivatives { psi_s: vec![0.0; n], psi_ss: vec![0.0; n], psi_sss: vec![0.0; n] };
    for i in 0..n {
        let f = m.phi()[i];
        let (p1, p2, p3) = (dp.d1[i], dp.d2[i], dp.d3[i]);
        let (f1, f2) = (df.d1[i], df.d2[i]);
        out.psi_s[i] = p1 / f;
        out.psi_ss[i] = (p2 - p1 * f1 / f) / (f * f);
        out.psi_sss[i] =
            p3 / (f * f * f) - 3.0 * p2 * f1 / f.powi(4) - p1 * f2 / f.powi(4) + 3.0 * p1 * f1 * f1 / f.powi(5);
    }
    out
}

/// Curvature of a warped metric. Interior nodes use
/// `K_rad = −ψ_ss/ψ`, `K_sph = (1 − ψ_s²)/ψ²`; at a pole both sectional
/// curvatures tend to `−ψ_sss/ψ_s`.
pub fn curvature(m: &WarpedMetric) -> Result<CurvatureField> {
    let g = m.grid();
    let n = g.node_count();
    let d = arc_derivatives(m);
    let mut kr = vec![0.0; n];
    let mut ks = vec![0.0; n];
    for i in 0..n {
        if g.is_pole(i) {
            let slope = d.psi_s[i];
            if (slope.abs() - 1.0).abs() > POLE_SLOPE_TOLERANCE {
                return Err(Error::DegeneratePole { x: g.x()[i], slope: slope.abs() });
            }
            let k = -d.psi_sss[i] / slope;
            kr[i] = k;
            ks[i] = k;
        } else {
            let p = m.psi()[i];
            kr[i] = -d.psi_ss[i] / p;
            ks[i] = (1.0 - d.psi_s[i] * d.psi_s[i]) / (p * p);
        }
    }
    for i in 0..n {
        if !(kr[i].is_finite() && ks[i].is_finite()) {
            return Err(Error::Instability { node: i });
        }
    }
    Ok(CurvatureField::from_sectional(m.dim(), kr, ks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{End, Grid};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sphere(n: usize, rho: f64) -> WarpedMetric {
        let g = Arc::new(Grid::uniform(n, End::Pole).unwrap());
        WarpedMetric::from_fn(g, 4, |_| PI * rho, |x| rho * (PI * x).sin()).unwrap()
    }

    #[test]
    fn unit_sphere_constant_curvature() {
        let c = curvature(&sphere(200, 1.0)).unwrap();
        for i in 0..c.len() {
            assert!((c.scalar[i] - 12.0).abs() < 1e-5, "node {i}: {}", c.scalar[i]);
            assert!((c.ric_radial[i] - 3.0).abs() < 1e-5);
            assert!((c.ric_sphere[i] - 3.0).abs() < 1e-5);
            assert!((c.rm_norm[i] * c.rm_norm[i] - 24.0).abs() < 1e-4);
            assert_eq!(c.ric_minus[i], 0.0);
        }
    }

    #[test]
    fn sphere_curvature_converges_at_second_order_or_better() {
        let err = |n: usize| {
            let c = curvature(&sphere(n, 1.0)).unwrap();
            c.scalar.iter().map(|r| (r - 12.0).abs()).fold(0.0, f64::max)
        };
        let order = (err(50) / err(100)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn cylinder_segment() {
        // quarter-sine cap glued to a constant profile; the stencils only see
        // the constant part for x > 0.5
        let c0 = 0.7;
        let g = Arc::new(Grid::uniform(64, End::Boundary).unwrap());
        let psi = |x: f64| if x < 0.25 { c0 * (2.0 * PI * x).sin() } else { c0 };
        let m = WarpedMetric::from_fn(g.clone(), 4, |_| 2.0 * PI * c0, psi).unwrap();
        let c = curvature(&m).unwrap();
        for (i, &x) in g.x().iter().enumerate() {
            if x > 0.5 {
                assert!((c.scalar[i] - 6.0 / (c0 * c0)).abs() < 1e-10);
                assert!(c.ric_radial[i].abs() < 1e-10);
                assert!((c.ric_sphere[i] - 2.0 / (c0 * c0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flat_cap_is_flat() {
        let g = Arc::new(Grid::uniform(64, End::Boundary).unwrap());
        let m = WarpedMetric::from_fn(g, 4, |_| 1.0, |x| x).unwrap();
        let c = curvature(&m).unwrap();
        assert!(c.scalar.iter().all(|r| r.abs() < 1e-9));
        assert!(c.rm_norm.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn degenerate_pole_is_reported() {
        let g = Arc::new(Grid::uniform(64, End::Pole).unwrap());
        let m = WarpedMetric::from_fn(g, 4, |_| PI, |x| 1.3 * (PI * x).sin()).unwrap();
        assert!(matches!(curvature(&m), Err(Error::DegeneratePole { .. })));
    }

    #[test]
    fn rescaling_divides_curvature() {
        let m = sphere(100, 1.0);
        let c = curvature(&m).unwrap();
        let c4 = curvature(&m.rescale(4.0).unwrap()).unwrap();
        for i in 0..c.len() {
            let rel = (c4.scalar[i] - c.scalar[i] / 4.0).abs() / c.scalar[i].abs();
            assert!(rel < 1e-13);
        }
    }
}
