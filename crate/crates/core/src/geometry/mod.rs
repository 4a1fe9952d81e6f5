//! Discrete rotationally symmetric metrics `g = φ(x)² dx² + ψ(x)² g_{S^{n-1}}`
//! on `x ∈ [0, 1]`, their curvature, distances, volumes and integral norms.

mod curvature;
mod integrals;
mod quotient;
pub mod snapshot;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cumulative_integral, fornberg_weights, interp_local};

pub(crate) use curvature::arc_derivatives;
pub use curvature::{curvature, CurvatureField, POLE_SLOPE_TOLERANCE};
pub use integrals::{
    ball_integral, ball_integral_quotient, ball_volume, integrate_field, ricci_lp_ball, riemann_l2, scalar_lp,
    total_volume, BallIntegral,
};
pub use quotient::{distance, DistanceField, QuotientMesh, DEFAULT_BANDS};

/// Half-width of the finite-difference stencils (seven-point: sixth order for the first two derivatives).
const HALF: usize = 3;
const WIDTH: usize = 2 * HALF + 1;

/// What sits at `x = 1`. Closed manifolds have a second pole; the flat cap
/// is a truncated ball whose boundary sphere is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Pole,
    Boundary,
}

impl End {
    pub fn as_str(self) -> &'static str {
        match self {
            End::Pole => "pole",
            End::Boundary => "boundary",
        }
    }
}

/// Reflection symmetry of a field across a pole: ψ is odd, φ and scalar
/// functions are even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    index: usize,
    mirrored: bool,
}

#[derive(Debug, Clone)]
struct Stencil {
    taps: [Tap; WIDTH],
    // weights[k - 1][j] for derivative order k = 1, 2, 3
    weights: [[f64; WIDTH]; 3],
}

/// The fixed coordinate grid `0 = x_0 < … < x_{N-1} = 1` together with the
/// derivative stencils used on it.
#[derive(Debug, Clone)]
pub struct Grid {
    x: Vec<f64>,
    far: End,
    stencils: Vec<Stencil>,
}

/// First three x-derivatives of a nodal field.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl Grid {
    pub const MIN_NODES: usize = 16;

    pub fn uniform(node_count: usize, far: End) -> Result<Self> {
        if node_count < Self::MIN_NODES {
            return Err(Error::Parameter(format!("grid needs at least {} nodes, got {node_count}", Self::MIN_NODES)));
        }
        let last = (node_count - 1) as f64;
        let mut x: Vec<f64> = (0..node_count).map(|i| i as f64 / last).collect();
        x[node_count - 1] = 1.0;
        Self::from_nodes(x, far)
    }

    pub fn from_nodes(x: Vec<f64>, far: End) -> Result<Self> {
        let n = x.len();
        if n < Self::MIN_NODES {
            return Err(Error::Parameter(format!("grid needs at least {} nodes, got {n}", Self::MIN_NODES)));
        }
        if x[0] != 0.0 || x[n - 1] != 1.0 {
            return Err(Error::Parameter("grid must start at 0 and end at 1".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("grid nodes must be strictly increasing".into()));
        }
        let stencils = (0..n).map(|i| build_stencil(&x, far, i)).collect();
        Ok(Grid { x, far, stencils })
    }

    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn far_end(&self) -> End {
        self.far
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.x.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// True when node `i` is a pole (ψ vanishes there).
    pub fn is_pole(&self, i: usize) -> bool {
        i == 0 || (i == self.x.len() - 1 && self.far == End::Pole)
    }

    pub fn derivatives(&self, f: &[f64], parity: Parity) -> Derivatives {
        let n = self.x.len();
        let mut out = Derivatives { d1: vec![0.0; n], d2: vec![0.0; n], d3: vec![0.0; n] };
        let sign = parity.sign();
        for (i, st) in self.stencils.iter().enumerate() {
            let mut acc = [0.0; 3];
            for (j, tap) in st.taps.iter().enumerate() {
                let v = if tap.mirrored { sign * f[tap.index] } else { f[tap.index] };
                for k in 0..3 {
                    acc[k] += st.weights[k][j] * v;
                }
            }
            out.d1[i] = acc[0];
            out.d2[i] = acc[1];
            out.d3[i] = acc[2];
        }
        out
    }
}

fn build_stencil(x: &[f64], far: End, i: usize) -> Stencil {
    let n = x.len() as isize;
    let i = i as isize;
    let h = HALF as isize;
    let mut lo = i - h;
    if far == End::Boundary && i + h > n - 1 {
        lo = n - WIDTH as isize;
    }
    let mut taps = [Tap { index: 0, mirrored: false }; WIDTH];
    let mut pos = [0.0; WIDTH];
    for k in 0..WIDTH {
        let j = lo + k as isize;
        let (index, mirrored, p) = if j < 0 {
            (-j as usize, true, -x[(-j) as usize])
        } else if j > n - 1 {
            let m = (2 * (n - 1) - j) as usize;
            (m, true, 2.0 - x[m])
        } else {
            (j as usize, false, x[j as usize])
        };
        taps[k] = Tap { index, mirrored };
        pos[k] = p;
    }
    let w = fornberg_weights(x[i as usize], &pos, 3);
    let mut weights = [[0.0; WIDTH]; 3];
    for k in 0..3 {
        weights[k].copy_from_slice(&w[k + 1]);
    }
    Stencil { taps, weights }
}

/// A rotationally symmetric metric sampled on a [`Grid`] at one time.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    grid: Arc<Grid>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    dim: usize,
    time: f64,
    s: Vec<f64>,
}

impl WarpedMetric {
    /// Validates the sampled profiles. Pole values of ψ must vanish; the
    /// closure condition |ψ_s| = 1 is checked later by [`curvature`].
    pub fn new(grid: Arc<Grid>, phi: Vec<f64>, mut psi: Vec<f64>, dim: usize, time: f64) -> Result<Self> {
        let n = grid.node_count();
        if phi.len() != n || psi.len() != n {
            return Err(Error::InvalidMetric(format!(
                "profile lengths {}/{} do not match {n} grid nodes",
                phi.len(),
                psi.len()
            )));
        }
        if dim < 2 {
            return Err(Error::InvalidMetric(format!("dimension {dim} < 2")));
        }
        if let Some(i) = phi.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidMetric(format!("phi = {} at node {i}", phi[i])));
        }
        let scale = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            if grid.is_pole(i) {
                if psi[i].abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidMetric(format!("psi = {} at pole node {i}", psi[i])));
                }
                psi[i] = 0.0;
            } else if !(psi[i].is_finite() && psi[i] > 0.0) {
                return Err(Error::InvalidMetric(format!("psi = {} at node {i}", psi[i])));
            }
        }
        let s = cumulative_integral(grid.x(), &phi);
        Ok(WarpedMetric { grid, phi, psi, dim, time, s })
    }

    /// Samples `φ(x)` and `ψ(x)` on the grid.
    pub fn from_fn(grid: Arc<Grid>, dim: usize, phi: impl Fn(f64) -> f64, psi: impl Fn(f64) -> f64) -> Result<Self> {
        let ph = grid.x().iter().map(|&x| phi(x)).collect();
        let ps = grid.x().iter().map(|&x| psi(x)).collect();
        Self::new(grid, ph, ps, dim, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Arclength from the pole at `x = 0` to every node.
    pub fn arclength(&self) -> &[f64] {
        &self.s
    }

    /// Total length of the axis from pole to pole (or pole to boundary).
    pub fn axis_length(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    pub fn max_psi(&self) -> f64 {
        self.psi.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Largest arclength gap between neighbouring nodes.
    pub fn max_ds(&self) -> f64 {
        self.s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Coordinate `x` at arclength `s`.
    pub fn x_at(&self, s: f64) -> f64 {
        interp_local(&self.s, self.grid.x(), s).clamp(0.0, 1.0)
    }

    /// ψ at arclength `s`, interpolated.
    pub fn psi_at(&self, s: f64) -> f64 {
        interp_local(&self.s, &self.psi, s).max(0.0)
    }

    /// `C·g`: both profiles scale by √C and arclength by √C.
    pub fn rescale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("rescale factor {c} must be positive")));
        }
        let k = c.sqrt();
        Ok(WarpedMetric {
            grid: self.grid.clone(),
            phi: self.phi.iter().map(|v| v * k).collect(),
            psi: self.psi.iter().map(|v| v * k).collect(),
            dim: self.dim,
            time: self.time * c,
            s: self.s.iter().map(|v| v * k).collect(),
        })
    }

    /// Index of the interior node where ψ attains its smallest local
    /// minimum, if the profile has one.
    pub fn neck_index(&self) -> Option<usize> {
        let n = self.psi.len();
        let last = if self.grid.far == End::Pole { n - 1 } else { n };
        (1..last.saturating_sub(1))
            .filter(|&i| self.psi[i] <= self.psi[i - 1] && self.psi[i] <= self.psi[i + 1])
            .min_by(|&a, &b| self.psi[a].total_cmp(&self.psi[b]))
    }
}

/// Convenience wrapper for [`WarpedMetric::rescale`].
pub fn rescale(m: &WarpedMetric, c: f64) -> Result<WarpedMetric> {
    m.rescale(c)
}

/// A point of the quotient `(s, α)`: arclength along the axis and polar
/// angle on the fibre sphere. Points are taken on one fixed great circle
/// through the reference direction, so the fibre angle between two points
/// is `|α_p − α_q|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientPoint {
    pub s: f64,
    pub alpha: f64,
}

impl QuotientPoint {
    pub fn new(s: f64, alpha: f64) -> Self {
        QuotientPoint { s, alpha }
    }

    pub fn on_axis(s: f64) -> Self {
        QuotientPoint { s, alpha: 0.0 }
    }

    pub fn check(&self, m: &WarpedMetric) -> Result<()> {
        let len = m.axis_length();
        let tol = 1e-12 * len.max(1.0);
        if !(self.s >= -tol && self.s <= len + tol) {
            return Err(Error::Domain(format!("s = {} outside [0, {len}]", self.s)));
        }
        if !(self.alpha >= -1e-12 && self.alpha <= std::f64::consts::PI + 1e-12) {
            return Err(Error::Domain(format!("alpha = {} outside [0, pi]", self.alpha)));
        }
        Ok(())
    }
}

/// A geodesic ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: QuotientPoint,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: QuotientPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("ball radius {radius} must be positive")));
        }
        Ok(BallSpec { center, radius })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_stencils_are_fourth_order_through_poles() {
        let err = |n: usize| {
            let g = Grid::uniform(n, End::Pole).unwrap();
            let f: Vec<f64> = g.x().iter().map(|x| (PI * x).sin()).collect();
            let d = g.derivatives(&f, Parity::Odd);
            g.x().iter().zip(&d.d2).map(|(x, v)| (v + PI * PI * (PI * x).sin()).abs()).fold(0.0, f64::max)
        };
        let order = (err(41) / err(81)).log2();
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn boundary_end_uses_one_sided_stencils() {
        let g = Grid::uniform(64, End::Boundary).unwrap();
        let f: Vec<f64> = g.x().iter().map(|x| x * x * x).collect();
        let d = g.derivatives(&f, Parity::Odd);
        assert!((d.d1[63] - 3.0).abs() < 1e-10);
        assert!((d.d3[63] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_profiles() {
        let g = Arc::new(Grid::uniform(32, End::Pole).unwrap());
        let r = WarpedMetric::from_fn(g.clone(), 4, |_| 1.0, |x| (PI * x).sin() - 0.5);
        assert!(matches!(r, Err(Error::InvalidMetric(_))));
        let r = WarpedMetric::from_fn(g, 4, |_| -1.0, |x| (PI * x).sin());
        assert!(matches!(r, Err(Error::InvalidMetric(_))));
        assert!(Grid::uniform(8, End::Pole).is_err());
    }

    #[test]
    fn rescale_rejects_nonpositive_factor() {
        let g = Arc::new(Grid::uniform(32, End::Pole).unwrap());
        let m = WarpedMetric::from_fn(g, 4, |_| PI, |x| (PI * x).sin()).unwrap();
        assert!(m.rescale(0.0).is_err());
        assert!(m.rescale(-2.0).is_err());
        let same = m.rescale(1.0).unwrap();
        assert_eq!(same.psi(), m.psi());
        assert_eq!(same.phi(), m.phi());
    }
}
