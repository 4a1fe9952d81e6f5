//! Finite-volume Laplacian on the quotient `(s, α)`, where the volume form is
//! `ω_{n−2} ψ^{n−1} sin^{n−2}α ds dα` and
//! `|∇u|² = u_s² + u_α²/ψ²`.
//!
//! Nodes are the metric's grid rows times `bands + 1` equally spaced angles.
//! Each node owns the dual cell bounded by the mid-lines to its neighbours.
//! Edge conductances and cell masses integrate the weights exactly in α and
//! by Gauss quadrature in s, so pole rows and the axis lines carry the
//! vanishing weights without special cases.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{DistanceField, QuotientPoint, WarpedMetric};
use crate::numerics::{interp_local, sin_power_integral, unit_sphere_area};

const GAUSS3: [(f64, f64); 3] =
    [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

#[derive(Debug, Clone)]
pub struct QuotientOperator {
    rows: usize,
    cols: usize,
    s: Vec<f64>,
    psi: Vec<f64>,
    h_alpha: f64,
    mass: Vec<f64>,
    /// Conductance of the s-edge `(i, j)–(i+1, j)`, row-major over `rows − 1`.
    cond_s: Vec<f64>,
    /// Conductance of the α-edge `(i, j)–(i, j+1)`, row-major over `cols − 1`.
    cond_a: Vec<f64>,
}

impl QuotientOperator {
    pub fn new(m: &WarpedMetric, bands: usize) -> Self {
        let bands = bands.max(8);
        let s = m.arclength().to_vec();
        let psi = m.psi().to_vec();
        let rows = s.len();
        let cols = bands + 1;
        let h = PI / bands as f64;
        let n = m.dim();
        let k = (n - 1) as i32;
        let omega = unit_sphere_area(n - 2);

        let seg = |a: f64, b: f64, p: i32| -> f64 {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            GAUSS3.iter().map(|(g, w)| w * half * interp_local(&s, &psi, mid + half * g).max(0.0).powi(p)).sum()
        };
        // ∫ψ^{n−1} and ∫ψ^{n−3} over each node's dual interval, and ∫ψ^{n−1} over each edge
        let mut dual_k = vec![0.0; rows];
        let mut dual_k2 = vec![0.0; rows];
        let mut edge_k = vec![0.0; rows - 1];
        for i in 0..rows - 1 {
            let mid = 0.5 * (s[i] + s[i + 1]);
            let (l, r) = (seg(s[i], mid, k), seg(mid, s[i + 1], k));
            dual_k[i] += l;
            dual_k[i + 1] += r;
            edge_k[i] = l + r;
            dual_k2[i] += seg(s[i], mid, k - 2);
            dual_k2[i + 1] += seg(mid, s[i + 1], k - 2);
        }
        let sin_int = |a: f64, b: f64| sin_power_integral(n - 2, b) - sin_power_integral(n - 2, a);
        let dual_a: Vec<f64> = (0..cols)
            .map(|j| {
                let a = j as f64 * h;
                sin_int((a - 0.5 * h).max(0.0), (a + 0.5 * h).min(PI))
            })
            .collect();
        let edge_a: Vec<f64> = (0..cols - 1).map(|j| sin_int(j as f64 * h, (j + 1) as f64 * h)).collect();

        let mut mass = vec![0.0; rows * cols];
        let mut cond_s = vec![0.0; (rows - 1) * cols];
        let mut cond_a = vec![0.0; rows * (cols - 1)];
        for i in 0..rows {
            for j in 0..cols {
                mass[i * cols + j] = omega * dual_k[i] * dual_a[j];
            }
            for j in 0..cols - 1 {
                cond_a[i * (cols - 1) + j] = omega * dual_k2[i] * edge_a[j] / (h * h);
            }
            if i + 1 < rows {
                let ds = s[i + 1] - s[i];
                for j in 0..cols {
                    cond_s[i * cols + j] = omega * edge_k[i] * dual_a[j] / (ds * ds);
                }
            }
        }
        QuotientOperator { rows, cols, s, psi, h_alpha: h, mass, cond_s, cond_a }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_alpha(&self) -> f64 {
        self.h_alpha
    }

    pub fn row_s(&self) -> &[f64] {
        &self.s
    }

    pub fn row_psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn alpha(&self, j: usize) -> f64 {
        j as f64 * self.h_alpha
    }

    /// Volume of each node's dual cell; sums to the total volume.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `∫ u dV` for a nodal function.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.mass).map(|(a, b)| a * b).sum()
    }

    /// Calls `f(a, b, conductance)` for every edge.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        let c = self.cols;
        for i in 0..self.rows {
            for j in 0..c - 1 {
                f(i * c + j, i * c + j + 1, self.cond_a[i * (c - 1) + j]);
            }
            if i + 1 < self.rows {
                for j in 0..c {
                    f(i * c + j, (i + 1) * c + j, self.cond_s[i * c + j]);
                }
            }
        }
    }

    /// `K u`, the stiffness matrix of `∫|∇u|²` applied to `u` (Neumann).
    pub fn stiffness_apply(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.for_each_edge(|a, b, w| {
            let flux = w * (u[a] - u[b]);
            out[a] += flux;
            out[b] -= flux;
        });
    }

    /// `∫|∇u|² dV` in the discrete sense.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mut e = 0.0;
        self.for_each_edge(|a, b, w| e += w * (u[a] - u[b]).powi(2));
        e
    }

    /// Fill a nodal array from a function of `(s, α, ψ)`.
    pub fn sample(&self, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i * self.cols + j] = f(self.s[i], self.alpha(j), self.psi[i]);
            }
        }
        out
    }

    /// Spreads a per-row array over all angles.
    pub fn from_rows(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.rows {
            out[i * self.cols..(i + 1) * self.cols].fill(f[i]);
        }
        out
    }
}

/// A region of the quotient mesh given by a level function: node `k` is
/// inside when `level[k] < 0`. The level values also locate the boundary
/// between an inside and an outside node, which the Dirichlet solvers use.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientDomain {
    rows: usize,
    cols: usize,
    level: Vec<f64>,
}

impl QuotientDomain {
    /// The whole mesh.
    pub fn whole(rows: usize, cols: usize) -> Self {
        QuotientDomain { rows, cols, level: vec![-1.0; rows * cols] }
    }

    pub fn from_indicator(rows: usize, cols: usize, inside: &[bool]) -> Result<Self> {
        if inside.len() != rows * cols {
            return Err(Error::Parameter(format!("indicator has {} entries for a {rows}x{cols} mesh", inside.len())));
        }
        let level = inside.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
        Ok(QuotientDomain { rows, cols, level })
    }

    /// The geodesic ball `B(center, r)`. The centre must lie on the axis
    /// of the mesh (`α ∈ {0, π}` or a pole) so the ball is a union of
    /// mesh orbits.
    pub fn ball(m: &WarpedMetric, center: QuotientPoint, r: f64, bands: usize) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Parameter(format!("ball radius {r} must be positive")));
        }
        let on_axis = center.alpha.abs() < 1e-12 || (center.alpha - PI).abs() < 1e-12;
        let len = m.axis_length();
        let at_pole = center.s <= 1e-12 * len || center.s >= len * (1.0 - 1e-12);
        if !(on_axis || at_pole) {
            return Err(Error::Domain(format!("ball centre at alpha = {} is not on the symmetry axis", center.alpha)));
        }
        let field = DistanceField::compute(m, center, bands)?;
        let (rows, cols) = (field.rows(), field.cols());
        let mut level = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                level[i * cols + j] = field.node(i, j) - r;
            }
        }
        Ok(QuotientDomain { rows, cols, level })
    }

    /// Everything except the single node `(i, j)`.
    pub fn without_node(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut d = Self::whole(rows, cols);
        d.level[i * cols + j] = 1.0;
        d
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let level = self.level.iter().zip(&other.level).map(|(a, b)| a.min(*b)).collect();
        Ok(QuotientDomain { rows: self.rows, cols: self.cols, level })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Parameter("domains live on different meshes".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn contains(&self, k: usize) -> bool {
        self.level[k] < 0.0
    }

    pub fn level(&self) -> &[f64] {
        &self.level
    }

    pub fn count(&self) -> usize {
        self.level.iter().filter(|v| **v < 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Fraction of the edge from inside node `a` to outside node `b` at
    /// which the boundary sits.
    pub(crate) fn crossing(&self, a: usize, b: usize) -> f64 {
        let (la, lb) = (self.level[a], self.level[b]);
        (la / (la - lb)).clamp(1e-3, 1.0)
    }
}

/// Dirichlet Laplacian restricted to a domain: unknowns are the inside
/// nodes; edges leaving the domain become boundary terms at the crossing.
pub(crate) struct Restricted {
    /// Mesh index of each unknown.
    pub(crate) nodes: Vec<usize>,
    diag: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    pub(crate) mass: Vec<f64>,
}

impl Restricted {
    pub(crate) fn new(op: &QuotientOperator, dom: &QuotientDomain) -> Self {
        let mut index = vec![usize::MAX; op.len()];
        let nodes: Vec<usize> = (0..op.len()).filter(|&k| dom.contains(k)).collect();
        for (i, &k) in nodes.iter().enumerate() {
            index[k] = i;
        }
        let mut diag = vec![0.0; nodes.len()];
        let mut edges = Vec::new();
        op.for_each_edge(|a, b, w| match (dom.contains(a), dom.contains(b)) {
            (true, true) => {
                diag[index[a]] += w;
                diag[index[b]] += w;
                edges.push((index[a], index[b], w));
            }
            (true, false) => diag[index[a]] += w / dom.crossing(a, b),
            (false, true) => diag[index[b]] += w / dom.crossing(b, a),
            _ => {}
        });
        let mass = nodes.iter().map(|&k| op.mass()[k]).collect();
        Restricted { nodes, diag, edges, mass }
    }

    pub(crate) fn apply(&self, u: &[f64], out: &mut [f64]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(u) {
            *o = d * x;
        }
        for &(a, b, w) in &self.edges {
            out[a] -= w * u[b];
            out[b] -= w * u[a];
        }
    }

    /// `(cm M + ck K) u`.
    fn apply_shifted(&self, cm: f64, ck: f64, u: &[f64], out: &mut [f64]) {
        self.apply(u, out);
        for ((o, m), x) in out.iter_mut().zip(&self.mass).zip(u) {
            *o = ck * *o + cm * m * x;
        }
    }

    /// Solves `(cm M + ck K) x = b` by Jacobi-preconditioned conjugate
    /// gradients, starting from the guess in `x`.
    pub(crate) fn solve_shifted(&self, cm: f64, ck: f64, b: &[f64], x: &mut [f64], tol: f64) -> Result<usize> {
        let n = b.len();
        let diag: Vec<f64> = self.diag.iter().zip(&self.mass).map(|(d, m)| ck * d + cm * m).collect();
        let mut r = vec![0.0; n];
        self.apply_shifted(cm, ck, x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let cap = 20 * n + 1000;
        for it in 0..cap {
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * bnorm {
                return Ok(it);
            }
            self.apply_shifted(cm, ck, &p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Err(Error::Solver(format!("conjugate gradients stalled at relative residual {:e}", rnorm / bnorm)))
    }
}
