//! Geodesic distances on the two-dimensional quotient `ds² + ψ(s)² dα²`,
//! `α ∈ [0, π]`, by second-order fast marching.
//!
//! Rows are the metric's grid nodes, columns are `bands + 1` equally spaced
//! angles. The lines `α = 0` and `α = π` are mirror lines. Pole rows
//! collapse to a point whose distance to any source is known exactly
//! (`d = s` from the pole at `s = 0`), so they are seeded as boundary data.
//!
//! The documented error bound of a field is `max Δs + max ψ · Δα`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use super::{End, QuotientPoint, WarpedMetric};
use crate::error::Result;
use crate::numerics::{fornberg_weights, locate};

pub const DEFAULT_BANDS: usize = 128;

/// Angular resolution of the quotient mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotientMesh {
    pub bands: usize,
}

impl Default for QuotientMesh {
    fn default() -> Self {
        QuotientMesh { bands: DEFAULT_BANDS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Distance from one source point to every node of the quotient mesh.
#[derive(Debug, Clone)]
pub struct DistanceField {
    s: Vec<f64>,
    psi: Vec<f64>,
    cols: usize,
    h_alpha: f64,
    d: Vec<f64>,
    source: QuotientPoint,
    source_psi: f64,
    init_radius: f64,
    error_bound: f64,
    length: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Known,
}

impl DistanceField {
    pub fn compute(m: &WarpedMetric, source: QuotientPoint, bands: usize) -> Result<Self> {
        source.check(m)?;
        let bands = bands.max(8);
        let s = m.arclength().to_vec();
        let psi = m.psi().to_vec();
        let rows = s.len();
        let cols = bands + 1;
        let h_alpha = PI / bands as f64;
        let length = m.axis_length();
        let error_bound = m.max_ds() + m.max_psi() * h_alpha;
        let far_pole = m.grid().far_end() == End::Pole;
        let source = QuotientPoint::new(source.s.clamp(0.0, length), source.alpha);
        let source_psi = m.psi_at(source.s);

        let mut field = DistanceField {
            s,
            psi,
            cols,
            h_alpha,
            d: vec![f64::INFINITY; rows * cols],
            source,
            source_psi,
            init_radius: 0.0,
            error_bound,
            length,
        };

        let tol = 1e-12 * length.max(1.0);
        if source.s <= tol {
            for i in 0..rows {
                field.d[i * cols..(i + 1) * cols].fill(field.s[i]);
            }
            return Ok(field);
        }
        if far_pole && source.s >= length - tol {
            for i in 0..rows {
                field.d[i * cols..(i + 1) * cols].fill(length - field.s[i]);
            }
            return Ok(field);
        }

        let mut state = vec![State::Far; rows * cols];
        let mut heap = BinaryHeap::new();
        let known_row = |field: &mut DistanceField, state: &mut Vec<State>, i: usize, v: f64| {
            for j in 0..cols {
                field.d[i * cols + j] = v;
                state[i * cols + j] = State::Known;
            }
        };
        known_row(&mut field, &mut state, 0, source.s);
        if far_pole {
            known_row(&mut field, &mut state, rows - 1, length - source.s);
        }

        // exact-to-second-order seed around the source
        let k = locate(&field.s, source.s);
        let local_ds = field.s[(k + 1).min(rows - 1)] - field.s[k];
        field.init_radius = 2.5 * local_ds.max(source_psi * h_alpha);
        for i in 0..rows {
            if state[i * cols] == State::Known {
                continue;
            }
            if (field.s[i] - source.s).abs() > field.init_radius {
                continue;
            }
            for j in 0..cols {
                let v = field.local(field.s[i], field.psi[i], j as f64 * h_alpha);
                if v <= field.init_radius {
                    field.d[i * cols + j] = v;
                    state[i * cols + j] = State::Known;
                }
            }
        }
        // make sure the seed is never empty
        for i in [k, (k + 1).min(rows - 1)] {
            let idx = i * cols;
            if state[idx] != State::Known {
                field.d[idx] = field.local(field.s[i], field.psi[i], 0.0);
                state[idx] = State::Known;
            }
        }

        for idx in 0..rows * cols {
            if state[idx] == State::Known {
                field.relax_neighbours(idx, &mut state, &mut heap);
            }
        }
        while let Some(Reverse(Entry(v, idx))) = heap.pop() {
            if state[idx] == State::Known || v > field.d[idx] {
                continue;
            }
            state[idx] = State::Known;
            field.relax_neighbours(idx, &mut state, &mut heap);
        }
        Ok(field)
    }

    /// Second-order local approximation of the distance from the source,
    /// exact on flat and conical profiles.
    fn local(&self, s: f64, psi: f64, dalpha: f64) -> f64 {
        let ds = s - self.source.s;
        let sin = (0.5 * dalpha).sin();
        (ds * ds + 4.0 * self.source_psi * psi * sin * sin).max(0.0).sqrt()
    }

    fn neighbours(&self, idx: usize) -> [Option<usize>; 4] {
        let rows = self.s.len();
        let (i, j) = (idx / self.cols, idx % self.cols);
        let last = self.cols - 1;
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == last { last - 1 } else { j + 1 };
        [
            (i > 0).then(|| idx - self.cols),
            (i + 1 < rows).then(|| idx + self.cols),
            Some(i * self.cols + jm),
            Some(i * self.cols + jp),
        ]
    }

    fn relax_neighbours(&mut self, idx: usize, state: &mut [State], heap: &mut BinaryHeap<Reverse<Entry>>) {
        for nb in self.neighbours(idx).into_iter().flatten() {
            if state[nb] == State::Known {
                continue;
            }
            let v = self.update(nb, state);
            if v < self.d[nb] {
                self.d[nb] = v;
                state[nb] = State::Trial;
                heap.push(Reverse(Entry(v, nb)));
            }
        }
    }

    /// Upwind one-sided derivative data `(a, q)` along one axis so that the
    /// derivative reads `a·T − q`.
    fn axis_term(&self, state: &[State], near: usize, next: Option<usize>, h1: f64, h2: f64) -> (f64, f64) {
        let t1 = self.d[near];
        if let Some(n2) = next {
            let t2 = self.d[n2];
            if state[n2] == State::Known && t2 <= t1 {
                let w = fornberg_weights(0.0, &[0.0, -h1, -(h1 + h2)], 1);
                let (a, b, c) = (w[1][0], w[1][1], w[1][2]);
                return (a, -(b * t1 + c * t2));
            }
        }
        (1.0 / h1, t1 / h1)
    }

    fn update(&self, idx: usize, state: &[State]) -> f64 {
        let rows = self.s.len();
        let cols = self.cols;
        let (i, j) = (idx / cols, idx % cols);
        let mut terms: Vec<(f64, f64, f64)> = Vec::with_capacity(2);

        // axis direction
        let mut best: Option<(usize, bool)> = None;
        if i > 0 && state[idx - cols] == State::Known {
            best = Some((idx - cols, false));
        }
        if i + 1 < rows && state[idx + cols] == State::Known {
            let c = idx + cols;
            if best.is_none_or(|(b, _)| self.d[c] < self.d[b]) {
                best = Some((c, true));
            }
        }
        if let Some((nb, up)) = best {
            let (h1, next, h2) = if up {
                let h1 = self.s[i + 1] - self.s[i];
                if i + 2 < rows && !self.is_pole_row(i + 1) {
                    (h1, Some(nb + cols), self.s[i + 2] - self.s[i + 1])
                } else {
                    (h1, None, 0.0)
                }
            } else {
                let h1 = self.s[i] - self.s[i - 1];
                if i >= 2 && !self.is_pole_row(i - 1) {
                    (h1, Some(nb - cols), self.s[i - 1] - self.s[i - 2])
                } else {
                    (h1, None, 0.0)
                }
            };
            let (a, q) = self.axis_term(state, nb, next, h1, h2);
            terms.push((a, q, 1.0));
        }

        // angular direction
        let psi = self.psi[i];
        if psi > 0.0 {
            let last = cols - 1;
            let mirror = |jj: isize| -> usize {
                let jj = jj.unsigned_abs();
                if jj > last {
                    2 * last - jj
                } else {
                    jj
                }
            };
            let jl = mirror(j as isize - 1);
            let jr = mirror(j as isize + 1);
            let (l, r) = (i * cols + jl, i * cols + jr);
            let pick = match (state[l] == State::Known, state[r] == State::Known) {
                (true, true) => Some(if self.d[l] <= self.d[r] { (l, -1isize) } else { (r, 1) }),
                (true, false) => Some((l, -1)),
                (false, true) => Some((r, 1)),
                _ => None,
            };
            if let Some((nb, dir)) = pick {
                let j2 = mirror(j as isize + 2 * dir);
                let next = Some(i * cols + j2);
                let (a, q) = self.axis_term(state, nb, next, self.h_alpha, self.h_alpha);
                terms.push((a, q, psi * psi));
            }
        }

        solve_eikonal(&terms).unwrap_or(f64::INFINITY)
    }

    fn is_pole_row(&self, i: usize) -> bool {
        self.psi[i] == 0.0
    }

    pub fn rows(&self) -> usize {
        self.s.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.cols + j]
    }

    pub fn source(&self) -> QuotientPoint {
        self.source
    }

    pub fn axis_length(&self) -> f64 {
        self.length
    }

    /// Documented mesh error bound on distances from this field.
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    /// Distance from the source to `(s, α)`, bilinear between nodes.
    pub fn at(&self, s: f64, alpha: f64) -> f64 {
        let da = (alpha - self.source.alpha).abs().min(PI);
        let s = s.clamp(0.0, self.length);
        if (s - self.source.s).abs() < self.init_radius {
            let v = self.local(s, interp_linear(&self.s, &self.psi, s), da);
            if v < self.init_radius {
                return v;
            }
        }
        let i = locate(&self.s, s);
        let ts = ((s - self.s[i]) / (self.s[i + 1] - self.s[i])).clamp(0.0, 1.0);
        let u = da / self.h_alpha;
        let j = (u.floor() as usize).min(self.cols - 2);
        let ta = (u - j as f64).clamp(0.0, 1.0);
        let c = self.cols;
        let v00 = self.d[i * c + j];
        let v01 = self.d[i * c + j + 1];
        let v10 = self.d[(i + 1) * c + j];
        let v11 = self.d[(i + 1) * c + j + 1];
        (1.0 - ts) * ((1.0 - ta) * v00 + ta * v01) + ts * ((1.0 - ta) * v10 + ta * v11)
    }

    /// Distance on row `i` at angle `alpha` (linear in α).
    pub fn row_at(&self, i: usize, alpha: f64) -> f64 {
        let u = (alpha / self.h_alpha).clamp(0.0, (self.cols - 1) as f64);
        let j = (u.floor() as usize).min(self.cols - 2);
        let t = u - j as f64;
        (1.0 - t) * self.d[i * self.cols + j] + t * self.d[i * self.cols + j + 1]
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = locate(xs, x);
    let t = ((x - xs[k]) / (xs[k + 1] - xs[k])).clamp(0.0, 1.0);
    (1.0 - t) * ys[k] + t * ys[k + 1]
}

/// Solves `Σ (a T − q)² / g = 1` for the upwind root, dropping directions
/// that would violate causality.
fn solve_eikonal(terms: &[(f64, f64, f64)]) -> Option<f64> {
    if terms.is_empty() {
        return None;
    }
    let single = |(a, q, g): (f64, f64, f64)| (q + g.sqrt()) / a;
    if terms.len() == 2 {
        let (mut aa, mut bb, mut cc) = (0.0, 0.0, -1.0);
        for &(a, q, g) in terms {
            aa += a * a / g;
            bb += a * q / g;
            cc += q * q / g;
        }
        let disc = bb * bb - aa * cc;
        if disc >= 0.0 {
            let t = (bb + disc.sqrt()) / aa;
            if terms.iter().all(|&(a, q, _)| a * t >= q) {
                return Some(t);
            }
        }
        return Some(single(terms[0]).min(single(terms[1])));
    }
    Some(single(terms[0]))
}

/// Geodesic distance between two quotient points, symmetrized over the two
/// one-source solves so that `distance(p, q) == distance(q, p)` exactly.
pub fn distance(m: &WarpedMetric, p: QuotientPoint, q: QuotientPoint) -> Result<f64> {
    distance_with(m, p, q, DEFAULT_BANDS)
}

pub(crate) fn distance_with(m: &WarpedMetric, p: QuotientPoint, q: QuotientPoint, bands: usize) -> Result<f64> {
    p.check(m)?;
    q.check(m)?;
    let da = (p.alpha - q.alpha).abs();
    let a = QuotientPoint::new(p.s, 0.0);
    let b = QuotientPoint::new(q.s, 0.0);
    let dp = DistanceField::compute(m, a, bands)?.at(q.s, da);
    let dq = DistanceField::compute(m, b, bands)?.at(p.s, da);
    Ok(0.5 * (dp + dq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use std::sync::Arc;

    fn unit_sphere(n: usize) -> WarpedMetric {
        let g = Arc::new(Grid::uniform(n, End::Pole).unwrap());
        WarpedMetric::from_fn(g, 4, |_| PI, |x| (PI * x).sin()).unwrap()
    }

    fn great_circle(a: QuotientPoint, b: QuotientPoint) -> f64 {
        let c = a.s.cos() * b.s.cos() + a.s.sin() * b.s.sin() * (a.alpha - b.alpha).cos();
        c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn pole_to_pole_is_pi() {
        let m = unit_sphere(200);
        let d = distance(&m, QuotientPoint::on_axis(0.0), QuotientPoint::on_axis(m.axis_length())).unwrap();
        assert!((d - PI).abs() < 1e-9);
    }

    #[test]
    fn equator_points() {
        let m = unit_sphere(200);
        for alpha in [0.3, 1.0, 2.0, 3.0] {
            let p = QuotientPoint::new(PI / 2.0, 0.0);
            let q = QuotientPoint::new(PI / 2.0, alpha);
            let d = distance(&m, p, q).unwrap();
            let field = DistanceField::compute(&m, p, DEFAULT_BANDS).unwrap();
            assert!((d - alpha).abs() < field.error_bound(), "alpha {alpha}: {d}");
        }
    }

    #[test]
    fn generic_pairs_within_error_bound() {
        let m = unit_sphere(200);
        let pts = [
            QuotientPoint::new(0.4, 0.0),
            QuotientPoint::new(1.2, 0.7),
            QuotientPoint::new(2.5, 2.9),
            QuotientPoint::new(3.0, 1.5),
        ];
        for a in pts {
            let bound = DistanceField::compute(&m, a, DEFAULT_BANDS).unwrap().error_bound();
            for b in pts {
                let d = distance(&m, a, b).unwrap();
                assert!((d - great_circle(a, b)).abs() < bound, "{a:?} {b:?}: {d} vs {}", great_circle(a, b));
            }
        }
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let m = unit_sphere(100);
        let p = QuotientPoint::new(1.1, 0.4);
        assert_eq!(distance(&m, p, p).unwrap(), 0.0);
    }

    #[test]
    fn outside_points_are_rejected() {
        let m = unit_sphere(100);
        let bad = QuotientPoint::new(4.0, 0.0);
        assert!(distance(&m, bad, QuotientPoint::on_axis(0.0)).is_err());
        let bad = QuotientPoint::new(1.0, 4.0);
        assert!(distance(&m, bad, QuotientPoint::on_axis(0.0)).is_err());
    }

    #[test]
    fn flat_cap_distances() {
        let g = Arc::new(Grid::uniform(200, End::Boundary).unwrap());
        let m = WarpedMetric::from_fn(g, 4, |_| 1.0, |x| x).unwrap();
        let p = QuotientPoint::new(0.5, 0.0);
        let q = QuotientPoint::new(0.7, 1.0);
        let exact = (0.25f64 + 0.49 - 2.0 * 0.35 * 1.0f64.cos()).sqrt();
        let d = distance(&m, p, q).unwrap();
        assert!((d - exact).abs() < 1e-2, "{d} vs {exact}");
    }
}
