//! First Dirichlet eigenvalues, Faber–Krahn ratios and Sobolev audits.
//!
//! Pole-centred balls reduce to the radial problem
//! `−(ψ^{n−1} u_s)_s = λ ψ^{n−1} u`, solved with linear finite elements.
//! General domains use the finite-volume quotient Laplacian of
//! [`QuotientOperator`] and never assume a radial eigenfunction.

mod operator;

use serde::{Deserialize, Serialize};

pub(crate) use operator::Restricted;
pub use operator::{QuotientDomain, QuotientOperator};

use crate::error::{Error, Result};
use crate::estimates::EstimateReport;
use crate::geometry::{ball_volume, curvature, BallSpec, DistanceField, QuotientPoint, WarpedMetric, DEFAULT_BANDS};
use crate::numerics::solve_tridiagonal;

/// Relative change in λ at which inverse iteration stops.
pub const EIGEN_TOLERANCE: f64 = 1e-8;
/// Relative residual `‖K u − λ M u‖ / ‖λ M u‖` required as well.
pub const EIGEN_RESIDUAL: f64 = 1e-6;
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Coefficients of the Sobolev inequality
/// `‖u‖²_{2n/(n−2)} ≤ A ∫(|∇u|² + R u²/4) + B ∫u²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevConstants {
    pub a: f64,
    pub b: f64,
}

impl SobolevConstants {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Parameter(format!("Sobolev A must be positive, got {a}")));
        }
        if !(b >= 1.0) {
            return Err(Error::Parameter(format!("Sobolev B must be at least 1, got {b}")));
        }
        Ok(SobolevConstants { a, b })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Nodal values, normalised to unit L² norm. On the radial grid for pole
    /// balls, on the quotient mesh otherwise.
    pub eigenfunction: Vec<f64>,
    /// `‖K u − λ M u‖ / ‖λ M u‖` for the returned pair.
    pub residual: f64,
    pub iterations: usize,
    /// Discretisation error from a half-resolution solve, when available.
    pub error_estimate: Option<f64>,
}

/// Radial grid of a pole ball: uniform nodes on `[0, r]`.
#[allow(clippy::type_complexity)]
fn radial_system(m: &WarpedMetric, r: f64, elements: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = r / elements as f64;
    let k = (m.dim() - 1) as i32;
    // unknowns are nodes 0..elements-1; node `elements` is the Dirichlet end
    let n = elements;
    let (mut kd, mut ko) = (vec![0.0; n], vec![0.0; n]);
    let (mut md, mut mo) = (vec![0.0; n], vec![0.0; n]);
    const G: [(f64, f64); 3] =
        [(0.112_701_665_379_258_3, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];
    for e in 0..elements {
        let s0 = e as f64 * h;
        let (mut w0, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        for (t, wt) in G {
            let w = m.psi_at(s0 + t * h).powi(k) * wt * h;
            w0 += w;
            m00 += w * (1.0 - t) * (1.0 - t);
            m01 += w * (1.0 - t) * t;
            m11 += w * t * t;
        }
        let stiff = w0 / (h * h);
        kd[e] += stiff;
        md[e] += m00;
        if e + 1 < n {
            kd[e + 1] += stiff;
            ko[e] = -stiff;
            md[e + 1] += m11;
            mo[e] = m01;
        }
    }
    let s = (0..n).map(|i| i as f64 * h).collect();
    (s, kd, ko, md, mo)
}

fn tri_apply(d: &[f64], o: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let mut v = d[i] * u[i];
            if i > 0 {
                v += o[i - 1] * u[i - 1];
            }
            if i + 1 < n {
                v += o[i] * u[i + 1];
            }
            v
        })
        .collect()
}

/// `‖K u − λ M u‖ / ‖λ M u‖`.
fn relative_residual(ku: &[f64], mu: &[f64], lambda: f64) -> f64 {
    let num: f64 = ku.iter().zip(mu).map(|(a, b)| (a - lambda * b).powi(2)).sum();
    let den: f64 = mu.iter().map(|b| (lambda * b).powi(2)).sum();
    (num / den).sqrt()
}

fn radial_eigen(m: &WarpedMetric, r: f64, elements: usize) -> Result<(f64, Vec<f64>, f64, usize)> {
    let (_, kd, ko, md, mo) = radial_system(m, r, elements);
    let n = kd.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut u = vec![1.0; n];
    let mut lambda = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITERATIONS {
        let mut v = tri_apply(&md, &mo, &u);
        let lower: Vec<f64> = std::iter::once(0.0).chain(ko[..n - 1].iter().copied()).collect();
        solve_tridiagonal(&lower, &kd, &ko, &mut v);
        let mv = tri_apply(&md, &mo, &v);
        let kv = tri_apply(&kd, &ko, &v);
        let norm2 = dot(&v, &mv);
        let new = dot(&v, &kv) / norm2;
        let scale = norm2.sqrt();
        u = v.iter().map(|x| x / scale).collect();
        let ku = tri_apply(&kd, &ko, &u);
        let mu = tri_apply(&md, &mo, &u);
        let res = relative_residual(&ku, &mu, new);
        let done = (new - lambda).abs() <= EIGEN_TOLERANCE * new && res <= EIGEN_RESIDUAL;
        lambda = new;
        if done {
            return Ok((lambda, u, res, it));
        }
    }
    Err(Error::Convergence { iterations: EIGEN_MAX_ITERATIONS, residual: f64::NAN, last_lambda: lambda })
}

/// First Dirichlet eigenvalue of the ball of radius `r` about the pole
/// `s = 0`.
pub fn lambda1_pole_ball(m: &WarpedMetric, r: f64) -> Result<EigenResult> {
    let len = m.axis_length();
    let closed = m.grid().far_end() == crate::geometry::End::Pole;
    if !(r > 0.0) || r > len * (1.0 + 1e-12) || (closed && r >= len * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!("pole ball radius {r} must lie in (0, {len})")));
    }
    let inside = m.arclength().iter().filter(|&&s| s < r).count();
    let elements = (4 * inside).max(32) & !1;
    let (lambda1, eigenfunction, residual, iterations) = radial_eigen(m, r, elements)?;
    let (coarse, ..) = radial_eigen(m, r, elements / 2)?;
    Ok(EigenResult {
        lambda1,
        eigenfunction,
        residual,
        iterations,
        error_estimate: Some((coarse - lambda1).abs() / 3.0),
    })
}

/// First Dirichlet eigenvalue of a quotient-mesh domain by inverse
/// iteration with preconditioned conjugate-gradient inner solves.
pub fn lambda1_domain(m: &WarpedMetric, domain: &QuotientDomain) -> Result<EigenResult> {
    let op = QuotientOperator::new(m, domain.cols() - 1);
    if (op.rows(), op.cols()) != (domain.rows(), domain.cols()) {
        return Err(Error::Parameter("domain does not match the metric's quotient mesh".into()));
    }
    if domain.is_empty() {
        return Err(Error::Domain("empty domain".into()));
    }
    let sys = Restricted::new(&op, domain);
    let n = sys.nodes.len();
    let mnorm = |v: &[f64]| v.iter().zip(&sys.mass).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    let mut u = vec![1.0; n];
    let s = mnorm(&u);
    u.iter_mut().for_each(|v| *v /= s);
    let mut lambda = f64::INFINITY;
    let mut v = u.clone();
    let mut kv = vec![0.0; n];
    for it in 1..=EIGEN_MAX_ITERATIONS {
        let rhs: Vec<f64> = u.iter().zip(&sys.mass).map(|(a, b)| a * b).collect();
        if lambda.is_finite() {
            v.iter_mut().zip(&u).for_each(|(x, y)| *x = y / lambda);
        }
        sys.solve_shifted(0.0, 1.0, &rhs, &mut v, 1e-11)?;
        sys.apply(&v, &mut kv);
        let norm = mnorm(&v);
        let new = v.iter().zip(&kv).map(|(a, b)| a * b).sum::<f64>() / (norm * norm);
        u.iter_mut().zip(&v).for_each(|(x, y)| *x = y / norm);
        sys.apply(&u, &mut kv);
        let mu: Vec<f64> = u.iter().zip(&sys.mass).map(|(a, b)| a * b).collect();
        let res = relative_residual(&kv, &mu, new);
        let done = (new - lambda).abs() <= EIGEN_TOLERANCE * new && res <= EIGEN_RESIDUAL;
        lambda = new;
        if done {
            let mut eigenfunction = vec![0.0; op.len()];
            for (i, &k) in sys.nodes.iter().enumerate() {
                eigenfunction[k] = u[i];
            }
            return Ok(EigenResult {
                lambda1: lambda,
                eigenfunction,
                residual: res,
                iterations: it,
                error_estimate: None,
            });
        }
    }
    Err(Error::Convergence { iterations: EIGEN_MAX_ITERATIONS, residual: f64::NAN, last_lambda: lambda })
}

/// Subdomains sampled by [`faber_krahn`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainFamily {
    /// Balls about the region's centre with radii `fraction · r_region`.
    ConcentricBalls { fractions: Vec<f64> },
    /// Explicit balls; each must lie inside the region.
    Balls(Vec<BallSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaberKrahnResult {
    /// `min_U Vol(U)^{2/n} λ₁(U)` over the family.
    pub value: f64,
    pub best: BallSpec,
    /// `(U, Vol(U), λ₁(U), Vol(U)^{2/n} λ₁(U))` for every sampled domain.
    pub samples: Vec<(BallSpec, f64, f64, f64)>,
}

fn ball_lambda1(m: &WarpedMetric, b: &BallSpec) -> Result<f64> {
    if b.center.s <= 1e-12 * m.axis_length() {
        Ok(lambda1_pole_ball(m, b.radius)?.lambda1)
    } else {
        let dom = QuotientDomain::ball(m, b.center, b.radius, DEFAULT_BANDS)?;
        Ok(lambda1_domain(m, &dom)?.lambda1)
    }
}

/// Smallest sampled value of `Vol(U)^{2/n} λ₁(U)`, an upper bound for the
/// Faber–Krahn constant of the region.
pub fn faber_krahn(m: &WarpedMetric, region: &BallSpec, family: &DomainFamily) -> Result<FaberKrahnResult> {
    let balls: Vec<BallSpec> = match family {
        DomainFamily::ConcentricBalls { fractions } => fractions
            .iter()
            .map(|f| {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(Error::Parameter(format!("ball fraction {f} outside (0, 1]")));
                }
                BallSpec::new(region.center, f * region.radius)
            })
            .collect::<Result<_>>()?,
        DomainFamily::Balls(list) => {
            for b in list {
                let d = crate::geometry::distance(m, region.center, b.center)?;
                if d + b.radius > region.radius * (1.0 + 1e-9) {
                    return Err(Error::Domain(format!(
                        "ball of radius {} at distance {d} leaves the region of radius {}",
                        b.radius, region.radius
                    )));
                }
            }
            list.clone()
        }
    };
    if balls.is_empty() {
        return Err(Error::Parameter("empty domain family".into()));
    }
    let n = m.dim() as f64;
    let mut samples = Vec::with_capacity(balls.len());
    for b in balls {
        let vol = ball_volume(m, &b)?.value;
        let lam = ball_lambda1(m, &b)?;
        samples.push((b, vol, lam, vol.powf(2.0 / n) * lam));
    }
    let best = samples.iter().min_by(|a, b| a.3.total_cmp(&b.3)).unwrap();
    Ok(FaberKrahnResult { value: best.3, best: best.0, samples: samples.clone() })
}

/// Test functions for [`sobolev_audit`]: bumps
/// `u = amplitude · (1 − (d/w)²)²` on `d < w`, for each centre on the axis
/// and each width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub amplitude: f64,
}

/// `(‖u‖²_{2n/(n−2)}, ∫|∇u|², ∫R u²/4, ∫u²)` for one bump.
pub fn sobolev_terms(m: &WarpedMetric, center: f64, width: f64, amplitude: f64) -> Result<[f64; 4]> {
    if !(width > 0.0) {
        return Err(Error::Parameter(format!("bump width {width} must be positive")));
    }
    let field = DistanceField::compute(m, QuotientPoint::on_axis(center), DEFAULT_BANDS)?;
    let op = QuotientOperator::new(m, DEFAULT_BANDS);
    let r_rows = curvature(m)?.scalar;
    let n = m.dim() as f64;
    let q = 2.0 * n / (n - 2.0);
    let (mut lq, mut grad, mut curv, mut l2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..op.rows() {
        for j in 0..op.cols() {
            let d = field.node(i, j);
            if d >= width {
                continue;
            }
            let t = 1.0 - (d / width).powi(2);
            let u = amplitude * t * t;
            let du = amplitude * 2.0 * t * (-2.0 * d / (width * width));
            let w = op.mass()[i * op.cols() + j];
            lq += w * u.abs().powf(q);
            grad += w * du * du;
            curv += w * r_rows[i] * u * u / 4.0;
            l2 += w * u * u;
        }
    }
    Ok([lq.powf(2.0 / q), grad, curv, l2])
}

/// Checks the Sobolev inequality with constants `c` on every bump of the
/// family and reports the worst case (smallest margin relative to its
/// right side). Violations are counted in the `violations` parameter.
pub fn sobolev_audit(m: &WarpedMetric, c: &SobolevConstants, family: &BumpFamily) -> Result<EstimateReport> {
    let eq = "(∫|u|^{2n/(n-2)})^{(n-2)/n} <= A∫(|∇u|²+R u²/4) + B∫u²";
    let mut worst: Option<(f64, EstimateReport)> = None;
    let mut violations = 0usize;
    let mut tests = 0usize;
    for &center in &family.centers {
        for &w in &family.widths {
            let [lhs, grad, curv, l2] = sobolev_terms(m, center, w, family.amplitude)?;
            let rhs = c.a * (grad + curv) + c.b * l2;
            let rep = EstimateReport::upper("sobolev", eq, lhs, rhs)
                .at(QuotientPoint::on_axis(center), w)
                .param("A", c.a)
                .param("B", c.b);
            tests += 1;
            if !rep.passed {
                violations += 1;
            }
            let rel = if rhs > 0.0 { rep.margin / rhs } else { rep.margin };
            if worst.as_ref().is_none_or(|(r, _)| rel < *r) {
                worst = Some((rel, rep));
            }
        }
    }
    let (_, rep) = worst.ok_or_else(|| Error::Parameter("empty test-function family".into()))?;
    Ok(rep.param("tests", tests as f64).param("violations", violations as f64).at_time(m.time()))
}

#[cfg(test)]
mod tests;
