//! Heat and conjugate heat equations on evolving warped metrics, the
//! Perelman-type cut-off, and the Moser sup-bound audit.
//!
//! Fields live on the `(s, α)` quotient mesh of [`QuotientOperator`]; node
//! `(i, j)` follows grid point `x_i`, so time derivatives are taken at fixed
//! `x`. Both solvers split the zeroth-order term (solved exactly) from
//! diffusion, which uses the L-stable TR-BDF2 scheme with the operator frozen
//! at the end of each step. With a static metric the scheme conserves
//! `∫f dV` exactly.

mod cutoff;
mod kernel;
mod moser;

pub use cutoff::{cutoff_construct, eta, CutoffField, CutoffOptions};
pub use kernel::kernel_bounds_audit;
pub use moser::{
    moser_audit, moser_constants, ricci_moser_field, MoserCase, MoserConstants, MoserParams, RICCI_MOSER_EPS,
};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{curvature, QuotientPoint, WarpedMetric};
use crate::spectral::{QuotientDomain, QuotientOperator, Restricted};

/// Largest diffusion step, in units of time.
pub const HEAT_MAX_DT: f64 = 1e-3;
/// Relative tolerance of the inner linear solves.
const SOLVE_TOLERANCE: f64 = 1e-12;
/// Values below `−NEGATIVITY_TOLERANCE · max f` are a solver failure;
/// smaller negative round-off is set to zero.
const NEGATIVITY_TOLERANCE: f64 = 1e-12;
/// Width of the mollified delta, in cells.
pub const DELTA_CELLS: f64 = 3.0;

/// Time samples of a scalar field on the quotient mesh.
#[derive(Debug, Clone)]
pub struct HeatField {
    /// Increasing sample times.
    pub times: Vec<f64>,
    /// One mesh array per time, row-major `rows × cols`.
    pub values: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    /// Support of the field; values outside are zero.
    pub domain: QuotientDomain,
    /// Bound `ℓ` with reaction `≤ ℓ/t`.
    pub ell: f64,
    /// Constant with `|Rm| ≤ c₀/t`; solvers set it to the measured value
    /// over the field's time span.
    pub c0: f64,
}

impl HeatField {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.cols - 1
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    /// The field at time `t`, linear between samples.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let (t0, t1) = (self.times[0], self.times[self.times.len() - 1]);
        let tol = 1e-12 * t1.abs().max(1.0);
        if t < t0 - tol || t > t1 + tol {
            return Err(Error::Coverage { start: t, end: t, first: t0, last: t1 });
        }
        if self.times.len() == 1 {
            return Ok(self.values[0].clone());
        }
        let k = crate::numerics::locate(&self.times, t.clamp(t0, t1));
        let w = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
        Ok(self.values[k].iter().zip(&self.values[k + 1]).map(|(a, b)| (1.0 - w) * a + w * b).collect())
    }

    /// Values along the `α = 0` line at sample `k`, one per grid row.
    pub fn axis_profile(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[k][i * self.cols]).collect()
    }
}

/// A point on the symmetry axis, where fields on the quotient mesh can be
/// centred.
pub(crate) fn require_axis(m: &WarpedMetric, x: QuotientPoint) -> Result<QuotientPoint> {
    x.check(m)?;
    let len = m.axis_length();
    let at_pole = x.s <= 1e-12 * len || x.s >= len * (1.0 - 1e-12);
    if at_pole || x.alpha.abs() < 1e-12 {
        Ok(QuotientPoint::on_axis(x.s))
    } else if (x.alpha - std::f64::consts::PI).abs() < 1e-12 {
        Ok(x)
    } else {
        Err(Error::Domain(format!("centre at alpha = {} is not on the symmetry axis", x.alpha)))
    }
}

/// `sup_t t·max|Rm|` over the trajectory checkpoints up to `b`.
pub(crate) fn measured_c0(traj: &Trajectory, b: f64) -> Result<f64> {
    let mut c0: f64 = 0.0;
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        if t <= b && t > 0.0 {
            c0 = c0.max(t * curvature(m)?.max_rm());
        }
    }
    Ok(c0)
}

/// One diffusion step `M u' = −K u` over `dt` by TR-BDF2 with the
/// operator of `m`.
struct Diffusion {
    sys: Restricted,
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

impl Diffusion {
    fn new(m: &WarpedMetric, domain: &QuotientDomain) -> Result<Self> {
        let op = QuotientOperator::new(m, domain.cols() - 1);
        if (op.rows(), op.cols()) != (domain.rows(), domain.cols()) {
            return Err(Error::Parameter("domain does not match the metric's quotient mesh".into()));
        }
        Ok(Diffusion { sys: Restricted::new(&op, domain) })
    }

    fn mass(&self) -> &[f64] {
        &self.sys.mass
    }

    fn step(&self, u: &mut [f64], dt: f64) -> Result<()> {
        let n = u.len();
        let sys = &self.sys;
        // trapezoid to t + γ dt
        let h = 0.5 * GAMMA * dt;
        let mut ku = vec![0.0; n];
        sys.apply(u, &mut ku);
        let b: Vec<f64> = (0..n).map(|i| sys.mass[i] * u[i] - h * ku[i]).collect();
        let mut mid = u.to_vec();
        sys.solve_shifted(1.0, h, &b, &mut mid, SOLVE_TOLERANCE)?;
        // BDF2 to t + dt
        let c = GAMMA * (2.0 - GAMMA);
        let (w1, w0) = (1.0 / c, (1.0 - GAMMA).powi(2) / c);
        let b: Vec<f64> = (0..n).map(|i| sys.mass[i] * (w1 * mid[i] - w0 * u[i])).collect();
        let mut next = mid;
        sys.solve_shifted(1.0, (1.0 - GAMMA) / (2.0 - GAMMA) * dt, &b, &mut next, SOLVE_TOLERANCE)?;
        u.copy_from_slice(&next);
        Ok(())
    }
}

fn check_sign(u: &mut [f64]) -> Result<()> {
    let top = u.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for (k, v) in u.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::Solver(format!("non-finite value at unknown {k}")));
        }
        if *v < 0.0 {
            if *v < -NEGATIVITY_TOLERANCE * top {
                return Err(Error::Solver(format!("negative value {v:e} at unknown {k}")));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

fn scatter(sys: &Restricted, u: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (v, &k) in u.iter().zip(&sys.nodes) {
        out[k] = *v;
    }
    out
}

/// Solves `∂f/∂t = Δ_{g(t)} f + (ℓ/t) f` on `domain` with zero Dirichlet
/// data, from `f0` at `t_start` to the end of the trajectory. Samples are
/// kept at `t_start` and every later checkpoint.
pub fn solve_heat(traj: &Trajectory, domain: &QuotientDomain, f0: &[f64], ell: f64, t_start: f64) -> Result<HeatField> {
    solve_heat_with(traj, domain, f0, ell, t_start, HEAT_MAX_DT)
}

/// [`solve_heat`] with an explicit largest step.
pub fn solve_heat_with(
    traj: &Trajectory,
    domain: &QuotientDomain,
    f0: &[f64],
    ell: f64,
    t_start: f64,
    max_dt: f64,
) -> Result<HeatField> {
    let len = domain.rows() * domain.cols();
    if f0.len() != len {
        return Err(Error::Parameter(format!("initial data has {} values for {len} nodes", f0.len())));
    }
    if f0.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("initial data must be finite and non-negative".into()));
    }
    if !(ell >= 0.0) {
        return Err(Error::Parameter(format!("ell = {ell} must be non-negative")));
    }
    if ell > 0.0 && !(t_start > 0.0) {
        return Err(Error::Parameter("a reaction term ell/t needs t_start > 0".into()));
    }
    if !(max_dt > 0.0) {
        return Err(Error::Parameter(format!("max_dt = {max_dt} must be positive")));
    }
    let t_end = traj.last_time();
    traj.require_window(t_start, t_end)?;

    let first = Diffusion::new(&traj.metric_at(t_start)?, domain)?;
    let mut u: Vec<f64> = first.sys.nodes.iter().map(|&k| f0[k]).collect();
    let mut times = vec![t_start];
    let mut values = vec![scatter(&first.sys, &u, len)];
    let tol = 1e-12 * t_end.abs().max(1.0);
    let targets: Vec<f64> = traj.times.iter().copied().filter(|&t| t > t_start + tol).collect();
    let mut t = t_start;
    for &target in &targets {
        let steps = ((target - t) / max_dt).ceil().max(1.0) as usize;
        let dt = (target - t) / steps as f64;
        for k in 0..steps {
            let t1 = if k + 1 == steps { target } else { t + dt };
            if ell > 0.0 {
                let factor = (t1 / t).powf(ell);
                u.iter_mut().for_each(|v| *v *= factor);
            }
            let diff = Diffusion::new(&traj.metric_at(t1)?, domain)?;
            diff.step(&mut u, t1 - t)?;
            check_sign(&mut u)?;
            t = t1;
        }
        times.push(target);
        values.push(scatter(&first.sys, &u, len));
    }
    Ok(HeatField {
        times,
        values,
        rows: domain.rows(),
        cols: domain.cols(),
        domain: domain.clone(),
        ell,
        c0: measured_c0(traj, t_end)?,
    })
}

/// Scalar curvature spread over the mesh.
fn scalar_on_mesh(m: &WarpedMetric, cols: usize) -> Result<Vec<f64>> {
    let r = curvature(m)?.scalar;
    let mut out = Vec::with_capacity(r.len() * cols);
    for v in r {
        out.extend(std::iter::repeat_n(v, cols));
    }
    Ok(out)
}

/// The fundamental solution `G(·, l; x, t)` of `Δu − R u + ∂u/∂l = 0` for
/// `l` from `t` down to `l_min`, started from a unit-mass bump of
/// [`DELTA_CELLS`] cells at `x`. The returned samples are in increasing
/// `l`: `l_min`, the checkpoints in between, and `t`.
///
/// In `τ = t − l` the equation is `u_τ = Δu − R u`. Steps grow
/// geometrically from the bump's own diffusion time, up to `max_dt`.
pub fn solve_conjugate_heat(
    traj: &Trajectory,
    x: QuotientPoint,
    t: f64,
    l_min: f64,
    bands: usize,
) -> Result<HeatField> {
    solve_conjugate_heat_with(traj, x, t, l_min, bands, HEAT_MAX_DT)
}

/// Relative growth of the conjugate step.
const CONJUGATE_STEP_RATIO: f64 = 0.05;

pub fn solve_conjugate_heat_with(
    traj: &Trajectory,
    x: QuotientPoint,
    t: f64,
    l_min: f64,
    bands: usize,
    max_dt: f64,
) -> Result<HeatField> {
    if !(l_min > 0.0 && l_min < t) {
        return Err(Error::Parameter(format!("need 0 < l_min < t, got l_min = {l_min}, t = {t}")));
    }
    let k = traj.nearest_index(t);
    if (traj.times[k] - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Parameter(format!("t = {t} is not a checkpoint time")));
    }
    traj.require_window(l_min, t)?;
    let m_t = &traj.checkpoints[k];
    let x = require_axis(m_t, x)?;
    let field = crate::geometry::DistanceField::compute(m_t, x, bands)?;
    let (rows, cols) = (field.rows(), field.cols());
    let len = rows * cols;
    let domain = QuotientDomain::whole(rows, cols);

    // mollified delta
    let width = DELTA_CELLS * m_t.max_ds();
    let bump: Vec<f64> = (0..len)
        .map(|k| {
            let q = field.node(k / cols, k % cols) / width;
            if q < 1.0 {
                (1.0 - q * q).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let start = Diffusion::new(m_t, &domain)?;
    let mass: f64 = bump.iter().zip(start.mass()).map(|(a, b)| a * b).sum();
    if !(mass > 0.0) {
        return Err(Error::Solver("delta bump has no mass on the mesh".into()));
    }
    let mut u: Vec<f64> = bump.iter().map(|v| v / mass).collect();

    let mut times = vec![t];
    let mut values = vec![u.clone()];
    let tol = 1e-12 * t.abs().max(1.0);
    let mut targets: Vec<f64> = traj.times.iter().copied().filter(|&s| s < t - tol && s > l_min + tol).collect();
    targets.reverse();
    targets.push(l_min);
    let tau0 = width * width;
    let mut l = t;
    let mut r_now = scalar_on_mesh(m_t, cols)?;
    for &target in &targets {
        while l > target + tol {
            let tau = t - l;
            let step = (CONJUGATE_STEP_RATIO * (tau + tau0)).min(max_dt).min(l - target);
            let l1 = if l - step <= target + tol { target } else { l - step };
            let m1 = traj.metric_at(l1)?;
            let r1 = scalar_on_mesh(&m1, cols)?;
            let dtau = l - l1;
            for ((v, a), b) in u.iter_mut().zip(&r_now).zip(&r1) {
                *v *= (-0.5 * (a + b) * dtau).exp();
            }
            Diffusion::new(&m1, &domain)?.step(&mut u, dtau)?;
            check_sign(&mut u)?;
            l = l1;
            r_now = r1;
        }
        times.push(target);
        values.push(u.clone());
    }
    times.reverse();
    values.reverse();
    Ok(HeatField { times, values, rows, cols, domain, ell: 0.0, c0: measured_c0(traj, t)? })
}

/// `∫ f dV_{g}` for a mesh array.
pub fn field_mass(m: &WarpedMetric, f: &[f64], bands: usize) -> f64 {
    QuotientOperator::new(m, bands).integrate(f)
}
