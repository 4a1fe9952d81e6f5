use super::{require_axis, HeatField};
use crate::error::{Error, Result};
use crate::estimates::{EstimateReport, NonInflateConstants};
use crate::flow::Trajectory;
use crate::geometry::{curvature, DistanceField, QuotientPoint};
use crate::numerics::{interp_local, trapezoid};
use crate::spectral::QuotientOperator;

const MASS_EQ: &str = "int G(.,l;x,t) dV_l <= 1 + C0 (1 + t - l)^(n/2)";
const LOWER_EQ: &str =
    "G(z,l;x,t) >= c1 J(t) (t-l)^(-n/2) exp(-2 c2 d_t^2/(t-l)) exp(-(t-l)^(-1/2) int_l^t sqrt(t-s) R ds)";

/// Audits a conjugate heat kernel `G(·, l; x, t)` from
/// [`solve_conjugate_heat`](super::solve_conjugate_heat) at time `l`.
///
/// The first report checks the mass bound. The second evaluates the
/// Gaussian lower bound on every node `z` with `d_t(z, x) ≤ √(t − l)` and
/// reports as `lhs` the smallest `c₁` for which it holds there, against the
/// configured `c₁`. The scalar curvature in the exponent is taken at `x`.
pub fn kernel_bounds_audit(
    g: &HeatField,
    traj: &Trajectory,
    k: &NonInflateConstants,
    x: QuotientPoint,
    t: f64,
    l: f64,
) -> Result<[EstimateReport; 2]> {
    k.validate()?;
    if !(l < t) {
        return Err(Error::Parameter(format!("need l < t (got l = {l}, t = {t})")));
    }
    let tau = t - l;
    let m_l = traj.metric_at(l)?;
    let m_t = traj.metric_at(t)?;
    let x = require_axis(&m_t, x)?;
    let n = m_l.dim() as f64;
    let bands = g.bands();

    let g_l = g.at(l)?;
    let mass = QuotientOperator::new(&m_l, bands).integrate(&g_l);
    let bound = 1.0 + k.big_c0 * (1.0 + tau).powf(n / 2.0);
    let upper = EstimateReport::upper("kernel_mass", MASS_EQ, mass, bound)
        .at_time(l)
        .at(x, tau.sqrt())
        .param("t", t)
        .param("C0", k.big_c0);

    // ∫_l^t √(t−s) R(x, s) ds over the checkpoints in between
    let tol = 1e-12 * t.abs().max(1.0);
    let mut ss = vec![l];
    ss.extend(traj.times.iter().copied().filter(|&s| s > l + tol && s < t - tol));
    ss.push(t);
    let ys = ss
        .iter()
        .map(|&s| -> Result<f64> {
            let m = traj.metric_at(s)?;
            let r = curvature(&m)?.scalar;
            Ok((t - s).max(0.0).sqrt() * interp_local(m.arclength(), &r, x.s))
        })
        .collect::<Result<Vec<f64>>>()?;
    let r_term = trapezoid(&ss, &ys);

    let d = DistanceField::compute(&m_t, x, bands)?;
    let cols = d.cols();
    let pre = k.j(t) / tau.powf(n / 2.0) * (-r_term / tau.sqrt()).exp();
    let mut c1_fit = f64::INFINITY;
    let mut samples = 0usize;
    for (q, &v) in g_l.iter().enumerate() {
        let dist = d.node(q / cols, q % cols);
        if dist > tau.sqrt() || !g.domain.contains(q) {
            continue;
        }
        let f = pre * (-2.0 * k.c2 * dist * dist / tau).exp();
        c1_fit = c1_fit.min(v / f);
        samples += 1;
    }
    let lower = if samples == 0 {
        EstimateReport::skipped(
            "kernel_lower",
            LOWER_EQ,
            crate::estimates::Direction::Lower,
            "no mesh node within sqrt(t - l) of x",
        )
    } else {
        EstimateReport::lower("kernel_lower", LOWER_EQ, c1_fit, k.c1)
    };
    let lower = lower
        .at_time(l)
        .at(x, tau.sqrt())
        .param("t", t)
        .param("c1_fit", c1_fit)
        .param("c2", k.c2)
        .param("J", k.j(t))
        .param("r_integral", r_term)
        .param("samples", samples as f64);
    Ok([upper, lower])
}
