use serde::Serialize;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{curvature, scalar_lp};
use crate::numerics::linear_fit;

/// Checks of the standing hypotheses `R ≥ −1` and `∫|R|^{n/2+σ} dV ≤ L`
/// along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub r_min_over_time: f64,
    pub lp_sup: f64,
    pub sigma: f64,
    pub l_bound: f64,
    pub first_violation_time: Option<f64>,
    pub passed: bool,
    /// `(t, ∫|R|^{n/2+σ} dV)` at every checkpoint.
    pub series: Vec<(f64, f64)>,
}

pub fn monitor_hypotheses(traj: &Trajectory, sigma: f64, l_bound: f64) -> Result<HypothesisReport> {
    if traj.is_empty() {
        return Err(Error::Parameter("empty trajectory".into()));
    }
    let mut r_min = f64::INFINITY;
    let mut lp_sup: f64 = 0.0;
    let mut first = None;
    let mut series = Vec::with_capacity(traj.len());
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        let q = m.dim() as f64 / 2.0 + sigma;
        let lp = scalar_lp(m, q, None)?;
        let rmin = curvature(m)?.min_scalar();
        r_min = r_min.min(rmin);
        lp_sup = lp_sup.max(lp);
        if first.is_none() && (lp > l_bound || rmin < -1.0) {
            first = Some(t);
        }
        series.push((t, lp));
    }
    Ok(HypothesisReport {
        r_min_over_time: r_min,
        lp_sup,
        sigma,
        l_bound,
        first_violation_time: first,
        passed: r_min >= -1.0 && lp_sup <= l_bound,
        series,
    })
}

/// Fits `I(t) ≈ C (T − t)^{−e}` to a series and returns `e`.
pub fn fit_blowup_exponent(series: &[(f64, f64)], singular_time: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *t < singular_time && *v > 0.0)
        .map(|(t, v)| ((singular_time - t).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Some(-linear_fit(&xs, &ys).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{make_preset, Preset};

    #[test]
    fn flat_cap_passes_with_zero_integral() {
        let m = make_preset(&Preset::EuclideanCap { radius: 1.0 }, 64).unwrap();
        let t = Trajectory::stationary(&m, &[0.0, 0.5, 1.0]).unwrap();
        let r = monitor_hypotheses(&t, 0.5, 1e5).unwrap();
        assert!(r.passed);
        assert!(r.lp_sup.abs() < 1e-12);
        assert!(r.first_violation_time.is_none());
    }

    #[test]
    fn exponent_fit_recovers_power_law() {
        let series: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = 0.01 * k as f64;
                (t, 3.0 * (0.25 - t).powf(-0.7))
            })
            .collect();
        let e = fit_blowup_exponent(&series, 0.25).unwrap();
        assert!((e - 0.7).abs() < 1e-10);
    }
}
