//! Volume, curvature-integral and comparison estimates: closed-form
//! evaluators for the bounds and audits that test them on metrics and
//! trajectories.
//!
//! Each audit returns [`EstimateReport`]s. Constants the estimates only
//! assert to exist are inputs; where a report can say which constant would
//! have sufficed, it records the minimal value in `params`.

mod audits;
mod report;

use serde::{Deserialize, Serialize};

pub use audits::{
    annulus_components, annulus_components_with, noncollapse_audit, noninflate_audit, noninflate_bound_audit,
    ricci4_window_audit, spacetime_ricci_audit, volume_comparison_audit, AnnulusCount, SpaceTimeWindow,
};
pub use report::{Direction, EstimateReport, CSV_COLUMNS};

use crate::error::{Error, Result};
use crate::spectral::SobolevConstants;

/// Radius below which the scalar-curvature hypothesis yields the
/// restricted non-collapsing bound:
/// `r₀ = min(1 / (A^{(n+2σ)/(4σ)} L^{1/(2σ)}), 1)`.
pub fn noncollapse_threshold(a: f64, l: f64, sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Parameter(format!("sigma = {sigma} must lie in (0, 1)")));
    }
    if !(a > 0.0 && l > 0.0) || n < 3 {
        return Err(Error::Parameter(format!("need A > 0, L > 0, n >= 3 (got {a}, {l}, {n})")));
    }
    let nf = n as f64;
    let r = 1.0 / (a.powf((nf + 2.0 * sigma) / (4.0 * sigma)) * l.powf(1.0 / (2.0 * sigma)));
    Ok(r.min(1.0))
}

/// `(1 / (2^{n+4} A + 4B))^{n/2} rⁿ`.
pub fn noncollapse_bound(c: &SobolevConstants, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    (1.0 / (2f64.powi(n as i32 + 4) * c.a + 4.0 * c.b)).powf(nf / 2.0) * r.powi(n as i32)
}

/// The bound before restricting `r`:
/// `(1 / (2^{n+3} Ã + 2 B̃ r²))^{n/2} rⁿ` with `Ã = A/(1−q)`, `B̃ = B/(1−q)`
/// and `q = (A/4) L^{2/(n+2σ)} r^{4σ/(n+2σ)}`.
pub fn noncollapse_general(c: &SobolevConstants, n: usize, r: f64, l: f64, sigma: f64) -> Result<f64> {
    let nf = n as f64;
    let e = nf + 2.0 * sigma;
    let q = c.a / 4.0 * l.powf(2.0 / e) * r.powf(4.0 * sigma / e);
    if !(q < 1.0) {
        return Err(Error::Precondition(format!(
            "(A/4) L^(2/(n+2 sigma)) r^(4 sigma/(n+2 sigma)) = {q} is not below 1"
        )));
    }
    let (at, bt) = (c.a / (1.0 - q), c.b / (1.0 - q));
    Ok((1.0 / (2f64.powi(n as i32 + 3) * at + 2.0 * bt * r * r)).powf(nf / 2.0) * r.powi(n as i32))
}

/// Constants of the non-inflating bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonInflateConstants {
    pub c1: f64,
    pub c2: f64,
    pub big_c0: f64,
    /// `α` inside `J`.
    pub alpha_j: f64,
    /// `β` inside `J`.
    pub beta_j: f64,
    /// Lower scalar bound `R ≥ −B_low` at time zero; also bounds `sup R₋`.
    pub b_low: f64,
    /// Bound on `∫|R|^{n/2}` at time zero.
    pub e: f64,
    pub kappa: f64,
}

impl NonInflateConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 >= 0.0 && self.big_c0 > 0.0) {
            return Err(Error::Parameter("c1 and C0 must be positive, c2 non-negative".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Parameter(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.b_low >= 0.0 && self.e >= 0.0) {
            return Err(Error::Parameter("B_low and E must be non-negative".into()));
        }
        Ok(())
    }

    /// `J(s) = exp(−α − sβ − s·sup R₋)`, with `sup R₋` taken as `B_low`.
    pub fn j(&self, s: f64) -> f64 {
        (-self.alpha_j - s * self.beta_j - s * self.b_low).exp()
    }
}

impl From<&crate::ConstantSet> for NonInflateConstants {
    fn from(c: &crate::ConstantSet) -> Self {
        NonInflateConstants {
            c1: c.c1,
            c2: c.c2,
            big_c0: c.big_c0,
            alpha_j: c.alpha_j,
            beta_j: c.beta_j,
            b_low: c.b_low,
            e: c.e,
            kappa: c.kappa,
        }
    }
}

/// `(1 + C₀(1+r²)^{n/2}) c₁⁻¹ J⁻¹(t₀) exp(2c₂ + 2 e^{2B r²/n} E^{2/n} / (3κ^{2/n})) rⁿ`
/// for `r ∈ (0, √t₀)`.
pub fn noninflate_bound(k: &NonInflateConstants, n: usize, r: f64, t0: f64) -> Result<f64> {
    k.validate()?;
    if !(r > 0.0 && r < t0.sqrt()) {
        return Err(Error::Precondition(format!("radius {r} is not in (0, sqrt(t0)) with t0 = {t0}")));
    }
    let nf = n as f64;
    let pre = 1.0 + k.big_c0 * (1.0 + r * r).powf(nf / 2.0);
    let ex =
        2.0 * k.c2 + 2.0 * (2.0 * k.b_low * r * r / nf).exp() * k.e.powf(2.0 / nf) / (3.0 * k.kappa.powf(2.0 / nf));
    Ok(pre / k.c1 / k.j(t0) * ex.exp() * r.powi(n as i32))
}
