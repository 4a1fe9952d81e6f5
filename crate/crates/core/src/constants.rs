//! Named constants used by the audits, with their defaults.
//!
//! Most of these are existence constants without known values; the audits
//! take them as inputs and also report the smallest value that would make
//! each inequality hold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    /// Sobolev coefficient of the gradient term.
    pub a: f64,
    /// Sobolev coefficient of the L² term.
    pub b: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// Bound on `∫|R|^{n/2+σ}`.
    pub l: f64,
    /// The exponent σ in the scalar-curvature hypothesis.
    pub sigma: f64,
    pub k0: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// The exponent α of the space-time Ricci estimate, in (0, 1/12).
    pub alpha: f64,
    /// Universal constant of the cut-off construction.
    pub alpha_cut: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub big_c0: f64,
    pub e: f64,
    pub kappa: f64,
    pub ell: f64,
    pub eps0: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha_j: f64,
    pub beta_j: f64,
    pub b_low: f64,
}

impl Default for ConstantSet {
    fn default() -> Self {
        ConstantSet {
            a: 0.1,
            b: 1.0,
            sigma0: 1e-6,
            sigma1: std::f64::consts::PI * std::f64::consts::PI / 2.0,
            l: 1e5,
            sigma: 0.5,
            k0: 1e3,
            c1_hat: 1.0,
            c2_hat: 1.0,
            alpha: 0.05,
            alpha_cut: 8.0,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            big_c0: 1.0,
            e: 1.0,
            kappa: 1.0,
            ell: 1.0,
            eps0: 1.0,
            lambda: 1.0,
            gamma: 0.95,
            alpha_j: 0.0,
            beta_j: 0.0,
            b_low: 1.0,
        }
    }
}

macro_rules! table {
    ($($name:literal => $field:ident),* $(,)?) => {
        impl ConstantSet {
            /// Names accepted by [`ConstantSet::set`], in display order.
            pub const NAMES: &'static [&'static str] = &[$($name),*];

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $($name => Some(self.$field),)*
                    _ => None,
                }
            }

            pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
                match name {
                    $($name => self.$field = value,)*
                    _ => return Err(Error::Parameter(format!("unknown constant `{name}`"))),
                }
                Ok(())
            }
        }
    };
}

table! {
    "A" => a,
    "B" => b,
    "sigma0" => sigma0,
    "sigma1" => sigma1,
    "L" => l,
    "sigma" => sigma,
    "K0" => k0,
    "c1_hat" => c1_hat,
    "c2_hat" => c2_hat,
    "alpha" => alpha,
    "alpha_cut" => alpha_cut,
    "c0" => c0,
    "c1" => c1,
    "c2" => c2,
    "C0" => big_c0,
    "E" => e,
    "kappa" => kappa,
    "ell" => ell,
    "eps0" => eps0,
    "Lambda" => lambda,
    "gamma" => gamma,
    "alpha_J" => alpha_j,
    "beta_J" => beta_j,
    "B_low" => b_low,
}

impl ConstantSet {
    pub fn entries(&self) -> BTreeMap<&'static str, f64> {
        Self::NAMES.iter().map(|&n| (n, self.get(n).unwrap())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let mut c = ConstantSet::default();
        for (i, name) in ConstantSet::NAMES.iter().enumerate() {
            c.set(name, i as f64 + 0.5).unwrap();
        }
        for (i, name) in ConstantSet::NAMES.iter().enumerate() {
            assert_eq!(c.get(name), Some(i as f64 + 0.5));
        }
        assert!(c.set("nope", 1.0).is_err());
    }
}
