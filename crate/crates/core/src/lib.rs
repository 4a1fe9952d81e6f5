//! Rotationally symmetric Ricci flow on S⁴ and numerical audits of the
//! volume, curvature, eigenvalue and heat-kernel estimates that control its
//! singularities.
//!
//! Metrics have the warped form `g = φ(x)² dx² + ψ(x)² g_{S³}` on a fixed
//! grid `x ∈ [0, 1]`. The crate is organised bottom-up:
//!
//! - [`geometry`]: grids, curvature, distances, ball volumes, integral norms
//! - [`flow`]: presets, the Ricci flow stepper and trajectories
//! - [`spectral`]: Dirichlet eigenvalues, Faber–Krahn and Sobolev audits
//! - [`estimates`]: volume and curvature-integral audits
//! - [`heat`]: heat and conjugate heat solvers, cut-offs, Moser constants
//! - [`singular`]: good times, point classification, clustering
//!
//! ```
//! use ricci_lab::flow::{make_preset, Preset};
//! use ricci_lab::geometry::{curvature, total_volume};
//!
//! let m = make_preset(&Preset::RoundSphere { radius: 1.0 }, 200).unwrap();
//! let c = curvature(&m).unwrap();
//! assert!((c.scalar[100] - 12.0).abs() < 1e-6);
//! let v = total_volume(&m);
//! assert!((v - 8.0 * std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-8);
//! ```

// `!(a < b)` is used on purpose so that NaN fails the check; grid loops
// index several parallel arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constants;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod geometry;
pub mod heat;
pub mod numerics;
pub mod singular;
pub mod spectral;

#[cfg(doctest)]
mod book;

pub use constants::ConstantSet;
pub use error::{Error, Result};
