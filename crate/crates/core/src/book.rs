//! The book's code samples, compiled and run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}

#[doc = include_str!("../../../book/src/flow.md")]
mod flow {}

#[doc = include_str!("../../../book/src/volumes.md")]
mod volumes {}

#[doc = include_str!("../../../book/src/spectral.md")]
mod spectral {}

#[doc = include_str!("../../../book/src/heat.md")]
mod heat {}

#[doc = include_str!("../../../book/src/singular.md")]
mod singular {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
