//! Bivariate means, Schwab–Borchardt bound sequences, and a data-driven
//! checker for trigonometric and hyperbolic inequality chains.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod catalog;
pub mod cli;
pub mod constants;
pub mod exprlang;
pub mod means;
pub mod seqbounds;
