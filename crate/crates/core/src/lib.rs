//! Rate-distortion theory for a source assembled by an adversarial switcher
//! that sees every source realization before it picks an output symbol.
//!
//! The switcher can mimic exactly the IID distributions in a polytope `C`
//! cut out by one linear constraint per symbol subset. The worst-case rate
//! is the largest `R_p(D)` over that polytope.

// NaN must fail argument checks, so `!(x >= 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod fmt;
pub mod game_sim;
pub mod optimizer;
pub mod probcore;
pub mod rate_distortion;
pub mod region;
pub mod strategy;

pub use error::{Error, Result};
