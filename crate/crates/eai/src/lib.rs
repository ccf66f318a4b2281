//! Energy absorption interferometry on systems of coupled surface dipoles.
//!
//! The crate models a set of Lorentz-oscillator dipoles coupled through the
//! free-space Green's dyadic, computes the power they absorb under one or
//! two phase-locked point sources, synthesizes the resulting fringes, and
//! recovers the absorption modes of the system from the fringe data.

pub mod assembly;
pub mod config;
pub mod error;
pub mod experiments;
pub mod greens;
pub mod interferometry;
pub mod linalg;
pub mod model;
pub mod output;
pub mod regression;

pub use error::{EaiError, Result};
