//! Small-time control synthesis for bilinear Schrödinger equations on the
//! torus and on the line.
//!
//! The crate simulates `i∂ₜψ = (−Δ + V + Σ uⱼWⱼ)ψ` with piecewise-constant
//! controls, emits control schedules that approximate phase multipliers,
//! translations, transport flows and their brackets, and composes them into
//! state-to-state steering.

pub mod error;
pub mod grid;
pub mod spectral_sim;
pub mod synthesis;
pub mod moser;
pub mod pipeline;
pub mod transport;

pub use error::{Error, Result};

/// Crate version embedded in artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
