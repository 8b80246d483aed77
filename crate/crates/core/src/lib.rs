//! Decay certificates for retarded integral inequalities and the delay
//! systems they govern.
//!
//! The crate computes the constants `ϑ`, `κ` of an inequality
//! `y(t) <= E(t,τ)‖y_τ‖ + ∫ K1‖y_s‖ + ∫ K2‖y_s‖ + ρ`, turns them into a
//! stability verdict and an explicit exponential envelope, and checks those
//! envelopes against simulated trajectories and a brute-force majorant.

pub mod attractor;
pub mod certificate;
pub mod config;
pub mod dde;
pub mod func;
pub mod kernels;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod sectorial;
pub mod systems;

mod error;

pub use error::Error;
