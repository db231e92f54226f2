//! Simulator and verification harness for the periodic Vlasov–Stokes system
//!
//! ```text
//! ∂_t f + v·∇_x f + ∇_v·((u − v) f) = 0
//! ∂_t u − Δu + ∇p = ∫ (v − u) f dv,   ∇·u = 0
//! ```
//!
//! on the d-torus (d ≤ 3) with a truncated velocity box. The crate provides
//! the two sub-solvers, the fixed-point map between them, a time-marching
//! driver, and diagnostics for the conservation laws, the energy identity and
//! the velocity-moment inequalities satisfied by strong solutions.

pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod harness;
pub mod init;
pub mod interp;
pub mod kinetics;
pub mod output;
pub mod snapshot;
pub mod sum;

pub use error::{Error, Result};
