//! Verification lab for Brownian motion on the Heisenberg groups `H_n`.
//!
//! The crate pairs two independent routes to the heat semigroup
//! `Q_t f(p) = E[f(p ⋆ x_t)]`:
//!
//! - [`poly`]: exact calculus on polynomials. The generator lowers the
//!   Heisenberg weight by two, so `e^{tL}` is a finite sum.
//! - [`sim`]: Monte Carlo paths of the driving Brownian motions and their
//!   Lévy area, generated from counter-based per-path streams.
//!
//! [`mc`] and [`inequality`] combine the two to test intertwining relations,
//! martingale properties, the Poincaré inequality and the logarithmic
//! Sobolev inequality with constant 2. [`report`] and [`suite`] drive the
//! `verify` binary.

pub mod error;
pub mod group;
pub mod inequality;
pub mod mc;
pub mod poly;
pub mod report;
pub mod sim;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use group::{FieldId, FieldKind, GroupPoint, SmoothFunction};
pub use poly::HPolynomial;
pub use sim::{PathBundle, SeedPolicy, SimConfig};
pub use stats::MCEstimate;
