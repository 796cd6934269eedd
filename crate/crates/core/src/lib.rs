//! Colored bond and site percolation.
//!
//! Two halves share one set of primitives:
//!
//! * [`exact`] enumerates every coloring of a small ground set with rational
//!   arithmetic and checks the correlation inequalities for pair-colored
//!   percolations (`E_ab`, `E_ac`, `E_bc`/`E_ad`, XOR couplings, the 8-color
//!   construction).
//! * [`mc`] and [`sweep`] estimate crossing and center-to-shell probabilities
//!   on rectangle, rhombus, hexagon and cubic lattices with reproducible,
//!   worker-count-invariant random streams.

pub mod chroma;
pub mod cli;
pub mod error;
pub mod events;
pub mod exact;
pub mod lattice;
pub mod mc;
pub mod plot;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
