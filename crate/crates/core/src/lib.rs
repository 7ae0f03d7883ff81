//! Thermodynamic formalism, hitting times and shrinking-target covering for the doubling map.
//!
//! The library works on the one-sided binary shift with locally constant potentials.
//! Gibbs measures are realized exactly as Markov chains on de Bruijn states, which
//! gives closed-form oracles for pressure, the entropy spectrum and cylinder measures,
//! and fast samplers for Monte Carlo checks of the covering theorems.

pub mod covering;
pub mod error;
pub mod hitting;
pub mod orbit;
pub mod rng;
pub mod sft;
pub mod spectrum;
pub mod stats;
pub mod symbolic;
pub mod thermo;
pub mod typicality;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use orbit::Orbit;
pub use symbolic::{CirclePoint, Word};
pub use thermo::{GibbsChain, Potential, TransferSystem};
