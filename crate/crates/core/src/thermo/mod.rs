//! Finite-memory potentials, the Ruelle transfer matrix and exact Gibbs measures.
//!
//! Logarithms are base 2 throughout: the transfer matrix of `qφ` has entries
//! `2^{qφ(w)}` on de Bruijn edges and the pressure is `log₂` of its Perron root.

mod gibbs;
mod potential;
mod support;
mod transfer;

pub use gibbs::{GibbsChain, GibbsConstants};
pub use potential::Potential;
pub use support::Support;
pub use transfer::TransferSystem;

use crate::error::Result;
use crate::orbit::Orbit;
use crate::symbolic::Word;

/// `P(qφ) = log₂ λ(B_{qφ})`.
pub fn pressure(potential: &Potential, q: f64) -> Result<f64> {
    Ok(TransferSystem::new(potential, q)?.pressure())
}

/// `φ − P(φ)`, flagged normalized.
pub fn normalize(potential: &Potential) -> Result<Potential> {
    let p = pressure(potential, 1.0)?;
    Ok(potential.shifted(-p).with_normalized_flag(true))
}

pub fn gibbs_chain(potential: &Potential) -> Result<GibbsChain> {
    GibbsChain::new(potential)
}

pub fn cylinder_measure(chain: &GibbsChain, w: &Word) -> f64 {
    chain.cylinder_measure(w)
}

pub fn gibbs_constants(chain: &GibbsChain, max_len: usize) -> Result<GibbsConstants> {
    chain.gibbs_constants(max_len)
}

pub fn sample_orbit(chain: &GibbsChain, length: usize, seed: u64) -> Result<Orbit> {
    chain.sample_orbit(length, seed)
}

/// Named potentials used in examples and tests.
pub mod builtin {
    use super::*;

    /// `φ ≡ −1`, the measure of maximal entropy.
    pub fn fair_coin() -> Potential {
        Potential::constant(1, -1.0)
            .expect("valid table")
            .with_normalized_flag(true)
    }

    /// `φ(0) = log₂ ¼`, `φ(1) = log₂ ¾`.
    pub fn bernoulli_quarter() -> Potential {
        Potential::bernoulli(0.25).expect("valid weight")
    }

    /// The memory-2 potential `ψ(00)=0, ψ(01)=−2, ψ(10)=−1, ψ(11)=0`, before normalization.
    pub fn markov_test_raw() -> Potential {
        Potential::from_entries(2, &[("00", 0.0), ("01", -2.0), ("10", -1.0), ("11", 0.0)])
            .expect("valid table")
    }

    pub fn markov_test() -> Potential {
        normalize(&markov_test_raw()).expect("primitive")
    }

    /// Looks up a builtin by name: `fair-coin`, `bernoulli-quarter`, `markov-test`, or `bernoulli:<p0>`.
    pub fn by_name(name: &str) -> Option<Potential> {
        match name {
            "fair-coin" => Some(fair_coin()),
            "bernoulli-quarter" => Some(bernoulli_quarter()),
            "markov-test" => Some(markov_test()),
            other => other
                .strip_prefix("bernoulli:")
                .and_then(|p| p.parse::<f64>().ok())
                .and_then(|p| Potential::bernoulli(p).ok()),
        }
    }
}
