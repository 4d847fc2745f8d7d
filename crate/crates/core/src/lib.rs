//! Heralded entanglement of two cavity-coupled quantum-dot spins.
//!
//! The guide in `book/` walks through the model and the command line; its
//! code blocks run as doc-tests.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod model;
pub mod protocol;
pub mod qcore;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/units.md")]
    mod units {}
    #[doc = include_str!("../../../book/src/photons.md")]
    mod photons {}
    #[doc = include_str!("../../../book/src/heralding.md")]
    mod heralding {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/trion.md")]
    mod trion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
