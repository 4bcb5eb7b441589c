//! Simulation of a two-qubit quantum battery charged through a driven
//! charger that dephases in a structured reservoir.
//!
//! The charger sees a dephasing rate `γ₀(t)` that is temporarily negative.
//! Three simulators share one model: an RK4 master-equation integrator, a
//! deterministic non-Markovian quantum-jump unraveling, and a stochastic
//! circuit with local flips.

pub mod circuit;
pub mod config;
pub mod csv;
pub mod error;
pub mod integrator;
pub mod model;
pub mod nmqj;
pub mod observables;
pub mod qmath;
pub mod scenario;

pub use error::{Error, Result};
pub use model::SystemParams;
pub use qmath::{DensityMatrix4, Ket4};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/master-equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/circuit.md")]
    mod circuit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
