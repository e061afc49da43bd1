//! Leader-information control for heterogeneous vehicle platoons: structured
//! coprime factorizations, diagonal Youla parameterization, H2/H∞ local
//! designs, communication-delay compensation and a fixed-step simulator.

pub mod tf_core;
pub mod error;
pub mod coprime;
pub mod platoon_model;
pub mod synthesis;
pub mod delay;
pub mod simulator;

pub use error::{Error, Result};
