//! Simulation and certification toolkit for the three-party layered state
//! `(|000⟩ + |111⟩ + |220⟩ + |331⟩)/2` with Schmidt number vector (4, 4, 2).
//!
//! The crate covers the whole pipeline:
//!
//! - [`tensor`]: dense states and operators, partial traces, Schmidt data.
//! - [`photonic`]: the linear-optics preparation with post-selection.
//! - [`witness`]: bounded-rank overlap bounds and fidelity witnesses.
//! - [`tomo`]: measurement settings, Poissonian counts, element estimation
//!   and Monte Carlo error propagation.
//! - [`qkd`]: layered key maps, QBERs and asymptotic key rates.
//! - [`fixtures`]: published reference values bundled with the crate.

pub mod error;
pub mod fixtures;
pub mod photonic;
pub mod qkd;
pub mod tensor;
pub mod tomo;
pub mod witness;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use tensor::{DensityOperator, Dims, PureState};

use serde::{Deserialize, Serialize};

/// A value with its one-sigma uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub std_dev: f64,
}

impl Measured {
    pub fn new(value: f64, std_dev: f64) -> Self {
        Self { value, std_dev }
    }
}
