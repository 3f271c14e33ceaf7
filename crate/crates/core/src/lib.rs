//! Bio-inspired recurrent cells with liquid capacitance and liquid
//! resistance, a hand-differentiated training stack, a procedural
//! lane-keeping simulator and the interpretability metrics used to compare
//! the cells.
//!
//! The numerical core is generic over [`Scalar`] (`f32` / `f64`); the
//! aliases at the crate root pin the common instantiations.

pub mod cells;
pub mod dd;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod perception;
pub mod scalar;
pub mod simulator;
pub mod training;

pub use cells::{Cell, CellKind, CellParameters, GatedParameters, HiddenState};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CellF64 = Cell<f64>;
pub type CellF32 = Cell<f32>;
pub type CellParametersF64 = CellParameters<f64>;
pub type HiddenStateF64 = HiddenState<f64>;
pub type PolicyModelF64 = training::PolicyModel<f64>;
pub type PolicyModelF32 = training::PolicyModel<f32>;
