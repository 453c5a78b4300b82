//! Eulerian thermo-magneto-viscoelastic simulation engine.

pub mod cli_io;
pub mod constitutive;
pub mod demag;
pub mod energetics;
pub mod error;
pub mod grid;
pub mod kinematics;
pub mod linalg;
pub mod scenarios;
pub mod stepper;
pub mod tensor;

pub use error::{Error, Result};
