pub mod error;
pub mod flow;
pub mod gamma;
pub mod harness;
pub mod helmholtz;
pub mod integrator;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
