pub mod error;
pub mod flow;
pub mod geometry;
pub mod mass;
pub mod scalar;
pub mod series;
pub mod tensor;

pub use error::{Error, Result};
