pub mod error;
pub mod export;
pub mod fields;
pub mod phase;
pub mod gates;
pub mod propagate;
pub mod quantum;
pub mod schedule;

pub use error::{Error, Result};
