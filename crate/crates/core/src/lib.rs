pub mod analysis;
pub mod cli;
pub mod correlation;
pub mod error;
pub mod linalg;
pub mod seesaw;
pub mod separating;
pub mod strategy;
pub mod tilted_chsh;

pub use correlation::{Correlation, CorrelationTable, Metric};
pub use error::{Error, Result};
pub use strategy::{Side, Strategy};
