pub mod actions;
pub mod blowup;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod poly;
pub mod quotient;
pub mod strata;

pub use error::{Error, Result};
