pub mod bayes;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod io;
pub mod km;
pub mod likelihood;
pub mod mle;
pub mod optim;
pub mod regression;
pub mod report;
pub mod selection;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
