pub mod cli_io;
pub mod criticality;
pub mod error;
pub mod evolver;
pub mod initial_data;
pub mod ode;
pub mod self_similar;
pub mod series;
pub mod static_solutions;

pub use error::{Error, Result};
