//! Campaign configuration, the realization-parallel runner and the
//! statistical checks applied to its records.

mod campaign;
mod checks;
mod config;

pub use campaign::*;
pub use checks::*;
pub use config::*;
