pub mod cli;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod identities;
mod linsolve;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
