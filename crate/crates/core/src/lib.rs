pub mod clifford;
pub mod config;
pub mod diagnostics;
pub mod energetics;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod history;
pub mod initdata;
pub mod jets;
pub mod models;
pub mod reduce;
pub mod run;
pub mod state;
pub mod stencil;
pub mod suite;

pub use error::{Error, Result};
