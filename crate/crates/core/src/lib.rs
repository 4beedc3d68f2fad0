pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod linalg;
pub mod model_select;
pub mod ns_basis;
pub mod panel_io;
pub mod regime_tree;
pub mod rng;
pub mod simulation;
pub mod state_space;

pub use error::{Error, Result};
