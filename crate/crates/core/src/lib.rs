//! Random-price pseudomarket equilibria and the sequential equilibrium
//! mechanism for greedy online matching with ordinal preferences.

pub mod audit;
pub mod demand;
pub mod equilibrium;
pub mod error;
pub mod lp;
pub mod market;
pub mod mechanism;
pub mod seeds;

pub use error::{Error, Result};
