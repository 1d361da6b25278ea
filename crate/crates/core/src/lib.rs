//! Spin-1 topological monopoles (triply degenerate points).

pub mod cli;
pub mod drive;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod measurement;
pub mod model;
pub mod spin1;
pub mod topology;

pub use error::{Error, Result};
