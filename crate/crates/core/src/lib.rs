pub mod commands;
pub mod config;
pub mod energy;
pub mod error;
pub mod grid;
pub mod ladder;
pub mod nonlinearity;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid, NodalVector};
