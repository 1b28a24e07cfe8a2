//! Stochastic calculus on the Brownian sheet and two-player games driven by
//! sheet-controlled processes.
//!
//! The plane is discretized on a uniform grid. [`grid::SheetEnsemble`] holds
//! reproducible samples of the sheet, [`calculus`] the plane integrals,
//! [`process`] the Itô-process simulator, [`identities`] the numerical checks
//! of the Itô formula and product rule, and [`game`] the equilibrium machinery.
//! [`pollution`] solves the two pollution-control examples.

pub mod calculus;
pub mod cli;
pub mod config;
pub mod error;
pub mod game;
pub mod grid;
pub mod identities;
pub mod pollution;
pub mod process;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{GridPoint, GridSpec, Point, SheetEnsemble};
