//! Finite operator learning (FOL) for steady-state heat conduction.
//!
//! Small per-node neural networks are trained to map the nodal thermal
//! conductivity of a two-phase microstructure to the nodal temperature field.
//! The training loss is the finite element energy form of the heat equation
//! plus a penalised Dirichlet term, so no solution data is required. A
//! classical finite element solver is included both as the reference oracle
//! and as the label source for a supervised baseline.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: structured bilinear quadrilateral grid, shape functions, Gauss rule
//! - [`microstructure`]: random two-phase conductivity fields and the test suite
//! - [`fem`]: reference finite element solver and flux recovery
//! - [`neural`]: separate and monolithic feed-forward networks with backprop
//! - [`training`]: physics and data losses, Adam, the training loop
//! - [`evaluation`]: error metrics, fine-grid interpolation, comparison reports
//! - [`io`], [`config`], [`cli`]: file formats, run configuration and commands

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod microstructure;
pub mod neural;
pub mod training;

pub use error::{FolError, Result};
