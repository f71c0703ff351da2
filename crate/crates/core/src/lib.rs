//! Linearized KdV on a seven-bond star-of-stars tree.
//!
//! The crate provides a boundary potential solver built on Airy fundamental
//! solutions and fractional time operators, a finite-difference reference
//! solver for the same problem, diagnostics comparing the two, and a
//! file-driven scenario runner.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fractional;
pub mod graph;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod runner;
pub mod selfcheck;
pub mod special;
pub mod wavefield;

pub use error::{Error, Result};
