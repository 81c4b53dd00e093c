//! Configuration-driven front end for the quantum-graph solvers.
//!
//! The CLI reads a JSON run configuration describing a graph (inline or as
//! a named family), a command (eigenvalues, ground state, evolution, or
//! validation against a reference state), and output options, then executes
//! it deterministically: the same config always produces byte-identical
//! CSV/JSON/SVG outputs.

pub mod config;
pub mod expr;
pub mod families;
pub mod run;
pub mod svg;
