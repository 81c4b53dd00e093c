//! Numerical solution of stationary and time-dependent nonlinear Schrödinger
//! equations on metric graphs.
//!
//! A metric graph is a set of vertices joined by edges, where each edge `e`
//! is identified with an interval `[0, l_e]`. Functions live on the edges;
//! vertex conditions of the form `A_v u(v) + B_v u'(v) = 0` tie the edge
//! restrictions together. This crate provides:
//!
//! * [`graph`] — graph description, vertex conditions, and the per-edge
//!   uniform mesh shared by all solvers;
//! * [`operator`] — assembly of the sparse second-derivative operator with
//!   vertex conditions eliminated, plus vertex-value reconstruction;
//! * [`wavefunction`] — the function-on-graph value type with pointwise
//!   algebra and trapezoidal quadrature;
//! * [`linalg`] — sparse LU solves and a shift-invert eigensolver;
//! * [`special`] — Jacobi elliptic functions and elliptic integrals;
//! * [`stationary`] — ground-state computation by normalized gradient flow
//!   and preconditioned nonlinear conjugate gradient;
//! * [`dynamics`] — time integration by Crank–Nicolson relaxation and Strang
//!   splitting;
//! * [`closed_form`] — exact and semi-analytic reference states (ring,
//!   star with δ coupling, tadpole, …) used to validate the solvers.
//!
//! # Example
//!
//! Computing the four smallest eigenvalues of the Laplacian on a segment of
//! length π with Dirichlet ends (the exact values are 1, 4, 9, 16):
//!
//! ```
//! use std::sync::Arc;
//! use qgraph_core::graph::{EdgeSpec, GraphBuilder, VertexCondition};
//! use qgraph_core::operator::GraphOperator;
//!
//! let g = Arc::new(
//!     GraphBuilder::new()
//!         .edge(EdgeSpec::new("A", "B", std::f64::consts::PI))
//!         .condition("A", VertexCondition::Dirichlet)
//!         .condition("B", VertexCondition::Dirichlet)
//!         .total_nodes(400)
//!         .build()
//!         .unwrap(),
//! );
//! let op = GraphOperator::assemble(&g).unwrap();
//! let pairs = op.eigs_smallest(4, 0.0).unwrap();
//! for (i, (lambda, _v)) in pairs.iter().enumerate() {
//!     let exact = ((i + 1) * (i + 1)) as f64;
//!     assert!((lambda - exact).abs() < 1e-3 * exact);
//! }
//! ```

pub mod closed_form;
pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod operator;
pub mod special;
pub mod stationary;
pub mod wavefunction;
