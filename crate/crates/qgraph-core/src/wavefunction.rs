//! Functions on a metric graph: construction, pointwise algebra, quadrature.
//!
//! A [`WaveFunction`] is a flat vector of interior-node samples tied to its
//! graph by a shared reference. Binary operations insist the two operands
//! live on the *same* graph object (pointer identity, not structural
//! equality). Real and complex functions are separate types
//! (`WaveFunction<f64>` / `WaveFunction<Complex64>`); mixing them requires an
//! explicit [`WaveFunction::promote`], so imaginary parts can never be
//! silently dropped.
//!
//! Quadrature is the per-edge trapezoidal rule including the (unstored)
//! endpoint samples, which are reconstructed from the graph's second-order
//! vertex closure. Because `dot` and the norms integrate the *pointwise
//! product* vector through that same reconstruction, `dot(u, u)` equals
//! `norm_2(u)²` exactly and rescaling a function rescales its mass exactly.

use std::io;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::graph::{EdgeKey, MetricGraph};
use crate::linalg::Scalar;

/// Errors from constructing or combining functions on a graph.
#[derive(Debug, Error)]
pub enum WaveFunctionError {
    #[error("operands live on different graphs")]
    GraphMismatch,
    #[error("edge {0} does not exist in the graph")]
    UnknownEdge(EdgeKey),
    #[error("value vector has length {got}, but the graph has {expected} interior nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pointwise division by zero at node {index}")]
    DivisionByZero { index: usize },
    #[error("norm order p = {p} must be at least 1")]
    InvalidNormOrder { p: f64 },
}

/// Per-edge scalar functions of arc length, used to sample initial data.
/// Edges without an entry default to the zero function.
pub struct EdgeFunctions<'a, S> {
    entries: Vec<(EdgeKey, Box<dyn Fn(f64) -> S + 'a>)>,
}

impl<'a, S> EdgeFunctions<'a, S> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Assigns `f(x)` (x = arc length from the edge's `from` vertex) to the
    /// edge with the given key.
    pub fn set(mut self, key: impl Into<EdgeKey>, f: impl Fn(f64) -> S + 'a) -> Self {
        self.entries.push((key.into(), Box::new(f)));
        self
    }
}

impl<S> Default for EdgeFunctions<'_, S> {
    fn default() -> Self {
        Self::new()
    }
}

/// A discretized function on a metric graph.
#[derive(Debug, Clone)]
pub struct WaveFunction<S = f64> {
    graph: Arc<MetricGraph>,
    values: Vec<S>,
}

impl<S: Scalar> WaveFunction<S> {
    /// Wraps an existing flat value vector (length must equal the graph's
    /// interior node count).
    pub fn from_flat(graph: &Arc<MetricGraph>, values: Vec<S>) -> Result<Self, WaveFunctionError> {
        if values.len() != graph.interior_count() {
            return Err(WaveFunctionError::LengthMismatch {
                expected: graph.interior_count(),
                got: values.len(),
            });
        }
        Ok(Self {
            graph: Arc::clone(graph),
            values,
        })
    }

    pub fn zeros(graph: &Arc<MetricGraph>) -> Self {
        Self {
            graph: Arc::clone(graph),
            values: vec![S::zero(); graph.interior_count()],
        }
    }

    pub fn constant(graph: &Arc<MetricGraph>, c: S) -> Self {
        Self {
            graph: Arc::clone(graph),
            values: vec![c; graph.interior_count()],
        }
    }

    /// Samples per-edge functions of arc length; edges without an entry get 0.
    pub fn from_edge_functions(
        graph: &Arc<MetricGraph>,
        funs: &EdgeFunctions<'_, S>,
    ) -> Result<Self, WaveFunctionError> {
        let mut u = Self::zeros(graph);
        for (key, f) in &funs.entries {
            let edge = graph
                .edge(key)
                .ok_or_else(|| WaveFunctionError::UnknownEdge(key.clone()))?;
            for k in 1..=edge.n_interior() {
                u.values[edge.offset() + k - 1] = f(edge.x_of(k));
            }
        }
        Ok(u)
    }

    /// Samples one function receiving the edge key and the arc length.
    pub fn from_fn(graph: &Arc<MetricGraph>, f: impl Fn(&EdgeKey, f64) -> S) -> Self {
        let mut u = Self::zeros(graph);
        for edge in graph.edges() {
            for k in 1..=edge.n_interior() {
                u.values[edge.offset() + k - 1] = f(edge.key(), edge.x_of(k));
            }
        }
        u
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_partner(&self, other: &WaveFunction<S>) -> Result<(), WaveFunctionError> {
        if Arc::ptr_eq(&self.graph, &other.graph) {
            Ok(())
        } else {
            Err(WaveFunctionError::GraphMismatch)
        }
    }

    fn zip_with(
        &self,
        other: &WaveFunction<S>,
        f: impl Fn(S, S) -> S,
    ) -> Result<WaveFunction<S>, WaveFunctionError> {
        self.check_partner(other)?;
        Ok(WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> WaveFunction<S> {
        WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn add(&self, other: &WaveFunction<S>) -> Result<WaveFunction<S>, WaveFunctionError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &WaveFunction<S>) -> Result<WaveFunction<S>, WaveFunctionError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &WaveFunction<S>) -> Result<WaveFunction<S>, WaveFunctionError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn div(&self, other: &WaveFunction<S>) -> Result<WaveFunction<S>, WaveFunctionError> {
        self.check_partner(other)?;
        if let Some(index) = other.values.iter().position(|v| v.modulus_sq() == 0.0) {
            return Err(WaveFunctionError::DivisionByZero { index });
        }
        self.zip_with(other, |a, b| a / b)
    }

    pub fn scale(&self, s: S) -> WaveFunction<S> {
        self.map(|a| a * s)
    }

    pub fn powf(&self, e: f64) -> WaveFunction<S> {
        self.map(|a| a.powf(e))
    }

    pub fn exp(&self) -> WaveFunction<S> {
        self.map(S::exp)
    }

    pub fn cos(&self) -> WaveFunction<S> {
        self.map(S::cos)
    }

    pub fn sin(&self) -> WaveFunction<S> {
        self.map(S::sin)
    }

    pub fn ln(&self) -> WaveFunction<S> {
        self.map(S::ln)
    }

    pub fn conj(&self) -> WaveFunction<S> {
        self.map(S::conj)
    }

    /// Pointwise modulus, always a real function.
    pub fn abs(&self) -> WaveFunction<f64> {
        WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|v| v.modulus()).collect(),
        }
    }

    pub fn real_part(&self) -> WaveFunction<f64> {
        WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|v| v.real()).collect(),
        }
    }

    pub fn imag_part(&self) -> WaveFunction<f64> {
        WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|v| v.imag()).collect(),
        }
    }

    /// Graph integral: per-edge trapezoidal rule with endpoint samples
    /// reconstructed through the second-order vertex closure.
    pub fn integral(&self) -> S {
        quad_integral(&self.graph, &self.values)
    }

    /// `(∫ |u|^p)^{1/p}`; `p` must be at least 1.
    pub fn norm_p(&self, p: f64) -> Result<f64, WaveFunctionError> {
        if !(p >= 1.0) {
            return Err(WaveFunctionError::InvalidNormOrder { p });
        }
        let integrand: Vec<f64> = self.values.iter().map(|v| v.modulus().powf(p)).collect();
        Ok(quad_integral(&self.graph, &integrand).powf(1.0 / p))
    }

    /// The L² norm (`norm_p` with p = 2, with the exact power avoided).
    pub fn norm_2(&self) -> f64 {
        let integrand: Vec<f64> = self.values.iter().map(|v| v.modulus_sq()).collect();
        quad_integral(&self.graph, &integrand).max(0.0).sqrt()
    }

    /// Squared L² norm; the conserved "mass" of the evolution problems.
    pub fn mass(&self) -> f64 {
        let integrand: Vec<f64> = self.values.iter().map(|v| v.modulus_sq()).collect();
        quad_integral(&self.graph, &integrand)
    }

    /// Hermitian inner product `∫ conj(u)·v`, conjugate-linear in `self`.
    pub fn dot(&self, other: &WaveFunction<S>) -> Result<S, WaveFunctionError> {
        self.check_partner(other)?;
        let integrand: Vec<S> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a.conj() * b)
            .collect();
        Ok(quad_integral(&self.graph, &integrand))
    }

    /// Endpoint samples per edge, `(value at x=0, value at x=l_e)`, from the
    /// second-order closure.
    pub fn edge_end_values(&self) -> Vec<(S, S)> {
        edge_end_values(&self.graph, &self.values)
    }

    /// Writes the samples as CSV with columns
    /// `edge_from,edge_to,edge_id,k,x_local,re,im`: one row per interior node
    /// in global order, then per edge the two reconstructed endpoint rows
    /// with `k = 0` and `k = N_e + 1`.
    pub fn write_csv(&self, w: &mut impl io::Write) -> io::Result<()> {
        writeln!(w, "edge_from,edge_to,edge_id,k,x_local,re,im")?;
        for edge in self.graph.edges() {
            let key = edge.key();
            for k in 1..=edge.n_interior() {
                let v = self.values[edge.offset() + k - 1];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    key.from,
                    key.to,
                    key.id,
                    k,
                    edge.x_of(k),
                    v.real(),
                    v.imag()
                )?;
            }
        }
        let ends = self.edge_end_values();
        for (edge, &(v0, v1)) in self.graph.edges().iter().zip(&ends) {
            let key = edge.key();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                key.from,
                key.to,
                key.id,
                0,
                0.0,
                v0.real(),
                v0.imag()
            )?;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                key.from,
                key.to,
                key.id,
                edge.n_interior() + 1,
                edge.length(),
                v1.real(),
                v1.imag()
            )?;
        }
        Ok(())
    }
}

impl WaveFunction<f64> {
    /// Lifts a real function to a complex one with zero imaginary part.
    pub fn promote(&self) -> WaveFunction<Complex64> {
        WaveFunction {
            graph: Arc::clone(&self.graph),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }
}

/// Trapezoidal quadrature of a flat sample vector over the whole graph.
pub(crate) fn quad_integral<S: Scalar>(graph: &Arc<MetricGraph>, values: &[S]) -> S {
    let ends = edge_end_values(graph, values);
    let mut total = S::zero();
    for (edge, &(v0, v1)) in graph.edges().iter().zip(&ends) {
        let mut edge_sum = S::zero();
        for k in 0..edge.n_interior() {
            edge_sum = edge_sum + values[edge.offset() + k];
        }
        edge_sum = edge_sum + (v0 + v1) * 0.5;
        total = total + edge_sum * edge.dx();
    }
    total
}

pub(crate) fn edge_end_values<S: Scalar>(graph: &Arc<MetricGraph>, values: &[S]) -> Vec<(S, S)> {
    let mut ends = vec![(S::zero(), S::zero()); graph.edges().len()];
    for (vi, v) in graph.vertices().iter().enumerate() {
        let vals = graph.trace(vi).eval(values);
        for (r, end) in v.incident().iter().enumerate() {
            if end.at_from {
                ends[end.edge].0 = vals[r];
            } else {
                ends[end.edge].1 = vals[r];
            }
        }
    }
    ends
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSpec, GraphBuilder, VertexCondition};

    fn segment(total: usize, dirichlet: bool) -> Arc<MetricGraph> {
        let mut b = GraphBuilder::new()
            .edge(EdgeSpec::new("A", "B", 1.0))
            .total_nodes(total);
        if dirichlet {
            b = b
                .condition("A", VertexCondition::Dirichlet)
                .condition("B", VertexCondition::Dirichlet);
        }
        Arc::new(b.build().unwrap())
    }

    #[test]
    fn constant_on_neumann_segment_integrates_to_length() {
        // Kirchhoff at a degree-1 vertex is a Neumann end; the closure
        // reproduces the constant, so the trapezoid sum telescopes exactly.
        let g = segment(50, false);
        let u = WaveFunction::constant(&g, 1.0);
        assert!((u.integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sine_integral_second_order_accurate() {
        let g = segment(200, true);
        let funs = EdgeFunctions::new().set(("A", "B"), |x: f64| (std::f64::consts::PI * x).sin());
        let u = WaveFunction::from_edge_functions(&g, &funs).unwrap();
        let exact = 2.0 / std::f64::consts::PI;
        assert!((u.integral() - exact).abs() < 1e-4);
    }

    #[test]
    fn dirichlet_closure_clips_non_vanishing_data() {
        // u = x is incompatible with the Dirichlet end at x = 1; the closure
        // forces the endpoint to 0, so the quadrature error is only O(δx).
        // That is the intended discretization behavior, not an accident.
        let g = segment(100, true);
        let funs = EdgeFunctions::new().set(("A", "B"), |x: f64| x);
        let u = WaveFunction::from_edge_functions(&g, &funs).unwrap();
        let dx = g.edges()[0].dx();
        assert!((u.integral() - 0.5).abs() < 5.0 * dx);
        assert!((u.integral() - 0.5).abs() > 0.01 * dx);
    }

    #[test]
    fn dot_of_self_equals_norm_squared() {
        let g = segment(64, true);
        let funs = EdgeFunctions::new().set(("A", "B"), |x: f64| (3.1 * x).sin() + 0.3 * x);
        let u = WaveFunction::from_edge_functions(&g, &funs).unwrap();
        let d = u.dot(&u).unwrap();
        let n2 = u.norm_2().powi(2);
        assert!((d - n2).abs() <= 1e-12 * n2.max(1.0));
    }

    #[test]
    fn dot_is_hermitian() {
        let g = segment(40, true);
        let u = WaveFunction::from_fn(&g, |_, x| Complex64::new(x.cos(), (2.0 * x).sin()));
        let v = WaveFunction::from_fn(&g, |_, x| Complex64::new(x, -x * x));
        let uv = u.dot(&v).unwrap();
        let vu = v.dot(&u).unwrap();
        assert!((uv - vu.conj()).norm() < 1e-12 * uv.norm().max(1.0));
    }

    #[test]
    fn phase_does_not_change_modulus() {
        let g = segment(40, true);
        let u = WaveFunction::from_fn(&g, |_, x| Complex64::new((2.0 * x).sin(), 0.4 * x));
        let phase = WaveFunction::from_fn(&g, |_, x| Complex64::new(0.0, 1.7 * x).exp());
        let rotated = u.mul(&phase).unwrap();
        for (a, b) in rotated.abs().values().iter().zip(u.abs().values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn add_matches_scale_by_two() {
        let g = segment(30, true);
        let u = WaveFunction::from_fn(&g, |_, x| x * x - 0.5);
        let s = u.add(&u).unwrap();
        for (a, b) in s.values().iter().zip(u.scale(2.0).values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let g = segment(30, true);
        let u = WaveFunction::from_fn(&g, |_, x| 1.5 + x);
        let r = u.ln().exp();
        for (a, b) in r.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12 * b.abs());
        }
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let g = segment(30, true);
        let u = WaveFunction::constant(&g, 1.0);
        let mut zeros = vec![1.0; g.interior_count()];
        zeros[7] = 0.0;
        let v = WaveFunction::from_flat(&g, zeros).unwrap();
        match u.div(&v) {
            Err(WaveFunctionError::DivisionByZero { index: 7 }) => {}
            other => panic!("expected division-by-zero at node 7, got {other:?}"),
        }
    }

    #[test]
    fn partners_must_share_the_graph_object() {
        let g1 = segment(30, true);
        let g2 = segment(30, true); // structurally equal, different object
        let u = WaveFunction::constant(&g1, 1.0);
        let v = WaveFunction::constant(&g2, 1.0);
        assert!(matches!(u.add(&v), Err(WaveFunctionError::GraphMismatch)));
        assert!(matches!(u.dot(&v), Err(WaveFunctionError::GraphMismatch)));
    }

    #[test]
    fn unknown_edge_key_rejected() {
        let g = segment(30, true);
        let funs = EdgeFunctions::new().set(("A", "C"), |_| 1.0);
        assert!(matches!(
            WaveFunction::from_edge_functions(&g, &funs),
            Err(WaveFunctionError::UnknownEdge(_))
        ));
    }

    #[test]
    fn missing_edges_default_to_zero() {
        let g = Arc::new(
            GraphBuilder::new()
                .edge(EdgeSpec::new("A", "B", 1.0))
                .edge(EdgeSpec::new("B", "C", 1.0))
                .condition("A", VertexCondition::Dirichlet)
                .condition("C", VertexCondition::Dirichlet)
                .total_nodes(20)
                .build()
                .unwrap(),
        );
        let funs = EdgeFunctions::new().set(("A", "B"), |_| 1.0);
        let u = WaveFunction::from_edge_functions(&g, &funs).unwrap();
        let second = &g.edges()[1];
        for k in 0..second.n_interior() {
            assert_eq!(u.values()[second.offset() + k], 0.0);
        }
    }

    #[test]
    fn norm_order_below_one_rejected() {
        let g = segment(30, true);
        let u = WaveFunction::constant(&g, 1.0);
        assert!(matches!(
            u.norm_p(0.5),
            Err(WaveFunctionError::InvalidNormOrder { .. })
        ));
    }

    #[test]
    fn constant_l2_norm_uses_total_length() {
        let g = Arc::new(
            GraphBuilder::new()
                .edge(EdgeSpec::new("A", "B", 2.0))
                .edge(EdgeSpec::new("B", "C", 3.0))
                .total_nodes(500)
                .build()
                .unwrap(),
        );
        let u = WaveFunction::constant(&g, 1.5);
        // All-Kirchhoff closure reproduces constants, so this is exact.
        assert!((u.norm_2() - 1.5 * 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_layout_has_interior_then_endpoint_rows() {
        let g = Arc::new(
            GraphBuilder::new()
                .edge(EdgeSpec::new("A", "B", 1.0))
                .edge(EdgeSpec::new("B", "C", 1.0))
                .condition("A", VertexCondition::Dirichlet)
                .condition("C", VertexCondition::Dirichlet)
                .total_nodes(8)
                .build()
                .unwrap(),
        );
        let u = WaveFunction::from_fn(&g, |_, x| x);
        let mut out = Vec::new();
        u.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "edge_from,edge_to,edge_id,k,x_local,re,im");
        assert_eq!(lines.len(), 1 + g.interior_count() + 2 * g.edges().len());
        // Endpoint rows carry the k = 0 and k = N_e + 1 markers.
        let n0 = g.edges()[0].n_interior();
        assert!(lines[1 + g.interior_count()].starts_with("A,B,0,0,"));
        assert!(lines[2 + g.interior_count()].starts_with(&format!("A,B,0,{},", n0 + 1)));
    }

    #[test]
    fn soliton_profile_peaks_at_center() {
        let m = 20.0;
        let c = 3.0;
        let x0 = 3.0;
        let g = Arc::new(
            GraphBuilder::new()
                .edge(EdgeSpec::new("A", "B", 6.0))
                .condition("A", VertexCondition::Dirichlet)
                .condition("B", VertexCondition::Dirichlet)
                // 599 interior nodes on length 6 puts δx = 0.01 with a node
                // exactly at the peak x₀ = 3.
                .total_nodes(599)
                .build()
                .unwrap(),
        );
        let funs = EdgeFunctions::new().set(("A", "B"), move |x: f64| {
            let amp = m / (2.0 * 2.0f64.sqrt()) / (m * (x - x0) / 4.0).cosh();
            Complex64::new(0.0, c * x).exp() * amp
        });
        let u = WaveFunction::from_edge_functions(&g, &funs).unwrap();
        let peak = u
            .abs()
            .values()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v));
        assert!((peak - m / (2.0 * 2.0f64.sqrt())).abs() < 1e-3);
    }
}
