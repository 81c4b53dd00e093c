//! Metric graph description and discretization mesh.
//!
//! A graph is built from a list of [`EdgeSpec`]s (each an interval of given
//! length between two labeled vertices), a map of [`VertexCondition`]s, and a
//! global interior-node budget. Construction allocates a uniform mesh per
//! edge — `N_e` interior nodes with spacing `δx_e = l_e / (N_e + 1)` — and
//! precomputes, for every vertex, the boundary-closure coefficients that
//! express the (unstored) vertex samples in terms of interior nodes. The
//! result is immutable; solvers share it behind an `Arc`.
//!
//! Conventions baked in here and relied on everywhere else:
//!
//! * edges are sorted by `(from, to, id)`; the flat value vector of length
//!   `N = Σ N_e` concatenates interior nodes edge by edge in that order;
//! * arc length runs from the `from` vertex (`x = 0`) to the `to` vertex
//!   (`x = l_e`); vertex samples `x_{e,0}` and `x_{e,N_e+1}` are never stored;
//! * self-loops are rejected — model a loop as two edges through an auxiliary
//!   degree-2 Kirchhoff vertex, which is numerically inert.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum interior nodes per edge: the vertex closure reaches two interior
/// neighbors on each side, so anything below three would overlap.
pub const MIN_NODES_PER_EDGE: usize = 3;

/// Everything that can go wrong while describing or building a graph.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least one edge")]
    NoEdges,
    #[error("vertex label must be a non-empty string")]
    EmptyVertexLabel,
    #[error("edge length must be positive and finite, got {length} on {key}")]
    BadLength { key: EdgeKey, length: f64 },
    #[error("duplicate edge key {0}")]
    DuplicateEdge(EdgeKey),
    #[error("self-loop {0} not supported; split it with an auxiliary Kirchhoff vertex")]
    SelfLoop(EdgeKey),
    #[error("vertex '{label}' referenced in {place} does not appear in any edge")]
    DanglingVertex { label: String, place: &'static str },
    #[error("total_nodes = {given} is too small: {edges} edges need at least {required}")]
    TotalNodesTooSmall {
        given: usize,
        edges: usize,
        required: usize,
    },
    #[error("custom condition at '{label}' has {rows}x{cols} matrices but vertex degree is {degree}")]
    CustomDimensionMismatch {
        label: String,
        rows: usize,
        cols: usize,
        degree: usize,
    },
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("graph description is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Failures of the vertex boundary-closure construction.
#[derive(Debug, Error)]
pub enum ClosureError {
    #[error("closure matrix A + c·B·Λ at vertex '{label}' is singular; the conditions there cannot be eliminated")]
    Singular { label: String },
    #[error("condition rows (A|B) at vertex '{label}' are rank deficient (rank {rank} < degree {degree})")]
    RankDeficient {
        label: String,
        rank: usize,
        degree: usize,
    },
    #[error("third-order closure needs at least 4 interior nodes per incident edge; edge {key} has {nodes}")]
    ThirdOrderTooCoarse { key: EdgeKey, nodes: usize },
}

/// Rendering hint for an edge; no numerical meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    #[default]
    Segment,
    Curve,
}

/// The `(from, to, id)` triple that uniquely identifies an edge. The `id`
/// string disambiguates parallel edges and defaults to `"0"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub from: String,
    pub to: String,
    pub id: String,
}

impl EdgeKey {
    pub fn new(from: impl Into<String>, to: impl Into<String>, id: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            id: id.into(),
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} -> {}, id {})", self.from, self.to, self.id)
    }
}

impl<A: Into<String>, B: Into<String>> From<(A, B)> for EdgeKey {
    fn from((from, to): (A, B)) -> Self {
        EdgeKey::new(from, to, "0")
    }
}

impl<A: Into<String>, B: Into<String>, C: Into<String>> From<(A, B, C)> for EdgeKey {
    fn from((from, to, id): (A, B, C)) -> Self {
        EdgeKey::new(from, to, id)
    }
}

/// One edge of the graph description: an interval of `length` from vertex
/// `from` to vertex `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub length: f64,
    pub id: String,
    pub line_kind: LineKind,
}

impl EdgeSpec {
    pub fn new(from: impl Into<String>, to: impl Into<String>, length: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            length,
            id: "0".to_owned(),
            line_kind: LineKind::Segment,
        }
    }

    /// Sets the parallel-edge disambiguator (default `"0"`).
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Marks the edge to be drawn as a half-ellipse rather than a segment.
    pub fn curved(mut self) -> Self {
        self.line_kind = LineKind::Curve;
        self
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.from.clone(), self.to.clone(), self.id.clone())
    }
}

/// Vertex condition `A_v u(v) + B_v u'(v) = 0`, with `u(v)` the vector of
/// edge limits and `u'(v)` the edge derivatives at the vertex.
///
/// The named conditions state their strength in the orientation *away* from
/// the vertex (along increasing arc length into each edge): `Delta` means
/// `Σ_e du_e/ds(v) = strength · u(v)`, so an attractive point interaction
/// has `strength < 0`. The discrete elimination behind [`VertexTrace`] uses
/// one-sided stencils whose natural orientation is the opposite one (toward
/// the vertex); [`VertexCondition::matrices`] folds that sign in, so the
/// constructed `(A_v, B_v)` pairs are in the toward-vertex orientation the
/// closure consumes. `Custom` matrices are passed through verbatim and hence
/// also act on toward-vertex derivatives; negate `B` to express a condition
/// stated in the away orientation. Conditions whose rows involve only `u`
/// or only `u'` (Dirichlet, Kirchhoff, derivative continuity) read the same
/// either way.
#[derive(Debug, Clone, PartialEq)]
pub enum VertexCondition {
    /// Continuity across all incident edges plus zero total flux.
    Kirchhoff,
    /// `u = 0` on every incident edge end.
    Dirichlet,
    /// Continuity plus `Σ_e du_e/ds(v) = strength · u(v)` with `s` measured
    /// away from the vertex; attractive for negative strength.
    Delta { strength: f64 },
    /// Continuity of the derivative plus `Σ u_e(v) = strength · du/ds(v)`;
    /// the roles of value and derivative are exchanged relative to `Delta`.
    DeltaPrime { strength: f64 },
    /// Explicit `(A, B)` pair; both must be `d_v × d_v`. `B` multiplies
    /// toward-vertex derivatives.
    Custom { a: DMatrix<f64>, b: DMatrix<f64> },
}

impl VertexCondition {
    /// Canonical `(A_v, B_v)` matrices for a vertex of degree `d`.
    ///
    /// Row ordering matches the vertex's incident-edge ordering (edges sorted
    /// by key). For the continuity-type conditions the first `d − 1` rows are
    /// the `e_i − e_{i+1}` difference patterns and the last row carries the
    /// flux (or value-sum) condition.
    pub fn matrices(&self, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>), GraphError> {
        assert!(d >= 1, "vertex degree is at least one");
        let mut a = DMatrix::zeros(d, d);
        let mut b = DMatrix::zeros(d, d);
        match self {
            VertexCondition::Dirichlet => {
                a.fill_with_identity();
            }
            VertexCondition::Kirchhoff | VertexCondition::Delta { .. } => {
                for i in 0..d - 1 {
                    a[(i, i)] = 1.0;
                    a[(i, i + 1)] = -1.0;
                }
                for j in 0..d {
                    b[(d - 1, j)] = 1.0;
                }
                if let VertexCondition::Delta { strength } = self {
                    // The flux row sums toward-vertex derivatives, each of
                    // which is minus the away derivative the strength refers
                    // to: Σ(−du/ds) + α·u = 0 reproduces Σ du/ds = α·u.
                    a[(d - 1, 0)] = *strength;
                }
            }
            VertexCondition::DeltaPrime { strength } => {
                for i in 0..d - 1 {
                    b[(i, i)] = 1.0;
                    b[(i, i + 1)] = -1.0;
                }
                for j in 0..d {
                    a[(d - 1, j)] = 1.0;
                }
                // Same orientation translation as for `Delta`, now on the
                // derivative side: Σu − α·(−du/ds) = 0 gives Σu = α·du/ds.
                b[(d - 1, 0)] = *strength;
            }
            VertexCondition::Custom { a: ca, b: cb } => {
                if ca.nrows() != d || ca.ncols() != d || cb.nrows() != d || cb.ncols() != d {
                    return Err(GraphError::CustomDimensionMismatch {
                        label: String::new(), // filled in by the caller, which knows the vertex
                        rows: ca.nrows(),
                        cols: ca.ncols(),
                        degree: d,
                    });
                }
                a.copy_from(ca);
                b.copy_from(cb);
            }
        }
        Ok((a, b))
    }
}

/// Which one-sided derivative closure eliminates the vertex samples.
///
/// `Second` uses the 3-point derivative `(3u₀ − 4u₋₁ + u₋₂)/(2δx)` and needs
/// `N_e ≥ 3`; `Third` uses the 4-point `(11u₀ − 18u₋₁ + 9u₋₂ − 2u₋₃)/(6δx)`
/// and needs `N_e ≥ 4`. Quadrature always uses the second-order closure; the
/// operator assembly order is configurable with `Second` as default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureOrder {
    #[default]
    Second,
    Third,
}

impl ClosureOrder {
    /// Number of interior nodes per incident edge entering the closure.
    pub fn depth(self) -> usize {
        match self {
            ClosureOrder::Second => 2,
            ClosureOrder::Third => 3,
        }
    }
}

/// Boundary-value reconstruction at one vertex: the `d × (depth·d)`
/// coefficient matrix `C_v` and the interior-node indices it acts on, so that
/// `[u_{v,0}] = C_v · (u at first interior nodes; u at second; …)`.
#[derive(Debug, Clone)]
pub struct VertexTrace {
    coeffs: DMatrix<f64>,
    nodes: Vec<usize>,
}

impl VertexTrace {
    /// Coefficient matrix; row `r` reconstructs the vertex value seen from
    /// the `r`-th incident edge (in the vertex's incident ordering).
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Global interior-node indices the coefficients act on, grouped as all
    /// first interior nodes, then all second ones (then third for the
    /// third-order closure).
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Reconstructs the `d_v` vertex values from a flat value vector.
    pub fn eval<S>(&self, values: &[S]) -> Vec<S>
    where
        S: Copy + std::ops::Add<Output = S> + std::ops::Mul<f64, Output = S> + num_traits::Zero,
    {
        let d = self.coeffs.nrows();
        let mut out = vec![S::zero(); d];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (c, &node) in self.nodes.iter().enumerate() {
                acc = acc + values[node] * self.coeffs[(r, c)];
            }
            *slot = acc;
        }
        out
    }

    /// Row `r` as `(global node index, coefficient)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(move |(c, &node)| (node, self.coeffs[(r, c)]))
    }
}

/// One endpoint of an edge as seen from a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidentEnd {
    /// Index into [`MetricGraph::edges`].
    pub edge: usize,
    /// True when the vertex is the edge's `from` end (arc length 0).
    pub at_from: bool,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    label: String,
    condition: VertexCondition,
    position: (f64, f64),
    incident: Vec<IncidentEnd>,
}

impl Vertex {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn condition(&self) -> &VertexCondition {
        &self.condition
    }

    pub fn position(&self) -> (f64, f64) {
        self.position
    }

    /// Incident edge ends, ordered by global edge index (i.e. by edge key).
    pub fn incident(&self) -> &[IncidentEnd] {
        &self.incident
    }

    pub fn degree(&self) -> usize {
        self.incident.len()
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    key: EdgeKey,
    from_v: usize,
    to_v: usize,
    length: f64,
    line_kind: LineKind,
    n_interior: usize,
    offset: usize,
    dx: f64,
}

impl Edge {
    pub fn key(&self) -> &EdgeKey {
        &self.key
    }

    /// Vertex index of the `x = 0` end.
    pub fn from_vertex(&self) -> usize {
        self.from_v
    }

    /// Vertex index of the `x = l_e` end.
    pub fn to_vertex(&self) -> usize {
        self.to_v
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn line_kind(&self) -> LineKind {
        self.line_kind
    }

    /// Number of interior mesh nodes on this edge.
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Start of this edge's contiguous block in the flat value vector.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Mesh spacing `l_e / (N_e + 1)`.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Arc-length coordinate of interior node `k ∈ 1..=N_e`.
    pub fn x_of(&self, k: usize) -> f64 {
        k as f64 * self.dx
    }
}

/// An immutable metric graph with its mesh and boundary-closure data.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    total_interior: usize,
    requested_total: usize,
    /// Second-order closure traces, one per vertex; used by quadrature and by
    /// the default operator assembly.
    traces: Vec<VertexTrace>,
}

impl MetricGraph {
    /// Builds a graph from edges, conditions and an interior-node budget.
    /// Unlisted vertices get Kirchhoff conditions; positions default to a
    /// deterministic circular layout.
    pub fn build(
        edges: Vec<EdgeSpec>,
        conditions: BTreeMap<String, VertexCondition>,
        total_nodes: usize,
    ) -> Result<Self, GraphError> {
        GraphBuilder {
            edges,
            conditions,
            positions: BTreeMap::new(),
            total_nodes,
        }
        .build()
    }

    /// Parses the JSON graph description (see [`GraphBuilder`] docs for the
    /// schema) and builds the graph.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        file.into_builder()?.build()
    }

    /// Serializes the full description (edges, all conditions, mesh budget,
    /// positions) as canonical JSON: object keys sorted, all defaults spelled
    /// out. Feeding the output back through [`MetricGraph::from_json`]
    /// reproduces it byte for byte.
    pub fn to_canonical_json(&self) -> String {
        let file = GraphFile::from_graph(self);
        let mut out = serde_json::to_string_pretty(&file).expect("graph serialization is total");
        out.push('\n');
        out
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Total number of interior nodes `N` (the flat vector length).
    pub fn interior_count(&self) -> usize {
        self.total_interior
    }

    /// The node budget the graph was built with (before per-edge rounding).
    pub fn requested_total(&self) -> usize {
        self.requested_total
    }

    pub fn vertex_index(&self, label: &str) -> Option<usize> {
        self.vertices
            .binary_search_by(|v| v.label.as_str().cmp(label))
            .ok()
    }

    pub fn vertex(&self, label: &str) -> Option<&Vertex> {
        self.vertex_index(label).map(|i| &self.vertices[i])
    }

    pub fn vertex_degree(&self, label: &str) -> Option<usize> {
        self.vertex(label).map(Vertex::degree)
    }

    pub fn edge_index(&self, key: &EdgeKey) -> Option<usize> {
        self.edges.binary_search_by(|e| e.key.cmp(key)).ok()
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&Edge> {
        self.edge_index(key).map(|i| &self.edges[i])
    }

    /// Second-order closure trace of vertex `v` (by vertex index).
    pub fn trace(&self, v: usize) -> &VertexTrace {
        &self.traces[v]
    }

    pub fn traces(&self) -> &[VertexTrace] {
        &self.traces
    }

    /// Sum of all edge lengths.
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Replaces plotting positions. Plotting only; solvers never read them.
    pub fn set_positions(
        &mut self,
        positions: &BTreeMap<String, (f64, f64)>,
    ) -> Result<(), GraphError> {
        for (label, &pos) in positions {
            match self.vertex_index(label) {
                Some(i) => self.vertices[i].position = pos,
                None => {
                    return Err(GraphError::DanglingVertex {
                        label: label.clone(),
                        place: "positions",
                    })
                }
            }
        }
        Ok(())
    }

    /// Recomputes vertex traces at the requested closure order (used by the
    /// operator assembly; the graph keeps its second-order set for
    /// quadrature).
    pub(crate) fn closure_traces(&self, order: ClosureOrder) -> Result<Vec<VertexTrace>, ClosureError> {
        build_traces(&self.vertices, &self.edges, order)
    }
}

/// Incremental construction of a [`MetricGraph`].
///
/// The JSON schema accepted by [`MetricGraph::from_json`] mirrors the builder:
///
/// ```json
/// {
///   "edges": [{"from": "A", "to": "B", "length": 5.0, "id": "0"}],
///   "conditions": {
///     "A": {"kind": "dirichlet"},
///     "O": {"kind": "delta", "strength": 1.0},
///     "X": {"kind": "custom", "A": [[1.0]], "B": [[0.0]]}
///   },
///   "total_nodes": 3000,
///   "positions": {"A": [0.0, 0.0]}
/// }
/// ```
///
/// Unknown keys are rejected. `id` defaults to `"0"`, `line_kind` (values
/// `"segment"`/`"curve"`) to `"segment"`; conditions default to Kirchhoff.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    edges: Vec<EdgeSpec>,
    conditions: BTreeMap<String, VertexCondition>,
    positions: BTreeMap<String, (f64, f64)>,
    total_nodes: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn edge(mut self, spec: EdgeSpec) -> Self {
        self.edges.push(spec);
        self
    }

    pub fn edges(mut self, specs: impl IntoIterator<Item = EdgeSpec>) -> Self {
        self.edges.extend(specs);
        self
    }

    pub fn condition(mut self, label: impl Into<String>, condition: VertexCondition) -> Self {
        self.conditions.insert(label.into(), condition);
        self
    }

    pub fn position(mut self, label: impl Into<String>, x: f64, y: f64) -> Self {
        self.positions.insert(label.into(), (x, y));
        self
    }

    pub fn total_nodes(mut self, n: usize) -> Self {
        self.total_nodes = n;
        self
    }

    pub fn build(self) -> Result<MetricGraph, GraphError> {
        let GraphBuilder {
            mut edges,
            conditions,
            positions,
            total_nodes,
        } = self;

        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        if total_nodes < MIN_NODES_PER_EDGE * edges.len() {
            return Err(GraphError::TotalNodesTooSmall {
                given: total_nodes,
                edges: edges.len(),
                required: MIN_NODES_PER_EDGE * edges.len(),
            });
        }

        edges.sort_by(|x, y| x.key().cmp(&y.key()));
        let mut seen = BTreeSet::new();
        for spec in &edges {
            if spec.from.is_empty() || spec.to.is_empty() {
                return Err(GraphError::EmptyVertexLabel);
            }
            if spec.from == spec.to {
                return Err(GraphError::SelfLoop(spec.key()));
            }
            if !(spec.length.is_finite() && spec.length > 0.0) {
                return Err(GraphError::BadLength {
                    key: spec.key(),
                    length: spec.length,
                });
            }
            if !seen.insert(spec.key()) {
                return Err(GraphError::DuplicateEdge(spec.key()));
            }
        }

        // Vertex set = edge endpoints, sorted by label.
        let mut labels: BTreeSet<&str> = BTreeSet::new();
        for spec in &edges {
            labels.insert(&spec.from);
            labels.insert(&spec.to);
        }
        for label in conditions.keys() {
            if !labels.contains(label.as_str()) {
                return Err(GraphError::DanglingVertex {
                    label: label.clone(),
                    place: "conditions",
                });
            }
        }
        for label in positions.keys() {
            if !labels.contains(label.as_str()) {
                return Err(GraphError::DanglingVertex {
                    label: label.clone(),
                    place: "positions",
                });
            }
        }

        let labels: Vec<String> = labels.into_iter().map(str::to_owned).collect();
        let vertex_count = labels.len();
        let mut conditions = conditions;
        let mut vertices: Vec<Vertex> = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / vertex_count as f64;
                let position = positions
                    .get(&label)
                    .copied()
                    .unwrap_or((angle.cos(), angle.sin()));
                let condition = conditions
                    .remove(&label)
                    .unwrap_or(VertexCondition::Kirchhoff);
                Vertex {
                    label,
                    condition,
                    position,
                    incident: Vec::new(),
                }
            })
            .collect();

        // Mesh allocation, then edge records with running offsets.
        let lengths: Vec<f64> = edges.iter().map(|e| e.length).collect();
        let alloc = allocate_nodes(&lengths, total_nodes);
        let mut offset = 0usize;
        let mut edge_records = Vec::with_capacity(edges.len());
        let find = |vs: &[Vertex], label: &str| {
            vs.binary_search_by(|v| v.label.as_str().cmp(label))
                .expect("endpoint labels were collected from the very same edges")
        };
        for (spec, &n_e) in edges.iter().zip(&alloc) {
            let from_v = find(&vertices, &spec.from);
            let to_v = find(&vertices, &spec.to);
            let e_idx = edge_records.len();
            vertices[from_v].incident.push(IncidentEnd {
                edge: e_idx,
                at_from: true,
            });
            vertices[to_v].incident.push(IncidentEnd {
                edge: e_idx,
                at_from: false,
            });
            edge_records.push(Edge {
                key: spec.key(),
                from_v,
                to_v,
                length: spec.length,
                line_kind: spec.line_kind,
                n_interior: n_e,
                offset,
                dx: spec.length / (n_e + 1) as f64,
            });
            offset += n_e;
        }

        // Validate custom-condition dimensions now that degrees are known,
        // so the error carries the vertex label.
        for v in &vertices {
            if let VertexCondition::Custom { a, b } = &v.condition {
                let d = v.degree();
                if a.nrows() != d || a.ncols() != d || b.nrows() != d || b.ncols() != d {
                    return Err(GraphError::CustomDimensionMismatch {
                        label: v.label.clone(),
                        rows: a.nrows(),
                        cols: a.ncols(),
                        degree: d,
                    });
                }
            }
        }

        let traces = build_traces(&vertices, &edge_records, ClosureOrder::Second)?;

        Ok(MetricGraph {
            vertices,
            edges: edge_records,
            total_interior: offset,
            requested_total: total_nodes,
            traces,
        })
    }
}

/// Distributes `total` interior nodes over edges proportionally to length,
/// with a floor of [`MIN_NODES_PER_EDGE`], by largest-remainder rounding.
/// The floor is applied iteratively: edges that would fall below it are
/// pinned at the floor and the remaining budget is re-apportioned.
fn allocate_nodes(lengths: &[f64], total: usize) -> Vec<usize> {
    let mut counts = vec![0usize; lengths.len()];
    let mut free: Vec<usize> = (0..lengths.len()).collect();
    // Invariant: `budget` is `total` minus the nodes pinned so far, and is
    // always at least `MIN_NODES_PER_EDGE · free.len()` because the caller
    // checked `total ≥ MIN_NODES_PER_EDGE · edges`.
    let mut budget = total;
    loop {
        // Largest-remainder apportionment of `budget` over the free edges.
        let total_len: f64 = free.iter().map(|&i| lengths[i]).sum();
        let quotas: Vec<(usize, f64)> = free
            .iter()
            .map(|&i| (i, budget as f64 * lengths[i] / total_len))
            .collect();
        let mut floors: usize = 0;
        for &(i, q) in &quotas {
            counts[i] = q.floor() as usize;
            floors += counts[i];
        }
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&x, &y| {
            let fx = quotas[x].1.fract();
            let fy = quotas[y].1.fract();
            fy.partial_cmp(&fx)
                .expect("node quotas are finite")
                .then(quotas[x].0.cmp(&quotas[y].0))
        });
        for &slot in order.iter().take(budget.saturating_sub(floors)) {
            counts[quotas[slot].0] += 1;
        }
        // Floating-point quotas can land a hair above an integer and push the
        // floor sum past the budget; shave the excess off the edges with the
        // smallest fractional parts.
        let mut excess = floors.saturating_sub(budget);
        for &slot in order.iter().rev() {
            if excess == 0 {
                break;
            }
            let i = quotas[slot].0;
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
        // Pin undershooting edges at the floor and re-apportion the rest of
        // the budget over the remaining edges from scratch.
        let starved: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&i| counts[i] < MIN_NODES_PER_EDGE)
            .collect();
        if starved.is_empty() {
            return counts;
        }
        for &i in &starved {
            counts[i] = MIN_NODES_PER_EDGE;
            budget -= MIN_NODES_PER_EDGE;
        }
        free.retain(|i| !starved.contains(i));
        if free.is_empty() {
            return counts;
        }
    }
}

/// Builds the boundary-closure trace for every vertex.
///
/// With `Λ = diag(1/δx_e)` over the incident edges, the one-sided derivative
/// approximation turns `A u(v) + B u'(v) = 0` into
/// `(A + c₀·B·Λ)·[u_{v,0}] = B·Λ·(c₁·[u_{v,−1}] + c₂·[u_{v,−2}] + …)`, and the
/// trace matrix is the solved form `C_v = (A + c₀·B·Λ)⁻¹·(c₁·B·Λ | c₂·B·Λ | …)`
/// with `(c₀, c₁, c₂) = (3/2, 2, −1/2)` at second order and
/// `(c₀, …, c₃) = (11/6, 3, −3/2, 1/3)` at third order.
fn build_traces(
    vertices: &[Vertex],
    edges: &[Edge],
    order: ClosureOrder,
) -> Result<Vec<VertexTrace>, ClosureError> {
    let depth = order.depth();
    if order == ClosureOrder::Third {
        if let Some(e) = edges.iter().find(|e| e.n_interior < 4) {
            return Err(ClosureError::ThirdOrderTooCoarse {
                key: e.key.clone(),
                nodes: e.n_interior,
            });
        }
    }
    let coeffs: &[f64] = match order {
        ClosureOrder::Second => &[1.5, 2.0, -0.5],
        ClosureOrder::Third => &[11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0],
    };

    let mut traces = Vec::with_capacity(vertices.len());
    for v in vertices {
        let d = v.degree();
        let (a, b) = v
            .condition
            .matrices(d)
            .expect("custom dimensions were validated during build");

        // Rank of the d × 2d system (A | B) must be full for the conditions
        // to determine the vertex values.
        let mut ab = DMatrix::zeros(d, 2 * d);
        ab.view_mut((0, 0), (d, d)).copy_from(&a);
        ab.view_mut((0, d), (d, d)).copy_from(&b);
        let scale = ab.amax().max(1.0);
        let rank = ab.rank(1e-12 * scale);
        if rank < d {
            return Err(ClosureError::RankDeficient {
                label: v.label.clone(),
                rank,
                degree: d,
            });
        }

        // B·Λ with Λ the incident reciprocal spacings.
        let mut b_lambda = b.clone();
        for (j, end) in v.incident.iter().enumerate() {
            let dx = edges[end.edge].dx;
            for i in 0..d {
                b_lambda[(i, j)] /= dx;
            }
        }

        let closure = &a + coeffs[0] * &b_lambda;
        let mut rhs = DMatrix::zeros(d, depth * d);
        for (block, &c) in coeffs[1..].iter().enumerate() {
            rhs.view_mut((0, block * d), (d, d))
                .copy_from(&(c * &b_lambda));
        }
        let solved = closure
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| ClosureError::Singular {
                label: v.label.clone(),
            })?;

        // Node indices: for each depth level, the level-th interior node of
        // each incident edge, counted inward from this vertex.
        let mut nodes = Vec::with_capacity(depth * d);
        for level in 0..depth {
            for end in &v.incident {
                let e = &edges[end.edge];
                let idx = if end.at_from {
                    e.offset + level
                } else {
                    e.offset + e.n_interior - 1 - level
                };
                nodes.push(idx);
            }
        }

        traces.push(VertexTrace {
            coeffs: solved,
            nodes,
        });
    }
    Ok(traces)
}

// ── JSON schema ─────────────────────────────────────────────────────────────

fn default_edge_id() -> String {
    "0".to_owned()
}

fn is_default_id(id: &str) -> bool {
    id == "0"
}

fn is_segment(kind: &LineKind) -> bool {
    *kind == LineKind::Segment
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    from: String,
    to: String,
    length: f64,
    #[serde(default = "default_edge_id", skip_serializing_if = "is_default_id")]
    id: String,
    #[serde(default, skip_serializing_if = "is_segment")]
    line_kind: LineKind,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ConditionFile {
    Kirchhoff,
    Dirichlet,
    Delta {
        strength: f64,
    },
    DeltaPrime {
        strength: f64,
    },
    Custom {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    edges: Vec<EdgeFile>,
    #[serde(default)]
    conditions: BTreeMap<String, ConditionFile>,
    total_nodes: usize,
    #[serde(default)]
    positions: BTreeMap<String, [f64; 2]>,
}

impl GraphFile {
    fn into_builder(self) -> Result<GraphBuilder, GraphError> {
        let mut builder = GraphBuilder::new().total_nodes(self.total_nodes);
        for e in self.edges {
            let mut spec = EdgeSpec::new(e.from, e.to, e.length).with_id(e.id);
            spec.line_kind = e.line_kind;
            builder = builder.edge(spec);
        }
        for (label, c) in self.conditions {
            let condition = match c {
                ConditionFile::Kirchhoff => VertexCondition::Kirchhoff,
                ConditionFile::Dirichlet => VertexCondition::Dirichlet,
                ConditionFile::Delta { strength } => VertexCondition::Delta { strength },
                ConditionFile::DeltaPrime { strength } => VertexCondition::DeltaPrime { strength },
                ConditionFile::Custom { a, b } => {
                    let to_matrix = |rows: Vec<Vec<f64>>| {
                        let nrows = rows.len();
                        let ncols = rows.first().map_or(0, Vec::len);
                        if rows.iter().any(|r| r.len() != ncols) {
                            None
                        } else {
                            Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
                        }
                    };
                    match (to_matrix(a), to_matrix(b)) {
                        (Some(a), Some(b)) => VertexCondition::Custom { a, b },
                        _ => {
                            return Err(GraphError::CustomDimensionMismatch {
                                label,
                                rows: 0,
                                cols: 0,
                                degree: 0,
                            })
                        }
                    }
                }
            };
            builder = builder.condition(label, condition);
        }
        for (label, [x, y]) in self.positions {
            builder = builder.position(label, x, y);
        }
        Ok(builder)
    }

    fn from_graph(g: &MetricGraph) -> Self {
        let edges = g
            .edges
            .iter()
            .map(|e| EdgeFile {
                from: e.key.from.clone(),
                to: e.key.to.clone(),
                length: e.length,
                id: e.key.id.clone(),
                line_kind: e.line_kind,
            })
            .collect();
        let conditions = g
            .vertices
            .iter()
            .map(|v| {
                let c = match &v.condition {
                    VertexCondition::Kirchhoff => ConditionFile::Kirchhoff,
                    VertexCondition::Dirichlet => ConditionFile::Dirichlet,
                    VertexCondition::Delta { strength } => ConditionFile::Delta {
                        strength: *strength,
                    },
                    VertexCondition::DeltaPrime { strength } => ConditionFile::DeltaPrime {
                        strength: *strength,
                    },
                    VertexCondition::Custom { a, b } => {
                        let rows = |m: &DMatrix<f64>| {
                            (0..m.nrows())
                                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                                .collect()
                        };
                        ConditionFile::Custom {
                            a: rows(a),
                            b: rows(b),
                        }
                    }
                };
                (v.label.clone(), c)
            })
            .collect();
        let positions = g
            .vertices
            .iter()
            .map(|v| (v.label.clone(), [v.position.0, v.position.1]))
            .collect();
        GraphFile {
            edges,
            conditions,
            total_nodes: g.requested_total,
            positions,
        }
    }
}
