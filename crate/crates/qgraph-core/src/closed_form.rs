//! Exact and semi-analytic reference states used to validate the solvers.
//!
//! Each function evaluates a known stationary profile of the focusing cubic
//! Schrödinger equation directly on a graph's mesh nodes, so solver output can
//! be compared against it pointwise. Families covered:
//!
//! * a closed loop, where the fixed-mass minimizer is either flat or a single
//!   elliptic bump ([`ring_ground_state`]);
//! * a star of half-lines with an attractive point interaction at the center
//!   ([`star_delta_ground_state`]);
//! * a loop with one pendant tail, matching an elliptic bump on the loop to a
//!   sech tail ([`tadpole_ground_state`]);
//! * the flat branch on a dumbbell, with its bifurcation masses
//!   ([`dumbbell_reference`]);
//! * the travelling line soliton used as initial datum for the time
//!   integrators ([`soliton`]).
//!
//! Coupling conventions follow the families' standard normalizations: the ring
//! takes an arbitrary coupling `λ > 0`, the star and tadpole formulas fix
//! `λ = 1`, and the dumbbell reference fixes `λ = 2`. Truncation of infinite
//! edges is the caller's concern: the star and tadpole profiles decay like
//! `e^{−2√ω·len}`, so edges a few multiples of `1/√ω` long make the truncation
//! error negligible next to discretization error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{MetricGraph, VertexCondition};
use crate::special::{ellip_e, ellip_k, jacobi_sn_cn_dn, SpecialError};
use crate::wavefunction::{WaveFunction, WaveFunctionError};

/// Failure modes of the closed-form evaluators.
#[derive(Debug, Error)]
pub enum ClosedFormError {
    /// Parameters outside the validity domain of a formula.
    #[error("invalid parameters: {reason}")]
    Parameters { reason: String },
    /// The supplied graph does not have the layout the formula lives on.
    #[error("graph is not a {family}: {reason}")]
    Shape {
        family: &'static str,
        reason: String,
    },
    /// A bracketing root search failed.
    #[error("root search for {what} failed: {reason}")]
    RootSearch {
        what: &'static str,
        reason: String,
    },
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Function(#[from] WaveFunctionError),
}

/// Bisection on a bracket with a sign change. Runs to floating-point interval
/// exhaustion, so the returned root is accurate to machine precision relative
/// to the bracket scale.
fn bisect<F>(mut f: F, lo: f64, hi: f64, what: &'static str) -> Result<f64, ClosedFormError>
where
    F: FnMut(f64) -> Result<f64, ClosedFormError>,
{
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if !flo.is_finite() || !fhi.is_finite() {
        return Err(ClosedFormError::RootSearch {
            what,
            reason: format!("non-finite endpoint values on [{lo}, {hi}]"),
        });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(ClosedFormError::RootSearch {
            what,
            reason: format!("no sign change on [{lo}, {hi}]"),
        });
    }
    let (mut a, mut b, mut fa) = (lo, hi, flo);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            return Err(ClosedFormError::RootSearch {
                what,
                reason: format!("non-finite value at {mid}"),
            });
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

fn require_kirchhoff(
    graph: &MetricGraph,
    vertex: usize,
    family: &'static str,
) -> Result<(), ClosedFormError> {
    let v = &graph.vertices()[vertex];
    if matches!(v.condition(), VertexCondition::Kirchhoff) {
        Ok(())
    } else {
        Err(ClosedFormError::Shape {
            family,
            reason: format!(
                "vertex {} carries a non-Kirchhoff condition; the profile assumes \
                 plain continuation there",
                v.label()
            ),
        })
    }
}

// ---------------------------------------------------------------------------
// Ring
// ---------------------------------------------------------------------------

/// Problem data for the fixed-mass ground state on a closed loop.
#[derive(Debug, Clone, Copy)]
pub struct RingParams {
    perimeter: f64,
    lambda: f64,
    mass: f64,
}

impl RingParams {
    /// Loop perimeter `T`, focusing coupling `λ`, and prescribed mass `m`;
    /// all must be finite and positive.
    pub fn new(perimeter: f64, lambda: f64, mass: f64) -> Result<Self, ClosedFormError> {
        for (name, value) in [("perimeter", perimeter), ("lambda", lambda), ("mass", mass)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ClosedFormError::Parameters {
                    reason: format!("{name} must be positive and finite, got {value}"),
                });
            }
        }
        Ok(Self {
            perimeter,
            lambda,
            mass,
        })
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Mass below which the minimizer is the flat state: `2π²/(λT)`.
    pub fn threshold_mass(&self) -> f64 {
        2.0 * PI * PI / (self.lambda * self.perimeter)
    }
}

/// Which branch of the loop minimizer a mass selects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RingRegime {
    /// The flat state `√(m/T)`. `at_threshold` marks the degenerate boundary
    /// mass `2π²/(λT)`, where the flat branch is assigned by continuity.
    Constant { value: f64, at_threshold: bool },
    /// Single-bump elliptic profile `dn((s − s₀)/β; k)/α`.
    Dnoidal { k: f64, alpha: f64, beta: f64 },
}

/// A loop ground state together with the branch it came from.
#[derive(Debug, Clone)]
pub struct RingGroundState {
    pub state: WaveFunction<f64>,
    pub regime: RingRegime,
}

/// Arc-length coordinates of a graph that is a single closed loop: for each
/// edge, the arc of its `from` end and whether walking the loop traverses it
/// forward. The walk starts at the `from` vertex of the first edge in
/// canonical order, which therefore sits at arc 0.
struct LoopCoords {
    per_edge: Vec<(f64, bool)>,
    total: f64,
}

impl LoopCoords {
    fn trace(graph: &MetricGraph, family: &'static str) -> Result<Self, ClosedFormError> {
        for v in graph.vertices() {
            if v.degree() != 2 {
                return Err(ClosedFormError::Shape {
                    family,
                    reason: format!("vertex {} has degree {}, expected 2", v.label(), v.degree()),
                });
            }
        }
        let n = graph.edges().len();
        let mut per_edge = vec![(0.0, true); n];
        let mut used = vec![false; n];
        let start = graph.edges()[0].from_vertex();
        let mut current = start;
        let mut arc = 0.0;
        for _ in 0..n {
            let end = graph.vertices()[current]
                .incident()
                .iter()
                .find(|e| !used[e.edge])
                .copied()
                .ok_or(ClosedFormError::Shape {
                    family,
                    reason: "edges do not form one connected loop".into(),
                })?;
            used[end.edge] = true;
            let edge = &graph.edges()[end.edge];
            per_edge[end.edge] = (arc, end.at_from);
            arc += edge.length();
            current = if end.at_from {
                edge.to_vertex()
            } else {
                edge.from_vertex()
            };
        }
        if current != start || used.iter().any(|u| !u) {
            return Err(ClosedFormError::Shape {
                family,
                reason: "edges do not form one connected loop".into(),
            });
        }
        Ok(Self { per_edge, total: arc })
    }

    fn arc_of(&self, edge_index: usize, length: f64, x: f64) -> f64 {
        let (start, forward) = self.per_edge[edge_index];
        if forward {
            start + x
        } else {
            start + (length - x)
        }
    }
}

/// Fixed-mass ground state on a closed loop of total length `T`.
///
/// Below the threshold mass `2π²/(λT)` the minimizer is the flat state
/// `√(m/T)`. Above it, the minimizer is a single elliptic bump
/// `ψ(s) = dn((s − s₀)/β; k)/α` with `β = T/(2K(k))` (one full period around
/// the loop) and `α = β·√(λ/2)`; the modulus solves `K(k)·E(k) = mλT/8`,
/// which encodes the period and mass constraints simultaneously. The bump's
/// maximum `s₀` is placed at the midpoint of the first edge in canonical
/// order; any translate is an equally valid minimizer.
///
/// The graph must be a single closed loop of Kirchhoff-joined edges with
/// total length `T`.
pub fn ring_ground_state(
    params: &RingParams,
    graph: &Arc<MetricGraph>,
) -> Result<RingGroundState, ClosedFormError> {
    const FAMILY: &str = "ring";
    let coords = LoopCoords::trace(graph, FAMILY)?;
    for v in 0..graph.vertices().len() {
        require_kirchhoff(graph, v, FAMILY)?;
    }
    let t = params.perimeter;
    if (coords.total - t).abs() > 1e-9 * t.max(1.0) {
        return Err(ClosedFormError::Shape {
            family: FAMILY,
            reason: format!(
                "loop length {} does not match the requested perimeter {t}",
                coords.total
            ),
        });
    }

    let threshold = params.threshold_mass();
    if params.mass <= threshold * (1.0 + 1e-12) {
        let value = (params.mass / t).sqrt();
        let at_threshold = params.mass >= threshold * (1.0 - 1e-12);
        return Ok(RingGroundState {
            state: WaveFunction::constant(graph, value),
            regime: RingRegime::Constant {
                value,
                at_threshold,
            },
        });
    }

    let target = params.mass * params.lambda * t / 8.0;
    let k = bisect(
        |k| Ok(ellip_k(k)? * ellip_e(k)? - target),
        1e-9,
        1.0 - 1e-15,
        "loop modulus",
    )?;
    let beta = t / (2.0 * ellip_k(k)?);
    let alpha = beta * (params.lambda / 2.0).sqrt();
    let center = graph.edges()[0].length() / 2.0;

    let mut values = vec![0.0; graph.interior_count()];
    for (index, edge) in graph.edges().iter().enumerate() {
        for node in 1..=edge.n_interior() {
            let s = coords.arc_of(index, edge.length(), edge.x_of(node));
            let (_, _, dn) = jacobi_sn_cn_dn((s - center) / beta, k)?;
            values[edge.offset() + node - 1] = dn / alpha;
        }
    }
    Ok(RingGroundState {
        state: WaveFunction::from_flat(graph, values)?,
        regime: RingRegime::Dnoidal { k, alpha, beta },
    })
}

// ---------------------------------------------------------------------------
// Star with an attractive point interaction
// ---------------------------------------------------------------------------

/// Problem data for the sech state on an `N`-star with an attractive point
/// interaction of strength `α < 0` at the center.
#[derive(Debug, Clone, Copy)]
pub struct StarDeltaParams {
    edges: usize,
    strength: f64,
    omega: f64,
}

impl StarDeltaParams {
    /// Edge count `N ≥ 2`, interaction strength `α < 0`, and frequency `ω`
    /// with `N√ω > |α|` (equivalently `ω > α²/N²`), the domain on which the
    /// profile's offset is defined.
    pub fn new(edges: usize, strength: f64, omega: f64) -> Result<Self, ClosedFormError> {
        if edges < 2 {
            return Err(ClosedFormError::Parameters {
                reason: format!("a star needs at least 2 edges, got {edges}"),
            });
        }
        if !(strength.is_finite() && strength < 0.0) {
            return Err(ClosedFormError::Parameters {
                reason: format!(
                    "the point interaction must be attractive (strength < 0), got {strength}"
                ),
            });
        }
        if !(omega.is_finite() && omega > 0.0 && (edges as f64) * omega.sqrt() > strength.abs()) {
            return Err(ClosedFormError::Parameters {
                reason: format!(
                    "frequency {omega} outside the profile domain: need N·√ω > |α| \
                     ({edges}·√ω > {})",
                    strength.abs()
                ),
            });
        }
        Ok(Self {
            edges,
            strength,
            omega,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Distance from the center to the profile's virtual peak,
    /// `x̄ = artanh(|α|/(N√ω))/√ω`. The peak lies outside every edge, so each
    /// edge carries a monotonically decaying sech tail.
    pub fn peak_offset(&self) -> f64 {
        let sw = self.omega.sqrt();
        (self.strength.abs() / (self.edges as f64 * sw)).atanh() / sw
    }

    /// Mass of the profile, `2N√ω − 2|α|`: each edge carries
    /// `∫₀^∞ 2ω sech²(√ω(x + x̄)) dx = 2√ω·(1 − tanh(√ω x̄)) = 2√ω − 2|α|/N`.
    pub fn mass(&self) -> f64 {
        2.0 * self.edges as f64 * self.omega.sqrt() + 2.0 * self.strength
    }

    /// Energy of the profile, `−(N/3)·ω^{3/2} − α³/(3N²)`, including the
    /// point-interaction term `(α/2)·|ψ(0)|²`.
    pub fn energy(&self) -> f64 {
        let n = self.edges as f64;
        -(n / 3.0) * self.omega.powf(1.5) - self.strength.powi(3) / (3.0 * n * n)
    }

    /// Largest mass for which the profile is a true fixed-mass minimizer when
    /// `N > 2`: `4|α|/N`. At larger masses the profile is still a stationary
    /// state and remains the relevant comparison target for local solvers.
    pub fn existence_mass_limit(&self) -> f64 {
        4.0 * self.strength.abs() / self.edges as f64
    }
}

/// Stationary sech state on an `N`-star with an attractive point interaction:
/// on every edge, `ψ(x) = √(2ω)·sech(√ω(x + x̄))` with `x` measured from the
/// center and `x̄` the [peak offset](StarDeltaParams::peak_offset).
///
/// The graph must have exactly `N` edges, all incident to one center vertex
/// carrying a point interaction of the given strength. Conditions at the far
/// ends are not checked: the formula lives on half-lines, and the truncation
/// mismatch decays like `e^{−2√ω·len}`.
pub fn star_delta_ground_state(
    params: &StarDeltaParams,
    graph: &Arc<MetricGraph>,
) -> Result<WaveFunction<f64>, ClosedFormError> {
    const FAMILY: &str = "star";
    let n_edges = graph.edges().len();
    if n_edges != params.edges {
        return Err(ClosedFormError::Shape {
            family: FAMILY,
            reason: format!(
                "graph has {n_edges} edges but the parameters describe {}",
                params.edges
            ),
        });
    }
    let centers: Vec<usize> = (0..graph.vertices().len())
        .filter(|&v| graph.vertices()[v].degree() == n_edges)
        .collect();
    let center = match centers.as_slice() {
        [c] => *c,
        [] => {
            return Err(ClosedFormError::Shape {
                family: FAMILY,
                reason: format!("no vertex is incident to all {n_edges} edges"),
            })
        }
        _ => {
            return Err(ClosedFormError::Shape {
                family: FAMILY,
                reason: "center vertex is ambiguous".into(),
            })
        }
    };
    match graph.vertices()[center].condition() {
        VertexCondition::Delta { strength }
            if (strength - params.strength).abs() <= 1e-12 * params.strength.abs().max(1.0) => {}
        other => {
            return Err(ClosedFormError::Shape {
                family: FAMILY,
                reason: format!(
                    "center {} must carry a point interaction of strength {}, found {:?}",
                    graph.vertices()[center].label(),
                    params.strength,
                    other
                ),
            })
        }
    }

    let sw = params.omega.sqrt();
    let amplitude = (2.0 * params.omega).sqrt();
    let offset = params.peak_offset();
    let mut values = vec![0.0; graph.interior_count()];
    for edge in graph.edges() {
        let from_center = edge.from_vertex() == center;
        for node in 1..=edge.n_interior() {
            let x = edge.x_of(node);
            let d = if from_center { x } else { edge.length() - x };
            values[edge.offset() + node - 1] = amplitude / (sw * (d + offset)).cosh();
        }
    }
    Ok(WaveFunction::from_flat(graph, values)?)
}

// ---------------------------------------------------------------------------
// Tadpole
// ---------------------------------------------------------------------------

/// Matching constants for the stationary state on a loop of perimeter `2L`
/// with one pendant tail, at frequency `ω` and unit coupling.
#[derive(Debug, Clone, Copy)]
pub struct TadpoleParams {
    half_perimeter: f64,
    omega: f64,
    k_star: f64,
    b: f64,
}

impl TadpoleParams {
    /// Solves the two matching conditions by bracketing bisection.
    ///
    /// The loop carries `ψ(x) = √(2ω/(2−k²))·dn(√(ω/(2−k²))·x; k)` with `x`
    /// the arc distance from the point opposite the junction, so the junction
    /// sits at `x = ±L`. The flux balance at the junction fixes the modulus:
    /// `3k⁴/(1−k²) · cn²(z)·(1 − cn²(z)) = 1` with `z = L√ω/√(2−k²)`, searched
    /// on `(0.5, 0.99)`. The tail carries `ψ(x) = √(2ω)/cosh(√ω(x − b))` with
    /// `x ≥ 0` the distance from the junction; value continuity there,
    /// `sech²(√ω b) = ψ_loop²(L)/(2ω)`, determines `b`, and the negative root
    /// (searched on `(−10/√ω, 0)`) keeps the tail's virtual peak outside the
    /// tail so the profile decays monotonically along it.
    pub fn solve(half_perimeter: f64, omega: f64) -> Result<Self, ClosedFormError> {
        for (name, value) in [("half_perimeter", half_perimeter), ("omega", omega)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ClosedFormError::Parameters {
                    reason: format!("{name} must be positive and finite, got {value}"),
                });
            }
        }
        let sw = omega.sqrt();
        let junction_flux = |k: f64| -> Result<f64, ClosedFormError> {
            let z = half_perimeter * sw / (2.0 - k * k).sqrt();
            let (_, cn, _) = jacobi_sn_cn_dn(z, k)?;
            let c2 = cn * cn;
            Ok(3.0 * k.powi(4) / (1.0 - k * k) * c2 * (1.0 - c2) - 1.0)
        };
        let k_star = bisect(junction_flux, 0.5, 0.99, "loop modulus")?;

        let loop_scale = (omega / (2.0 - k_star * k_star)).sqrt();
        let (_, _, dn) = jacobi_sn_cn_dn(loop_scale * half_perimeter, k_star)?;
        let loop_at_junction = (2.0 * omega / (2.0 - k_star * k_star)).sqrt() * dn;
        let target = loop_at_junction * loop_at_junction / (2.0 * omega);
        let b = bisect(
            |b| {
                let sech = 1.0 / (sw * b).cosh();
                Ok(sech * sech - target)
            },
            -10.0 / sw,
            0.0,
            "tail offset",
        )?;
        Ok(Self {
            half_perimeter,
            omega,
            k_star,
            b,
        })
    }

    pub fn half_perimeter(&self) -> f64 {
        self.half_perimeter
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Loop modulus, the root of the junction flux balance.
    pub fn k_star(&self) -> f64 {
        self.k_star
    }

    /// Tail offset, the negative root of the junction continuity condition;
    /// the tail profile is `√(2ω)/cosh(√ω(x − b))`.
    pub fn b(&self) -> f64 {
        self.b
    }
}

/// Stationary state on a loop of perimeter `2L` with one pendant tail:
/// an elliptic bump on the loop, its maximum opposite the junction, matched
/// to a monotone sech tail. See [`TadpoleParams::solve`] for the profile
/// formulas and matching conditions.
///
/// The graph must have one degree-3 junction joining a two-edge loop of total
/// length `2L` and a chain of tail edges ending at a degree-1 vertex, with
/// Kirchhoff conditions everywhere except that terminal. The condition at the
/// tail's far end is not checked (truncation decays like `e^{−2√ω·len}`).
pub fn tadpole_ground_state(
    params: &TadpoleParams,
    graph: &Arc<MetricGraph>,
) -> Result<WaveFunction<f64>, ClosedFormError> {
    const FAMILY: &str = "tadpole";
    let junctions: Vec<usize> = (0..graph.vertices().len())
        .filter(|&v| graph.vertices()[v].degree() == 3)
        .collect();
    let junction = match junctions.as_slice() {
        [j] => *j,
        _ => {
            return Err(ClosedFormError::Shape {
                family: FAMILY,
                reason: format!(
                    "expected exactly one degree-3 junction, found {}",
                    junctions.len()
                ),
            })
        }
    };

    // The loop is the unique pair of edges joining the same two vertices.
    let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (index, edge) in graph.edges().iter().enumerate() {
        let (a, b) = (edge.from_vertex(), edge.to_vertex());
        pairs.entry((a.min(b), a.max(b))).or_default().push(index);
    }
    let mut loop_edges: Option<[usize; 2]> = None;
    for indices in pairs.values() {
        match (indices.len(), loop_edges) {
            (1, _) => {}
            (2, None) => loop_edges = Some([indices[0], indices[1]]),
            _ => {
                return Err(ClosedFormError::Shape {
                    family: FAMILY,
                    reason: "expected exactly one two-edge loop".into(),
                })
            }
        }
    }
    let loop_edges = loop_edges.ok_or(ClosedFormError::Shape {
        family: FAMILY,
        reason: "expected exactly one two-edge loop".into(),
    })?;
    let loop_len: f64 = loop_edges
        .iter()
        .map(|&e| graph.edges()[e].length())
        .sum();
    let l = params.half_perimeter;
    if (loop_len - 2.0 * l).abs() > 1e-9 * (2.0 * l).max(1.0) {
        return Err(ClosedFormError::Shape {
            family: FAMILY,
            reason: format!("loop perimeter {loop_len} does not match 2L = {}", 2.0 * l),
        });
    }
    for &e in &loop_edges {
        let edge = &graph.edges()[e];
        if edge.from_vertex() != junction && edge.to_vertex() != junction {
            return Err(ClosedFormError::Shape {
                family: FAMILY,
                reason: "the loop is not attached to the junction".into(),
            });
        }
    }

    // The tail is a simple chain from the junction to a degree-1 terminal;
    // record each tail edge's distance-from-junction coordinate.
    let n_edges = graph.edges().len();
    let mut used = vec![false; n_edges];
    for &e in &loop_edges {
        used[e] = true;
    }
    let mut tail_coords: Vec<Option<(f64, bool)>> = vec![None; n_edges];
    let mut current = junction;
    let mut dist = 0.0;
    for _ in 0..n_edges - 2 {
        let unvisited: Vec<_> = graph.vertices()[current]
            .incident()
            .iter()
            .filter(|e| !used[e.edge])
            .copied()
            .collect();
        let end = match unvisited.as_slice() {
            [end] => *end,
            _ => {
                return Err(ClosedFormError::Shape {
                    family: FAMILY,
                    reason: "the tail must be a simple chain of edges".into(),
                })
            }
        };
        used[end.edge] = true;
        let edge = &graph.edges()[end.edge];
        tail_coords[end.edge] = Some((dist, end.at_from));
        dist += edge.length();
        current = if end.at_from {
            edge.to_vertex()
        } else {
            edge.from_vertex()
        };
    }
    if graph.vertices()[current].degree() != 1 {
        return Err(ClosedFormError::Shape {
            family: FAMILY,
            reason: "the tail does not end at a free vertex".into(),
        });
    }
    for v in 0..graph.vertices().len() {
        if graph.vertices()[v].degree() > 1 {
            require_kirchhoff(graph, v, FAMILY)?;
        }
    }

    let omega = params.omega;
    let sw = omega.sqrt();
    let k = params.k_star;
    let loop_scale = (omega / (2.0 - k * k)).sqrt();
    let loop_amplitude = (2.0 * omega / (2.0 - k * k)).sqrt();
    let mut values = vec![0.0; graph.interior_count()];
    for (index, edge) in graph.edges().iter().enumerate() {
        if loop_edges.contains(&index) {
            let junction_at_from = edge.from_vertex() == junction;
            for node in 1..=edge.n_interior() {
                let x = edge.x_of(node);
                let d = if junction_at_from { x } else { edge.length() - x };
                let (_, _, dn) = jacobi_sn_cn_dn(loop_scale * (d - l), k)?;
                values[edge.offset() + node - 1] = loop_amplitude * dn;
            }
        } else {
            let (start, junction_side_at_from) =
                tail_coords[index].expect("every non-loop edge lies on the tail chain");
            for node in 1..=edge.n_interior() {
                let x = edge.x_of(node);
                let d = start
                    + if junction_side_at_from {
                        x
                    } else {
                        edge.length() - x
                    };
                values[edge.offset() + node - 1] = (2.0 * omega).sqrt() / (sw * (d - params.b)).cosh();
            }
        }
    }
    Ok(WaveFunction::from_flat(graph, values)?)
}

// ---------------------------------------------------------------------------
// Dumbbell flat branch and the line soliton
// ---------------------------------------------------------------------------

/// Reference values for the flat branch on a dumbbell made of two loops of
/// perimeter `2π` joined by a central edge of length `L`, with coupling
/// `λ = 2` and cubic nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DumbbellReference {
    /// The flat state's value `p = √(m/(2(L+2π)))`.
    pub constant_value: f64,
    /// Energy of the flat state, `−m²/(4(L+2π))`.
    pub constant_energy: f64,
    /// Mass at which the flat branch loses its minimizing role to an
    /// asymmetric branch. Known numerically only for `L = 3`.
    pub m_star: Option<f64>,
    /// Mass of the second (symmetry-restoring) bifurcation. Known numerically
    /// only for `L = 3`.
    pub m_2star: Option<f64>,
}

/// Flat-branch reference on the dumbbell: value and energy of the constant
/// state of mass `m`, plus the two bifurcation masses when `L = 3` (the one
/// calibration for which they are known; `None` otherwise).
///
/// `m` may be zero (the zero state); `L` must be positive.
pub fn dumbbell_reference(m: f64, l: f64) -> DumbbellReference {
    assert!(l > 0.0, "central edge length must be positive");
    assert!(m >= 0.0, "mass must be nonnegative");
    let total = 2.0 * (l + 2.0 * PI);
    let calibrated = (l - 3.0).abs() < 1e-12;
    DumbbellReference {
        constant_value: (m / total).sqrt(),
        constant_energy: -m * m / (2.0 * total),
        m_star: calibrated.then_some(0.18646428284896863),
        m_2star: calibrated.then_some(1.2334076715778846),
    }
}

/// Travelling line soliton `ψ(x) = (m/(2√2))·sech(m(x − x₀)/4)·e^{icx}`:
/// mass `m`, speed `c`, initial center `x₀`. Its squared L² norm on the full
/// line is exactly `m`. Used as initial datum for the time integrators.
pub fn soliton(m: f64, c: f64, x0: f64) -> impl Fn(f64) -> Complex64 {
    assert!(m > 0.0, "soliton mass must be positive");
    let amplitude = m / (2.0 * std::f64::consts::SQRT_2);
    move |x| {
        let envelope = amplitude / (m * (x - x0) / 4.0).cosh();
        Complex64::cis(c * x) * envelope
    }
}
