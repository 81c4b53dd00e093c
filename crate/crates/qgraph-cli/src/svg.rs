//! Deterministic SVG rendering of a graph layout with an optional
//! node-value overlay.
//!
//! Straight edges are drawn as line segments between their vertex
//! positions.  Curved edges (half-loops) are drawn as half-ellipses whose
//! major axis is the chord between the endpoints and whose semi-minor axis
//! is solved so the arc length matches the edge's metric length; the two
//! ids `"0"` and `"1"` bow to opposite sides of the chord, so a loop's two
//! halves close up into a full oval.  The overlay displaces each edge's
//! polyline perpendicular to the drawing by `|u|`, normalized so the
//! largest value spans a fixed fraction of the figure.
//!
//! All coordinates are written with four decimal places, so rendering the
//! same graph and state twice produces byte-identical output.

use std::io::{self, Write};
use std::sync::Arc;

use qgraph_core::graph::{LineKind, MetricGraph};
use qgraph_core::wavefunction::WaveFunction;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("overlay was sampled on a different graph than the one being drawn")]
    GraphMismatch,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Polyline resolution for curved edges (and for bounding-box sampling).
const CURVE_SAMPLES: usize = 64;
/// Overlay polylines thin out to at most this many interior nodes per edge.
const MAX_OVERLAY_NODES: usize = 200;
/// The largest overlay value displaces by this fraction of the figure span.
const OVERLAY_FRACTION: f64 = 0.2;
/// Pixel width of the larger figure dimension.
const FIT: f64 = 720.0;
const MARGIN: f64 = 40.0;

/// Semi-axes `(a, b)` of a half-ellipse with the given chord whose arc
/// length equals `arc`, or `None` when the arc is too short to bow (the
/// edge is then drawn straight).  Uses Ramanujan's perimeter approximation
/// `π(3(a+b) − √((3a+b)(a+3b)))`, solved for `b` by bisection.
pub fn half_ellipse_axes(chord: f64, arc: f64) -> Option<(f64, f64)> {
    let a = chord / 2.0;
    if !(a > 0.0) || !(arc > 0.0) {
        return None;
    }
    let perimeter = |b: f64| {
        let s = (3.0 * a + b) * (a + 3.0 * b);
        std::f64::consts::PI * (3.0 * (a + b) - s.sqrt())
    };
    let target = 2.0 * arc;
    if target <= perimeter(0.0) {
        return None;
    }
    // P(a, b) is increasing in b and P(a, arc) ≥ π·arc > 2·arc, so the
    // root is bracketed by [0, arc].
    let (mut lo, mut hi) = (0.0, arc);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if perimeter(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + arc) {
            break;
        }
    }
    Some((a, 0.5 * (lo + hi)))
}

/// World-space drawing geometry of one edge.
struct EdgeShape {
    /// Position of the `x = 0` end.
    start: (f64, f64),
    /// Unit vector along the chord.
    u: (f64, f64),
    /// Unit normal (chord rotated by +90°).
    n: (f64, f64),
    chord: f64,
    /// `(semi_major, semi_minor, side)` when drawn as a half-ellipse.
    arc: Option<(f64, f64, f64)>,
}

impl EdgeShape {
    fn build(graph: &MetricGraph, index: usize) -> Self {
        let edge = &graph.edges()[index];
        let start = graph.vertices()[edge.from_vertex()].position();
        let end = graph.vertices()[edge.to_vertex()].position();
        let (dx, dy) = (end.0 - start.0, end.1 - start.1);
        let chord = (dx * dx + dy * dy).sqrt();
        let u = if chord > 1e-12 {
            (dx / chord, dy / chord)
        } else {
            (1.0, 0.0)
        };
        let n = (-u.1, u.0);
        let arc = match edge.line_kind() {
            LineKind::Segment => None,
            LineKind::Curve => half_ellipse_axes(chord, edge.length()).map(|(a, b)| {
                // Opposite ids of a half-loop pair bow to opposite sides.
                let side = if edge.key().id == "0" { 1.0 } else { -1.0 };
                (a, b, side)
            }),
        };
        Self { start, u, n, chord, arc }
    }

    /// Point at parameter `t ∈ [0, 1]` (arc-length fraction along the edge).
    fn point(&self, t: f64) -> (f64, f64) {
        match self.arc {
            None => (
                self.start.0 + self.u.0 * self.chord * t,
                self.start.1 + self.u.1 * self.chord * t,
            ),
            Some((a, b, side)) => {
                let theta = std::f64::consts::PI * (1.0 - t);
                let xi = a * (1.0 + theta.cos());
                let eta = side * b * theta.sin();
                (
                    self.start.0 + self.u.0 * xi + self.n.0 * eta,
                    self.start.1 + self.u.1 * xi + self.n.1 * eta,
                )
            }
        }
    }

    /// Unit displacement direction for the overlay at parameter `t`: the
    /// normal for straight edges, the outward ellipse normal for curves.
    fn outward(&self, t: f64) -> (f64, f64) {
        match self.arc {
            None => self.n,
            Some((a, b, side)) => {
                let theta = std::f64::consts::PI * (1.0 - t);
                let (gu, gn) = (theta.cos() / a, side * theta.sin() / b.max(1e-12));
                let len = (gu * gu + gn * gn).sqrt().max(1e-12);
                (
                    (self.u.0 * gu + self.n.0 * gn) / len,
                    (self.u.1 * gu + self.n.1 * gn) / len,
                )
            }
        }
    }

    fn draw_samples(&self) -> usize {
        if self.arc.is_some() {
            CURVE_SAMPLES
        } else {
            1
        }
    }
}

struct Bounds {
    min: (f64, f64),
    max: (f64, f64),
}

impl Bounds {
    fn empty() -> Self {
        Self {
            min: (f64::INFINITY, f64::INFINITY),
            max: (f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn add(&mut self, p: (f64, f64)) {
        self.min.0 = self.min.0.min(p.0);
        self.min.1 = self.min.1.min(p.1);
        self.max.0 = self.max.0.max(p.0);
        self.max.1 = self.max.1.max(p.1);
    }

    fn pad(&mut self, by: f64) {
        self.min.0 -= by;
        self.min.1 -= by;
        self.max.0 += by;
        self.max.1 += by;
    }

    fn width(&self) -> f64 {
        (self.max.0 - self.min.0).max(0.0)
    }

    fn height(&self) -> f64 {
        (self.max.1 - self.min.1).max(0.0)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `graph` (and an optional `|u|` overlay sampled on it) as SVG.
pub fn render(
    graph: &Arc<MetricGraph>,
    overlay: Option<&WaveFunction<f64>>,
    out: &mut impl Write,
) -> Result<(), SvgError> {
    if let Some(wf) = overlay {
        if !Arc::ptr_eq(wf.graph(), graph) {
            return Err(SvgError::GraphMismatch);
        }
    }

    let shapes: Vec<EdgeShape> = (0..graph.edges().len())
        .map(|i| EdgeShape::build(graph, i))
        .collect();

    let mut bounds = Bounds::empty();
    for vertex in graph.vertices() {
        bounds.add(vertex.position());
    }
    for shape in &shapes {
        for k in 0..=CURVE_SAMPLES {
            bounds.add(shape.point(k as f64 / CURVE_SAMPLES as f64));
        }
    }
    let span = bounds.width().max(bounds.height()).max(1e-9);
    let plot_height = OVERLAY_FRACTION * span;

    // Per-edge overlay samples (t, |u|), with a shared normalization.
    let overlay_samples: Option<Vec<Vec<(f64, f64)>>> = overlay.map(|wf| {
        let ends = wf.edge_end_values();
        graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, edge)| {
                let mut samples = Vec::new();
                samples.push((0.0, ends[i].0.abs()));
                let n = edge.n_interior();
                let stride = n.div_ceil(MAX_OVERLAY_NODES).max(1);
                for k in (1..=n).step_by(stride) {
                    let value = wf.values()[edge.offset() + k - 1];
                    samples.push((edge.x_of(k) / edge.length(), value.abs()));
                }
                samples.push((1.0, ends[i].1.abs()));
                samples
            })
            .collect()
    });
    let peak = overlay_samples
        .iter()
        .flatten()
        .flatten()
        .map(|&(_, v)| v)
        .fold(0.0_f64, f64::max);
    if overlay.is_some() && peak > 0.0 {
        bounds.pad(plot_height);
    }

    let scale = FIT / bounds.width().max(bounds.height()).max(1e-9);
    let width = bounds.width() * scale + 2.0 * MARGIN;
    let height = bounds.height() * scale + 2.0 * MARGIN;
    let map = |p: (f64, f64)| {
        (
            (p.0 - bounds.min.0) * scale + MARGIN,
            (bounds.max.1 - p.1) * scale + MARGIN,
        )
    };
    let fmt = |v: f64| format!("{v:.4}");

    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\">",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    )?;
    writeln!(
        out,
        "<style>.edge{{fill:none;stroke:#555;stroke-width:1.5}}\
         .overlay{{fill:none;stroke:#c0392b;stroke-width:1.5}}\
         .vertex{{fill:#222}}\
         .label{{font:12px monospace;fill:#222}}</style>"
    )?;
    writeln!(
        out,
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>",
        fmt(width),
        fmt(height)
    )?;

    for shape in &shapes {
        let samples = shape.draw_samples();
        let points: Vec<String> = (0..=samples)
            .map(|k| {
                let p = map(shape.point(k as f64 / samples as f64));
                format!("{},{}", fmt(p.0), fmt(p.1))
            })
            .collect();
        let kind = if shape.arc.is_some() { "curve" } else { "line" };
        writeln!(
            out,
            "<polyline class=\"edge {}\" points=\"{}\"/>",
            kind,
            points.join(" ")
        )?;
    }

    if let Some(samples) = &overlay_samples {
        if peak > 0.0 {
            for (shape, edge_samples) in shapes.iter().zip(samples) {
                let points: Vec<String> = edge_samples
                    .iter()
                    .map(|&(t, v)| {
                        let base = shape.point(t);
                        let dir = shape.outward(t);
                        let d = v / peak * plot_height;
                        let p = map((base.0 + dir.0 * d, base.1 + dir.1 * d));
                        format!("{},{}", fmt(p.0), fmt(p.1))
                    })
                    .collect();
                writeln!(
                    out,
                    "<polyline class=\"overlay\" points=\"{}\"/>",
                    points.join(" ")
                )?;
            }
        }
    }

    for vertex in graph.vertices() {
        let p = map(vertex.position());
        writeln!(
            out,
            "<circle class=\"vertex\" cx=\"{}\" cy=\"{}\" r=\"3\"/>",
            fmt(p.0),
            fmt(p.1)
        )?;
        writeln!(
            out,
            "<text class=\"label\" x=\"{}\" y=\"{}\">{}</text>",
            fmt(p.0 + 6.0),
            fmt(p.1 - 6.0),
            escape(vertex.label())
        )?;
    }

    writeln!(out, "</svg>")?;
    Ok(())
}
