//! Parameterized graph families with deterministic labels and plotting
//! positions.
//!
//! Every builder follows the same conventions: loops are realized as pairs
//! of half-loop edges with ids `"0"` and `"1"` and the `Curve` line kind;
//! junction vertices default to Kirchhoff conditions; free ends (star tips,
//! the tadpole tail end, the necklace terminal, tree leaves) get Dirichlet.
//! Condition overrides from the config are applied on top, so e.g. a star
//! center can be switched to a δ coupling without a custom graph.
//!
//! Labeling schemes (stable — configs and tests rely on them):
//!
//! * `star`: center `O`, tips `T0..T{n-1}`;
//! * `ring`: `A` and `B` diametrically opposite;
//! * `tadpole`: junction `B`, loop antipode `C`, tail end `A`;
//! * `dumbbell`: central edge `A`–`B` spanning `[−L, L]` (length `2L`),
//!   loop antipodes `C` (left) and `D` (right);
//! * `necklace`: cell `i` has loop vertices `V{i}_a`/`V{i}_b`, a link runs
//!   from each `V{i}_b` to the next cell, the last one to the free end `E`;
//! * `honeycomb`: corners `N0, N1, …` numbered by sorted plane coordinates;
//! * `binary_tree`: root `R` (degree 2), children append their bit to the
//!   parent label (`R0`, `R1`, `R00`, …).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use qgraph_core::graph::{
    EdgeSpec, GraphBuilder, GraphError, MetricGraph, VertexCondition,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Length;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("{family}: {reason}")]
    Parameter {
        family: &'static str,
        reason: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A family invocation as it appears in configs:
/// `{"name": "star", "n": 6, "edge_len": 40.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Star { n: usize, edge_len: Length },
    Ring { perimeter: Length },
    Tadpole { l: Length, tail_len: Length },
    Dumbbell { l: Length, loop_perimeter: Length },
    Necklace {
        cells: usize,
        loop_perimeter: Length,
        link_len: Length,
    },
    Honeycomb { rings: usize, edge_len: Length },
    BinaryTree { depth: usize, edge_len: Length },
}

impl Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Star { .. } => "star",
            Family::Ring { .. } => "ring",
            Family::Tadpole { .. } => "tadpole",
            Family::Dumbbell { .. } => "dumbbell",
            Family::Necklace { .. } => "necklace",
            Family::Honeycomb { .. } => "honeycomb",
            Family::BinaryTree { .. } => "binary_tree",
        }
    }
}

/// Edges, default conditions and plotting positions of a family instance,
/// before the mesh budget and overrides are applied.
struct Parts {
    edges: Vec<EdgeSpec>,
    conditions: BTreeMap<String, VertexCondition>,
    positions: BTreeMap<String, (f64, f64)>,
}

impl Parts {
    fn new() -> Self {
        Self {
            edges: Vec::new(),
            conditions: BTreeMap::new(),
            positions: BTreeMap::new(),
        }
    }

    fn place(&mut self, label: impl Into<String>, x: f64, y: f64) {
        self.positions.insert(label.into(), (x, y));
    }

    fn dirichlet(&mut self, label: impl Into<String>) {
        self.conditions.insert(label.into(), VertexCondition::Dirichlet);
    }
}

/// Builds a family instance with `total_nodes` interior mesh nodes,
/// applying `overrides` on top of the family's default vertex conditions.
pub fn build(
    family: &Family,
    overrides: &BTreeMap<String, VertexCondition>,
    total_nodes: usize,
) -> Result<MetricGraph, FamilyError> {
    let mut parts = parts(family)?;
    for (label, condition) in overrides {
        parts.conditions.insert(label.clone(), condition.clone());
    }
    let mut builder = GraphBuilder::new()
        .edges(parts.edges)
        .total_nodes(total_nodes);
    for (label, condition) in parts.conditions {
        builder = builder.condition(label, condition);
    }
    for (label, (x, y)) in parts.positions {
        builder = builder.position(label, x, y);
    }
    Ok(builder.build()?)
}

fn check(
    family: &'static str,
    ok: bool,
    reason: impl FnOnce() -> String,
) -> Result<(), FamilyError> {
    if ok {
        Ok(())
    } else {
        Err(FamilyError::Parameter {
            family,
            reason: reason(),
        })
    }
}

fn positive(family: &'static str, name: &str, value: f64) -> Result<(), FamilyError> {
    check(family, value.is_finite() && value > 0.0, || {
        format!("{name} must be positive and finite, got {value}")
    })
}

fn parts(family: &Family) -> Result<Parts, FamilyError> {
    match *family {
        Family::Star { n, edge_len: Length(len) } => star(n, len),
        Family::Ring { perimeter: Length(p) } => ring(p),
        Family::Tadpole { l: Length(l), tail_len: Length(tail) } => tadpole(l, tail),
        Family::Dumbbell { l: Length(l), loop_perimeter: Length(p) } => dumbbell(l, p),
        Family::Necklace {
            cells,
            loop_perimeter: Length(p),
            link_len: Length(link),
        } => necklace(cells, p, link),
        Family::Honeycomb { rings, edge_len: Length(len) } => honeycomb(rings, len),
        Family::BinaryTree { depth, edge_len: Length(len) } => binary_tree(depth, len),
    }
    .map_err(|e| match e {
        FamilyError::Parameter { reason, .. } => FamilyError::Parameter {
            family: family.name(),
            reason,
        },
        other => other,
    })
}

fn star(n: usize, len: f64) -> Result<Parts, FamilyError> {
    check("star", n >= 1, || format!("needs at least 1 edge, got {n}"))?;
    positive("star", "edge_len", len)?;
    let mut parts = Parts::new();
    parts.place("O", 0.0, 0.0);
    for i in 0..n {
        let tip = format!("T{i}");
        let angle = 2.0 * PI * i as f64 / n as f64;
        parts.edges.push(EdgeSpec::new("O", tip.clone(), len));
        parts.place(tip.clone(), len * angle.cos(), len * angle.sin());
        parts.dirichlet(tip);
    }
    Ok(parts)
}

fn ring(perimeter: f64) -> Result<Parts, FamilyError> {
    positive("ring", "perimeter", perimeter)?;
    let r = perimeter / (2.0 * PI);
    let mut parts = Parts::new();
    parts.edges.push(EdgeSpec::new("A", "B", perimeter / 2.0).curved());
    parts
        .edges
        .push(EdgeSpec::new("A", "B", perimeter / 2.0).with_id("1").curved());
    parts.place("A", -r, 0.0);
    parts.place("B", r, 0.0);
    Ok(parts)
}

fn tadpole(l: f64, tail: f64) -> Result<Parts, FamilyError> {
    positive("tadpole", "l", l)?;
    positive("tadpole", "tail_len", tail)?;
    let r = l / PI;
    let mut parts = Parts::new();
    parts.edges.push(EdgeSpec::new("B", "C", l).curved());
    parts.edges.push(EdgeSpec::new("C", "B", l).with_id("1").curved());
    parts.edges.push(EdgeSpec::new("B", "A", tail));
    parts.place("B", 0.0, 0.0);
    parts.place("C", -2.0 * r, 0.0);
    parts.place("A", tail, 0.0);
    parts.dirichlet("A");
    Ok(parts)
}

fn dumbbell(l: f64, loop_perimeter: f64) -> Result<Parts, FamilyError> {
    positive("dumbbell", "l", l)?;
    positive("dumbbell", "loop_perimeter", loop_perimeter)?;
    let half = loop_perimeter / 2.0;
    let r = loop_perimeter / (2.0 * PI);
    let mut parts = Parts::new();
    parts.edges.push(EdgeSpec::new("C", "A", half).curved());
    parts.edges.push(EdgeSpec::new("A", "C", half).with_id("1").curved());
    parts.edges.push(EdgeSpec::new("A", "B", 2.0 * l));
    parts.edges.push(EdgeSpec::new("B", "D", half).curved());
    parts.edges.push(EdgeSpec::new("D", "B", half).with_id("1").curved());
    parts.place("A", -l, 0.0);
    parts.place("B", l, 0.0);
    parts.place("C", -l - 2.0 * r, 0.0);
    parts.place("D", l + 2.0 * r, 0.0);
    Ok(parts)
}

fn necklace(cells: usize, loop_perimeter: f64, link: f64) -> Result<Parts, FamilyError> {
    check("necklace", cells >= 1, || {
        format!("needs at least 1 cell, got {cells}")
    })?;
    positive("necklace", "loop_perimeter", loop_perimeter)?;
    positive("necklace", "link_len", link)?;
    let half = loop_perimeter / 2.0;
    let diameter = loop_perimeter / PI;
    let mut parts = Parts::new();
    let mut x = 0.0;
    for i in 0..cells {
        let a = format!("V{i}_a");
        let b = format!("V{i}_b");
        parts.edges.push(EdgeSpec::new(a.clone(), b.clone(), half).curved());
        parts
            .edges
            .push(EdgeSpec::new(a.clone(), b.clone(), half).with_id("1").curved());
        parts.place(a, x, 0.0);
        x += diameter;
        parts.place(b.clone(), x, 0.0);
        let next = if i + 1 < cells {
            format!("V{}_a", i + 1)
        } else {
            "E".to_string()
        };
        parts.edges.push(EdgeSpec::new(b, next, link));
        x += link;
    }
    parts.place("E", x, 0.0);
    parts.dirichlet("E");
    Ok(parts)
}

fn honeycomb(rings: usize, len: f64) -> Result<Parts, FamilyError> {
    check("honeycomb", rings >= 1, || {
        format!("needs at least 1 ring, got {rings}")
    })?;
    positive("honeycomb", "edge_len", len)?;

    // Hexagon centers on the axial lattice within the given ring radius,
    // pointy-top orientation; corners are deduplicated by rounded plane
    // coordinates and then numbered in sorted order.
    let radius = rings as i64 - 1;
    let quantize = |v: f64| (v / len * 1e6).round() as i64;
    let mut corner_ids: BTreeMap<(i64, i64), (f64, f64)> = BTreeMap::new();
    let mut hexes: Vec<[(i64, i64); 6]> = Vec::new();
    for q in -radius..=radius {
        for r in (-radius).max(-q - radius)..=radius.min(-q + radius) {
            let cx = len * 3f64.sqrt() * (q as f64 + r as f64 / 2.0);
            let cy = len * 1.5 * r as f64;
            let mut cell = [(0, 0); 6];
            for (k, slot) in cell.iter_mut().enumerate() {
                let angle = PI / 6.0 + k as f64 * PI / 3.0;
                let p = (cx + len * angle.cos(), cy + len * angle.sin());
                let key = (quantize(p.0), quantize(p.1));
                corner_ids.entry(key).or_insert(p);
                *slot = key;
            }
            hexes.push(cell);
        }
    }
    let names: BTreeMap<(i64, i64), String> = corner_ids
        .keys()
        .enumerate()
        .map(|(i, &key)| (key, format!("N{i}")))
        .collect();

    let mut parts = Parts::new();
    for (key, &(x, y)) in &corner_ids {
        parts.place(names[key].clone(), x, y);
    }
    let mut seen = std::collections::BTreeSet::new();
    for cell in &hexes {
        for k in 0..6 {
            let a = &names[&cell[k]];
            let b = &names[&cell[(k + 1) % 6]];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if seen.insert((lo.clone(), hi.clone())) {
                parts.edges.push(EdgeSpec::new(lo.clone(), hi.clone(), len));
            }
        }
    }
    Ok(parts)
}

fn binary_tree(depth: usize, len: f64) -> Result<Parts, FamilyError> {
    check("binary_tree", depth >= 1, || {
        format!("needs depth at least 1, got {depth}")
    })?;
    check("binary_tree", depth <= 16, || {
        format!("depth {depth} would have {} edges", (1u64 << (depth + 1)) - 2)
    })?;
    positive("binary_tree", "edge_len", len)?;

    let mut parts = Parts::new();
    // Leaves are spread uniformly; every internal vertex sits midway over
    // its children, one edge length deeper per level.
    let mut next_leaf = 0usize;
    let leaf_count = 1usize << depth;

    fn place_subtree(
        parts: &mut Parts,
        label: &str,
        level: usize,
        depth: usize,
        len: f64,
        leaf_count: usize,
        next_leaf: &mut usize,
    ) -> f64 {
        let x = if level == depth {
            let i = *next_leaf;
            *next_leaf += 1;
            (i as f64 - (leaf_count as f64 - 1.0) / 2.0) * len
        } else {
            let left = place_subtree(
                parts,
                &format!("{label}0"),
                level + 1,
                depth,
                len,
                leaf_count,
                next_leaf,
            );
            let right = place_subtree(
                parts,
                &format!("{label}1"),
                level + 1,
                depth,
                len,
                leaf_count,
                next_leaf,
            );
            (left + right) / 2.0
        };
        parts.place(label.to_string(), x, -(level as f64) * len);
        if level < depth {
            for bit in 0..2 {
                parts
                    .edges
                    .push(EdgeSpec::new(label.to_string(), format!("{label}{bit}"), len));
            }
        } else {
            parts.dirichlet(label.to_string());
        }
        x
    }

    place_subtree(&mut parts, "R", 0, depth, len, leaf_count, &mut next_leaf);
    Ok(parts)
}
