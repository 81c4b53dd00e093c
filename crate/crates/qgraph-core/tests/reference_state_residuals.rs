//! The closed-form states are exact solutions of the continuum stationary
//! equation −ψ″ − λ|ψ|^{p−1}ψ + ωψ = 0 on their graphs. Sampling them and
//! substituting into the discrete Hamiltonian therefore has to leave a
//! residual that vanishes at second order in the mesh — which checks the
//! profile formulas and the operator's stencil-plus-closures against each
//! other through a purely analytic route, with no solver in the loop.
//!
//! The same states also pin the quadrature: their masses have closed forms,
//! and at fine enough meshes the trapezoid sums must agree to 1e-8.

use std::sync::Arc;

use qgraph_core::closed_form::{
    dumbbell_reference, ring_ground_state, star_delta_ground_state, tadpole_ground_state,
    RingParams, RingRegime, StarDeltaParams, TadpoleParams,
};
use qgraph_core::graph::{ClosureOrder, EdgeSpec, GraphBuilder, MetricGraph, VertexCondition};
use qgraph_core::operator::GraphOperator;
use qgraph_core::special::{ellip_e, ellip_k};
use qgraph_core::stationary::EnergyModel;
use qgraph_core::wavefunction::WaveFunction;

mod support;

fn ring_graph(half: f64, total_nodes: usize) -> Arc<MetricGraph> {
    Arc::new(
        GraphBuilder::new()
            .edge(EdgeSpec::new("A", "B", half))
            .edge(EdgeSpec::new("B", "A", half).curved())
            .total_nodes(total_nodes)
            .build()
            .unwrap(),
    )
}

fn star_graph(edges: usize, length: f64, strength: f64, total_nodes: usize) -> Arc<MetricGraph> {
    let mut builder = GraphBuilder::new().condition("O", VertexCondition::Delta { strength });
    for i in 0..edges {
        let tip = format!("T{i}");
        builder = builder
            .edge(EdgeSpec::new("O", tip.clone(), length))
            .condition(tip, VertexCondition::Dirichlet);
    }
    Arc::new(builder.total_nodes(total_nodes).build().unwrap())
}

fn tadpole_graph(half_perimeter: f64, tail: f64, total_nodes: usize) -> Arc<MetricGraph> {
    Arc::new(
        GraphBuilder::new()
            .edge(EdgeSpec::new("B", "C", half_perimeter).curved())
            .edge(EdgeSpec::new("C", "B", half_perimeter).with_id("1").curved())
            .edge(EdgeSpec::new("B", "A", tail))
            .condition("A", VertexCondition::Dirichlet)
            .total_nodes(total_nodes)
            .build()
            .unwrap(),
    )
}

/// Sup norm of (H − λ|u|² + ω)u over the rows selected by `keep`, which
/// receives each flat row index.
fn stationary_residual_rows(
    op: &GraphOperator,
    u: &WaveFunction<f64>,
    omega: f64,
    lambda: f64,
    keep: impl Fn(usize) -> bool,
) -> f64 {
    let hu = op.apply(u).unwrap();
    hu.values()
        .iter()
        .zip(u.values())
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, (h, v))| (h - lambda * v * v * v + omega * v).abs())
        .fold(0.0, f64::max)
}

/// Sup norm of the stationary residual over every row.
fn stationary_residual(
    graph: &Arc<MetricGraph>,
    u: &WaveFunction<f64>,
    omega: f64,
    lambda: f64,
) -> f64 {
    let op = GraphOperator::assemble(graph).unwrap();
    stationary_residual_rows(&op, u, omega, lambda, |_| true)
}

/// Rows whose stencil involves no vertex trace: everything except the first
/// and last interior node of each edge.
fn away_from_vertices(graph: &MetricGraph) -> impl Fn(usize) -> bool {
    let mut closure_rows = Vec::new();
    for edge in graph.edges() {
        closure_rows.push(edge.offset());
        closure_rows.push(edge.offset() + edge.n_interior() - 1);
    }
    move |i| !closure_rows.contains(&i)
}

#[test]
fn ring_state_satisfies_the_discrete_equation() {
    let k0: f64 = 0.9;
    let half = ellip_k(k0).unwrap();
    let mass = 2.0 * ellip_e(k0).unwrap();
    let residual = |nodes: usize| -> f64 {
        let graph = ring_graph(half, nodes);
        let params = RingParams::new(2.0 * half, 2.0, mass).unwrap();
        let sol = ring_ground_state(&params, &graph).unwrap();
        let RingRegime::Dnoidal { k, beta, .. } = sol.regime else {
            panic!("calibrated mass must land on the dnoidal branch");
        };
        let omega = (2.0 - k * k) / (beta * beta);
        stationary_residual(&graph, &sol.state, omega, params.lambda())
    };
    let coarse = residual(800);
    let fine = residual(1600);
    assert!(coarse < 5e-5, "coarse sup residual {coarse}");
    let ratio = coarse / fine;
    assert!((2.5..6.0).contains(&ratio), "refinement ratio {ratio}");
}

/// Away from the vertices the star residual is pure stencil truncation and
/// falls at second order. The row next to the δ vertex is different: for a
/// stationary state −u‴ = 3λu²u′ − ωu′ on each edge, so the third
/// derivatives entering the one-sided closure satisfy
/// Σ_e u‴_e(0) = (ω − 3λu(0)²)·α·u(0). At a Kirchhoff vertex (α = 0) the
/// sum cancels and the closure row keeps second order for free; with α ≠ 0
/// it survives and the default closure leaves a genuine O(δx) term there.
/// The third-order closure removes it.
#[test]
fn star_state_satisfies_the_discrete_equation() {
    let params = StarDeltaParams::new(6, -4.0, 1.0).unwrap();
    let residuals = |nodes: usize| -> (f64, f64, f64) {
        let graph = star_graph(6, 40.0, params.strength(), nodes);
        let state = star_delta_ground_state(&params, &graph).unwrap();
        let second = GraphOperator::assemble(&graph).unwrap();
        let third = GraphOperator::assemble_with_order(&graph, ClosureOrder::Third).unwrap();
        let stencil_only = stationary_residual_rows(
            &second,
            &state,
            params.omega(),
            1.0,
            away_from_vertices(&graph),
        );
        let all_second =
            stationary_residual_rows(&second, &state, params.omega(), 1.0, |_| true);
        let all_third = stationary_residual_rows(&third, &state, params.omega(), 1.0, |_| true);
        (stencil_only, all_second, all_third)
    };
    let (coarse_stencil, coarse_all, coarse_third) = residuals(6 * 200);
    let (fine_stencil, fine_all, fine_third) = residuals(6 * 400);
    println!(
        "star stencil rows: {coarse_stencil:.3e} -> {fine_stencil:.3e} (ratio {:.2}); \
         all rows, default closure: {coarse_all:.3e} -> {fine_all:.3e} (ratio {:.2}); \
         all rows, third-order closure: {coarse_third:.3e} -> {fine_third:.3e} (ratio {:.2})",
        coarse_stencil / fine_stencil,
        coarse_all / fine_all,
        coarse_third / fine_third,
    );
    assert!(coarse_stencil < 0.02, "stencil-row residual {coarse_stencil}");
    let stencil_ratio = coarse_stencil / fine_stencil;
    assert!((2.5..6.0).contains(&stencil_ratio), "stencil ratio {stencil_ratio}");

    assert!(coarse_all < 0.1, "junction-row residual {coarse_all}");
    let junction_ratio = coarse_all / fine_all;
    assert!((1.6..2.4).contains(&junction_ratio), "junction ratio {junction_ratio}");

    let third_ratio = coarse_third / fine_third;
    assert!((2.5..6.0).contains(&third_ratio), "third-order ratio {third_ratio}");
}

#[test]
fn tadpole_state_satisfies_the_discrete_equation() {
    let params = TadpoleParams::solve(1.0, 1.0).unwrap();
    let residual = |nodes: usize| -> f64 {
        let graph = tadpole_graph(1.0, 30.0, nodes);
        let state = tadpole_ground_state(&params, &graph).unwrap();
        stationary_residual(&graph, &state, params.omega(), 1.0)
    };
    let coarse = residual(3200);
    let fine = residual(6400);
    assert!(coarse < 1e-4, "coarse sup residual {coarse}");
    let ratio = coarse / fine;
    assert!((2.5..6.0).contains(&ratio), "refinement ratio {ratio}");
}

/// The quadrature applied to the sampled sech star profile must reproduce
/// the closed-form mass. The integrand has a nonzero derivative at the
/// junction, so the trapezoid error is genuinely second order — reaching
/// 1e-8 takes a fine mesh, which is cheap since everything is O(N).
#[test]
fn star_mass_formula_matches_fine_quadrature() {
    let params = StarDeltaParams::new(6, -4.0, 1.0).unwrap();
    let graph = star_graph(6, 40.0, params.strength(), 6 * 420_000);
    let state = star_delta_ground_state(&params, &graph).unwrap();
    let defect = (state.mass() - params.mass()).abs();
    assert!(defect < 1e-8, "quadrature mass defect {defect}");
}

#[test]
fn tadpole_mass_matches_the_quoted_value_on_a_fine_mesh() {
    let params = TadpoleParams::solve(1.0, 1.0).unwrap();
    let graph = tadpole_graph(1.0, 30.0, 128_000);
    let state = tadpole_ground_state(&params, &graph).unwrap();
    let defect = (state.mass() - 3.172_738_256_229_2).abs();
    assert!(defect < 1e-8, "quadrature mass defect {defect}");
}

/// The loop modulus and tail offset must satisfy their defining equations
/// when re-evaluated through the slow quadrature-and-bisection oracle —
/// a route that shares nothing with the AGM/Landen machinery that found
/// them.
#[test]
fn tadpole_roots_check_out_against_the_oracle() {
    let params = TadpoleParams::solve(1.0, 1.0).unwrap();
    let k = params.k_star();
    let omega: f64 = params.omega();
    let scale = (omega / (2.0 - k * k)).sqrt();
    let (_, cn, dn) = support::jacobi(scale * params.half_perimeter(), k);
    let c2 = cn * cn;
    let flux = 3.0 * k.powi(4) / (1.0 - k * k) * c2 * (1.0 - c2) - 1.0;
    assert!(flux.abs() < 1e-9, "modulus equation residual {flux}");

    // Tail–loop continuity at the junction: 2ω·sech²(√ω·b) = ψ_loop²(L).
    let loop_sq = 2.0 * omega / (2.0 - k * k) * dn * dn;
    let tail_sq = 2.0 * omega / (omega.sqrt() * params.b()).cosh().powi(2);
    assert!(
        (loop_sq - tail_sq).abs() < 1e-9,
        "continuity defect {}",
        loop_sq - tail_sq
    );
}

/// As the coupling vanishes on a two-edge star, the profile degenerates to
/// the free-line soliton folded at the vertex.
#[test]
fn weak_coupling_star_folds_the_line_soliton() {
    let params = StarDeltaParams::new(2, -1e-8, 1.0).unwrap();
    let graph = star_graph(2, 12.0, params.strength(), 600);
    let state = star_delta_ground_state(&params, &graph).unwrap();
    let sup = state
        .values()
        .iter()
        .zip(WaveFunction::from_fn(&graph, |_, x: f64| 2.0f64.sqrt() / x.cosh()).values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-6, "fold defect {sup}");
}

/// Discrete energy of the sampled star state vs its closed form. The gap is
/// dominated by the O(δx²) quadrature and stencil errors, so it must shrink
/// by ≈4 under mesh doubling; the absolute numbers here calibrate what any
/// solver-computed energy can achieve at these resolutions.
#[test]
fn star_energy_converges_to_the_closed_form() {
    let params = StarDeltaParams::new(6, -4.0, 1.0).unwrap();
    let energy_defect = |nodes: usize| -> f64 {
        let graph = star_graph(6, 40.0, params.strength(), nodes);
        let state = star_delta_ground_state(&params, &graph).unwrap();
        let op = GraphOperator::assemble(&graph).unwrap();
        let model = EnergyModel::new(&op, 1.0, 3.0).unwrap();
        (model.energy(&state).unwrap() - params.energy()).abs()
    };
    let coarse = energy_defect(6 * 400);
    let fine = energy_defect(6 * 800);
    assert!(fine < 5e-3, "energy defect at the finer mesh {fine}");
    let ratio = coarse / fine;
    assert!((2.5..6.0).contains(&ratio), "refinement ratio {ratio}");
}

/// On the dumbbell the constant is an exact stationary state: the operator
/// annihilates it and the quartic term integrates exactly, so the discrete
/// energy must hit the closed form at rounding accuracy, independent of
/// mesh. The central edge spans [−L, L] — length 2L — which together with
/// the two 2π loops gives the total 2(L + 2π) the reference values assume.
#[test]
fn dumbbell_constant_energy_is_exact_in_the_discrete_model() {
    let l = 3.0;
    let graph: Arc<MetricGraph> = Arc::new(
        GraphBuilder::new()
            .edge(EdgeSpec::new("C", "A", std::f64::consts::PI).curved())
            .edge(EdgeSpec::new("A", "C", std::f64::consts::PI).curved().with_id("1"))
            .edge(EdgeSpec::new("A", "B", 2.0 * l))
            .edge(EdgeSpec::new("B", "D", std::f64::consts::PI).curved())
            .edge(EdgeSpec::new("D", "B", std::f64::consts::PI).curved().with_id("1"))
            .total_nodes(800)
            .build()
            .unwrap(),
    );
    let reference = dumbbell_reference(0.10, l);
    let constant = WaveFunction::constant(&graph, reference.constant_value);
    let op = GraphOperator::assemble(&graph).unwrap();
    let model = EnergyModel::new(&op, 2.0, 3.0).unwrap();
    let energy = model.energy(&constant).unwrap();
    assert!(
        (energy - reference.constant_energy).abs() < 1e-12,
        "discrete {energy} vs closed form {}",
        reference.constant_energy
    );
    assert!((constant.mass() - 0.10).abs() < 1e-14);
}
