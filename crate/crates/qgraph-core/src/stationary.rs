//! Ground-state computation: minimization of the nonlinear Schrödinger
//! energy over the sphere of functions with a fixed L² norm.
//!
//! Two minimizers are provided. [`cngf`] is the normalized gradient flow: a
//! semi-implicit gradient step followed by projection back onto the mass
//! sphere, robust but linearly convergent. [`ncg`] is a conjugate-gradient
//! search constrained to the sphere, with a preconditioned direction and an
//! exact one-dimensional energy minimization along each great circle; it
//! usually needs one to two orders of magnitude fewer iterations.
//!
//! Both return the final iterate together with a [`SolverReport`] holding the
//! energy, mass and step-size history, so callers can check monotonicity and
//! diagnose stagnation without re-running.

use std::f64::consts::PI;
use std::io;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{Factorization, LinAlgError};
use crate::operator::GraphOperator;
use crate::wavefunction::{WaveFunction, WaveFunctionError};

/// Errors raised by the ground-state solvers.
#[derive(Debug, Error)]
pub enum StationaryError {
    /// A model or configuration parameter is outside its admissible range.
    #[error("invalid ground-state configuration: {reason}")]
    Config { reason: String },
    /// A sparse factorization or solve failed mid-iteration.
    #[error("linear solve failed at iteration {iter}: {source}")]
    Solve {
        iter: usize,
        #[source]
        source: LinAlgError,
    },
    /// The iteration produced NaN or infinite samples. The trace collected up
    /// to (and including) the offending step is attached for diagnosis.
    #[error("non-finite values at iteration {iter}; the partial iteration trace is attached")]
    NonFinite { iter: usize, report: Box<SolverReport> },
    /// A wavefunction operation failed (mismatched graphs, bad norm order).
    #[error(transparent)]
    Function(#[from] WaveFunctionError),
}

/// The NLS energy `E(u) = ½⟨Hu, u⟩ − λ/(p+1) ∫ |u|^{p+1}` for a fixed
/// operator and focusing nonlinearity `g(u) = λ|u|^{p−1}u`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyModel<'a> {
    operator: &'a GraphOperator,
    lambda: f64,
    p: f64,
}

impl<'a> EnergyModel<'a> {
    /// A model with nonlinearity coefficient `lambda > 0` and power `p > 1`
    /// (`p = 3` is the cubic case).
    pub fn new(operator: &'a GraphOperator, lambda: f64, p: f64) -> Result<Self, StationaryError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(StationaryError::Config {
                reason: format!("nonlinearity coefficient lambda = {lambda} must be positive"),
            });
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(StationaryError::Config {
                reason: format!("nonlinearity power p = {p} must exceed 1"),
            });
        }
        Ok(Self { operator, lambda, p })
    }

    pub fn operator(&self) -> &'a GraphOperator {
        self.operator
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `E(u) = ½⟨Hu, u⟩ − λ/(p+1) ∫ |u|^{p+1}`.
    pub fn energy(&self, u: &WaveFunction<f64>) -> Result<f64, StationaryError> {
        let hu = self.operator.apply(u)?;
        let q = self.p + 1.0;
        let kinetic = 0.5 * hu.dot(u)?;
        let focusing = self.lambda / q * u.norm_p(q)?.powf(q);
        Ok(kinetic - focusing)
    }

    /// Unconstrained energy gradient `Hu − λ|u|^{p−1}u`.
    pub fn gradient(&self, u: &WaveFunction<f64>) -> Result<WaveFunction<f64>, StationaryError> {
        let hu = self.operator.apply(u)?;
        let pm1 = self.p - 1.0;
        let lambda = self.lambda;
        Ok(hu.sub(&u.map(|x| lambda * x.abs().powf(pm1) * x))?)
    }

    /// The conserved mass `‖u‖₂²`.
    pub fn mass(&self, u: &WaveFunction<f64>) -> f64 {
        u.mass()
    }
}

/// Parameters shared by both ground-state solvers. Use [`Self::cngf`] or
/// [`Self::ncg`] for the per-method iteration caps, then adjust fields as
/// needed.
#[derive(Debug, Clone, Copy)]
pub struct GroundStateConfig {
    /// Target L² norm; the conserved mass is `rho²`.
    pub rho: f64,
    /// Gradient-flow step `δt` (ignored by [`ncg`]).
    pub dt: f64,
    /// Stagnation tolerance on the relative L² step size.
    pub epsilon: f64,
    /// Hard iteration cap.
    pub iter_max: usize,
    /// Shift `α` of the conjugate-gradient preconditioner `(α·Id + H)⁻¹`
    /// (ignored by [`cngf`]).
    pub precond_shift: f64,
    /// Absolute tolerance of the line minimization over `θ ∈ [−π, π]`. The
    /// interval is fixed and symmetric about 0, so "stay put" is always an
    /// admissible outcome.
    pub line_xtol: f64,
    /// Evaluation budget of one line minimization.
    pub line_maxfun: usize,
}

impl GroundStateConfig {
    /// Defaults for the normalized gradient flow (`δt = 0.1`, `ε = 10⁻⁸`,
    /// at most 1000 iterations).
    pub fn cngf(rho: f64) -> Self {
        Self {
            rho,
            dt: 1e-1,
            epsilon: 1e-8,
            iter_max: 1000,
            precond_shift: 0.5,
            line_xtol: 1e-14,
            line_maxfun: 1000,
        }
    }

    /// Defaults for the conjugate gradient (`ε = 10⁻⁸`, at most 500
    /// iterations, preconditioner shift 0.5).
    pub fn ncg(rho: f64) -> Self {
        Self {
            iter_max: 500,
            ..Self::cngf(rho)
        }
    }

    fn validate(&self) -> Result<(), StationaryError> {
        let positive: [(&str, f64); 5] = [
            ("rho", self.rho),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
            ("precond_shift", self.precond_shift),
            ("line_xtol", self.line_xtol),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(StationaryError::Config {
                    reason: format!("{name} = {value} must be positive"),
                });
            }
        }
        if self.iter_max == 0 || self.line_maxfun == 0 {
            return Err(StationaryError::Config {
                reason: "iteration and line-search budgets must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The relative step fell below `epsilon` (or a line search found no
    /// descent): the iterate has converged as far as the method can tell.
    Stagnation,
    /// The iteration cap was reached first.
    MaxIter,
}

/// Per-iteration history of a ground-state run.
///
/// `energies` and `masses` start with the (normalized) initial state and gain
/// one entry per iteration; `residuals` holds the relative L² step size of
/// each iteration, so it is one entry shorter.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub energies: Vec<f64>,
    pub masses: Vec<f64>,
    pub residuals: Vec<f64>,
    pub final_residual: f64,
    pub stop_reason: StopReason,
}

impl SolverReport {
    /// Writes the trace as CSV (`iter,energy,mass,residual`); the initial row
    /// has no step behind it and leaves the residual column empty.
    pub fn write_trace_csv(&self, w: &mut impl io::Write) -> io::Result<()> {
        writeln!(w, "iter,energy,mass,residual")?;
        let lead = self.energies.len() - self.residuals.len();
        for (i, (e, m)) in self.energies.iter().zip(&self.masses).enumerate() {
            if i < lead {
                writeln!(w, "{i},{e},{m},")?;
            } else {
                writeln!(w, "{i},{e},{m},{}", self.residuals[i - lead])?;
            }
        }
        Ok(())
    }
}

/// Shared bookkeeping for both solvers: history vectors plus the running
/// stop state.
struct Trace {
    energies: Vec<f64>,
    masses: Vec<f64>,
    residuals: Vec<f64>,
}

impl Trace {
    fn start(energy: f64, mass: f64) -> Self {
        Self {
            energies: vec![energy],
            masses: vec![mass],
            residuals: Vec::new(),
        }
    }

    fn push(&mut self, energy: f64, mass: f64, residual: f64) {
        self.energies.push(energy);
        self.masses.push(mass);
        self.residuals.push(residual);
    }

    fn finish(self, iterations: usize, stop_reason: StopReason) -> SolverReport {
        let final_residual = self.residuals.last().copied().unwrap_or(0.0);
        SolverReport {
            iterations,
            energies: self.energies,
            masses: self.masses,
            residuals: self.residuals,
            final_residual,
            stop_reason,
        }
    }

    /// True if the latest row contains anything non-finite.
    fn last_row_broken(&self, u: &WaveFunction<f64>) -> bool {
        let bad = |v: &f64| !v.is_finite();
        u.values().iter().any(bad)
            || self.energies.last().is_some_and(|e| bad(e))
            || self.residuals.last().is_some_and(|r| bad(r))
    }

    fn abort(self, iter: usize) -> StationaryError {
        StationaryError::NonFinite {
            iter,
            report: Box::new(self.finish(iter, StopReason::MaxIter)),
        }
    }
}

/// Checks that `u0` lives on the model's graph and projects it onto the
/// sphere `‖u‖₂ = ρ`.
fn normalized_start(
    model: &EnergyModel,
    u0: &WaveFunction<f64>,
    rho: f64,
) -> Result<WaveFunction<f64>, StationaryError> {
    if !Arc::ptr_eq(u0.graph(), model.operator().graph()) {
        return Err(WaveFunctionError::GraphMismatch.into());
    }
    let n0 = u0.norm_2();
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(StationaryError::Config {
            reason: format!("initial datum has L² norm {n0}; it must be positive and finite"),
        });
    }
    Ok(u0.scale(rho / n0))
}

/// Ground state by the normalized gradient flow.
///
/// Each iteration takes one semi-implicit gradient step,
/// `(Id + δt·H − δt·λ·diag(|uⁿ|^{p−1}))·u* = uⁿ`, then projects back onto
/// the sphere through `u^{n+1} = ρ·|u*| / ‖u*‖₂`. Taking the absolute value
/// restricts the method to nonnegative ground states, which is what the flow
/// converges to anyway when started from generic data; initial sign changes
/// are removed on the first iteration. Stops when the relative L² step falls
/// below `cfg.epsilon` or after `cfg.iter_max` iterations.
pub fn cngf(
    model: &EnergyModel,
    u0: &WaveFunction<f64>,
    cfg: &GroundStateConfig,
) -> Result<(WaveFunction<f64>, SolverReport), StationaryError> {
    cfg.validate()?;
    let mut u = normalized_start(model, u0, cfg.rho)?;
    let graph = model.operator().graph();
    let h = model.operator().matrix();
    let n = u.len();

    // The flow matrix has H's sparsity pattern for every n (the nonlinear
    // term only touches the diagonal), so one clone is refilled in place.
    let mut m = h.clone();
    let mut shift = vec![0.0; n];

    let mut trace = Trace::start(model.energy(&u)?, u.mass());
    let mut iterations = 0;
    let mut stop_reason = StopReason::MaxIter;

    for iter in 1..=cfg.iter_max {
        let fail = |source| StationaryError::Solve { iter, source };
        m.copy_values_from(h).map_err(fail)?;
        m.scale(cfg.dt);
        for (s, &x) in shift.iter_mut().zip(u.values()) {
            *s = 1.0 - cfg.dt * model.lambda() * x.abs().powf(model.p() - 1.0);
        }
        m.add_to_diagonal(&shift).map_err(fail)?;
        let factor = Factorization::new(&m).map_err(fail)?;
        let star = factor.solve(&m, u.values()).map_err(fail)?;
        let star = WaveFunction::from_flat(graph, star)?;

        let ns = star.norm_2();
        if !(ns > 0.0) || !ns.is_finite() {
            return Err(trace.abort(iter));
        }
        let next = star.abs().scale(cfg.rho / ns);
        let residual = next.sub(&u)?.norm_2() / u.norm_2();

        iterations = iter;
        trace.push(model.energy(&next)?, next.mass(), residual);
        if trace.last_row_broken(&next) {
            return Err(trace.abort(iter));
        }
        u = next;
        if residual < cfg.epsilon {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }
    Ok((u, trace.finish(iterations, stop_reason)))
}

/// Previous-iteration memory of the conjugate-gradient recursion.
struct CgMemory {
    r: WaveFunction<f64>,
    v: WaveFunction<f64>,
    p: WaveFunction<f64>,
}

/// Ground state by preconditioned nonlinear conjugate gradient on the mass
/// sphere.
///
/// Each iteration projects the energy gradient onto the tangent space of the
/// sphere at `uⁿ`, preconditions it by one solve with `(α·Id + H)` (factored
/// once), mixes in the previous direction with a Polak–Ribière coefficient
/// clipped at zero, and minimizes the energy exactly along the great circle
/// `θ ↦ cos(θ)·uⁿ + sin(θ)·ℓⁿ` with a bounded Brent search. The first
/// iteration has no memory and reduces to preconditioned steepest descent.
///
/// A line search that finds no descent (or a vanishing search direction)
/// leaves the iterate in place and stops with [`StopReason::Stagnation`].
pub fn ncg(
    model: &EnergyModel,
    u0: &WaveFunction<f64>,
    cfg: &GroundStateConfig,
) -> Result<(WaveFunction<f64>, SolverReport), StationaryError> {
    cfg.validate()?;
    let mut u = normalized_start(model, u0, cfg.rho)?;
    let graph = model.operator().graph();

    // Fixed preconditioner (α·Id + H), factored once for the whole run.
    let mut pm = model.operator().matrix().clone();
    let setup_fail = |source| StationaryError::Solve { iter: 0, source };
    pm.add_to_diagonal(&vec![cfg.precond_shift; u.len()])
        .map_err(setup_fail)?;
    let pf = Factorization::new(&pm).map_err(setup_fail)?;

    let mut trace = Trace::start(model.energy(&u)?, u.mass());
    let mut memory: Option<CgMemory> = None;
    let mut iterations = 0;
    let mut stop_reason = StopReason::MaxIter;

    for iter in 1..=cfg.iter_max {
        let r = tangent_project(&u, &model.gradient(&u)?)?;
        let v = pf
            .solve(&pm, r.values())
            .map_err(|source| StationaryError::Solve { iter, source })?;
        let v = WaveFunction::from_flat(graph, v)?;

        // Polak–Ribière-like mixing, clipped at zero so a bad previous
        // direction degrades to a steepest-descent restart.
        let beta = match &memory {
            None => 0.0,
            Some(mem) => {
                let denom = mem.r.dot(&mem.v)?;
                if denom.is_finite() && denom != 0.0 {
                    (r.sub(&mem.r)?.dot(&v)? / denom).max(0.0)
                } else {
                    0.0
                }
            }
        };
        let d = match &memory {
            Some(mem) if beta > 0.0 => v.scale(-1.0).add(&mem.p.scale(beta))?,
            _ => v.scale(-1.0),
        };
        let p = tangent_project(&u, &d)?;

        let pn = p.norm_2();
        if !(pn > 0.0) || !pn.is_finite() {
            // The direction collapsed: the iterate is a constrained critical
            // point to working precision.
            iterations = iter;
            trace.push(*trace.energies.last().unwrap(), u.mass(), 0.0);
            stop_reason = StopReason::Stagnation;
            break;
        }
        let ell = p.scale(cfg.rho / pn);

        let current = *trace.energies.last().unwrap();
        let line = fminbound(
            |theta| match u.scale(theta.cos()).add(&ell.scale(theta.sin())) {
                Ok(w) => model
                    .energy(&w)
                    .ok()
                    .filter(|e| e.is_finite())
                    .unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            },
            -PI,
            PI,
            cfg.line_xtol,
            cfg.line_maxfun,
        );
        if !(line.fx < current) {
            // No descent along the great circle: stay put and stop.
            iterations = iter;
            trace.push(current, u.mass(), 0.0);
            stop_reason = StopReason::Stagnation;
            break;
        }

        let raw = u.scale(line.x.cos()).add(&ell.scale(line.x.sin()))?;
        // ⟨u, ℓ⟩ = 0 keeps the combination on the sphere in exact arithmetic;
        // renormalize anyway so the reported masses stay pinned to ρ².
        let nn = raw.norm_2();
        if !(nn > 0.0) || !nn.is_finite() {
            return Err(trace.abort(iter));
        }
        let next = raw.scale(cfg.rho / nn);
        let residual = next.sub(&u)?.norm_2() / u.norm_2();

        iterations = iter;
        trace.push(model.energy(&next)?, next.mass(), residual);
        if trace.last_row_broken(&next) {
            return Err(trace.abort(iter));
        }
        memory = Some(CgMemory { r, v, p });
        u = next;
        if residual < cfg.epsilon {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }
    Ok((u, trace.finish(iterations, stop_reason)))
}

/// Orthogonal projection onto the tangent space of the mass sphere at `u`:
/// `v − (⟨v, u⟩ / ‖u‖²)·u`.
fn tangent_project(
    u: &WaveFunction<f64>,
    v: &WaveFunction<f64>,
) -> Result<WaveFunction<f64>, WaveFunctionError> {
    let coeff = v.dot(u)? / u.mass();
    v.sub(&u.scale(coeff))
}

/// Result of one bounded scalar minimization. `evals` and `converged` are
/// diagnostics read by tests; the solvers judge a search only by whether
/// `fx` beats the energy at θ = 0.
#[allow(dead_code)]
struct LineMinimum {
    x: f64,
    fx: f64,
    evals: usize,
    converged: bool,
}

/// Minimizes `f` on `[a, b]` by golden-section search with successive
/// parabolic interpolation (Brent's bounded FMIN), to absolute position
/// tolerance `xtol` with at most `maxfun` evaluations.
fn fminbound(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, xtol: f64, maxfun: usize) -> LineMinimum {
    const GOLDEN: f64 = 0.381_966_011_250_105_15; // (3 − √5)/2
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (a, b);

    // Best point xf, runners-up nfc and fulc (second and third best).
    let mut xf = a + GOLDEN * (b - a);
    let mut nfc = xf;
    let mut fulc = xf;
    let mut fx = f(xf);
    let mut fnfc = fx;
    let mut ffulc = fx;
    let mut evals = 1usize;

    let mut rat = 0.0_f64; // last step
    let mut e = 0.0_f64; // step before last
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + xtol / 3.0;
    let mut tol2 = 2.0 * tol1;
    let mut converged = true;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        let mut golden = true;
        if e.abs() > tol1 {
            // Fit a parabola through the three best points; accept its
            // minimum if it lies inside the bracket and the step is shorter
            // than half the one from two iterations ago.
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                golden = false;
                rat = p / q;
                let x = xf + rat;
                if x - a < tol2 || b - x < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            }
        }
        if golden {
            // Golden-section step into the larger half.
            e = if xf >= xm { a - xf } else { b - xf };
            rat = GOLDEN * e;
        }

        // Never step by less than tol1.
        let si = if rat == 0.0 { 1.0 } else { rat.signum() };
        let x = xf + si * rat.abs().max(tol1);
        let fu = f(x);
        evals += 1;

        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            (fulc, ffulc) = (nfc, fnfc);
            (nfc, fnfc) = (xf, fx);
            (xf, fx) = (x, fu);
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                (fulc, ffulc) = (nfc, fnfc);
                (nfc, fnfc) = (x, fu);
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                (fulc, ffulc) = (x, fu);
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + xtol / 3.0;
        tol2 = 2.0 * tol1;
        if evals >= maxfun {
            converged = false;
            break;
        }
    }
    LineMinimum {
        x: xf,
        fx,
        evals,
        converged,
    }
}
