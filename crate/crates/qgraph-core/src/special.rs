//! Jacobi elliptic functions and complete elliptic integrals.
//!
//! Everything is evaluated through the arithmetic–geometric mean (AGM):
//! `K` and `E` from the AGM sequence directly, and `sn`, `cn`, `dn` through
//! the descending Landen transformation, which rewrites the amplitude at
//! modulus `k` in terms of amplitudes at smaller and smaller moduli until the
//! modulus is numerically zero. Close to `k = 1` the Landen sequence
//! degenerates, so the hyperbolic limits `sn → tanh`, `cn, dn → sech` are
//! used instead.
//!
//! Accuracy targets (enforced by the test suite against an independent
//! quadrature-plus-bisection oracle): relative 1e-12 for `K`/`E`, absolute
//! 1e-10 for `sn`/`cn`/`dn` over the moduli used by the closed-form states.

use thiserror::Error;

/// AGM iteration cutoff: stop once the co-modulus term drops below this.
const AGM_EPS: f64 = 1e-15;

/// Switch to hyperbolic limit functions when 1 − k falls below this.
const NEAR_ONE: f64 = 1e-10;

/// Treat the modulus as zero (trigonometric limit) below this.
const NEAR_ZERO: f64 = 1e-15;

/// Errors for modulus domain violations.
#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    /// The first-kind integral K(k) diverges as k → 1.
    #[error("complete elliptic integral K requires 0 <= k < 1, got k = {0}")]
    ModulusNotBelowOne(f64),
    /// Moduli outside [0, 1] have no meaning for these real-valued functions.
    #[error("elliptic modulus must lie in [0, 1], got k = {0}")]
    ModulusOutOfRange(f64),
}

/// Elliptic modulus confined to the open interval (0, 1).
///
/// The solvers' closed-form states carry their modulus in this form so that
/// the degenerate endpoints (trigonometric and hyperbolic limits) are ruled
/// out at construction time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    /// Accepts k with 0 < k < 1 strictly.
    pub fn new(k: f64) -> Result<Self, SpecialError> {
        if k > 0.0 && k < 1.0 {
            Ok(Self(k))
        } else {
            Err(SpecialError::ModulusOutOfRange(k))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// AGM sequence data: aₙ together with the cₙ = (aₙ₋₁ − bₙ₋₁)/2 terms
/// (c₀ = k by convention), truncated once cₙ < [`AGM_EPS`].
struct AgmTable {
    a: Vec<f64>,
    c: Vec<f64>,
}

fn agm(k: f64) -> AgmTable {
    let mut a = vec![1.0_f64];
    let mut b = (1.0 - k * k).sqrt();
    let mut c = vec![k];
    loop {
        let an = a.last().copied().expect("agm table is never empty");
        let cn = 0.5 * (an - b);
        let a_next = 0.5 * (an + b);
        b = (an * b).sqrt();
        a.push(a_next);
        c.push(cn);
        if cn.abs() < AGM_EPS || a.len() > 60 {
            return AgmTable { a, c };
        }
    }
}

/// Complete elliptic integral of the first kind, K(k) = F(π/2, k).
///
/// Defined for 0 ≤ k < 1; K(0) = π/2 and K(k) → ∞ as k → 1.
pub fn ellip_k(k: f64) -> Result<f64, SpecialError> {
    if !(0.0..1.0).contains(&k) {
        return Err(if (0.0..=1.0).contains(&k) {
            SpecialError::ModulusNotBelowOne(k)
        } else {
            SpecialError::ModulusOutOfRange(k)
        });
    }
    let table = agm(k);
    let a_last = *table.a.last().expect("agm table is never empty");
    Ok(std::f64::consts::FRAC_PI_2 / a_last)
}

/// Complete elliptic integral of the second kind, E(k).
///
/// Defined for 0 ≤ k ≤ 1; E(0) = π/2 and E(1) = 1.
pub fn ellip_e(k: f64) -> Result<f64, SpecialError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(SpecialError::ModulusOutOfRange(k));
    }
    if 1.0 - k < NEAR_ZERO {
        return Ok(1.0);
    }
    let table = agm(k);
    let a_last = *table.a.last().expect("agm table is never empty");
    let big_k = std::f64::consts::FRAC_PI_2 / a_last;
    // E = K · (1 − Σₙ 2ⁿ⁻¹ cₙ²), the n = 0 term contributing c₀²/2.
    let mut sum = 0.0;
    let mut weight = 0.5;
    for cn in &table.c {
        sum += weight * cn * cn;
        weight *= 2.0;
    }
    Ok(big_k * (1.0 - sum))
}

/// Jacobi elliptic functions (sn, cn, dn) at real x with modulus k ∈ [0, 1].
///
/// Evaluated by the descending Landen transformation: with the AGM sequence
/// aₙ, cₙ, set φ_N = 2^N a_N x and recover the amplitude through
/// φₙ₋₁ = (φₙ + arcsin((cₙ/aₙ)·sin φₙ))/2; then sn = sin φ₀ and cn = cos φ₀.
/// dn comes from the modulus identity dn² = 1 − k²sn² (always positive, so
/// the square root is safe) rather than the textbook quotient
/// cos φ₀ / cos(φ₁ − φ₀), whose numerator and denominator both vanish near
/// odd multiples of K and cancel catastrophically at small k. The k = 0 and
/// k = 1 neighborhoods use the trigonometric and hyperbolic limits.
pub fn jacobi_sn_cn_dn(x: f64, k: f64) -> Result<(f64, f64, f64), SpecialError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(SpecialError::ModulusOutOfRange(k));
    }
    if k < NEAR_ZERO {
        return Ok((x.sin(), x.cos(), 1.0));
    }
    if 1.0 - k < NEAR_ONE {
        let sech = 1.0 / x.cosh();
        return Ok((x.tanh(), sech, sech));
    }
    let phi0 = landen_amplitude(x, k);
    let sn = phi0.sin();
    let cn = phi0.cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    Ok((sn, cn, dn))
}

/// The amplitude function am(x, k): the inverse of the incomplete integral,
/// i.e. the φ with F(φ, k) = x.
pub fn amplitude(x: f64, k: f64) -> Result<f64, SpecialError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(SpecialError::ModulusOutOfRange(k));
    }
    if k < NEAR_ZERO {
        return Ok(x);
    }
    if 1.0 - k < NEAR_ONE {
        // gd(x), the amplitude limit at k = 1: sin φ = tanh x.
        return Ok(x.tanh().asin());
    }
    Ok(landen_amplitude(x, k))
}

/// Runs the Landen angle recursion down to the base angle φ₀ = am(x, k).
fn landen_amplitude(x: f64, k: f64) -> f64 {
    let table = agm(k);
    let n_last = table.a.len() - 1;
    let a_last = table.a[n_last];
    let mut phi = (1u64 << n_last.min(62)) as f64 * a_last * x;
    for n in (1..=n_last).rev() {
        let t = (table.c[n] / table.a[n]) * phi.sin();
        phi = 0.5 * (t.clamp(-1.0, 1.0).asin() + phi);
    }
    phi
}
