//! Shared test support: an independent oracle for elliptic integrals and
//! Jacobi elliptic functions.
//!
//! The oracle deliberately avoids the AGM / Landen machinery used by the
//! library. Everything here is built from two primitives only:
//!
//! * composite Gauss–Legendre quadrature of the incomplete integral
//!   F(φ, k) = ∫₀^φ dθ / √(1 − k² sin²θ) (and its second-kind sibling), and
//! * bisection to invert F, which yields the amplitude φ = am(x, k) and from
//!   it sn = sin φ, cn = cos φ, dn = √(1 − k² sin²φ).
//!
//! It is slow (thousands of integrand evaluations per call) but that is fine
//! for a test oracle, and a dual, structurally unrelated evaluation route is
//! the point.

#![allow(dead_code)] // not every test target uses every oracle function

/// 8-point Gauss–Legendre abscissae on (0, 1) (symmetric pairs folded out)
/// and matching weights. Values are the classical ±x_i, w_i pairs mapped from
/// [-1, 1]; stated to 17 significant digits.
const GL_NODES: [f64; 8] = [
    -0.96028985649753623,
    -0.79666647741362674,
    -0.52553240991632899,
    -0.18343464249564980,
    0.18343464249564980,
    0.52553240991632899,
    0.79666647741362674,
    0.96028985649753623,
];
const GL_WEIGHTS: [f64; 8] = [
    0.10122853629037626,
    0.22238103445337447,
    0.31370664587788729,
    0.36268378337836198,
    0.36268378337836198,
    0.31370664587788729,
    0.22238103445337447,
    0.10122853629037626,
];

/// Composite 8-point Gauss–Legendre quadrature of `f` over [a, b] with
/// `panels` equal subintervals.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut local = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            local += w * f(mid + 0.5 * h * x);
        }
        sum += 0.5 * h * local;
    }
    sum
}

/// Panel count for the elliptic integrands. The integrand of F develops a
/// sharp (integrable) peak at θ = π/2 as k → 1, so resolution scales with
/// 1/√(1 − k²) up to a cap that keeps single calls in the millisecond range.
fn panels_for(k: f64) -> usize {
    let kc2 = (1.0 - k * k).max(1e-14);
    (200.0 + 40.0 / kc2.sqrt()).min(40_000.0) as usize
}

/// Incomplete elliptic integral of the first kind, F(φ, k), by quadrature.
pub fn incomplete_f(phi: f64, k: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    let (lo, hi) = if phi < 0.0 { (phi, 0.0) } else { (0.0, phi) };
    let v = gauss_legendre(
        |theta| {
            let s = theta.sin();
            1.0 / (1.0 - k * k * s * s).sqrt()
        },
        lo,
        hi,
        panels_for(k),
    );
    if phi < 0.0 {
        -v
    } else {
        v
    }
}

/// Incomplete elliptic integral of the second kind, E(φ, k), by quadrature.
pub fn incomplete_e(phi: f64, k: f64) -> f64 {
    let (lo, hi) = if phi < 0.0 { (phi, 0.0) } else { (0.0, phi) };
    let v = gauss_legendre(
        |theta| {
            let s = theta.sin();
            (1.0 - k * k * s * s).sqrt()
        },
        lo,
        hi,
        panels_for(k),
    );
    if phi < 0.0 {
        -v
    } else {
        v
    }
}

/// Complete elliptic integral of the first kind K(k) by quadrature.
pub fn complete_k(k: f64) -> f64 {
    incomplete_f(std::f64::consts::FRAC_PI_2, k)
}

/// Complete elliptic integral of the second kind E(k) by quadrature.
pub fn complete_e(k: f64) -> f64 {
    incomplete_e(std::f64::consts::FRAC_PI_2, k)
}

/// Amplitude function am(x, k) for 0 ≤ x ≤ K(k): the unique φ ∈ [0, π/2]
/// with F(φ, k) = x, found by bisection on the quadrature of F.
///
/// F(·, k) is strictly increasing, so bisection is safe; 80 halvings take the
/// bracket width below 2⁻⁸⁰ ~ 1e-24, i.e. well below f64 resolution, and the
/// loop exits early once the bracket stops shrinking.
pub fn amplitude_on_first_quarter(x: f64, k: f64) -> f64 {
    assert!(x >= 0.0, "oracle amplitude expects x in [0, K]");
    let mut lo = 0.0_f64;
    let mut hi = std::f64::consts::FRAC_PI_2;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if incomplete_f(mid, k) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Jacobi sn, cn, dn at x for 0 ≤ x ≤ K(k), via the bisection amplitude.
pub fn jacobi_on_first_quarter(x: f64, k: f64) -> (f64, f64, f64) {
    let phi = amplitude_on_first_quarter(x, k);
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    (sn, cn, dn)
}

/// Jacobi sn, cn, dn for arbitrary real x, reduced into the fundamental
/// quarter period by the standard symmetries:
/// sn odd / cn, dn even about 0; about x = K: sn(2K−x) = sn(x),
/// cn(2K−x) = −cn(x), dn(2K−x) = dn(x); everything 4K-periodic.
pub fn jacobi(x: f64, k: f64) -> (f64, f64, f64) {
    let big_k = complete_k(k);
    let period = 4.0 * big_k;
    let mut t = x % period;
    if t < 0.0 {
        t += period;
    }
    // Mirror down into [0, K] while tracking sign flips.
    let (mut s_sign, mut c_sign) = (1.0, 1.0);
    if t > 2.0 * big_k {
        // second half period: sn(x) = −sn(x − 2K), cn(x) = −cn(x − 2K)
        t -= 2.0 * big_k;
        s_sign = -s_sign;
        c_sign = -c_sign;
    }
    if t > big_k {
        // reflect about K
        t = 2.0 * big_k - t;
        c_sign = -c_sign;
    }
    let (sn, cn, dn) = jacobi_on_first_quarter(t, k);
    (s_sign * sn, c_sign * cn, dn)
}
