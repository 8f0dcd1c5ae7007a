//! Unit-modulus powers `e^{j·phase·x}` with careful argument reduction.
//!
//! DVM entries need `alpha^(k·l)` for `k·l` up to ~10^6. Forming `phase * x`
//! naively loses ~1e-10 of absolute phase at that size, which is the same
//! order as the factorization tolerance, so the product is kept as an exact
//! two-term sum and reduced modulo 2π with a split constant.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

// 2π = TWO_PI_HI + TWO_PI_LO to roughly 106 bits.
const TWO_PI_HI: f64 = TAU;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Returns `phase * x` reduced into `[-π, π]`.
pub fn reduced_angle(phase: f64, x: f64) -> f64 {
    let hi = phase * x;
    let lo = phase.mul_add(x, -hi);
    let n = (hi / TWO_PI_HI).round();
    let r = (-n).mul_add(TWO_PI_HI, hi);
    r - n * TWO_PI_LO + lo
}

/// `e^{j·phase·x}`.
pub fn cis(phase: f64, x: f64) -> Complex64 {
    let (s, c) = reduced_angle(phase, x).sin_cos();
    Complex64::new(c, s)
}

/// Maps an angle into the principal interval `(-π, π]`.
pub fn principal(phase: f64) -> f64 {
    let r = reduced_angle(phase, 1.0);
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}
