//! Radix-2 FFT, dense DFT matrices and the even-odd permutation.
//!
//! Transforms are unnormalized: the forward transform uses `ω = e^{-2πj/n}`
//! and the inverse uses `ω⁻¹`, so `fft(fft(x), inverse) = n·x`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{shape, Result};
use crate::ops::OpCount;

pub fn is_power_of_two(n: usize) -> bool {
    n >= 1 && n & (n - 1) == 0
}

pub fn log2_exact(n: usize) -> Option<u32> {
    is_power_of_two(n).then(|| n.trailing_zeros())
}

/// Unnormalized DFT of `x`.
pub fn fft(x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let mut ops = OpCount::ZERO;
    fft_counted(x, inverse, &mut ops)
}

pub fn fft_counted(x: &[Complex64], inverse: bool, ops: &mut OpCount) -> Result<Vec<Complex64>> {
    let mut out = x.to_vec();
    fft_in_place(&mut out, inverse, ops)?;
    Ok(out)
}

/// Iterative decimation-in-time transform. Every butterfly is counted as one
/// complex multiply plus two complex adds, including the trivial twiddles.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool, ops: &mut OpCount) -> Result<()> {
    let n = data.len();
    let Some(bits) = log2_exact(n) else {
        return shape(format!("fft length {n} is not a power of two"));
    };
    if n == 1 {
        return Ok(());
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * twiddles[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        ops.complex_muls(n / 2);
        ops.complex_adds(n);
        len *= 2;
    }
    Ok(())
}

/// Dense DFT matrix with entries `ω^{kl}`, optionally scaled by `1/√n`.
pub fn dft_matrix(n: usize, normalized: bool) -> DMatrix<Complex64> {
    let scale = if normalized { 1.0 / (n as f64).sqrt() } else { 1.0 };
    DMatrix::from_fn(n, n, |k, l| {
        let e = (k * l) % n;
        Complex64::from_polar(scale, -2.0 * PI * e as f64 / n as f64)
    })
}

/// Interleaves the two halves: `[x0, xK, x1, xK+1, ...]`.
pub fn even_odd_permute(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if !x.len().is_multiple_of(2) {
        return shape(format!("even-odd permutation needs even length, got {}", x.len()));
    }
    let k = x.len() / 2;
    let mut out = Vec::with_capacity(x.len());
    for i in 0..k {
        out.push(x[i]);
        out.push(x[k + i]);
    }
    Ok(out)
}

/// Inverse of [`even_odd_permute`]: even-indexed entries first, then odd.
pub fn even_odd_unpermute(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if !x.len().is_multiple_of(2) {
        return shape(format!("even-odd permutation needs even length, got {}", x.len()));
    }
    Ok(x.iter()
        .step_by(2)
        .chain(x.iter().skip(1).step_by(2))
        .copied()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn delta_to_constant() {
        let y = fft(&[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)], false).unwrap();
        assert!(max_diff(&y, &[c(1., 0.); 4]) < 1e-15);
    }

    #[test]
    fn constant_to_scaled_delta() {
        let y = fft(&[c(1., 0.); 4], false).unwrap();
        assert!(max_diff(&y, &[c(4., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]) < 1e-15);
    }

    #[test]
    fn matches_dense_dft_length_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Complex64> = (0..64)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let dense = dft_matrix(64, false) * nalgebra::DVector::from_column_slice(&x);
        let fast = fft(&x, false).unwrap();
        let err = max_diff(dense.as_slice(), &fast);
        let scale = dense.norm();
        assert!(err / scale < 1e-12, "relative error {}", err / scale);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> = (0..128)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let y = fft(&fft(&x, false).unwrap(), true).unwrap();
        let back: Vec<Complex64> = y.iter().map(|v| v / 128.0).collect();
        assert!(max_diff(&back, &x) < 1e-13);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(fft(&[c(1., 0.); 6], false).is_err());
        assert!(fft(&[], false).is_err());
    }

    #[test]
    fn normalized_dft_is_unitary() {
        for n in [2usize, 16, 256] {
            let f = dft_matrix(n, true);
            let prod = &f * f.adjoint();
            let eye = DMatrix::<Complex64>::identity(n, n);
            let err = (prod - eye).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "n={n} err={err}");
        }
        // n = 2048: a band of rows against every column
        let f = dft_matrix(2048, true);
        let band = f.rows(0, 24) * f.adjoint();
        for i in 0..24 {
            for j in 0..2048 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((band[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn permute_small() {
        let (a, b, cc, d) = (c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.));
        assert_eq!(even_odd_permute(&[a, b, cc, d]).unwrap(), vec![a, cc, b, d]);
        assert!(even_odd_permute(&[a, b, cc]).is_err());
    }

    #[test]
    fn permute_then_unpermute_is_identity() {
        let x: Vec<Complex64> = (0..16).map(|i| c(i as f64, -(i as f64))).collect();
        assert_eq!(even_odd_unpermute(&even_odd_permute(&x).unwrap()).unwrap(), x);
    }
}
