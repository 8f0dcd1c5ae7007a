//! Builds the sparse factor chain of a scaled delay Vandermonde matrix,
//! checks it against the dense matrix, and shows the N log N operation count
//! of the fast product.

use num_complex::Complex64;
use stnn::dvm::{
    build_bluestein_chain, build_scaled_dvm_dense, fast_dvm_apply_counted, relative_frobenius, DvmSpec, Factor,
};
use stnn::ops::OpCount;

fn main() -> stnn::Result<()> {
    let spec = DvmSpec::from_phase(16, -0.7)?;
    let chain = build_bluestein_chain(&spec)?;
    println!("factors for N = {}:", spec.n());
    for f in chain.factors() {
        println!("  {:>3} -> {:<3} {}", f.in_dim(), f.out_dim(), describe(f));
    }
    let err = relative_frobenius(&chain.to_dense(), &build_scaled_dvm_dense(&spec));
    println!("relative Frobenius error vs dense: {err:.2e}");

    println!("\n{:>6} {:>10} {:>10} {:>8}", "N", "muls", "adds", "ratio");
    let mut prev: Option<u64> = None;
    for r in 3..=10 {
        let spec = DvmSpec::from_phase(1 << r, -0.7)?;
        let chain = build_bluestein_chain(&spec)?;
        let x = vec![Complex64::new(1.0, 0.0); spec.n()];
        let mut ops = OpCount::ZERO;
        fast_dvm_apply_counted(&chain, &x, &mut ops)?;
        let ratio = prev.map(|p| ops.muls as f64 / p as f64).unwrap_or(f64::NAN);
        println!("{:>6} {:>10} {:>10} {:>8.3}", spec.n(), ops.muls, ops.adds, ratio);
        prev = Some(ops.muls);
    }
    Ok(())
}

fn describe(f: &Factor) -> String {
    match f {
        Factor::ComplexDiagonal(d) => format!("diagonal, |d| in [{:.3}, {:.3}]", min_abs(d), max_abs(d)),
        Factor::ZeroPad { .. } => "zero pad".into(),
        Factor::ZeroPadTranspose { .. } => "truncate".into(),
        Factor::Dft {
            inverse, normalized, ..
        } => format!("DFT (inverse: {inverse}, normalized: {normalized})"),
        other => format!("{other:?}"),
    }
}

fn min_abs(d: &[Complex64]) -> f64 {
    d.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
}

fn max_abs(d: &[Complex64]) -> f64 {
    d.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
