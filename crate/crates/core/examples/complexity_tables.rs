//! Prints parameter and FLOP counts for structured and fully connected
//! beamformers at N = 8, 16, 32.

use stnn::complexity::{flops_full, reduction_report, ComplexityConfig, FlopFormulaInput};
use stnn::verify::default_lambda;

fn main() -> stnn::Result<()> {
    let configs: Vec<ComplexityConfig> = [8, 16, 32]
        .into_iter()
        .map(|n| ComplexityConfig {
            n,
            p: 1,
            lambda: default_lambda(n),
            l_layers: 5,
        })
        .collect();
    let report = reduction_report(&configs)?;
    println!(
        "{:>4} {:>5} {:>7} {:>14} {:>14} {:>9} {:>9}",
        "N", "model", "params", "formula a/m", "counted a/m", "Pr(w) %", "Pr(F) %"
    );
    for r in &report.rows {
        println!(
            "{:>4} {:>5} {:>7} {:>14} {:>14} {:>9.1} {:>9.1}",
            r.n,
            r.model,
            r.params,
            format!("{}/{}", r.flops_formula_add, r.flops_formula_mul),
            format!("{}/{}", r.flops_counted_add, r.flops_counted_mul),
            r.pr_weights_pct,
            r.pr_flops_pct
        );
    }

    println!("\nuntruncated recursion (p = 1, L = 5):");
    for n in [8u64, 16, 32] {
        let f = flops_full(&FlopFormulaInput {
            m: 2 * n,
            l_layers: 5,
            p: 1,
            r: n.trailing_zeros() as u64,
            lambda: 0,
        })?;
        println!("  N = {n:>2}: {} adds, {} muls", f.adds, f.muls);
    }
    Ok(())
}
