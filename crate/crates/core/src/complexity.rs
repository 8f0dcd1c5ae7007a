//! Closed-form and structural operation counts, and the StNN/FFNN reduction
//! table.
//!
//! Closed forms are evaluated in exact integer arithmetic over a common
//! denominator and rounded half up at the end; a result that needed rounding
//! is flagged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::net::{build_network, ModelKind, Network, NetworkConfig};
use crate::ops::OpCount;
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopFormulaInput {
    /// `M = 2N`.
    pub m: u64,
    pub l_layers: u64,
    pub p: u64,
    /// `log2 N`.
    pub r: u64,
    pub lambda: u64,
}

impl FlopFormulaInput {
    pub fn for_network(n: usize, p: usize, lambda: u32, l_layers: usize) -> Self {
        Self {
            m: 2 * n as u64,
            l_layers: l_layers as u64,
            p: p as u64,
            r: n.trailing_zeros() as u64,
            lambda: lambda as u64,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 || self.l_layers < 2 {
            return config("formula inputs must be positive with L >= 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaCount {
    pub adds: u64,
    pub muls: u64,
    /// True when either closed form was not an integer before rounding.
    pub rounded: bool,
}

impl FormulaCount {
    pub fn total(&self) -> u64 {
        self.adds + self.muls
    }
}

/// `num / den` rounded half up, and whether it was fractional.
fn round_half_up(num: u128, den: u128) -> (u64, bool) {
    (((2 * num + den) / (2 * den)) as u64, !num.is_multiple_of(den))
}

/// Operation counts of a network with full recursion:
///
/// ```text
/// adds = p(L-1)Mr + 4p(L-1)M - ((L-1)/4)M
/// muls = (p/2)(L-1)Mr + (23/4)pM(L-1)
/// ```
pub fn flops_full(input: &FlopFormulaInput) -> Result<FormulaCount> {
    input.validate()?;
    let (m, l1, p, r) = (
        input.m as u128,
        (input.l_layers - 1) as u128,
        input.p as u128,
        input.r as u128,
    );
    // everything times 4
    let adds4 = (4 * p * l1 * m * r + 16 * p * l1 * m)
        .checked_sub(l1 * m)
        .ok_or_else(|| Error::Config("negative addition count".into()))?;
    let muls4 = 2 * p * l1 * m * r + 23 * p * m * l1;
    let (adds, ra) = round_half_up(adds4, 4);
    let (muls, rm) = round_half_up(muls4, 4);
    Ok(FormulaCount {
        adds,
        muls,
        rounded: ra || rm,
    })
}

/// Operation counts with recursion truncated after `λ` levels:
///
/// ```text
/// adds = p(L-1)M²/2^(λ-1) + pλ(L-1)M + (3/4)p(L-1)M
/// muls = (L-1)pM²/2^(λ-1) + 3Mp(L-1) + (3/4)pλ(L-1)M
/// ```
pub fn flops_truncated(input: &FlopFormulaInput) -> Result<FormulaCount> {
    input.validate()?;
    if input.lambda < 1 || input.lambda > 64 {
        return config(format!("lambda = {} out of range", input.lambda));
    }
    let (m, l1, p, lam) = (
        input.m as u128,
        (input.l_layers - 1) as u128,
        input.p as u128,
        input.lambda as u128,
    );
    let half = 1u128 << (lam - 1);
    // common denominator 4·2^(λ-1)
    let den = 4 * half;
    let adds = 4 * p * l1 * m * m + p * lam * l1 * m * den + 3 * p * l1 * m * half;
    let muls = 4 * l1 * p * m * m + 3 * m * p * l1 * den + 3 * p * lam * l1 * m * half;
    let (adds, ra) = round_half_up(adds, den);
    let (muls, rm) = round_half_up(muls, den);
    Ok(FormulaCount {
        adds,
        muls,
        rounded: ra || rm,
    })
}

/// How [`flops_counted`] charges each structural piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    pub complex_diagonal: String,
    pub butterfly: String,
    pub leaf_block: String,
    pub chain_scale: String,
    pub dense_matvec: String,
    pub bias: String,
    pub activation: String,
    pub delay: String,
    pub skip: String,
    pub submatrix_sum: String,
    pub permutation_and_padding: String,
    pub parameters: String,
    pub formula_rounding: String,
    pub pr_flops: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            complex_diagonal: "2 real muls per complex entry (one scaling per real-split coordinate)".into(),
            butterfly: "per level of size S: S/2 twiddles at 2 muls each, S complex add/sub at 2 adds each".into(),
            leaf_block: "each dense complex L x L leaf: 4L^2 muls, 2L(2L-1) adds".into(),
            chain_scale: "global chain normalization folded into the adjacent diagonal, 0 ops".into(),
            dense_matvec: "rows*cols muls, rows*(cols-1) adds".into(),
            bias: "1 add per element".into(),
            activation: "1 mul per element".into(),
            delay: "full complex multiply per entry: 4 muls, 2 adds".into(),
            skip: "1 mul and 1 add per element".into(),
            submatrix_sum: "(p-1)*M adds to accumulate the p output submatrices".into(),
            permutation_and_padding: "0 ops".into(),
            parameters: "trainable real scalars; complex entries count 2; frozen delay, permutation and padding count 0; one twiddle diagonal per level shared by siblings; one leaf block per chain".into(),
            formula_rounding: "closed forms evaluated exactly, rounded half up".into(),
            pr_flops: "StNN truncated-recursion closed form against counted FFNN operations".into(),
        }
    }
}

/// Structural operation count of one forward pass.
pub fn flops_counted(net: &Network) -> OpCount {
    let cfg = net.config();
    let (n, m, p, hidden) = (cfg.n, cfg.m(), cfg.p, cfg.hidden());
    let mut per_block = OpCount::ZERO;
    match cfg.kind {
        ModelKind::FullyConnected => {
            per_block += OpCount::dense_matvec(hidden, 2 * n);
            per_block += OpCount::dense_matvec(2 * n, hidden);
        }
        ModelKind::Structured => {
            let chain = net.chain_layout().expect("structured network has a chain");
            let diag = |k: usize| OpCount::new(0, 2 * k as u64);
            let mut chain_ops = OpCount::ZERO;
            for _ in 0..chain.depth() {
                chain_ops += OpCount::new(2 * m as u64, m as u64);
            }
            let ls = chain.leaf_size() as u64;
            let leaves = (m as u64) / ls;
            chain_ops += OpCount::new(leaves * 2 * ls * (2 * ls - 1), leaves * 4 * ls * ls);
            let w1_sub = diag(n) + chain_ops + diag(m);
            let w4_sub = chain_ops + diag(n);
            per_block += w1_sub.scaled(p as u64) + w4_sub.scaled(p as u64);
            per_block += OpCount::new(((p - 1) * m) as u64, 0);
        }
    }
    let h = hidden as u64;
    per_block += OpCount::new(h, 0); // bias
    per_block += OpCount::new(0, h); // activation
    per_block += OpCount::new(2 * (p * m) as u64, 4 * (p * m) as u64); // delay
    per_block += OpCount::new(h, h); // skip
    per_block += OpCount::new(2 * n as u64, 0); // output bias
    per_block.scaled(cfg.blocks() as u64)
}

/// `(reference - value) / reference · 100`.
pub fn percent_reduction(reference: f64, value: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (reference - value) / reference * 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityConfig {
    pub n: usize,
    pub p: usize,
    pub lambda: u32,
    pub l_layers: usize,
}

/// One line of the reduction table, in CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub n: usize,
    pub model: String,
    pub params: usize,
    pub flops_formula_add: u64,
    pub flops_formula_mul: u64,
    pub flops_counted_add: u64,
    pub flops_counted_mul: u64,
    pub pr_weights_pct: f64,
    pub pr_flops_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub version: String,
    /// Configurations the rows were built from. Empty when read back from CSV.
    pub configs: Vec<ComplexityConfig>,
    pub rows: Vec<ComplexityRow>,
    pub conventions: Conventions,
}

pub const CSV_HEADER: &str =
    "n,model,params,flops_formula_add,flops_formula_mul,flops_counted_add,flops_counted_mul,pr_weights_pct,pr_flops_pct";

/// Dense-network closed form for the same topology, used as the FFNN
/// formula column.
pub fn ffnn_flops_formula(n: usize, p: usize, l_layers: usize) -> FormulaCount {
    let (io, h) = (2 * n as u64, 4 * (p * n) as u64);
    let blocks = ((l_layers - 1) / 4) as u64;
    let muls = 2 * h * io + h + 2 * h + h;
    let adds = h * (io - 1) + io * (h - 1) + h + h + h + io;
    FormulaCount {
        adds: blocks * adds,
        muls: blocks * muls,
        rounded: false,
    }
}

/// Closed-form count for `cfg`: the truncated-recursion formula for a
/// structured network, the dense closed form otherwise.
pub fn formula_flops(cfg: &NetworkConfig) -> Result<FormulaCount> {
    match cfg.kind {
        ModelKind::Structured => {
            flops_truncated(&FlopFormulaInput::for_network(cfg.n, cfg.p, cfg.lambda, cfg.l_layers))
        }
        ModelKind::FullyConnected => Ok(ffnn_flops_formula(cfg.n, cfg.p, cfg.l_layers)),
    }
}

/// Builds the StNN and FFNN for every configuration and tabulates counts and
/// reductions. The StNN formula columns use the truncated-recursion form.
pub fn reduction_report(configs: &[ComplexityConfig]) -> Result<ComplexityReport> {
    let mut rows = Vec::with_capacity(2 * configs.len());
    for c in configs {
        let mut scfg = NetworkConfig::structured(c.n, c.p, c.lambda);
        scfg.l_layers = c.l_layers;
        let mut fcfg = NetworkConfig::fully_connected(c.n, c.p);
        fcfg.l_layers = c.l_layers;
        let stnn = build_network(scfg)?;
        let ffnn = build_network(fcfg)?;

        let f_params = ffnn.count_parameters().total;
        let f_counted = flops_counted(&ffnn);
        let f_formula = ffnn_flops_formula(c.n, c.p, c.l_layers);
        let s_params = stnn.count_parameters().total;
        let s_counted = flops_counted(&stnn);
        let s_formula = flops_truncated(&FlopFormulaInput::for_network(c.n, c.p, c.lambda, c.l_layers))?;

        rows.push(ComplexityRow {
            n: c.n,
            model: "stnn".into(),
            params: s_params,
            flops_formula_add: s_formula.adds,
            flops_formula_mul: s_formula.muls,
            flops_counted_add: s_counted.adds,
            flops_counted_mul: s_counted.muls,
            pr_weights_pct: percent_reduction(f_params as f64, s_params as f64),
            pr_flops_pct: percent_reduction(f_counted.total() as f64, s_formula.total() as f64),
        });
        rows.push(ComplexityRow {
            n: c.n,
            model: "ffnn".into(),
            params: f_params,
            flops_formula_add: f_formula.adds,
            flops_formula_mul: f_formula.muls,
            flops_counted_add: f_counted.adds,
            flops_counted_mul: f_counted.muls,
            pr_weights_pct: 0.0,
            pr_flops_pct: 0.0,
        });
    }
    Ok(ComplexityReport {
        version: VERSION.to_string(),
        configs: configs.to_vec(),
        rows,
        conventions: Conventions::default(),
    })
}

impl ComplexityReport {
    pub fn row(&self, n: usize, model: &str) -> Option<&ComplexityRow> {
        self.rows.iter().find(|r| r.n == n && r.model == model)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Parses a table written by [`ComplexityReport::to_csv`]. Conventions are
    /// not part of the CSV and come back as the current defaults.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != CSV_HEADER {
            return Err(Error::Format(format!("unexpected complexity header {header:?}")));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ComplexityRow>, _>>()?;
        Ok(Self {
            version: VERSION.to_string(),
            configs: Vec::new(),
            rows,
            conventions: Conventions::default(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `complexity.csv` and `complexity.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("complexity.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("complexity.json"), self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(m: u64, l: u64, p: u64, r: u64, lambda: u64) -> FlopFormulaInput {
        FlopFormulaInput {
            m,
            l_layers: l,
            p,
            r,
            lambda,
        }
    }

    #[test]
    fn full_formula_hand_values() {
        // adds = 1·4·16·3 + 4·1·4·16 - 16 = 192 + 256 - 16
        let c = flops_full(&input(16, 5, 1, 3, 1)).unwrap();
        assert_eq!(c.adds, 432);
        // muls = (1/2)·4·16·3 + (23/4)·16·4 = 96 + 368
        assert_eq!(c.muls, 464);
        assert!(!c.rounded);
    }

    #[test]
    fn full_formula_scaling() {
        let base = flops_full(&input(16, 5, 1, 3, 1)).unwrap();
        let deep = flops_full(&input(16, 9, 1, 3, 1)).unwrap();
        assert_eq!((deep.adds, deep.muls), (2 * base.adds, 2 * base.muls));
        let p2 = flops_full(&input(16, 5, 2, 3, 1)).unwrap();
        // the first two add terms double, the last does not
        assert_eq!(p2.adds, 2 * (192 + 256) - 16);
    }

    #[test]
    fn truncated_formula_values() {
        let totals: Vec<u64> = [(16, 4), (32, 5), (64, 6)]
            .iter()
            .map(|&(m, lam)| flops_truncated(&input(m, 5, 1, 0, lam)).unwrap().total())
            .collect();
        assert_eq!(totals, vec![944, 2112, 4672]);
    }

    #[test]
    fn rounding_is_flagged() {
        // (3/4)·p·(L-1)·M with M = 2, L = 2: 1.5 adds
        let c = flops_truncated(&input(2, 2, 1, 0, 1)).unwrap();
        assert!(c.rounded);
        assert_eq!(round_half_up(5, 2), (3, true));
        assert_eq!(round_half_up(6, 2), (3, false));
        assert_eq!(round_half_up(7, 4), (2, true));
    }

    #[test]
    fn formulas_increase_with_size() {
        let f = |m, l, p| flops_full(&input(m, l, p, 3, 1)).unwrap().total();
        assert!(f(32, 5, 1) > f(16, 5, 1));
        assert!(f(16, 9, 1) > f(16, 5, 1));
        assert!(f(16, 5, 2) > f(16, 5, 1));
        let t = |lam| flops_truncated(&input(32, 5, 1, 0, lam)).unwrap().total();
        for lam in 1..5 {
            assert!(t(lam + 1) < t(lam));
        }
    }

    #[test]
    fn counted_ffnn_matches_closed_form() {
        for (n, want) in [(8, 2240), (16, 8576), (32, 33536)] {
            let net = build_network(NetworkConfig::fully_connected(n, 1)).unwrap();
            let c = flops_counted(&net);
            assert_eq!(c.total(), want);
            let f = ffnn_flops_formula(n, 1, 5);
            assert_eq!((f.adds, f.muls), (c.adds, c.muls));
        }
    }

    #[test]
    fn counted_structured_totals() {
        let totals: Vec<u64> = [(8, 4), (16, 5), (32, 6)]
            .iter()
            .map(|&(n, lam)| flops_counted(&build_network(NetworkConfig::structured(n, 1, lam)).unwrap()).total())
            .collect();
        assert_eq!(totals, vec![880, 1952, 4288]);
    }

    #[test]
    fn self_reduction_is_zero() {
        assert_eq!(percent_reduction(1104.0, 1104.0), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let cfgs: Vec<_> = [(8, 4), (16, 5)]
            .iter()
            .map(|&(n, lambda)| ComplexityConfig {
                n,
                p: 1,
                lambda,
                l_layers: 5,
            })
            .collect();
        let rep = reduction_report(&cfgs).unwrap();
        let csv = rep.to_csv().unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        let back = ComplexityReport::from_csv(&csv).unwrap();
        assert_eq!(back.rows, rep.rows);
        assert!(back.configs.is_empty());
        assert!(ComplexityReport::from_csv("a,b\n1,2\n").is_err());
    }
}
