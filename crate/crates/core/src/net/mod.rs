//! Structured (StNN) and fully connected beamforming networks.
//!
//! One block maps `2N` real inputs to `2N` real outputs through four weight
//! stages:
//!
//! 1. `W1`: `p` factored submatrices `D̆ · F · J · D̂` (or one dense matrix),
//!    plus bias and leaky activation, giving `4pN` hidden units;
//! 2. a frozen delay `diag(α^k)` on the complex view of the hidden vector;
//! 3. a trainable diagonal skip from the activated hidden vector;
//! 4. `W4`: `p` factored submatrices `D̂ · Jᵀ · F*` summed (or one dense
//!    matrix), plus the output bias.
//!
//! Deeper networks repeat the block; `l_layers - 1` must be a multiple of 4.
//!
//! All trainable scalars live in one flat `f64` vector. Complex parameters
//! occupy consecutive `(re, im)` pairs. Frozen structure (permutations, pads,
//! delay exponents, chain normalization) is never stored in that vector.

mod forward;
mod io;

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dvm::{chirp_diagonal, circulant_spectrum, DvmSpec};
use crate::error::{config, Result};
use crate::fft::log2_exact;
use crate::phase;
use crate::recursive::ChainLayout;

pub(crate) use forward::diag_backward;
pub use forward::{leaky_relu, real_join, real_split, BlockTrace, ForwardTrace, SubInTrace, SubOutTrace};
pub use io::NetworkExport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Structured,
    FullyConnected,
}

/// How the `D̂`/`D̆` diagonals act on complex coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagMode {
    /// Complex multiply by a complex entry.
    Complex,
    /// Independent real scalings of the real and imaginary parts.
    RealSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n: usize,
    pub p: usize,
    pub lambda: u32,
    pub l_layers: usize,
    pub activation_slope: f64,
    pub kind: ModelKind,
    pub delay_alpha: Complex64,
    pub seed: u64,
    pub diag_mode: DiagMode,
    pub independent_twiddles: bool,
}

impl NetworkConfig {
    pub fn structured(n: usize, p: usize, lambda: u32) -> Self {
        Self {
            n,
            p,
            lambda,
            l_layers: 5,
            activation_slope: 0.2,
            kind: ModelKind::Structured,
            delay_alpha: Complex64::new(1.0, 0.0),
            seed: 0,
            diag_mode: DiagMode::Complex,
            independent_twiddles: false,
        }
    }

    pub fn fully_connected(n: usize, p: usize) -> Self {
        Self {
            kind: ModelKind::FullyConnected,
            lambda: 1,
            ..Self::structured(n, p, 1)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delay_alpha(mut self, alpha: Complex64) -> Self {
        self.delay_alpha = alpha;
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.activation_slope = slope;
        self
    }

    /// Complex width `M = 2N` of one factored submatrix.
    pub fn m(&self) -> usize {
        2 * self.n
    }

    /// Real width `4pN` of the hidden layers.
    pub fn hidden(&self) -> usize {
        4 * self.p * self.n
    }

    pub fn blocks(&self) -> usize {
        (self.l_layers - 1) / 4
    }

    pub fn validate(&self) -> Result<()> {
        match log2_exact(self.n) {
            Some(r) if r >= 1 => {}
            _ => return config(format!("N = {} must be a power of two >= 2", self.n)),
        }
        if self.p == 0 {
            return config("p must be at least 1");
        }
        if self.l_layers < 5 || !(self.l_layers - 1).is_multiple_of(4) {
            return config(format!(
                "l_layers = {} must be 5, 9, 13, ... (L - 1 a multiple of 4)",
                self.l_layers
            ));
        }
        if !self.activation_slope.is_finite() {
            return config("activation slope is not finite");
        }
        if (self.delay_alpha.norm() - 1.0).abs() > 1e-12 {
            return config("delay alpha must have unit modulus");
        }
        if self.kind == ModelKind::Structured {
            let max = self.m().trailing_zeros();
            if self.lambda < 1 || self.lambda > max {
                return config(format!(
                    "lambda = {} out of range 1..={max} for N = {}",
                    self.lambda, self.n
                ));
            }
        }
        Ok(())
    }
}

/// Storage class of one parameter segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    ComplexDiagonal,
    RealSplitDiagonal,
    /// Twiddles and leaf of one recursive chain.
    Chain,
    /// Row-major dense real matrix.
    Dense {
        rows: usize,
        cols: usize,
    },
    RealVector,
}

/// A named slice of the flat parameter vector, in `f64` units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub layer: String,
    pub offset: usize,
    pub len: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SubIn {
    pub d_hat: Range<usize>,
    pub chain: Range<usize>,
    pub d_breve: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SubOut {
    pub chain: Range<usize>,
    pub d_hat: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Stage {
    Factored { subs_in: Vec<SubIn>, subs_out: Vec<SubOut> },
    Dense { w1: Range<usize>, w4: Range<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockLayout {
    pub stage: Stage,
    pub bias1: Range<usize>,
    pub skip: Range<usize>,
    pub bias_out: Range<usize>,
}

/// Per-layer trainable counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub per_layer: Vec<(String, usize)>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    chain: Option<ChainLayout>,
    chain_scale: f64,
    blocks: Vec<BlockLayout>,
    segments: Vec<Segment>,
    delay_exponents: Vec<i64>,
    delay: Vec<Complex64>,
    params: Vec<f64>,
}

struct LayoutBuilder {
    segments: Vec<Segment>,
    len: usize,
}

impl LayoutBuilder {
    fn push(&mut self, layer: &str, name: String, len: usize, kind: SegmentKind) -> Range<usize> {
        let r = self.len..self.len + len;
        self.segments.push(Segment {
            name,
            layer: layer.to_string(),
            offset: self.len,
            len,
            kind,
        });
        self.len += len;
        r
    }
}

/// Builds a network with seeded random parameters.
pub fn build_network(config: NetworkConfig) -> Result<Network> {
    let mut net = Network::with_layout(config)?;
    net.randomize_weights();
    Ok(net)
}

impl Network {
    fn with_layout(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (n, m, p, hidden) = (config.n, config.m(), config.p, config.hidden());
        let chain = match config.kind {
            ModelKind::Structured => Some(ChainLayout::new(m, config.lambda, config.independent_twiddles)?),
            ModelKind::FullyConnected => None,
        };
        let diag_kind = match config.diag_mode {
            DiagMode::Complex => SegmentKind::ComplexDiagonal,
            DiagMode::RealSplit => SegmentKind::RealSplitDiagonal,
        };
        let mut b = LayoutBuilder {
            segments: Vec::new(),
            len: 0,
        };
        let mut blocks = Vec::new();
        for blk in 0..config.blocks() {
            let tag = |s: &str| format!("block{blk}.{s}");
            let (w1_layer, w4_layer) = (tag("w1"), tag("w4"));
            let mut subs_in = Vec::new();
            let mut dense_w1 = None;
            if let Some(cl) = chain {
                for i in 0..p {
                    let d_hat = b.push(&w1_layer, format!("{w1_layer}[{i}].d_hat"), 2 * n, diag_kind);
                    let ch = b.push(
                        &w1_layer,
                        format!("{w1_layer}[{i}].f"),
                        2 * cl.param_len(),
                        SegmentKind::Chain,
                    );
                    let d_breve = b.push(&w1_layer, format!("{w1_layer}[{i}].d_breve"), 2 * m, diag_kind);
                    subs_in.push(SubIn {
                        d_hat,
                        chain: ch,
                        d_breve,
                    });
                }
            } else {
                dense_w1 = Some(b.push(
                    &w1_layer,
                    format!("{w1_layer}.weight"),
                    hidden * 2 * n,
                    SegmentKind::Dense {
                        rows: hidden,
                        cols: 2 * n,
                    },
                ));
            }
            let bias1 = b.push(&tag("bias1"), tag("bias1"), hidden, SegmentKind::RealVector);
            let skip = b.push(&tag("skip"), tag("skip"), hidden, SegmentKind::RealVector);
            let stage = if let Some(cl) = chain {
                let mut subs_out = Vec::new();
                for i in 0..p {
                    let ch = b.push(
                        &w4_layer,
                        format!("{w4_layer}[{i}].f_star"),
                        2 * cl.param_len(),
                        SegmentKind::Chain,
                    );
                    let d_hat = b.push(&w4_layer, format!("{w4_layer}[{i}].d_hat"), 2 * n, diag_kind);
                    subs_out.push(SubOut { chain: ch, d_hat });
                }
                Stage::Factored { subs_in, subs_out }
            } else {
                let w4 = b.push(
                    &w4_layer,
                    format!("{w4_layer}.weight"),
                    2 * n * hidden,
                    SegmentKind::Dense {
                        rows: 2 * n,
                        cols: hidden,
                    },
                );
                Stage::Dense {
                    w1: dense_w1.expect("dense stage"),
                    w4,
                }
            };
            let bias_out = b.push(&tag("bias_out"), tag("bias_out"), 2 * n, SegmentKind::RealVector);
            blocks.push(BlockLayout {
                stage,
                bias1,
                skip,
                bias_out,
            });
        }
        let delay_exponents: Vec<i64> = (0..(p * m) as i64).collect();
        let chain_scale = chain.map(|c| 1.0 / ((1u64 << c.depth()) as f64).sqrt()).unwrap_or(1.0);
        let mut net = Self {
            chain_scale,
            chain,
            blocks,
            segments: b.segments,
            delay: Vec::new(),
            delay_exponents,
            params: vec![0.0; b.len],
            config,
        };
        net.refresh_delay();
        Ok(net)
    }

    fn refresh_delay(&mut self) {
        let ph = self.config.delay_alpha.arg();
        self.delay = self.delay_exponents.iter().map(|&k| phase::cis(ph, k as f64)).collect();
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn chain_layout(&self) -> Option<ChainLayout> {
        self.chain
    }

    pub fn chain_scale(&self) -> f64 {
        self.chain_scale
    }

    pub fn delay_exponents(&self) -> &[i64] {
        &self.delay_exponents
    }

    pub(crate) fn blocks(&self) -> &[BlockLayout] {
        &self.blocks
    }

    pub(crate) fn delay_factors(&self) -> &[Complex64] {
        &self.delay
    }

    /// Replaces the frozen delay exponents.
    pub fn set_delay_exponents(&mut self, exps: Vec<i64>) -> Result<()> {
        if exps.len() != self.delay_exponents.len() {
            return config(format!(
                "expected {} delay exponents, got {}",
                self.delay_exponents.len(),
                exps.len()
            ));
        }
        self.delay_exponents = exps;
        self.refresh_delay();
        Ok(())
    }

    /// Sets every delay exponent to zero, turning the delay layer into the
    /// identity.
    pub fn with_zero_delay(mut self) -> Self {
        let len = self.delay_exponents.len();
        self.set_delay_exponents(vec![0; len]).expect("same length");
        self
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return config(format!(
                "parameter vector has {} entries, network needs {}",
                params.len(),
                self.params.len()
            ));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Name of the segment holding flat index `i`, with the offset inside it.
    pub fn param_path(&self, i: usize) -> String {
        match self.segments.iter().find(|s| s.range().contains(&i)) {
            Some(s) => format!("{}[{}]", s.name, i - s.offset),
            None => format!("param[{i}]"),
        }
    }

    pub fn count_parameters(&self) -> ParamCount {
        let mut per_layer: Vec<(String, usize)> = Vec::new();
        for s in &self.segments {
            match per_layer.last_mut() {
                Some((layer, count)) if *layer == s.layer => *count += s.len,
                _ => per_layer.push((s.layer.clone(), s.len)),
            }
        }
        ParamCount {
            total: self.params.len(),
            per_layer,
        }
    }

    /// Seeded initialization: unit-modulus complex entries with random phase
    /// scaled by `1/√fan_in`, uniform `±1/√fan_in` dense weights, zero biases
    /// and a zero skip diagonal.
    pub fn randomize_weights(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let leaf_size = self.chain.map(|c| c.leaf_size()).unwrap_or(1);
        let twiddles = self.chain.map(|c| c.twiddle_total()).unwrap_or(0);
        for s in self.segments.clone() {
            let vals = &mut self.params[s.range()];
            match s.kind {
                SegmentKind::ComplexDiagonal => fill_unit_phases(&mut rng, vals, 1.0),
                SegmentKind::RealSplitDiagonal => {
                    for v in vals.iter_mut() {
                        *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    }
                }
                SegmentKind::Chain => {
                    let (tw, leaf) = vals.split_at_mut(2 * twiddles);
                    fill_unit_phases(&mut rng, tw, 1.0);
                    fill_unit_phases(&mut rng, leaf, 1.0 / (leaf_size as f64).sqrt());
                }
                SegmentKind::Dense { cols, .. } => {
                    let bound = 1.0 / (cols as f64).sqrt();
                    for v in vals.iter_mut() {
                        *v = rng.random_range(-bound..bound);
                    }
                }
                SegmentKind::RealVector => vals.fill(0.0),
            }
        }
    }

    /// Randomizes every trainable scalar, including biases and the skip
    /// diagonal. Used to exercise all gradient paths.
    pub fn randomize_all(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.config.seed = seed;
        self.randomize_weights();
        for s in self.segments.clone() {
            if s.kind == SegmentKind::RealVector {
                for v in &mut self.params[s.range()] {
                    *v = rng.random_range(-0.5..0.5);
                }
            }
        }
    }
}

fn fill_unit_phases(rng: &mut ChaCha8Rng, vals: &mut [f64], modulus: f64) {
    for pair in vals.chunks_mut(2) {
        let th: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pair[0] = modulus * th.cos();
        pair[1] = modulus * th.sin();
    }
}

pub(crate) fn as_complex(v: &[f64]) -> &[Complex64] {
    bytemuck::cast_slice(v)
}

pub(crate) fn as_complex_mut(v: &mut [f64]) -> &mut [Complex64] {
    bytemuck::cast_slice_mut(v)
}

/// Exact chain parameters with the leaf block normalized, so that together
/// with the `1/√(2^depth)` chain scale the chain is the unitary DFT.
fn normalized_exact(chain: &ChainLayout, inverse: bool) -> Vec<Complex64> {
    let mut p = chain.exact_params(inverse);
    let leaf = 1.0 / (chain.leaf_size() as f64).sqrt();
    p[chain.twiddle_total()..].iter_mut().for_each(|v| *v *= leaf);
    p
}

/// Loads the exact factors of `Ã_N` into every submatrix of a structured
/// network. Each output diagonal carries a `1/p` factor so the `p` summed
/// submatrices reproduce `Ã_N` once. Biases and skip are zeroed.
pub fn init_from_dvm(net: &Network, spec: &DvmSpec) -> Result<Network> {
    let cfg = net.config();
    if cfg.kind != ModelKind::Structured {
        return config("DVM initialization needs a structured network");
    }
    if cfg.diag_mode != DiagMode::Complex {
        return config("DVM initialization needs complex diagonals");
    }
    if spec.n() != cfg.n {
        return config(format!("DVM size {} does not match network N = {}", spec.n(), cfg.n));
    }
    let chain = net.chain.expect("structured network has a chain layout");
    let d_hat = chirp_diagonal(spec);
    let d_breve = circulant_spectrum(spec);
    let f = normalized_exact(&chain, false);
    let f_star = normalized_exact(&chain, true);
    let inv_p = 1.0 / cfg.p as f64;
    let d_hat_out: Vec<Complex64> = d_hat.iter().map(|v| v * inv_p).collect();

    let mut out = net.clone();
    out.params.fill(0.0);
    for block in out.blocks.clone() {
        let Stage::Factored { subs_in, subs_out } = &block.stage else {
            unreachable!("structured layout");
        };
        for s in subs_in {
            as_complex_mut(&mut out.params[s.d_hat.clone()]).copy_from_slice(&d_hat);
            as_complex_mut(&mut out.params[s.chain.clone()]).copy_from_slice(&f);
            as_complex_mut(&mut out.params[s.d_breve.clone()]).copy_from_slice(&d_breve);
        }
        for s in subs_out {
            as_complex_mut(&mut out.params[s.chain.clone()]).copy_from_slice(&f_star);
            as_complex_mut(&mut out.params[s.d_hat.clone()]).copy_from_slice(&d_hat_out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ffnn_counts_match_closed_form() {
        for (n, want) in [(8, 1104), (16, 4256), (32, 16704)] {
            let net = build_network(NetworkConfig::fully_connected(n, 1)).unwrap();
            assert_eq!(net.count_parameters().total, want);
            let m = 2 * n;
            assert_eq!(want, 2 * (2 * m * m) + 2 * m + 2 * m + m);
        }
    }

    #[test]
    fn structured_counts() {
        let net = build_network(NetworkConfig::structured(8, 1, 4)).unwrap();
        let c = net.count_parameters();
        // w1: d_hat 16 + chain (15 twiddles + 1 leaf)·2 + d_breve 32
        assert_eq!(c.per_layer[0], ("block0.w1".to_string(), 80));
        assert_eq!(c.per_layer[1], ("block0.bias1".to_string(), 32));
        assert_eq!(c.per_layer[2], ("block0.skip".to_string(), 32));
        assert_eq!(c.per_layer[3], ("block0.w4".to_string(), 48));
        assert_eq!(c.per_layer[4], ("block0.bias_out".to_string(), 16));
        assert_eq!(c.total, 208);
    }

    #[test]
    fn complex_diagonal_counts_two_reals_per_entry() {
        let net = build_network(NetworkConfig::structured(8, 1, 4)).unwrap();
        let d = net
            .segments()
            .iter()
            .find(|s| s.name == "block0.w1[0].d_breve")
            .unwrap();
        assert_eq!(d.len, 32);
        let d = net.segments().iter().find(|s| s.name == "block0.w1[0].d_hat").unwrap();
        assert_eq!(d.len, 16);
    }

    #[test]
    fn config_validation() {
        assert!(build_network(NetworkConfig::structured(6, 1, 2)).is_err());
        assert!(build_network(NetworkConfig::structured(8, 0, 2)).is_err());
        assert!(build_network(NetworkConfig::structured(8, 1, 5)).is_err());
        assert!(build_network(NetworkConfig::structured(8, 1, 0)).is_err());
        let mut c = NetworkConfig::structured(8, 1, 2);
        c.l_layers = 7;
        assert!(build_network(c.clone()).is_err());
        c.l_layers = 9;
        let net = build_network(c).unwrap();
        assert_eq!(net.blocks().len(), 2);
    }

    #[test]
    fn init_is_deterministic() {
        let net = build_network(NetworkConfig::structured(8, 2, 3).with_seed(4)).unwrap();
        let spec = DvmSpec::from_phase(8, -0.3).unwrap();
        let a = init_from_dvm(&net, &spec).unwrap();
        let b = init_from_dvm(&net, &spec).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(a.delay_exponents(), net.delay_exponents());
        assert_eq!(a.params().len(), net.params().len());
    }

    #[test]
    fn init_rejects_dense_and_mismatched() {
        let spec = DvmSpec::from_phase(8, -0.3).unwrap();
        let ffnn = build_network(NetworkConfig::fully_connected(8, 1)).unwrap();
        assert!(init_from_dvm(&ffnn, &spec).is_err());
        let net = build_network(NetworkConfig::structured(4, 1, 2)).unwrap();
        assert!(init_from_dvm(&net, &spec).is_err());
    }

    #[test]
    fn seeded_build_is_reproducible() {
        let a = build_network(NetworkConfig::structured(8, 1, 3).with_seed(9)).unwrap();
        let b = build_network(NetworkConfig::structured(8, 1, 3).with_seed(9)).unwrap();
        let c = build_network(NetworkConfig::structured(8, 1, 3).with_seed(10)).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn param_paths_name_segments() {
        let net = build_network(NetworkConfig::structured(4, 1, 2)).unwrap();
        assert_eq!(net.param_path(0), "block0.w1[0].d_hat[0]");
        let last = net.params().len() - 1;
        assert_eq!(net.param_path(last), "block0.bias_out[7]");
    }
}
