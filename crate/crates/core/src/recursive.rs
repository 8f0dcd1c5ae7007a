//! Recursive radix-2 factorization of DFT-like matrices.
//!
//! A size-`S` block is factored as
//!
//! ```text
//! F_S = P_S · (F_{S/2} ⊕ F_{S/2}) · H_S,    H_S = [[I, I], [D̃, -D̃]]
//! ```
//!
//! (sum/difference butterfly first, half-size blocks, then the even-odd
//! interleave `P_S`). After `depth` levels the remaining `leaf x leaf` blocks
//! are dense. With DFT twiddles and DFT leaves this is exactly the
//! decimation-in-frequency FFT; with free twiddles and leaves it is the
//! trainable butterfly used inside the network.
//!
//! Parameters of one chain live in a single complex slice: the twiddle
//! diagonal of every level (level 0 first), then the leaf block row-major.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dvm::{Factor, FactorChain};
use crate::error::{config, Result};
use crate::fft::log2_exact;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Frozen structure of a recursive chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayout {
    size: usize,
    depth: u32,
    /// Each sibling block keeps its own twiddle diagonal instead of sharing one
    /// per level.
    independent_twiddles: bool,
}

impl ChainLayout {
    pub fn new(size: usize, depth: u32, independent_twiddles: bool) -> Result<Self> {
        let Some(max_depth) = log2_exact(size) else {
            return config(format!("chain size {size} is not a power of two"));
        };
        if depth < 1 || depth > max_depth {
            return config(format!(
                "recursion depth {depth} out of range 1..={max_depth} for size {size}"
            ));
        }
        Ok(Self {
            size,
            depth,
            independent_twiddles,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn independent_twiddles(&self) -> bool {
        self.independent_twiddles
    }

    pub fn leaf_size(&self) -> usize {
        self.size >> self.depth
    }

    fn block_size(&self, level: u32) -> usize {
        self.size >> level
    }

    /// Stored twiddles at `level`.
    pub fn twiddle_len(&self, level: u32) -> usize {
        if self.independent_twiddles {
            self.size / 2
        } else {
            self.block_size(level) / 2
        }
    }

    fn twiddle_offset(&self, level: u32) -> usize {
        (0..level).map(|l| self.twiddle_len(l)).sum()
    }

    pub fn twiddle_total(&self) -> usize {
        self.twiddle_offset(self.depth)
    }

    pub fn leaf_len(&self) -> usize {
        self.leaf_size() * self.leaf_size()
    }

    /// Complex parameters held by one chain.
    pub fn param_len(&self) -> usize {
        self.twiddle_total() + self.leaf_len()
    }

    /// Twiddles used by block `block` at `level`.
    fn twiddles<'a>(&self, params: &'a [Complex64], level: u32, block: usize) -> &'a [Complex64] {
        let half = self.block_size(level) / 2;
        let mut off = self.twiddle_offset(level);
        if self.independent_twiddles {
            off += block * half;
        }
        &params[off..off + half]
    }

    fn twiddle_range(&self, level: u32, block: usize) -> std::ops::Range<usize> {
        let half = self.block_size(level) / 2;
        let mut off = self.twiddle_offset(level);
        if self.independent_twiddles {
            off += block * half;
        }
        off..off + half
    }

    fn leaf_range(&self) -> std::ops::Range<usize> {
        let off = self.twiddle_total();
        off..off + self.leaf_len()
    }

    /// DFT twiddles and a DFT leaf; the conjugate set when `inverse`.
    pub fn exact_params(&self, inverse: bool) -> Vec<Complex64> {
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut p = Vec::with_capacity(self.param_len());
        for level in 0..self.depth {
            let b = self.block_size(level);
            let copies = if self.independent_twiddles { 1 << level } else { 1 };
            for _ in 0..copies {
                p.extend((0..b / 2).map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / b as f64)));
            }
        }
        let ls = self.leaf_size();
        for i in 0..ls {
            for j in 0..ls {
                let e = (i * j) % ls;
                p.push(Complex64::from_polar(1.0, sign * 2.0 * PI * e as f64 / ls as f64));
            }
        }
        p
    }

    /// Applies the chain, then multiplies by `scale`.
    pub fn apply(
        &self,
        params: &[Complex64],
        scale: f64,
        x: &[Complex64],
        mut trace: Option<&mut ChainTrace>,
    ) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.size);
        debug_assert_eq!(params.len(), self.param_len());
        let mut v = x.to_vec();
        if let Some(t) = trace.as_deref_mut() {
            t.states.clear();
        }
        for level in 0..self.depth {
            if let Some(t) = trace.as_deref_mut() {
                t.states.push(v.clone());
            }
            let half = self.block_size(level) / 2;
            for (b, block) in v.chunks_mut(2 * half).enumerate() {
                let tw = self.twiddles(params, level, b);
                let (top, bot) = block.split_at_mut(half);
                for k in 0..half {
                    let (a, c) = (top[k], bot[k]);
                    top[k] = a + c;
                    bot[k] = tw[k] * (a - c);
                }
            }
        }
        if let Some(t) = trace {
            t.states.push(v.clone());
        }
        let ls = self.leaf_size();
        let leaf = &params[self.leaf_range()];
        let mut out = vec![ZERO; self.size];
        for (src, dst) in v.chunks(ls).zip(out.chunks_mut(ls)) {
            for i in 0..ls {
                let row = &leaf[i * ls..(i + 1) * ls];
                dst[i] = row.iter().zip(src).map(|(a, b)| a * b).sum();
            }
        }
        let mut scratch = vec![ZERO; self.size];
        for level in (0..self.depth).rev() {
            let b = self.block_size(level);
            for (src, dst) in out.chunks(b).zip(scratch.chunks_mut(b)) {
                interleave(src, dst);
            }
            std::mem::swap(&mut out, &mut scratch);
        }
        if scale != 1.0 {
            out.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    /// Reverse-mode pass. `g_out` is the cogradient `∂L/∂Re y + j·∂L/∂Im y`;
    /// parameter cogradients are accumulated into `g_params` and the input
    /// cogradient is returned.
    pub fn backward(
        &self,
        params: &[Complex64],
        scale: f64,
        trace: &ChainTrace,
        g_out: &[Complex64],
        g_params: &mut [Complex64],
    ) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = g_out.iter().map(|v| v * scale).collect();
        let mut scratch = vec![ZERO; self.size];
        for level in 0..self.depth {
            let b = self.block_size(level);
            for (src, dst) in g.chunks(b).zip(scratch.chunks_mut(b)) {
                deinterleave(src, dst);
            }
            std::mem::swap(&mut g, &mut scratch);
        }

        let ls = self.leaf_size();
        let leaf_range = self.leaf_range();
        let leaf = &params[leaf_range.clone()];
        let leaf_in = &trace.states[self.depth as usize];
        let mut g_in = vec![ZERO; self.size];
        for ((gy, u), gx) in g.chunks(ls).zip(leaf_in.chunks(ls)).zip(g_in.chunks_mut(ls)) {
            for i in 0..ls {
                for j in 0..ls {
                    g_params[leaf_range.start + i * ls + j] += gy[i] * u[j].conj();
                    gx[j] += leaf[i * ls + j].conj() * gy[i];
                }
            }
        }

        let mut g = g_in;
        for level in (0..self.depth).rev() {
            let state = &trace.states[level as usize];
            let half = self.block_size(level) / 2;
            for (b, (gblock, sblock)) in g.chunks_mut(2 * half).zip(state.chunks(2 * half)).enumerate() {
                let range = self.twiddle_range(level, b);
                let (gt, gb) = gblock.split_at_mut(half);
                for k in 0..half {
                    let d = sblock[k] - sblock[half + k];
                    let tw = params[range.start + k];
                    g_params[range.start + k] += gb[k] * d.conj();
                    let gd = tw.conj() * gb[k];
                    let top = gt[k];
                    gt[k] = top + gd;
                    gb[k] = top - gd;
                }
            }
        }
        g
    }
}

fn interleave(src: &[Complex64], dst: &mut [Complex64]) {
    let h = src.len() / 2;
    for i in 0..h {
        dst[2 * i] = src[i];
        dst[2 * i + 1] = src[h + i];
    }
}

fn deinterleave(src: &[Complex64], dst: &mut [Complex64]) {
    let h = src.len() / 2;
    for i in 0..h {
        dst[i] = src[2 * i];
        dst[h + i] = src[2 * i + 1];
    }
}

/// Intermediate states of one chain application: the vector entering each
/// butterfly level, then the vector entering the leaf blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainTrace {
    pub states: Vec<Vec<Complex64>>,
}

/// An owned recursive chain with its parameters and global scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveDftChain {
    pub layout: ChainLayout,
    pub params: Vec<Complex64>,
    pub scale: f64,
}

/// Builds a chain of `size` with `depth` butterfly levels.
///
/// With `exact` the chain equals the unnormalized DFT. Otherwise the twiddles
/// are ones and the leaf is the identity, ready to be overwritten by an
/// initializer.
pub fn build_recursive_dft_chain(size: usize, depth: u32, exact: bool) -> Result<RecursiveDftChain> {
    let layout = ChainLayout::new(size, depth, false)?;
    let params = if exact {
        layout.exact_params(false)
    } else {
        let ls = layout.leaf_size();
        let mut p = vec![Complex64::new(1.0, 0.0); layout.twiddle_total()];
        p.extend((0..ls * ls).map(|i| {
            if i / ls == i % ls {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        }));
        p
    };
    Ok(RecursiveDftChain {
        layout,
        params,
        scale: 1.0,
    })
}

impl RecursiveDftChain {
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.layout.apply(&self.params, self.scale, x, None)
    }

    /// The chain as explicit sparse factors (butterflies, leaf blocks,
    /// permutations, scale).
    pub fn to_factor_chain(&self) -> FactorChain {
        let l = &self.layout;
        let mut factors = Vec::new();
        for level in 0..l.depth {
            let blocks = 1usize << level;
            let mut tw = Vec::with_capacity(l.size / 2);
            for b in 0..blocks {
                tw.extend_from_slice(l.twiddles(&self.params, level, b));
            }
            factors.push(Factor::Butterfly { twiddles: tw, blocks });
        }
        let ls = l.leaf_size();
        let leaf = DMatrix::from_row_slice(ls, ls, &self.params[l.leaf_range()]);
        factors.push(Factor::BlockDense {
            block: leaf,
            blocks: 1 << l.depth,
        });
        for level in (0..l.depth).rev() {
            factors.push(Factor::EvenOddPermutation {
                size: l.block_size(level),
                blocks: 1 << level,
            });
        }
        if self.scale != 1.0 {
            factors.push(Factor::Scale {
                size: l.size,
                factor: self.scale,
            });
        }
        FactorChain::new(factors).expect("layout composes")
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.to_factor_chain().to_dense()
    }
}
