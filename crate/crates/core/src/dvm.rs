//! Delay Vandermonde matrices and their sparse chirp factorization.
//!
//! The scaled DVM `Ã_N[k, l] = α^{kl}` (zero-based `k, l`) factors as
//!
//! ```text
//! Ã_N = D̂_N · Jᵀ · F*_M · D̆_M · F_M · J · D̂_N,   M = 2N
//! ```
//!
//! with `D̂_N = diag(α^{k²/2})`, `J = [I_N; 0_N]`, normalized DFTs `F_M`, and
//! `D̆_M = diag(F̃_M c)` where `F̃_M` is the unnormalized DFT and `c` the first
//! column of the circulant embedding of the chirp `α^{-(k-l)²/2}`.
//!
//! Fractional powers use the stored principal phase: `α^x := e^{jφx}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, shape, Result};
use crate::fft::{self, log2_exact};
use crate::ops::OpCount;
use crate::phase;

/// Size and node value of a delay Vandermonde matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvmSpec {
    n: usize,
    phase: f64,
}

impl DvmSpec {
    /// Builds a spec from a unit-modulus node value.
    pub fn new(n: usize, alpha: Complex64) -> Result<Self> {
        if (alpha.norm() - 1.0).abs() > 1e-12 {
            return config(format!("|alpha| = {} is not 1", alpha.norm()));
        }
        Self::from_phase(n, alpha.arg())
    }

    /// Builds a spec from `α = e^{j·phase}`.
    pub fn from_phase(n: usize, phase: f64) -> Result<Self> {
        match log2_exact(n) {
            Some(r) if r >= 1 => {}
            _ => return config(format!("N = {n} must be a power of two >= 2")),
        }
        if !phase.is_finite() {
            return config("alpha phase is not finite");
        }
        Ok(Self {
            n,
            phase: phase::principal(phase),
        })
    }

    /// `α = e^{-2πj·f·τ}` for a delay `tau_s` at frequency `freq_hz`.
    pub fn from_delay(n: usize, freq_hz: f64, tau_s: f64) -> Result<Self> {
        let cycles = freq_hz * tau_s;
        Self::from_phase(n, -2.0 * std::f64::consts::PI * (cycles - cycles.round()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        2 * self.n
    }

    pub fn r(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn alpha(&self) -> Complex64 {
        self.pow(1.0)
    }

    /// `α^x` on the principal branch.
    pub fn pow(&self, x: f64) -> Complex64 {
        phase::cis(self.phase, x)
    }
}

/// Dense `Ã_N` with entries `α^{kl}`, `k, l ∈ 0..N`.
pub fn build_scaled_dvm_dense(spec: &DvmSpec) -> DMatrix<Complex64> {
    DMatrix::from_fn(spec.n, spec.n, |k, l| spec.pow((k * l) as f64))
}

/// Dense `A_N` with entries `α^{(k+1)l}`.
pub fn build_unscaled_dvm_dense(spec: &DvmSpec) -> DMatrix<Complex64> {
    DMatrix::from_fn(spec.n, spec.n, |k, l| spec.pow(((k + 1) * l) as f64))
}

/// First column `c` of the `M x M` circulant that embeds `α^{-(k-l)²/2}`.
pub fn circulant_first_column(spec: &DvmSpec) -> Vec<Complex64> {
    let n = spec.n;
    let chirp = |m: usize| spec.pow(-((m * m) as f64) / 2.0);
    let mut c = Vec::with_capacity(2 * n);
    c.extend((0..n).map(chirp));
    c.push(Complex64::new(1.0, 0.0));
    c.extend((1..n).map(|m| chirp(n - m)));
    c
}

/// `D̂_N` entries `α^{k²/2}`.
pub fn chirp_diagonal(spec: &DvmSpec) -> Vec<Complex64> {
    (0..spec.n).map(|k| spec.pow((k * k) as f64 / 2.0)).collect()
}

/// `D̆_M` entries: the unnormalized DFT of the circulant column.
pub fn circulant_spectrum(spec: &DvmSpec) -> Vec<Complex64> {
    fft::fft(&circulant_first_column(spec), false).expect("M is a power of two")
}

/// One sparse factor. Factors act on column vectors in chain order.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    ComplexDiagonal(Vec<Complex64>),
    /// Multiplication by a real constant.
    Scale {
        size: usize,
        factor: f64,
    },
    /// `J`: appends zeros, `from -> to`.
    ZeroPad {
        from: usize,
        to: usize,
    },
    /// `Jᵀ`: keeps the first `to` of `from` entries.
    ZeroPadTranspose {
        from: usize,
        to: usize,
    },
    Dft {
        size: usize,
        inverse: bool,
        normalized: bool,
    },
    /// Even-odd interleave applied to each of `blocks` contiguous blocks.
    EvenOddPermutation {
        size: usize,
        blocks: usize,
    },
    /// `H = [[I, I], [D̃, -D̃]]` applied to each of `blocks` contiguous blocks.
    /// `twiddles` holds the `D̃` diagonals of all blocks back to back, so each
    /// block has length `2·twiddles.len()/blocks`.
    Butterfly {
        twiddles: Vec<Complex64>,
        blocks: usize,
    },
    /// The same dense block repeated down the diagonal.
    BlockDense {
        block: DMatrix<Complex64>,
        blocks: usize,
    },
}

impl Factor {
    pub fn in_dim(&self) -> usize {
        match self {
            Factor::ComplexDiagonal(d) => d.len(),
            Factor::Scale { size, .. } => *size,
            Factor::ZeroPad { from, .. } | Factor::ZeroPadTranspose { from, .. } => *from,
            Factor::Dft { size, .. } => *size,
            Factor::EvenOddPermutation { size, blocks } => size * blocks,
            Factor::Butterfly { twiddles, .. } => 2 * twiddles.len(),
            Factor::BlockDense { block, blocks } => block.ncols() * blocks,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Factor::ZeroPad { to, .. } | Factor::ZeroPadTranspose { to, .. } => *to,
            Factor::BlockDense { block, blocks } => block.nrows() * blocks,
            other => other.in_dim(),
        }
    }

    fn apply(&self, x: &[Complex64], ops: &mut OpCount) -> Vec<Complex64> {
        match self {
            Factor::ComplexDiagonal(d) => {
                ops.complex_muls(d.len());
                x.iter().zip(d).map(|(a, b)| a * b).collect()
            }
            Factor::Scale { factor, .. } => {
                ops.real_scales(x.len());
                x.iter().map(|a| a * factor).collect()
            }
            Factor::ZeroPad { to, .. } => {
                let mut y = x.to_vec();
                y.resize(*to, Complex64::new(0.0, 0.0));
                y
            }
            Factor::ZeroPadTranspose { to, .. } => x[..*to].to_vec(),
            Factor::Dft {
                size,
                inverse,
                normalized,
            } => {
                let mut y = fft::fft_counted(x, *inverse, ops).expect("size checked at build");
                if *normalized {
                    let s = 1.0 / (*size as f64).sqrt();
                    y.iter_mut().for_each(|v| *v *= s);
                    ops.real_scales(*size);
                }
                y
            }
            Factor::EvenOddPermutation { size, .. } => x
                .chunks(*size)
                .flat_map(|b| fft::even_odd_permute(b).expect("even block"))
                .collect(),
            Factor::Butterfly { twiddles, blocks } => {
                let half = twiddles.len() / blocks;
                let mut y = x.to_vec();
                for (block, tw) in y.chunks_mut(2 * half).zip(twiddles.chunks(half)) {
                    let (top, bot) = block.split_at_mut(half);
                    for k in 0..half {
                        let (a, b) = (top[k], bot[k]);
                        top[k] = a + b;
                        bot[k] = tw[k] * (a - b);
                    }
                    ops.complex_adds(2 * half);
                    ops.complex_muls(half);
                }
                y
            }
            Factor::BlockDense { block, .. } => {
                let (r, c) = block.shape();
                let mut y = Vec::with_capacity(self.out_dim());
                for chunk in x.chunks(c) {
                    let v = block * DVector::from_column_slice(chunk);
                    y.extend(v.iter().copied());
                    ops.complex_muls(r * c);
                    ops.complex_adds(r * (c - 1));
                }
                y
            }
        }
    }
}

/// Ordered product of sparse factors, first factor applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorChain {
    factors: Vec<Factor>,
    in_dim: usize,
    out_dim: usize,
}

impl FactorChain {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return config("empty factor chain");
        };
        let in_dim = first.in_dim();
        let mut dim = in_dim;
        for (i, f) in factors.iter().enumerate() {
            if f.in_dim() != dim {
                return shape(format!(
                    "factor {i} expects dimension {} but receives {dim}",
                    f.in_dim()
                ));
            }
            if let Factor::Dft { size, .. } = f {
                if log2_exact(*size).is_none() {
                    return config(format!("DFT size {size} is not a power of two"));
                }
            }
            dim = f.out_dim();
        }
        Ok(Self {
            factors,
            in_dim,
            out_dim: dim,
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut ops = OpCount::ZERO;
        self.apply_counted(x, &mut ops)
    }

    pub fn apply_counted(&self, x: &[Complex64], ops: &mut OpCount) -> Result<Vec<Complex64>> {
        if x.len() != self.in_dim {
            return shape(format!("chain expects {} inputs, got {}", self.in_dim, x.len()));
        }
        let mut v = x.to_vec();
        for f in &self.factors {
            v = f.apply(&v, ops);
        }
        Ok(v)
    }

    /// Composes the chain into a dense matrix by applying it to unit vectors.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.out_dim, self.in_dim);
        let mut e = vec![Complex64::new(0.0, 0.0); self.in_dim];
        for j in 0..self.in_dim {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e).expect("dimension matches");
            out.set_column(j, &DVector::from_vec(col));
            e[j] = Complex64::new(0.0, 0.0);
        }
        out
    }
}

/// The seven-factor chain `D̂ → J → F → D̆ → F* → Jᵀ → D̂`.
pub fn build_bluestein_chain(spec: &DvmSpec) -> Result<FactorChain> {
    let (n, m) = (spec.n(), spec.m());
    let d_hat = chirp_diagonal(spec);
    FactorChain::new(vec![
        Factor::ComplexDiagonal(d_hat.clone()),
        Factor::ZeroPad { from: n, to: m },
        Factor::Dft {
            size: m,
            inverse: false,
            normalized: true,
        },
        Factor::ComplexDiagonal(circulant_spectrum(spec)),
        Factor::Dft {
            size: m,
            inverse: true,
            normalized: true,
        },
        Factor::ZeroPadTranspose { from: m, to: n },
        Factor::ComplexDiagonal(d_hat),
    ])
}

/// `Ã_N · x` through the sparse chain in `O(N log N)`.
pub fn fast_dvm_apply(chain: &FactorChain, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut ops = OpCount::ZERO;
    fast_dvm_apply_counted(chain, x, &mut ops)
}

pub fn fast_dvm_apply_counted(chain: &FactorChain, x: &[Complex64], ops: &mut OpCount) -> Result<Vec<Complex64>> {
    if chain.in_dim() != chain.out_dim() {
        return shape("DVM chain must be square");
    }
    chain.apply_counted(x, ops)
}

/// `‖A - B‖_F / ‖B‖_F`.
pub fn relative_frobenius(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}
