//! Forward pass and its recorded intermediates.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{as_complex, BlockLayout, DiagMode, Network, Stage};
use crate::error::{shape, Result};
use crate::recursive::ChainTrace;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `[Re x_0, …, Re x_{K-1}, Im x_0, …, Im x_{K-1}]`.
pub fn real_split(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|v| v.re).chain(x.iter().map(|v| v.im)).collect()
}

/// Inverse of [`real_split`]. Panics on odd length.
pub fn real_join(x: &[f64]) -> Vec<Complex64> {
    assert!(x.len().is_multiple_of(2), "real_join needs even length");
    let (re, im) = x.split_at(x.len() / 2);
    re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubInTrace {
    pub chain: ChainTrace,
    /// Chain output before the `D̆` diagonal.
    pub chain_out: Vec<Complex64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubOutTrace {
    pub chain: ChainTrace,
    /// The `N` chain outputs kept by `Jᵀ`, before `D̂`.
    pub kept: Vec<Complex64>,
}

/// Intermediates of one block, named after the layer they leave.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockTrace {
    pub input: Vec<f64>,
    pub sub_in: Vec<SubInTrace>,
    pub pre_activation: Vec<f64>,
    pub hidden: Vec<f64>,
    pub delay_in: Vec<Complex64>,
    pub delay_out: Vec<Complex64>,
    pub skip_out: Vec<f64>,
    pub sub_out: Vec<SubOutTrace>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub blocks: Vec<BlockTrace>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        &self.blocks.last().expect("at least one block").output
    }
}

pub(crate) fn diag_apply(mode: DiagMode, d: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    match mode {
        DiagMode::Complex => d.iter().zip(x).map(|(a, b)| a * b).collect(),
        DiagMode::RealSplit => d
            .iter()
            .zip(x)
            .map(|(a, b)| Complex64::new(a.re * b.re, a.im * b.im))
            .collect(),
    }
}

/// Accumulates the diagonal cogradient and returns the input cogradient.
pub(crate) fn diag_backward(
    mode: DiagMode,
    d: &[Complex64],
    x: &[Complex64],
    g: &[Complex64],
    g_d: &mut [Complex64],
) -> Vec<Complex64> {
    match mode {
        DiagMode::Complex => {
            for ((gd, gy), xv) in g_d.iter_mut().zip(g).zip(x) {
                *gd += gy * xv.conj();
            }
            d.iter().zip(g).map(|(a, gy)| a.conj() * gy).collect()
        }
        DiagMode::RealSplit => {
            for ((gd, gy), xv) in g_d.iter_mut().zip(g).zip(x) {
                *gd += Complex64::new(gy.re * xv.re, gy.im * xv.im);
            }
            d.iter()
                .zip(g)
                .map(|(a, gy)| Complex64::new(a.re * gy.re, a.im * gy.im))
                .collect()
        }
    }
}

pub(crate) fn matvec(w: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    w.chunks(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

impl Network {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        let want = 2 * self.config.n;
        if x.len() != want {
            return shape(format!("network input has {} entries, expected {want}", x.len()));
        }
        Ok(())
    }

    /// Network output for one real-split input.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut v = x.to_vec();
        for block in &self.blocks {
            v = self.block_forward(block, &v, None);
        }
        Ok(v)
    }

    /// Output plus every intermediate needed by the backward pass.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        self.check_input(x)?;
        let mut trace = ForwardTrace::default();
        let mut v = x.to_vec();
        for block in &self.blocks {
            let mut bt = BlockTrace::default();
            v = self.block_forward(block, &v, Some(&mut bt));
            trace.blocks.push(bt);
        }
        Ok((v, trace))
    }

    fn block_forward(&self, block: &BlockLayout, x: &[f64], mut trace: Option<&mut BlockTrace>) -> Vec<f64> {
        let slope = self.config.activation_slope;
        let mut pre = self.apply_w1(block, x, trace.as_deref_mut());
        for (u, b) in pre.iter_mut().zip(&self.params[block.bias1.clone()]) {
            *u += b;
        }
        let hidden: Vec<f64> = pre.iter().map(|&u| leaky_relu(u, slope)).collect();
        let delay_in = real_join(&hidden);
        let delay_out: Vec<Complex64> = delay_in.iter().zip(&self.delay).map(|(a, d)| a * d).collect();
        let mut y3 = real_split(&delay_out);
        for ((y, s), h) in y3.iter_mut().zip(&self.params[block.skip.clone()]).zip(&hidden) {
            *y += s * h;
        }
        let mut out = self.apply_w4(block, &y3, trace.as_deref_mut());
        for (o, b) in out.iter_mut().zip(&self.params[block.bias_out.clone()]) {
            *o += b;
        }
        if let Some(t) = trace {
            t.input = x.to_vec();
            t.pre_activation = pre;
            t.hidden = hidden;
            t.delay_in = delay_in;
            t.delay_out = delay_out;
            t.skip_out = y3;
            t.output = out.clone();
        }
        out
    }

    /// `W1·x` without the bias.
    fn apply_w1(&self, block: &BlockLayout, x: &[f64], mut trace: Option<&mut BlockTrace>) -> Vec<f64> {
        match &block.stage {
            Stage::Dense { w1, .. } => matvec(&self.params[w1.clone()], x.len(), x),
            Stage::Factored { subs_in, .. } => {
                let chain = self.chain.expect("factored stage has a chain");
                let (n, m) = (self.config.n, self.config.m());
                let xc = real_join(x);
                let mut z = Vec::with_capacity(self.config.p * m);
                for s in subs_in {
                    let d_hat = as_complex(&self.params[s.d_hat.clone()]);
                    let mut padded = diag_apply(self.config.diag_mode, d_hat, &xc);
                    padded.resize(m, ZERO);
                    debug_assert_eq!(padded.len(), m.max(n));
                    let mut ct = trace.as_ref().map(|_| ChainTrace::default());
                    let f = as_complex(&self.params[s.chain.clone()]);
                    let chain_out = chain.apply(f, self.chain_scale, &padded, ct.as_mut());
                    let d_breve = as_complex(&self.params[s.d_breve.clone()]);
                    z.extend(diag_apply(self.config.diag_mode, d_breve, &chain_out));
                    if let Some(t) = trace.as_deref_mut() {
                        t.sub_in.push(SubInTrace {
                            chain: ct.expect("traced"),
                            chain_out,
                        });
                    }
                }
                real_split(&z)
            }
        }
    }

    /// `W4·y3` without the bias.
    fn apply_w4(&self, block: &BlockLayout, y3: &[f64], mut trace: Option<&mut BlockTrace>) -> Vec<f64> {
        match &block.stage {
            Stage::Dense { w4, .. } => matvec(&self.params[w4.clone()], y3.len(), y3),
            Stage::Factored { subs_out, .. } => {
                let chain = self.chain.expect("factored stage has a chain");
                let (n, m) = (self.config.n, self.config.m());
                let yc = real_join(y3);
                let mut acc = vec![ZERO; n];
                for (s, chunk) in subs_out.iter().zip(yc.chunks(m)) {
                    let mut ct = trace.as_ref().map(|_| ChainTrace::default());
                    let f = as_complex(&self.params[s.chain.clone()]);
                    let mut kept = chain.apply(f, self.chain_scale, chunk, ct.as_mut());
                    kept.truncate(n);
                    let d_hat = as_complex(&self.params[s.d_hat.clone()]);
                    for (a, v) in acc.iter_mut().zip(diag_apply(self.config.diag_mode, d_hat, &kept)) {
                        *a += v;
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.sub_out.push(SubOutTrace {
                            chain: ct.expect("traced"),
                            kept,
                        });
                    }
                }
                real_split(&acc)
            }
        }
    }

    /// Dense real matrices of the `W1` and `W4` stages of block `index`,
    /// assembled column by column from the factored application. Meant for
    /// verification at small sizes.
    pub fn densify_block(&self, index: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let Some(block) = self.blocks.get(index) else {
            return shape(format!("block {index} out of range ({} blocks)", self.blocks.len()));
        };
        let (io, hidden) = (2 * self.config.n, self.config.hidden());
        let mut w1 = DMatrix::zeros(hidden, io);
        let mut e = vec![0.0; io];
        for j in 0..io {
            e[j] = 1.0;
            w1.set_column(j, &nalgebra::DVector::from_vec(self.apply_w1(block, &e, None)));
            e[j] = 0.0;
        }
        let mut w4 = DMatrix::zeros(io, hidden);
        let mut e = vec![0.0; hidden];
        for j in 0..hidden {
            e[j] = 1.0;
            w4.set_column(j, &nalgebra::DVector::from_vec(self.apply_w4(block, &e, None)));
            e[j] = 0.0;
        }
        Ok((w1, w4))
    }
}
