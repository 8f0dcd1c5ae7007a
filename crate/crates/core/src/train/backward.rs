//! Reverse-mode gradients through a traced forward pass.
//!
//! Complex quantities carry cogradients `∂L/∂Re + j·∂L/∂Im`, which is exactly
//! the `(re, im)` pair layout of complex parameters in the flat vector.

use num_complex::Complex64;

use crate::error::{shape, Result};
use crate::net::{
    as_complex, as_complex_mut, diag_backward, real_join, real_split, BlockLayout, BlockTrace, ForwardTrace, Network,
    Segment, Stage,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gradient with the same layout as the network's trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPack {
    pub values: Vec<f64>,
}

impl GradientPack {
    pub fn zeros(net: &Network) -> Self {
        Self {
            values: vec![0.0; net.params().len()],
        }
    }

    pub fn segment<'a>(&'a self, net: &Network, name: &str) -> Option<&'a [f64]> {
        net.segments()
            .iter()
            .find(|s| s.name == name)
            .map(|s: &Segment| &self.values[s.range()])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradient of the single-sample loss `Σ (y - target)² / N`.
pub fn backward(net: &Network, trace: &ForwardTrace, target: &[f64]) -> Result<GradientPack> {
    let y = trace.blocks.last().map(|b| b.output.as_slice()).unwrap_or(&[]);
    if target.len() != y.len() {
        return shape(format!("target has {} entries, output has {}", target.len(), y.len()));
    }
    let n = net.config().n as f64;
    let g_out: Vec<f64> = y.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    let mut grad = GradientPack::zeros(net);
    backward_from_output(net, trace, &g_out, &mut grad.values)?;
    Ok(grad)
}

/// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output`, and returns
/// `∂L/∂input`.
pub fn backward_from_output(net: &Network, trace: &ForwardTrace, g_out: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
    let blocks = net.blocks();
    let io = 2 * net.config().n;
    if trace.blocks.len() != blocks.len() {
        return shape(format!(
            "trace has {} blocks, network has {}",
            trace.blocks.len(),
            blocks.len()
        ));
    }
    if g_out.len() != io || grad.len() != net.params().len() {
        return shape("gradient buffers do not match the network");
    }
    let hidden = net.config().hidden();
    for bt in &trace.blocks {
        if bt.input.len() != io || bt.pre_activation.len() != hidden || bt.output.len() != io {
            return shape("trace was not produced by this network");
        }
    }
    let mut g = g_out.to_vec();
    for (block, bt) in blocks.iter().zip(&trace.blocks).rev() {
        g = block_backward(net, block, bt, &g, grad)?;
    }
    Ok(g)
}

fn block_backward(
    net: &Network,
    block: &BlockLayout,
    bt: &BlockTrace,
    g_out: &[f64],
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    let cfg = net.config();
    let params = net.params();

    for (gb, g) in grad[block.bias_out.clone()].iter_mut().zip(g_out) {
        *gb += g;
    }
    let g_y3 = w4_backward(net, block, bt, g_out, grad)?;

    // y3 = split(δ ⊙ join(y1)) + skip ⊙ y1
    let skip = &params[block.skip.clone()];
    let mut g_y1: Vec<f64> = g_y3.iter().zip(skip).map(|(g, s)| g * s).collect();
    for ((gs, g), h) in grad[block.skip.clone()].iter_mut().zip(&g_y3).zip(&bt.hidden) {
        *gs += g * h;
    }
    let g_delay_in: Vec<Complex64> = real_join(&g_y3)
        .iter()
        .zip(net.delay_factors())
        .map(|(g, d)| d.conj() * g)
        .collect();
    for (a, b) in g_y1.iter_mut().zip(real_split(&g_delay_in)) {
        *a += b;
    }

    let slope = cfg.activation_slope;
    let g_pre: Vec<f64> = g_y1
        .iter()
        .zip(&bt.pre_activation)
        .map(|(g, &u)| if u >= 0.0 { *g } else { slope * g })
        .collect();
    for (gb, g) in grad[block.bias1.clone()].iter_mut().zip(&g_pre) {
        *gb += g;
    }
    w1_backward(net, block, bt, &g_pre, grad)
}

fn dense_backward(w: &[f64], cols: usize, x: &[f64], g_y: &[f64], g_w: &mut [f64]) -> Vec<f64> {
    let mut g_x = vec![0.0; cols];
    for ((row, g_row), &g) in w.chunks(cols).zip(g_w.chunks_mut(cols)).zip(g_y) {
        for j in 0..cols {
            g_row[j] += g * x[j];
            g_x[j] += row[j] * g;
        }
    }
    g_x
}

fn w4_backward(
    net: &Network,
    block: &BlockLayout,
    bt: &BlockTrace,
    g_out: &[f64],
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    let params = net.params();
    match &block.stage {
        Stage::Dense { w4, .. } => Ok(dense_backward(
            &params[w4.clone()],
            bt.skip_out.len(),
            &bt.skip_out,
            g_out,
            &mut grad[w4.clone()],
        )),
        Stage::Factored { subs_out, .. } => {
            if bt.sub_out.len() != subs_out.len() {
                return shape("trace was not produced by this network");
            }
            let cfg = net.config();
            let chain = net.chain_layout().expect("factored stage has a chain");
            let (n, m) = (cfg.n, cfg.m());
            let g_acc = real_join(g_out);
            let mut g_in = Vec::with_capacity(cfg.p * m);
            for (s, st) in subs_out.iter().zip(&bt.sub_out) {
                let d_hat = as_complex(&params[s.d_hat.clone()]);
                let mut g_kept = diag_backward(
                    cfg.diag_mode,
                    d_hat,
                    &st.kept,
                    &g_acc,
                    as_complex_mut(&mut grad[s.d_hat.clone()]),
                );
                debug_assert_eq!(g_kept.len(), n);
                g_kept.resize(m, ZERO);
                let f = as_complex(&params[s.chain.clone()]);
                g_in.extend(chain.backward(
                    f,
                    net.chain_scale(),
                    &st.chain,
                    &g_kept,
                    as_complex_mut(&mut grad[s.chain.clone()]),
                ));
            }
            Ok(real_split(&g_in))
        }
    }
}

fn w1_backward(
    net: &Network,
    block: &BlockLayout,
    bt: &BlockTrace,
    g_pre: &[f64],
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    let params = net.params();
    match &block.stage {
        Stage::Dense { w1, .. } => Ok(dense_backward(
            &params[w1.clone()],
            bt.input.len(),
            &bt.input,
            g_pre,
            &mut grad[w1.clone()],
        )),
        Stage::Factored { subs_in, .. } => {
            if bt.sub_in.len() != subs_in.len() {
                return shape("trace was not produced by this network");
            }
            let cfg = net.config();
            let chain = net.chain_layout().expect("factored stage has a chain");
            let (n, m) = (cfg.n, cfg.m());
            let xc = real_join(&bt.input);
            let g_z = real_join(g_pre);
            let mut g_x = vec![ZERO; n];
            for ((s, st), g_h) in subs_in.iter().zip(&bt.sub_in).zip(g_z.chunks(m)) {
                let d_breve = as_complex(&params[s.d_breve.clone()]);
                let g_c = diag_backward(
                    cfg.diag_mode,
                    d_breve,
                    &st.chain_out,
                    g_h,
                    as_complex_mut(&mut grad[s.d_breve.clone()]),
                );
                let f = as_complex(&params[s.chain.clone()]);
                let g_pad = chain.backward(
                    f,
                    net.chain_scale(),
                    &st.chain,
                    &g_c,
                    as_complex_mut(&mut grad[s.chain.clone()]),
                );
                let d_hat = as_complex(&params[s.d_hat.clone()]);
                let g_xi = diag_backward(
                    cfg.diag_mode,
                    d_hat,
                    &xc,
                    &g_pad[..n],
                    as_complex_mut(&mut grad[s.d_hat.clone()]),
                );
                for (a, b) in g_x.iter_mut().zip(g_xi) {
                    *a += b;
                }
            }
            Ok(real_split(&g_x))
        }
    }
}
