//! Central-difference gradient verification.

use serde::{Deserialize, Serialize};

use super::{batch_gradient, batch_loss};
use crate::data::Sample;
use crate::error::{config, shape, Result};
use crate::net::Network;

/// Samples whose pre-activations come closer than this to the activation
/// kink are left out of a check.
pub const KINK_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
    pub samples_used: usize,
    pub samples_skipped: usize,
}

/// Smallest `|u|` over every pre-activation of `x`. Infinite for an identity
/// activation, where there is no kink.
pub fn kink_distance(net: &Network, x: &[f64]) -> Result<f64> {
    if net.config().activation_slope == 1.0 {
        return Ok(f64::INFINITY);
    }
    let (_, trace) = net.forward(x)?;
    Ok(trace
        .blocks
        .iter()
        .flat_map(|b| b.pre_activation.iter())
        .fold(f64::INFINITY, |m, u| m.min(u.abs())))
}

/// Compares the analytic batch gradient with central differences for every
/// trainable scalar, using `h·max(1, |θ|)` as the step.
pub fn grad_check(net: &Network, batch: &[Sample], h: f64) -> Result<GradCheckReport> {
    let usable = usable_samples(net, batch)?;
    let (_, grad) = batch_gradient(net, &usable, 1)?;
    compare(net, &usable, h, &grad, batch.len() - usable.len())
}

/// Like [`grad_check`] but against a caller-supplied gradient. Used to confirm
/// the check notices a wrong gradient.
pub fn grad_check_against(net: &Network, batch: &[Sample], h: f64, analytic: &[f64]) -> Result<GradCheckReport> {
    let usable = usable_samples(net, batch)?;
    if analytic.len() != net.params().len() {
        return shape("analytic gradient length does not match the network");
    }
    compare(net, &usable, h, analytic, batch.len() - usable.len())
}

fn usable_samples(net: &Network, batch: &[Sample]) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(batch.len());
    for s in batch {
        if kink_distance(net, &s.input)? >= KINK_MARGIN {
            out.push(s.clone());
        }
    }
    if out.is_empty() {
        return config("every sample sits on an activation kink; resample the batch");
    }
    Ok(out)
}

fn compare(net: &Network, batch: &[Sample], h: f64, analytic: &[f64], skipped: usize) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return config(format!("finite-difference step must be positive, got {h}"));
    }
    let mut probe = net.clone();
    let mut numeric = vec![0.0; analytic.len()];
    for i in 0..analytic.len() {
        let theta = net.params()[i];
        let step = h * theta.abs().max(1.0);
        probe.params_mut()[i] = theta + step;
        let up = batch_loss(&probe, batch)?;
        probe.params_mut()[i] = theta - step;
        let down = batch_loss(&probe, batch)?;
        probe.params_mut()[i] = theta;
        numeric[i] = (up - down) / (2.0 * step);
    }
    let g_inf = analytic.iter().chain(&numeric).fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * g_inf + f64::MIN_POSITIVE;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        worst_param: net.param_path(0),
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: numeric.first().copied().unwrap_or(0.0),
        params_checked: analytic.len(),
        samples_used: batch.len(),
        samples_skipped: skipped,
    };
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_index = i;
            report.worst_param = net.param_path(i);
            report.analytic = a;
            report.numeric = n;
        }
    }
    Ok(report)
}
