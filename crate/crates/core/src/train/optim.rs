//! First-order updates and Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, shape, Error, Result};

/// Parameter ceiling for Levenberg-Marquardt.
pub const LM_MAX_PARAMS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    #[serde(rename = "lm", alias = "gauss_newton_lm")]
    GaussNewtonLm,
}

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate down to `COSINE_FLOOR` of it at the
    /// last epoch.
    Cosine,
}

pub const COSINE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Initial damping `μ` for `lm`.
    pub damping: f64,
    /// `μ` is multiplied by this after a rejected step.
    pub damping_increase: f64,
    /// `μ` is multiplied by this after an accepted step.
    pub damping_decrease: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub train_fraction: f64,
    /// Stop once validation MSE is at or below this.
    pub target_mse: Option<f64>,
    /// Stop after this many epochs without a new best validation MSE.
    pub patience: Option<usize>,
    /// Worker threads for the per-batch gradient; 1 runs inline.
    pub threads: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 0.1,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            train_fraction: 0.8,
            target_mse: None,
            patience: None,
            threads: 1,
        }
    }
}

impl OptimizerConfig {
    /// Rate used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let span = self.epochs.saturating_sub(1).max(1) as f64;
                let x = (epoch.saturating_sub(1) as f64 / span).min(1.0);
                let w = 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
                self.learning_rate * (COSINE_FLOOR + (1.0 - COSINE_FLOOR) * w)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return config(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return config(format!(
                "adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            ));
        }
        if self.batch_size == 0 {
            return config("batch size must be at least 1");
        }
        if self.threads == 0 {
            return config("thread count must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return config(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if !(self.damping > 0.0
            && self.damping_increase > 1.0
            && self.damping_decrease > 0.0
            && self.damping_decrease < 1.0)
        {
            return config("damping must be positive with increase > 1 and decrease in (0, 1)");
        }
        Ok(())
    }
}

/// Per-parameter optimizer memory.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
    Lm { damping: f64 },
}

impl OptimizerState {
    pub fn new(opt: &OptimizerConfig, n_params: usize) -> Self {
        match opt.kind {
            OptimizerKind::Sgd => Self::Sgd,
            OptimizerKind::Adam => Self::Adam {
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
            OptimizerKind::GaussNewtonLm => Self::Lm { damping: opt.damping },
        }
    }
}

/// One gradient update for `sgd` or `adam`.
pub fn optimizer_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    opt: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return shape(format!("{} parameters but {} gradients", params.len(), grads.len()));
    }
    let lr = opt.learning_rate;
    match state {
        OptimizerState::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerState::Adam { m, v, t } => {
            if m.len() != params.len() {
                return shape("adam state does not match the parameter count");
            }
            *t += 1;
            let c1 = 1.0 - opt.beta1.powi(*t as i32);
            let c2 = 1.0 - opt.beta2.powi(*t as i32);
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
                params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + opt.eps);
            }
        }
        OptimizerState::Lm { .. } => {
            return config("levenberg-marquardt steps need residuals; use lm_step");
        }
    }
    Ok(())
}

/// A residual model `r(θ)` with cost `Σ rᵢ²`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>>;
    /// `∂r/∂θ`, one row per residual.
    fn jacobian(&self, params: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOutcome {
    pub accepted: bool,
    pub cost_before: f64,
    pub cost_after: f64,
}

const LM_MAX_TRIES: usize = 12;

/// Solves `(JᵀJ + μI)δ = -Jᵀr`, tries `θ + δ`, and adapts `μ`. Retries with
/// larger damping until the cost drops or the retry budget is spent.
///
/// With fewer residuals than parameters the equivalent
/// `δ = -Jᵀ(JJᵀ + μI)⁻¹r` is solved instead.
pub fn lm_step<P: LeastSquares + ?Sized>(
    problem: &P,
    params: &mut [f64],
    damping: &mut f64,
    opt: &OptimizerConfig,
) -> Result<LmOutcome> {
    let np = problem.n_params();
    if np > LM_MAX_PARAMS {
        return config(format!(
            "levenberg-marquardt is limited to {LM_MAX_PARAMS} parameters (model has {np}); use adam"
        ));
    }
    if params.len() != np {
        return shape(format!("{} parameters but the problem has {np}", params.len()));
    }
    let r = DVector::from_vec(problem.residuals(params)?);
    let cost = r.norm_squared();
    let j = problem.jacobian(params)?;
    if j.nrows() != r.len() || j.ncols() != np {
        return shape("jacobian shape does not match residuals and parameters");
    }
    let wide = j.nrows() < np;
    let (gram, rhs) = if wide {
        (&j * j.transpose(), r.clone())
    } else {
        (j.tr_mul(&j), j.tr_mul(&r))
    };
    for _ in 0..LM_MAX_TRIES {
        let mut a = gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += *damping;
        }
        let Some(chol) = a.cholesky() else {
            *damping *= opt.damping_increase;
            continue;
        };
        let sol = chol.solve(&rhs);
        let delta = if wide { -(j.tr_mul(&sol)) } else { -sol };
        let trial: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p + d).collect();
        let new_cost = DVector::from_vec(problem.residuals(&trial)?).norm_squared();
        if !new_cost.is_finite() {
            *damping *= opt.damping_increase;
            continue;
        }
        if new_cost < cost {
            params.copy_from_slice(&trial);
            *damping = (*damping * opt.damping_decrease).max(1e-15);
            return Ok(LmOutcome {
                accepted: true,
                cost_before: cost,
                cost_after: new_cost,
            });
        }
        *damping *= opt.damping_increase;
    }
    if !cost.is_finite() {
        return Err(Error::Divergence("non-finite residuals".into()));
    }
    Ok(LmOutcome {
        accepted: false,
        cost_before: cost,
        cost_after: cost,
    })
}
