//! Loss, gradients, optimizers and the training loop.

mod backward;
mod check;
mod optim;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::complexity::{flops_counted, formula_flops, FormulaCount};
use crate::data::{split_dataset, Dataset, DatasetMeta, Sample};
use crate::error::{config, shape, Error, Result};
use crate::net::{build_network, Network, NetworkConfig};
use crate::ops::OpCount;
use crate::VERSION;

pub use backward::{backward, backward_from_output, GradientPack};
pub use check::{grad_check, grad_check_against, kink_distance, GradCheckReport, KINK_MARGIN};
pub use optim::{
    lm_step, optimizer_step, LeastSquares, LmOutcome, LrSchedule, OptimizerConfig, OptimizerKind, OptimizerState,
    LM_MAX_PARAMS,
};

/// Samples per unit of work in the batch gradient. The reduction always sums
/// chunk results in index order, so the thread count never changes the bits.
const CHUNK: usize = 16;

/// `Σ (pred - target)² / (N·M_b)` over all rows and all `2N` components.
pub fn mse_loss<P: AsRef<[f64]>, T: AsRef<[f64]>>(pred: &[P], target: &[T], n: usize) -> Result<f64> {
    if pred.len() != target.len() {
        return shape(format!("{} predictions for {} targets", pred.len(), target.len()));
    }
    if pred.is_empty() || n == 0 {
        return shape("loss needs at least one row and N >= 1");
    }
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(target) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != 2 * n || t.len() != 2 * n {
            return shape(format!("rows must have {} entries", 2 * n));
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(sum / (n * pred.len()) as f64)
}

fn check_dims(net: &Network, n: usize) -> Result<()> {
    if net.config().n != n {
        return shape(format!(
            "data has N = {n} but the network expects N = {}",
            net.config().n
        ));
    }
    Ok(())
}

/// MSE of the network over `batch`.
pub fn batch_loss(net: &Network, batch: &[Sample]) -> Result<f64> {
    let mut preds = Vec::with_capacity(batch.len());
    for s in batch {
        preds.push(net.predict(&s.input)?);
    }
    let targets: Vec<&[f64]> = batch.iter().map(|s| s.target.as_slice()).collect();
    mse_loss(&preds, &targets, net.config().n)
}

fn chunk_gradient(net: &Network, chunk: &[Sample], scale: f64) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; net.params().len()];
    let mut loss = 0.0;
    for s in chunk {
        let (y, trace) = net.forward(&s.input)?;
        if s.target.len() != y.len() {
            return shape(format!("target has {} entries, output has {}", s.target.len(), y.len()));
        }
        let g_out: Vec<f64> = y.iter().zip(&s.target).map(|(p, t)| 2.0 * scale * (p - t)).collect();
        loss += y.iter().zip(&s.target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        backward_from_output(net, &trace, &g_out, &mut grad)?;
    }
    Ok((loss * scale, grad))
}

fn reduce(parts: Vec<(f64, Vec<f64>)>, n_params: usize) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (loss, grad)
}

fn gradient_with(net: &Network, batch: &[Sample], pool: Option<&ThreadPool>) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return shape("gradient needs at least one sample");
    }
    let scale = 1.0 / (net.config().n * batch.len()) as f64;
    let parts: Result<Vec<_>> = match pool {
        Some(pool) => pool.install(|| batch.par_chunks(CHUNK).map(|c| chunk_gradient(net, c, scale)).collect()),
        None => batch.chunks(CHUNK).map(|c| chunk_gradient(net, c, scale)).collect(),
    };
    Ok(reduce(parts?, net.params().len()))
}

fn make_pool(threads: usize) -> Result<Option<ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Batch MSE and its gradient.
pub fn batch_gradient(net: &Network, batch: &[Sample], threads: usize) -> Result<(f64, Vec<f64>)> {
    let pool = make_pool(threads)?;
    gradient_with(net, batch, pool.as_ref())
}

/// Residuals `(pred - target)/√(N·M_b)` of a network over a batch, so that
/// the least-squares cost equals the batch MSE.
pub struct NetworkResiduals<'a> {
    pub net: &'a Network,
    pub batch: &'a [Sample],
}

impl NetworkResiduals<'_> {
    fn scale(&self) -> f64 {
        1.0 / ((self.net.config().n * self.batch.len()) as f64).sqrt()
    }
}

impl LeastSquares for NetworkResiduals<'_> {
    fn n_params(&self) -> usize {
        self.net.params().len()
    }

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>> {
        let mut net = self.net.clone();
        net.set_params(params)?;
        let k = self.scale();
        let mut r = Vec::with_capacity(self.batch.len() * 2 * net.config().n);
        for s in self.batch {
            let y = net.predict(&s.input)?;
            r.extend(y.iter().zip(&s.target).map(|(p, t)| k * (p - t)));
        }
        Ok(r)
    }

    fn jacobian(&self, params: &[f64]) -> Result<DMatrix<f64>> {
        let mut net = self.net.clone();
        net.set_params(params)?;
        let io = 2 * net.config().n;
        let np = params.len();
        let k = self.scale();
        let mut j = DMatrix::zeros(self.batch.len() * io, np);
        let mut e = vec![0.0; io];
        let mut row = vec![0.0; np];
        for (si, s) in self.batch.iter().enumerate() {
            let (_, trace) = net.forward(&s.input)?;
            for c in 0..io {
                e[c] = k;
                row.fill(0.0);
                backward_from_output(&net, &trace, &e, &mut row)?;
                e[c] = 0.0;
                for (col, v) in row.iter().enumerate() {
                    j[(si * io + c, col)] = *v;
                }
            }
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    TargetReached,
    Patience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub optimizer: OptimizerConfig,
    pub data: Option<DatasetMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub epochs_run: usize,
    pub steps_run: usize,
    /// Entry 0 is the untrained network.
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub param_count: usize,
    pub flops_formula: FormulaCount,
    pub flops_counted: OpCount,
    pub wall_time_s: f64,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report with the wall-clock field zeroed, for reproducibility
    /// comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Splits `dataset` with `opt.train_fraction` and `opt.seed`, then trains.
pub fn train(net: &Network, dataset: &Dataset, opt: &OptimizerConfig) -> Result<(Network, TrainReport)> {
    check_dims(net, dataset.n)?;
    opt.validate()?;
    let (tr, va) = split_dataset(dataset, opt.train_fraction, opt.seed)?;
    let (net, mut report) = train_on_split(net, &tr.samples, &va.samples, opt)?;
    report.config.data = Some(dataset.meta());
    Ok((net, report))
}

/// Mini-batch training on an explicit split. An empty validation set reports
/// the training MSE in its place.
pub fn train_on_split(
    net: &Network,
    train_set: &[Sample],
    val_set: &[Sample],
    opt: &OptimizerConfig,
) -> Result<(Network, TrainReport)> {
    opt.validate()?;
    if train_set.is_empty() {
        return config("training set is empty");
    }
    let io = 2 * net.config().n;
    if let Some(s) = train_set
        .iter()
        .chain(val_set)
        .find(|s| s.input.len() != io || s.target.len() != io)
    {
        return shape(format!(
            "sample vectors have length {}/{} but the network expects {io}",
            s.input.len(),
            s.target.len()
        ));
    }
    let np = net.params().len();
    if opt.kind == OptimizerKind::GaussNewtonLm && np > LM_MAX_PARAMS {
        return config(format!(
            "levenberg-marquardt is limited to {LM_MAX_PARAMS} parameters (model has {np}); use adam"
        ));
    }

    let start = Instant::now();
    let pool = make_pool(opt.threads)?;
    let mut net = net.clone();
    let mut state = OptimizerState::new(opt, np);
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let evaluate = |net: &Network| -> Result<(f64, f64)> {
        let tr = batch_loss(net, train_set)?;
        let va = if val_set.is_empty() {
            tr
        } else {
            batch_loss(net, val_set)?
        };
        Ok((tr, va))
    };
    let (tr0, va0) = evaluate(&net)?;
    let mut train_mse = vec![tr0];
    let mut val_mse = vec![va0];
    let mut best = va0;
    let mut since_best = 0;
    let mut steps = 0;
    let mut stop = StopReason::MaxEpochs;
    if !(tr0.is_finite() && va0.is_finite()) {
        return Err(Error::Divergence(
            "untrained network already produces non-finite loss".into(),
        ));
    }
    let reached = |v: f64| opt.target_mse.is_some_and(|t| v <= t);

    if reached(va0) {
        stop = StopReason::TargetReached;
    } else {
        let mut batch = Vec::with_capacity(opt.batch_size);
        for epoch in 1..=opt.epochs {
            let epoch_opt = OptimizerConfig {
                learning_rate: opt.learning_rate_at(epoch),
                ..opt.clone()
            };
            order.shuffle(&mut rng);
            for idx in order.chunks(opt.batch_size) {
                batch.clear();
                batch.extend(idx.iter().map(|&i| train_set[i].clone()));
                match &mut state {
                    OptimizerState::Lm { damping } => {
                        let problem = NetworkResiduals {
                            net: &net,
                            batch: &batch,
                        };
                        let mut params = net.params().to_vec();
                        lm_step(&problem, &mut params, damping, opt)?;
                        net.set_params(&params)?;
                    }
                    state => {
                        let (loss, grad) = gradient_with(&net, &batch, pool.as_ref())?;
                        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                            return Err(Error::Divergence(format!(
                                "non-finite loss or gradient at epoch {epoch}, step {steps}"
                            )));
                        }
                        optimizer_step(net.params_mut(), &grad, state, &epoch_opt)?;
                    }
                }
                steps += 1;
            }
            let (tr, va) = evaluate(&net)?;
            if !(tr.is_finite() && va.is_finite()) {
                return Err(Error::Divergence(format!("loss became non-finite at epoch {epoch}")));
            }
            train_mse.push(tr);
            val_mse.push(va);
            if reached(va) {
                stop = StopReason::TargetReached;
                break;
            }
            if va < best {
                best = va;
                since_best = 0;
            } else {
                since_best += 1;
                if opt.patience.is_some_and(|p| since_best >= p) {
                    stop = StopReason::Patience;
                    break;
                }
            }
        }
    }

    let report = TrainReport {
        version: VERSION.to_string(),
        config: RunConfig {
            network: net.config().clone(),
            optimizer: opt.clone(),
            data: None,
        },
        seed: opt.seed,
        epochs_run: train_mse.len() - 1,
        steps_run: steps,
        final_train_mse: *train_mse.last().expect("epoch 0 recorded"),
        final_val_mse: *val_mse.last().expect("epoch 0 recorded"),
        train_mse,
        val_mse,
        param_count: np,
        flops_formula: formula_flops(net.config())?,
        flops_counted: flops_counted(&net),
        wall_time_s: start.elapsed().as_secs_f64(),
        stop_reason: stop,
    };
    Ok((net, report))
}

/// Every attempt of a multi-start run and the network of the best one.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub network: Network,
    pub reports: Vec<TrainReport>,
    /// Index into `reports` of the attempt with the lowest final validation MSE.
    pub best: usize,
}

impl RestartOutcome {
    pub fn best_report(&self) -> &TrainReport {
        &self.reports[self.best]
    }
}

/// Multi-start training. Attempt `i` builds `net_config` with seed
/// `net_config.seed + i`, shuffles with `opt.seed + i`, and trains on one split
/// drawn with `opt.seed`. Stops after the first attempt that reaches
/// `opt.target_mse`, or after `attempts` attempts.
pub fn train_restarts(
    net_config: &NetworkConfig,
    dataset: &Dataset,
    opt: &OptimizerConfig,
    attempts: usize,
) -> Result<RestartOutcome> {
    if attempts == 0 {
        return config("at least one attempt is needed");
    }
    opt.validate()?;
    let (tr, va) = split_dataset(dataset, opt.train_fraction, opt.seed)?;
    let mut reports: Vec<TrainReport> = Vec::with_capacity(attempts);
    let mut best: Option<(usize, Network)> = None;
    for i in 0..attempts as u64 {
        let net = build_network(net_config.clone().with_seed(net_config.seed.wrapping_add(i)))?;
        check_dims(&net, dataset.n)?;
        let run_opt = OptimizerConfig {
            seed: opt.seed.wrapping_add(i),
            ..opt.clone()
        };
        let (trained, mut report) = train_on_split(&net, &tr.samples, &va.samples, &run_opt)?;
        report.config.data = Some(dataset.meta());
        let reached = report.stop_reason == StopReason::TargetReached;
        if best
            .as_ref()
            .is_none_or(|(b, _)| report.final_val_mse < reports[*b].final_val_mse)
        {
            best = Some((reports.len(), trained));
        }
        reports.push(report);
        if reached {
            break;
        }
    }
    let (best, network) = best.expect("at least one attempt ran");
    Ok(RestartOutcome { network, reports, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleMse {
    pub angle_deg: f64,
    pub samples: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub mse: f64,
    pub per_angle: Vec<AngleMse>,
}

/// Dataset MSE, overall and per arrival angle.
pub fn evaluate(net: &Network, dataset: &Dataset) -> Result<Evaluation> {
    check_dims(net, dataset.n)?;
    if dataset.is_empty() {
        return config("dataset is empty");
    }
    let mut per_angle: Vec<AngleMse> = Vec::new();
    let mut groups: Vec<Vec<Sample>> = Vec::new();
    for s in &dataset.samples {
        match per_angle
            .iter()
            .position(|a| a.angle_deg.to_bits() == s.angle_deg.to_bits())
        {
            Some(i) => groups[i].push(s.clone()),
            None => {
                per_angle.push(AngleMse {
                    angle_deg: s.angle_deg,
                    samples: 0,
                    mse: 0.0,
                });
                groups.push(vec![s.clone()]);
            }
        }
    }
    for (a, g) in per_angle.iter_mut().zip(&groups) {
        a.samples = g.len();
        a.mse = batch_loss(net, g)?;
    }
    Ok(Evaluation {
        samples: dataset.len(),
        mse: batch_loss(net, &dataset.samples)?,
        per_angle,
    })
}
