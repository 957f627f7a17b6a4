use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain_sim::TrajectorySample;
use crate::error::{Error, Result};

use super::loss::{pose_loss_grad, rpy_partials, LossForm, LossParts, LossSettings};
use super::net::{Jets, OutputJet, PoseNet};
use super::DerivativeMode;

/// One training example for one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub theta_ddot: Vec<f64>,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

/// Pulls the readings of sensor `id` out of a recorded trajectory.
pub fn sensor_dataset(samples: &[TrajectorySample], id: &str) -> Result<Vec<SensorSample>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let r = s.reading(id).ok_or_else(|| Error::Schema(format!("sample {i} has no reading for sensor {id}")))?;
            Ok(SensorSample {
                theta: s.theta.clone(),
                theta_dot: s.theta_dot.clone(),
                theta_ddot: s.theta_ddot.clone(),
                alpha: r.alpha,
                beta: r.beta,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::Sgd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Sample period in seconds.
    pub ts: f64,
    pub gravity: bool,
    pub derivative: DerivativeMode,
    pub loss_form: LossForm,
    /// Multiplier on the rotation-alignment term.
    pub rotation_weight: f64,
    pub optimizer: Optimizer,
    /// Rescale each batch gradient to at most this norm.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            ts: 0.01,
            gravity: true,
            derivative: DerivativeMode::Analytic,
            loss_form: LossForm::Trace,
            rotation_weight: 1.0,
            optimizer: Optimizer::Sgd,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    fn settings(&self) -> LossSettings {
        LossSettings { ts: self.ts, gravity: self.gravity, form: self.loss_form, rotation_weight: self.rotation_weight }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.ts > 0.0) {
            return bad("ts must be positive");
        }
        if let DerivativeMode::FiniteDifference { h } = self.derivative {
            if !(h > 0.0) {
                return bad("finite-difference step must be positive");
            }
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning rate and batch size must be positive");
        }
        if !self.rotation_weight.is_finite() || self.rotation_weight < 0.0 {
            return bad("rotation weight must be finite and non-negative");
        }
        Ok(())
    }
}

/// Loss history of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss seen during each epoch (before each batch's update).
    pub epoch_loss: Vec<f64>,
    /// Mean loss of the returned parameters over the whole dataset.
    pub final_loss: LossParts,
}

fn sub(a: &[f64], d: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + s * y).collect()
}

/// Loss of one sample, adding its parameter gradient to `grad` when given.
fn loss_and_grad(
    net: &PoseNet,
    s: &SensorSample,
    cfg: &TrainConfig,
    jets: &mut Jets,
    grad: Option<&mut [f64]>,
) -> LossParts {
    let settings = cfg.settings();
    match cfg.derivative {
        DerivativeMode::Analytic => {
            let j = net.forward_jets(&s.theta, &s.theta_dot, &s.theta_ddot, jets);
            let (r, f, f2) = rpy_partials(j.r);
            let mut rd = Matrix3::zeros();
            for k in 0..3 {
                rd += f[k] * j.r_dot[k];
            }
            let (parts, g) = pose_loss_grad(&r, &rd, &Vector3::from(j.t_ddot), &s.alpha, &s.beta, &settings);
            if let Some(grad) = grad {
                let mut out = OutputJet { t_ddot: g.b_ddot.into(), ..Default::default() };
                for k in 0..3 {
                    out.r_dot[k] = g.r_dot.dot(&f[k]);
                    out.r[k] = g.r.dot(&f[k]);
                    for m in 0..3 {
                        out.r[k] += g.r_dot.dot(&f2[k][m]) * j.r_dot[m];
                    }
                }
                net.backward(jets, &out, grad);
            }
            parts
        }
        DerivativeMode::FiniteDifference { h } => {
            let zeros = vec![0.0; s.theta.len()];
            let points = [
                s.theta.clone(),
                sub(&s.theta, &s.theta_dot, h),
                sub(&s.theta, &s.theta_dot, -h),
                sub(&s.theta, &s.theta_ddot, h),
                sub(&s.theta, &s.theta_ddot, -h),
            ];
            let mut all_jets: Vec<Jets> = vec![Jets::default(); 5];
            let outs: Vec<OutputJet> =
                points.iter().zip(all_jets.iter_mut()).map(|(p, jj)| net.forward_jets(p, &zeros, &zeros, jj)).collect();
            let parts_of: Vec<_> = outs.iter().map(|o| rpy_partials(o.r)).collect();
            let (r, f0, _) = parts_of[0];
            let rd = (parts_of[1].0 - parts_of[2].0) / (2.0 * h);
            let t = |i: usize| Vector3::from(outs[i].t);
            let b = (t(1) - t(0) * 2.0 + t(2)) / (h * h) + (t(3) - t(4)) / (2.0 * h);
            let (parts, g) = pose_loss_grad(&r, &rd, &b, &s.alpha, &s.beta, &settings);
            if let Some(grad) = grad {
                let gb = g.b_ddot;
                let weights_t = [-2.0 / (h * h), 1.0 / (h * h), 1.0 / (h * h), 0.5 / h, -0.5 / h];
                for i in 0..5 {
                    let mut out = OutputJet { t: (gb * weights_t[i]).into(), ..Default::default() };
                    for k in 0..3 {
                        out.r[k] = match i {
                            0 => g.r.dot(&f0[k]),
                            1 => g.r_dot.dot(&parts_of[1].1[k]) / (2.0 * h),
                            2 => -g.r_dot.dot(&parts_of[2].1[k]) / (2.0 * h),
                            _ => 0.0,
                        };
                    }
                    net.backward(&all_jets[i], &out, grad);
                }
            }
            parts
        }
    }
}

fn check_sample(net: &PoseNet, s: &SensorSample) -> Result<()> {
    net.check_input(&s.theta)?;
    net.check_input(&s.theta_dot)?;
    net.check_input(&s.theta_ddot)
}

/// Loss of one sample.
pub fn sample_loss(net: &PoseNet, s: &SensorSample, cfg: &TrainConfig) -> Result<LossParts> {
    cfg.validate()?;
    check_sample(net, s)?;
    Ok(loss_and_grad(net, s, cfg, &mut Jets::default(), None))
}

/// Gradient of the summed loss over `data` with respect to the flat
/// parameter vector.
pub fn batch_gradient(net: &PoseNet, data: &[SensorSample], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut g = vec![0.0; net.n_params()];
    let mut jets = Jets::default();
    for s in data {
        check_sample(net, s)?;
        loss_and_grad(net, s, cfg, &mut jets, Some(&mut g));
    }
    Ok(g)
}

/// Mean loss over a dataset.
pub fn mean_loss(net: &PoseNet, data: &[SensorSample], cfg: &TrainConfig) -> Result<LossParts> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut jets = Jets::default();
    let mut acc = LossParts::default();
    for s in data {
        check_sample(net, s)?;
        let p = loss_and_grad(net, s, cfg, &mut jets, None);
        acc.total += p.total;
        acc.accel += p.accel;
        acc.rotation += p.rotation;
    }
    let n = data.len() as f64;
    Ok(LossParts { total: acc.total / n, accel: acc.accel / n, rotation: acc.rotation / n })
}

/// Mini-batch gradient descent on the mean per-sample loss. The sample
/// order is reshuffled every epoch from `cfg.seed`. `label` names the
/// sensor in divergence errors.
pub fn train(net: &PoseNet, data: &[SensorSample], cfg: &TrainConfig, label: &str) -> Result<(PoseNet, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    for s in data {
        check_sample(net, s)?;
    }
    let mut net = net.clone();
    let np = net.n_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; np];
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut step = 0i32;
    let mut jets = Jets::default();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let p = loss_and_grad(&net, &data[i], cfg, &mut jets, Some(&mut grad));
                if !p.total.is_finite() {
                    return Err(Error::Diverged { sensor: label.to_string(), epoch });
                }
                sum += p.total;
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            if let Some(c) = cfg.grad_clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    grad.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            step += 1;
            let lr = cfg.learning_rate;
            let params = net.params_mut();
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
                Optimizer::Momentum { beta } => {
                    for ((p, g), v) in params.iter_mut().zip(&grad).zip(&mut m1) {
                        *v = beta * *v + g;
                        *p -= lr * *v;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for i in 0..np {
                        m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                        m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                        params[i] -= lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                    }
                }
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { sensor: label.to_string(), epoch });
            }
        }
        epoch_loss.push(sum / data.len() as f64);
    }
    let final_loss = mean_loss(&net, data, cfg)?;
    if !final_loss.total.is_finite() {
        return Err(Error::Diverged { sensor: label.to_string(), epoch: cfg.epochs });
    }
    Ok((net, TrainReport { epoch_loss, final_loss }))
}
