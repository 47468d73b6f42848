use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{Example, LossWeights, Network, Scaling};
use super::spec::{NetworkSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    pub validation: f64,
}

/// A fitted network with its loss curve.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub network: Network,
    pub history: Vec<EpochLoss>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Number of trailing examples held out for validation.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n < 2 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Fit a network on chronologically ordered examples. The last
/// `validation_fraction` of them drive early stopping; the weights of the
/// best validation epoch are returned.
pub fn train(spec: &NetworkSpec, examples: &[Example], cfg: &TrainConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    spec.validate()?;
    if examples.is_empty() {
        return Err(Error::Data("no training examples".into()));
    }
    for e in examples {
        if e.target.len() != spec.outputs || e.window.len() != spec.window || e.exog.len() != spec.exog_dim {
            return Err(Error::shape(
                format!("window {}, exog {}, target {}", spec.window, spec.exog_dim, spec.outputs),
                format!("window {}, exog {}, target {}", e.window.len(), e.exog.len(), e.target.len()),
            ));
        }
        if e.window.iter().chain(&e.exog).chain(&e.target).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in training examples".into()));
        }
    }
    let n_val = validation_count(examples.len(), cfg.validation_fraction);
    let (fit_set, val_set) = examples.split_at(examples.len() - n_val);

    let scaling = Scaling::fit(spec, fit_set);
    let mean: Vec<f64> = (0..spec.outputs)
        .map(|i| fit_set.iter().map(|e| e.target[i]).sum::<f64>() / fit_set.len() as f64)
        .collect();
    let mut rng = rng_from_seed(cfg.seed);
    let mut net = Network::new(spec.clone(), scaling, Some(&mean), &mut rng)?;
    let weights = LossWeights::coherence(cfg.alpha);
    let mut adam = Adam::new(net.params().len(), cfg.learning_rate);

    let mut order: Vec<usize> = (0..fit_set.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, net.params().to_vec());
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &fit_set[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&batch, weights)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, reason: "non-finite loss or gradient".into() });
            }
            total += loss * batch.len() as f64;
            adam.step(net.params_mut(), &grad);
        }
        let train_loss = total / fit_set.len() as f64;
        let monitor = if val_set.is_empty() { net.loss(fit_set, weights)? } else { net.loss(val_set, weights)? };
        if !monitor.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch, reason: "non-finite parameters or loss".into() });
        }
        history.push(EpochLoss { train: train_loss, validation: monitor });
        if monitor < best.0 {
            best = (monitor, epoch, net.params().to_vec());
        } else if epoch - best.1 > cfg.patience {
            stopped_early = true;
            break;
        }
    }
    log::debug!(
        "trained {} parameters for {} epochs, best epoch {} (loss {:.6})",
        net.params().len(),
        history.len(),
        best.1,
        best.0
    );
    net.params_mut().copy_from_slice(&best.2);
    Ok(TrainedNetwork { network: net, history, best_epoch: best.1, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::spec::ConvSpec;
    use rand::Rng as _;

    fn linear_data(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = 10.0 + 3.0 * x[0] - 2.0 * x[1];
                Example { window: vec![], exog: x, target: vec![0.3 * p, 0.7 * p] }
            })
            .collect()
    }

    fn mlp_spec() -> NetworkSpec {
        NetworkSpec { window: 0, conv: vec![], exog_dim: 2, dense: vec![8], outputs: 2, window_skip: false }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = [1.0, 1.0];
        adam.step(&mut p, &[5.0, -0.01]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - 1.1).abs() < 1e-4);
    }

    #[test]
    fn adam_zero_gradient_and_two_steps() {
        let mut adam = Adam::new(1, 0.01);
        let mut p = [2.0];
        adam.step(&mut p, &[0.0]);
        assert_eq!(p, [2.0]);

        let g = 0.5;
        let mut adam = Adam::new(1, 0.01);
        let mut p = [0.0];
        adam.step(&mut p, &[g]);
        adam.step(&mut p, &[g]);
        let (mut m, mut v, mut want) = (0.0, 0.0, 0.0);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            want -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p[0] - want).abs() < 1e-15);
    }

    #[test]
    fn learns_a_linear_map() {
        let data = linear_data(200, 1);
        let linear = NetworkSpec { window: 0, conv: vec![], exog_dim: 2, dense: vec![], outputs: 2, window_skip: false };
        let cfg = TrainConfig { learning_rate: 0.01, max_epochs: 500, batch_size: 16, patience: 50, ..Default::default() };
        let fit = train(&linear, &data, &cfg).unwrap();
        let loss = fit.network.loss(&data, LossWeights::coherence(0.5)).unwrap();
        assert!(loss < 1e-3, "loss {loss}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = linear_data(60, 2);
        let cfg = TrainConfig { max_epochs: 20, seed: 9, ..Default::default() };
        let a = train(&mlp_spec(), &data, &cfg).unwrap();
        let b = train(&mlp_spec(), &data, &cfg).unwrap();
        assert_eq!(a.network.params(), b.network.params());
        let c = train(&mlp_spec(), &data, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.network.params(), c.network.params());
    }

    #[test]
    fn zero_patience_stops_at_first_non_improvement() {
        let data = linear_data(80, 3);
        let cfg = TrainConfig { patience: 0, max_epochs: 500, learning_rate: 0.5, ..Default::default() };
        let fit = train(&mlp_spec(), &data, &cfg).unwrap();
        let h = &fit.history;
        let first_bad = (1..h.len())
            .find(|&e| h[e].validation >= h[..e].iter().map(|x| x.validation).fold(f64::INFINITY, f64::min));
        if let Some(e) = first_bad {
            assert_eq!(h.len(), e + 1);
        }
        let best = h.iter().map(|x| x.validation).fold(f64::INFINITY, f64::min);
        assert_eq!(h[fit.best_epoch].validation, best);
    }

    #[test]
    fn restores_best_weights() {
        let data = linear_data(100, 4);
        let cfg = TrainConfig { patience: 3, max_epochs: 200, learning_rate: 0.05, ..Default::default() };
        let fit = train(&mlp_spec(), &data, &cfg).unwrap();
        let n_val = validation_count(data.len(), cfg.validation_fraction);
        let val = &data[data.len() - n_val..];
        let loss = fit.network.loss(val, LossWeights::coherence(0.5)).unwrap();
        assert!((loss - fit.history[fit.best_epoch].validation).abs() < 1e-9 * loss.max(1.0));
    }

    #[test]
    fn full_batch_small_step_loss_does_not_increase() {
        let data = linear_data(40, 5);
        let spec = NetworkSpec { window: 0, conv: vec![], exog_dim: 2, dense: vec![4], outputs: 2, window_skip: false };
        let cfg = TrainConfig {
            batch_size: 1000,
            learning_rate: 1e-4,
            max_epochs: 40,
            validation_fraction: 0.0,
            patience: 100,
            ..Default::default()
        };
        let fit = train(&spec, &data, &cfg).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1].train <= w[0].train + 1e-9 * w[0].train.abs(), "{:?}", w);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let data = linear_data(30, 6);
        let cfg = TrainConfig { learning_rate: 1e300, max_epochs: 50, ..Default::default() };
        assert!(matches!(train(&mlp_spec(), &data, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn convolutional_branch_trains() {
        let mut rng = rng_from_seed(8);
        let data: Vec<Example> = (0..120)
            .map(|_| {
                let w: Vec<f64> = (0..5).map(|_| rng.random_range(50.0..150.0)).collect();
                let last = w[4];
                Example { window: w, exog: vec![], target: vec![0.4 * last, 0.6 * last] }
            })
            .collect();
        let spec = NetworkSpec { window: 5, conv: vec![ConvSpec { filters: 4, kernel: 3 }], exog_dim: 0, dense: vec![], outputs: 2, window_skip: false };
        let cfg = TrainConfig { learning_rate: 0.01, max_epochs: 300, patience: 40, ..Default::default() };
        let fit = train(&spec, &data, &cfg).unwrap();
        let first = fit.history[0].train;
        let best = fit.history[fit.best_epoch].train;
        assert!(best < 0.05 * first, "{first} -> {best}");
    }
}
