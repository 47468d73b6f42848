use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed input standardization and output scale, estimated on the training
/// examples and stored with the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub window_mean: f64,
    pub window_std: f64,
    pub exog_mean: Vec<f64>,
    pub exog_std: Vec<f64>,
    /// Multiplier applied to the linear head, so raw outputs are on the
    /// scale of the targets.
    pub output_scale: f64,
}

impl Scaling {
    pub fn identity(spec: &NetworkSpec) -> Self {
        Self {
            window_mean: 0.0,
            window_std: 1.0,
            exog_mean: vec![0.0; spec.exog_dim],
            exog_std: vec![1.0; spec.exog_dim],
            output_scale: 1.0,
        }
    }

    /// Estimate from examples: pooled window moments, per-variable exogenous
    /// moments, and the mean per-output target standard deviation.
    pub fn fit(spec: &NetworkSpec, examples: &[Example]) -> Self {
        let mut s = Self::identity(spec);
        if examples.is_empty() {
            return s;
        }
        if spec.window > 0 {
            let vals = examples.iter().flat_map(|e| e.window.iter().copied());
            let (m, sd) = moments(vals);
            s.window_mean = m;
            s.window_std = nonzero(sd);
        }
        for j in 0..spec.exog_dim {
            let (m, sd) = moments(examples.iter().map(|e| e.exog[j]));
            s.exog_mean[j] = m;
            s.exog_std[j] = nonzero(sd);
        }
        let mut sd_sum = 0.0;
        let mut abs_mean = 0.0;
        for i in 0..spec.outputs {
            let (m, sd) = moments(examples.iter().map(|e| e.target[i]));
            sd_sum += sd;
            abs_mean += m.abs();
        }
        let k = spec.outputs as f64;
        s.output_scale = if sd_sum > 0.0 { sd_sum / k } else { (abs_mean / k).max(1.0) };
        s
    }
}

fn moments(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in vals {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    if n == 0.0 {
        return (0.0, 0.0);
    }
    (mean, (m2 / n).sqrt())
}

fn nonzero(sd: f64) -> f64 {
    if sd > 1e-12 && sd.is_finite() { sd } else { 1.0 }
}

/// A training or inference example. `window` has length `spec.window`,
/// `exog` length `spec.exog_dim`, `target` length `spec.outputs` (may be
/// empty at inference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub window: Vec<f64>,
    pub exog: Vec<f64>,
    pub target: Vec<f64>,
}

/// Relative weights of the fit and aggregation terms of the loss
/// `(1/T) sum_t [fit * |e_t|^2 + sum * (1'e_t)^2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub fit: f64,
    pub sum: f64,
}

impl LossWeights {
    pub fn coherence(alpha: f64) -> Self {
        Self { fit: 1.0 - alpha, sum: alpha }
    }

    /// Loss of one example and its gradient with respect to the prediction.
    fn eval(&self, target: &[f64], pred: &[f64], grad: &mut [f64]) -> f64 {
        let mut sq = 0.0;
        let mut tot = 0.0;
        for (&y, &p) in target.iter().zip(pred) {
            let e = y - p;
            sq += e * e;
            tot += e;
        }
        for ((g, &y), &p) in grad.iter_mut().zip(target).zip(pred) {
            *g = -2.0 * self.fit * (y - p) - 2.0 * self.sum * tot;
        }
        self.fit * sq + self.sum * tot * tot
    }
}

/// Coherence-penalized squared loss over a batch of rows.
pub fn coherence_loss(actual: &[Vec<f64>], predicted: &[Vec<f64>], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::shape(format!("{} rows", actual.len()), format!("{} rows", predicted.len())));
    }
    let w = LossWeights::coherence(alpha);
    let mut total = 0.0;
    for (y, p) in actual.iter().zip(predicted) {
        if y.len() != p.len() {
            return Err(Error::shape(format!("{} columns", y.len()), format!("{} columns", p.len())));
        }
        let mut g = vec![0.0; y.len()];
        total += w.eval(y, p, &mut g);
    }
    Ok(total / actual.len() as f64)
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
    kernel: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    conv: Vec<Slot>,
    dense: Vec<Slot>,
    head: Slot,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut off = 0;
        let mut take = |inputs: usize, outputs: usize, kernel: usize| {
            let w = off;
            let b = w + outputs * inputs * kernel;
            off = b + outputs;
            Slot { w, b, inputs, outputs, kernel }
        };
        let mut conv = Vec::new();
        let mut ch = 1;
        for c in &spec.conv {
            conv.push(take(ch, c.filters, c.kernel));
            ch = c.filters;
        }
        let mut dense = Vec::new();
        let mut width = spec.exog_dim;
        for &d in &spec.dense {
            dense.push(take(width, d, 1));
            width = d;
        }
        let head = take(spec.head_inputs(), spec.outputs, 1);
        Self { conv, dense, head }
    }
}

/// Trainable network with all parameters in one flat vector.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    scaling: Scaling,
    params: Vec<f64>,
    layout: Layout,
}

/// Per-example activations kept for backpropagation.
#[derive(Debug, Default)]
struct Trace {
    conv: Vec<Vec<f64>>,
    dense: Vec<Vec<f64>>,
    head_in: Vec<f64>,
    out: Vec<f64>,
}

impl Network {
    /// Random initialization: He-uniform for ReLU layers, Glorot-uniform for
    /// the head, zero biases except the head bias, which starts at the mean
    /// target in scaled units when `target_mean` is given.
    pub fn new(spec: NetworkSpec, scaling: Scaling, target_mean: Option<&[f64]>, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let mut params = vec![0.0; spec.n_params()];
        let mut fill = |slot: &Slot, limit: f64, params: &mut Vec<f64>| {
            for p in &mut params[slot.w..slot.b] {
                *p = rng.random_range(-limit..=limit);
            }
        };
        for s in layout.conv.iter().chain(&layout.dense) {
            let fan_in = (s.inputs * s.kernel) as f64;
            fill(s, (6.0 / fan_in).sqrt(), &mut params);
        }
        let h = layout.head;
        fill(&h, (6.0 / (h.inputs + h.outputs) as f64).sqrt(), &mut params);
        if let Some(mean) = target_mean {
            if mean.len() != spec.outputs {
                return Err(Error::shape(format!("{} target means", spec.outputs), mean.len().to_string()));
            }
            for (i, m) in mean.iter().enumerate() {
                params[h.b + i] = m / scaling.output_scale;
            }
        }
        let net = Self { spec, scaling, params, layout };
        net.check_scaling()?;
        Ok(net)
    }

    /// Rebuild from stored parts.
    pub fn from_parts(spec: NetworkSpec, scaling: Scaling, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.n_params() {
            return Err(Error::shape(format!("{} parameters", spec.n_params()), params.len().to_string()));
        }
        let layout = Layout::new(&spec);
        let net = Self { spec, scaling, params, layout };
        net.check_scaling()?;
        Ok(net)
    }

    fn check_scaling(&self) -> Result<()> {
        let s = &self.scaling;
        if s.exog_mean.len() != self.spec.exog_dim || s.exog_std.len() != self.spec.exog_dim {
            return Err(Error::shape(
                format!("{} exogenous moments", self.spec.exog_dim),
                s.exog_mean.len().to_string(),
            ));
        }
        if !(s.output_scale.is_finite() && s.output_scale > 0.0) {
            return Err(Error::Config("output scale must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Names and lengths of the parameter blocks, in storage order.
    pub fn blocks(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        let mut push = |name: String, s: &Slot| {
            out.push((format!("{name}.weight"), s.b - s.w));
            out.push((format!("{name}.bias"), s.outputs));
        };
        for (i, s) in self.layout.conv.iter().enumerate() {
            push(format!("conv{i}"), s);
        }
        for (i, s) in self.layout.dense.iter().enumerate() {
            push(format!("dense{i}"), s);
        }
        push("head".into(), &self.layout.head);
        out
    }

    fn check_inputs(&self, ex: &Example) -> Result<()> {
        if ex.window.len() != self.spec.window {
            return Err(Error::shape(format!("window of {}", self.spec.window), ex.window.len().to_string()));
        }
        if ex.exog.len() != self.spec.exog_dim {
            return Err(Error::shape(format!("{} explanatory values", self.spec.exog_dim), ex.exog.len().to_string()));
        }
        Ok(())
    }

    /// Network output for one example, on the target scale.
    pub fn predict(&self, ex: &Example) -> Result<Vec<f64>> {
        self.check_inputs(ex)?;
        let mut t = Trace::default();
        self.forward(ex, &mut t);
        Ok(t.out)
    }

    pub fn predict_many(&self, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
        examples.iter().map(|e| self.predict(e)).collect()
    }

    fn forward(&self, ex: &Example, t: &mut Trace) {
        let sc = &self.scaling;
        let p = &self.params;
        let w = self.spec.window;
        t.conv.clear();
        t.dense.clear();
        t.head_in.clear();
        if w > 0 {
            t.conv.push(ex.window.iter().map(|v| (v - sc.window_mean) / sc.window_std).collect());
            for s in &self.layout.conv {
                let mut out = conv1d_same(t.conv.last().unwrap(), s.inputs, w, &p[s.w..s.b], &p[s.b..s.b + s.outputs], s.kernel);
                relu(&mut out);
                t.conv.push(out);
            }
            t.head_in.extend_from_slice(t.conv.last().unwrap());
            if self.spec.skip_features() > 0 {
                t.head_in.extend_from_slice(&t.conv[0]);
            }
        }
        if self.spec.exog_dim > 0 {
            t.dense.push(
                ex.exog
                    .iter()
                    .zip(sc.exog_mean.iter().zip(&sc.exog_std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect(),
            );
            for s in &self.layout.dense {
                let mut out = affine(t.dense.last().unwrap(), &p[s.w..s.b], &p[s.b..s.b + s.outputs]);
                relu(&mut out);
                t.dense.push(out);
            }
            t.head_in.extend_from_slice(t.dense.last().unwrap());
        }
        let h = &self.layout.head;
        t.out = affine(&t.head_in, &p[h.w..h.b], &p[h.b..h.b + h.outputs]);
        for o in &mut t.out {
            *o *= sc.output_scale;
        }
    }

    /// Mean loss over `batch` and its gradient with respect to the
    /// parameters.
    pub fn loss_and_gradient(&self, batch: &[&Example], weights: LossWeights) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let mut t = Trace::default();
        let mut dout = vec![0.0; self.spec.outputs];
        let mut loss = 0.0;
        for ex in batch {
            self.check_inputs(ex)?;
            if ex.target.len() != self.spec.outputs {
                return Err(Error::shape(format!("{} targets", self.spec.outputs), ex.target.len().to_string()));
            }
            self.forward(ex, &mut t);
            loss += weights.eval(&ex.target, &t.out, &mut dout);
            self.backward(&t, &dout, &mut grad);
        }
        let n = batch.len() as f64;
        for g in &mut grad {
            *g /= n;
        }
        Ok((loss / n, grad))
    }

    /// Mean loss over examples without gradients.
    pub fn loss(&self, examples: &[Example], weights: LossWeights) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut t = Trace::default();
        let mut dout = vec![0.0; self.spec.outputs];
        let mut loss = 0.0;
        for ex in examples {
            self.check_inputs(ex)?;
            self.forward(ex, &mut t);
            loss += weights.eval(&ex.target, &t.out, &mut dout);
        }
        Ok(loss / examples.len() as f64)
    }

    fn backward(&self, t: &Trace, dout: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let h = &self.layout.head;
        let s = self.scaling.output_scale;
        let dy: Vec<f64> = dout.iter().map(|d| d * s).collect();
        let dz = affine_backward(&t.head_in, &dy, &p[h.w..h.b], grad, h.w, h.b, true);
        let cnn = self.spec.cnn_features();
        if self.spec.exog_dim > 0 {
            let mut d = dz[cnn + self.spec.skip_features()..].to_vec();
            for (i, sl) in self.layout.dense.iter().enumerate().rev() {
                relu_mask(&mut d, &t.dense[i + 1]);
                d = affine_backward(&t.dense[i], &d, &p[sl.w..sl.b], grad, sl.w, sl.b, i > 0);
            }
        }
        if self.spec.window > 0 {
            let w = self.spec.window;
            let mut d = dz[..cnn].to_vec();
            for (i, sl) in self.layout.conv.iter().enumerate().rev() {
                relu_mask(&mut d, &t.conv[i + 1]);
                d = conv1d_same_backward(&t.conv[i], sl.inputs, w, &d, &p[sl.w..sl.b], sl.kernel, grad, sl.w, sl.b, i > 0);
            }
        }
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_mask(d: &mut [f64], activated: &[f64]) {
    for (g, &a) in d.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// `W x + b` with `W` stored row-major as `[out][in]`.
fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| bo + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

fn affine_backward(x: &[f64], dy: &[f64], w: &[f64], grad: &mut [f64], w_off: usize, b_off: usize, want_input: bool) -> Vec<f64> {
    let n = x.len();
    let mut dx = vec![0.0; if want_input { n } else { 0 }];
    for (o, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad[b_off + o] += d;
        let row = &mut grad[w_off + o * n..w_off + (o + 1) * n];
        for (g, &xi) in row.iter_mut().zip(x) {
            *g += d * xi;
        }
        if want_input {
            for (dxi, &wi) in dx.iter_mut().zip(&w[o * n..(o + 1) * n]) {
                *dxi += d * wi;
            }
        }
    }
    dx
}

/// Stride-1 convolution with zero "same" padding: `floor((k-1)/2)` zeros on
/// the left, the rest on the right. Input and output are channel-major
/// (`[ch][t]`); weights are `[out][in][k]`.
pub(crate) fn conv1d_same(input: &[f64], in_ch: usize, len: usize, w: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let out_ch = b.len();
    let pad = (k - 1) / 2;
    let mut out = vec![0.0; out_ch * len];
    for o in 0..out_ch {
        let dst = &mut out[o * len..(o + 1) * len];
        dst.fill(b[o]);
        for c in 0..in_ch {
            let src = &input[c * len..(c + 1) * len];
            let ker = &w[(o * in_ch + c) * k..(o * in_ch + c + 1) * k];
            for (j, &wj) in ker.iter().enumerate() {
                // output t reads input t + j - pad
                let (t0, t1) = tap_range(j, pad, len);
                for t in t0..t1 {
                    dst[t] += wj * src[t + j - pad];
                }
            }
        }
    }
    out
}

/// Output positions `t` for which `t + j - pad` lies inside `[0, len)`.
fn tap_range(j: usize, pad: usize, len: usize) -> (usize, usize) {
    let t0 = pad.saturating_sub(j);
    let t1 = (len + pad).saturating_sub(j).min(len);
    (t0, t1.max(t0))
}

#[allow(clippy::too_many_arguments)]
fn conv1d_same_backward(
    input: &[f64],
    in_ch: usize,
    len: usize,
    dout: &[f64],
    w: &[f64],
    k: usize,
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
    want_input: bool,
) -> Vec<f64> {
    let out_ch = dout.len() / len;
    let pad = (k - 1) / 2;
    let mut din = vec![0.0; if want_input { in_ch * len } else { 0 }];
    for o in 0..out_ch {
        let d = &dout[o * len..(o + 1) * len];
        grad[b_off + o] += d.iter().sum::<f64>();
        for c in 0..in_ch {
            let src = &input[c * len..(c + 1) * len];
            let base = (o * in_ch + c) * k;
            for j in 0..k {
                let (t0, t1) = tap_range(j, pad, len);
                let mut acc = 0.0;
                for t in t0..t1 {
                    acc += d[t] * src[t + j - pad];
                }
                grad[w_off + base + j] += acc;
                if want_input {
                    let wj = w[base + j];
                    let dst = &mut din[c * len..(c + 1) * len];
                    for t in t0..t1 {
                        dst[t + j - pad] += wj * d[t];
                    }
                }
            }
        }
    }
    din
}
