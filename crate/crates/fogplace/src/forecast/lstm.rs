//! LSTM regressor built from scratch: forward recurrence, backpropagation
//! through time, Adam updates, and a finite-difference gradient check.
//!
//! The network maps a fixed window of past values (min-max normalized from
//! the training split) to the next value through stacked LSTM layers:
//!
//!   f_t = sigmoid(W_f [h, x] + b_f)        forget gate
//!   i_t = sigmoid(W_i [h, x] + b_i)        input gate
//!   g_t = tanh   (W_c [h, x] + b_c)        candidate cell
//!   c_t = f_t * c_{t-1} + i_t * g_t
//!   o_t = sigmoid(W_o [h, x] + b_o)        output gate
//!   h_t = o_t * tanh(c_t)
//!
//! followed by a linear head on the final hidden state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mae,
    Mse,
}

/// Training hyperparameters. Desk-scale defaults; the full-scale setting
/// (window 144, two layers of 200 units, 1800 epochs) is expressible through
/// the same fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub layers: usize,
    pub loss: LossKind,
    pub window: usize,
}

impl Default for LstmHyper {
    fn default() -> Self {
        LstmHyper {
            epochs: 300,
            learning_rate: 0.01,
            hidden_dim: 16,
            layers: 1,
            loss: LossKind::Mae,
            window: 24,
        }
    }
}

/// Offsets of one layer's tensors inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    in_dim: usize,
    ni: usize, // in_dim + hidden
    w_f: usize,
    w_i: usize,
    w_c: usize,
    w_o: usize,
    b_f: usize,
    b_i: usize,
    b_c: usize,
    b_o: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    hidden: usize,
    layers: Vec<LayerOffsets>,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(hidden: usize, layer_count: usize) -> Layout {
        let mut layers = Vec::with_capacity(layer_count);
        let mut at = 0usize;
        for l in 0..layer_count {
            let in_dim = if l == 0 { 1 } else { hidden };
            let ni = in_dim + hidden;
            let mat = hidden * ni;
            let o = LayerOffsets {
                in_dim,
                ni,
                w_f: at,
                w_i: at + mat,
                w_c: at + 2 * mat,
                w_o: at + 3 * mat,
                b_f: at + 4 * mat,
                b_i: at + 4 * mat + hidden,
                b_c: at + 4 * mat + 2 * hidden,
                b_o: at + 4 * mat + 3 * hidden,
            };
            at += 4 * mat + 4 * hidden;
            layers.push(o);
        }
        let w_out = at;
        let b_out = at + hidden;
        Layout {
            hidden,
            layers,
            w_out,
            b_out,
            total: b_out + 1,
        }
    }
}

/// A trained LSTM regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub window: usize,
    pub hidden_dim: usize,
    pub layer_count: usize,
    pub norm_min: f64,
    pub norm_max: f64,
    params: Vec<f64>,
    layout: LayoutKey,
}

/// Cheap copy of the layout inputs; the full layout is rebuilt on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LayoutKey {
    hidden: usize,
    layers: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-layer forward caches for one sample (row-major [t * width + j]).
struct LayerCache {
    cat: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmModel {
    fn layout(&self) -> Layout {
        Layout::new(self.layout.hidden, self.layout.layers)
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn normalize(&self, v: f64) -> f64 {
        let denom = (self.norm_max - self.norm_min).max(1e-12);
        (v - self.norm_min) / denom
    }

    fn denormalize(&self, v: f64) -> f64 {
        v * (self.norm_max - self.norm_min) + self.norm_min
    }

    /// Run the recurrence on a normalized window, returning the normalized
    /// prediction and per-layer caches.
    #[allow(clippy::needless_range_loop)]
    fn forward_cached(&self, xs: &[f64]) -> (f64, Vec<LayerCache>) {
        let layout = self.layout();
        let hid = layout.hidden;
        let t_len = xs.len();
        let mut caches = Vec::with_capacity(layout.layers.len());
        let mut inputs: Vec<f64> = xs.to_vec(); // layer 0 inputs, one scalar per t

        for off in &layout.layers {
            let ni = off.ni;
            let mut cache = LayerCache {
                cat: vec![0.0; t_len * ni],
                f: vec![0.0; t_len * hid],
                i: vec![0.0; t_len * hid],
                g: vec![0.0; t_len * hid],
                o: vec![0.0; t_len * hid],
                c: vec![0.0; t_len * hid],
                tanh_c: vec![0.0; t_len * hid],
                h: vec![0.0; t_len * hid],
            };
            let mut h_prev = vec![0.0; hid];
            let mut c_prev = vec![0.0; hid];
            for t in 0..t_len {
                let cat = &mut cache.cat[t * ni..(t + 1) * ni];
                if off.in_dim == 1 {
                    cat[0] = inputs[t];
                } else {
                    cat[..off.in_dim]
                        .copy_from_slice(&inputs[t * off.in_dim..(t + 1) * off.in_dim]);
                }
                cat[off.in_dim..].copy_from_slice(&h_prev);
                for u in 0..hid {
                    let dot = |w_base: usize| -> f64 {
                        let row = &self.params[w_base + u * ni..w_base + (u + 1) * ni];
                        row.iter().zip(cat.iter()).map(|(w, x)| w * x).sum()
                    };
                    let zf = dot(off.w_f) + self.params[off.b_f + u];
                    let zi = dot(off.w_i) + self.params[off.b_i + u];
                    let zc = dot(off.w_c) + self.params[off.b_c + u];
                    let zo = dot(off.w_o) + self.params[off.b_o + u];
                    let f = sigmoid(zf);
                    let i = sigmoid(zi);
                    let g = zc.tanh();
                    let o = sigmoid(zo);
                    let c = f * c_prev[u] + i * g;
                    let tc = c.tanh();
                    let h = o * tc;
                    let at = t * hid + u;
                    cache.f[at] = f;
                    cache.i[at] = i;
                    cache.g[at] = g;
                    cache.o[at] = o;
                    cache.c[at] = c;
                    cache.tanh_c[at] = tc;
                    cache.h[at] = h;
                }
                h_prev.copy_from_slice(&cache.h[t * hid..(t + 1) * hid]);
                c_prev.copy_from_slice(&cache.c[t * hid..(t + 1) * hid]);
            }
            inputs = cache.h.clone();
            caches.push(cache);
        }

        let last = &caches.last().unwrap().h[(t_len - 1) * hid..t_len * hid];
        let pred = self.params[layout.w_out..layout.w_out + hid]
            .iter()
            .zip(last)
            .map(|(w, h)| w * h)
            .sum::<f64>()
            + self.params[layout.b_out];
        (pred, caches)
    }

    /// Predict the next value for a raw (unnormalized) window.
    pub fn forward(&self, window_values: &[f64]) -> Result<f64> {
        if window_values.len() != self.window {
            return Err(Error::InvalidInput(format!(
                "window of length {} fed to model with window {}",
                window_values.len(),
                self.window
            )));
        }
        let xs: Vec<f64> = window_values.iter().map(|&v| self.normalize(v)).collect();
        let (pred, _) = self.forward_cached(&xs);
        Ok(self.denormalize(pred))
    }

    /// Loss and full parameter gradient for one normalized sample.
    #[allow(clippy::needless_range_loop)]
    fn backward(&self, xs: &[f64], target_n: f64, loss: LossKind) -> (f64, Vec<f64>) {
        let layout = self.layout();
        let hid = layout.hidden;
        let t_len = xs.len();
        let (pred, caches) = self.forward_cached(xs);
        let err = pred - target_n;
        let (loss_value, dpred) = match loss {
            LossKind::Mse => (err * err, 2.0 * err),
            LossKind::Mae => (err.abs(), err.signum()),
        };

        let mut grads = vec![0.0; layout.total];
        // Output head.
        let last_h = &caches.last().unwrap().h[(t_len - 1) * hid..t_len * hid];
        for u in 0..hid {
            grads[layout.w_out + u] += dpred * last_h[u];
        }
        grads[layout.b_out] += dpred;

        // dh injected into each layer at each timestep from the layer above
        // (or the head, for the top layer at the last step).
        let mut dh_inject = vec![0.0; t_len * hid];
        for u in 0..hid {
            dh_inject[(t_len - 1) * hid + u] = dpred * self.params[layout.w_out + u];
        }

        for (l, off) in layout.layers.iter().enumerate().rev() {
            let cache = &caches[l];
            let ni = off.ni;
            let mut dh_carry = vec![0.0; hid];
            let mut dc_carry = vec![0.0; hid];
            let mut dx_all = vec![0.0; t_len * off.in_dim];
            let mut dzf = vec![0.0; hid];
            let mut dzi = vec![0.0; hid];
            let mut dzc = vec![0.0; hid];
            let mut dzo = vec![0.0; hid];
            for t in (0..t_len).rev() {
                let at = t * hid;
                for u in 0..hid {
                    let dh = dh_inject[at + u] + dh_carry[u];
                    let o = cache.o[at + u];
                    let tc = cache.tanh_c[at + u];
                    let f = cache.f[at + u];
                    let i = cache.i[at + u];
                    let g = cache.g[at + u];
                    let c_prev = if t == 0 { 0.0 } else { cache.c[at - hid + u] };
                    let dc = dh * o * (1.0 - tc * tc) + dc_carry[u];
                    dzo[u] = dh * tc * o * (1.0 - o);
                    dzf[u] = dc * c_prev * f * (1.0 - f);
                    dzi[u] = dc * g * i * (1.0 - i);
                    dzc[u] = dc * i * (1.0 - g * g);
                    dc_carry[u] = dc * f;
                }
                let cat = &cache.cat[t * ni..(t + 1) * ni];
                let mut dcat = vec![0.0; ni];
                for u in 0..hid {
                    let row_f = off.w_f + u * ni;
                    let row_i = off.w_i + u * ni;
                    let row_c = off.w_c + u * ni;
                    let row_o = off.w_o + u * ni;
                    for k in 0..ni {
                        grads[row_f + k] += dzf[u] * cat[k];
                        grads[row_i + k] += dzi[u] * cat[k];
                        grads[row_c + k] += dzc[u] * cat[k];
                        grads[row_o + k] += dzo[u] * cat[k];
                        dcat[k] += self.params[row_f + k] * dzf[u]
                            + self.params[row_i + k] * dzi[u]
                            + self.params[row_c + k] * dzc[u]
                            + self.params[row_o + k] * dzo[u];
                    }
                    grads[off.b_f + u] += dzf[u];
                    grads[off.b_i + u] += dzi[u];
                    grads[off.b_c + u] += dzc[u];
                    grads[off.b_o + u] += dzo[u];
                }
                dx_all[t * off.in_dim..(t + 1) * off.in_dim].copy_from_slice(&dcat[..off.in_dim]);
                dh_carry.copy_from_slice(&dcat[off.in_dim..]);
            }
            if l > 0 {
                // The inputs of this layer are the hidden states below.
                dh_inject.copy_from_slice(&dx_all);
            }
        }
        (loss_value, grads)
    }
}

/// Outcome of training: the model plus the per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct LstmTraining {
    pub model: LstmModel,
    pub epoch_losses: Vec<f64>,
}

/// Train on sliding windows of `series` with Adam updates over fixed-order
/// mini-batches of 32. Weights start from a seeded uniform [-0.1, 0.1];
/// normalization parameters come from the training series alone.
pub fn lstm_train(series: &[f64], hyper: &LstmHyper, seed: u64) -> Result<LstmTraining> {
    if hyper.window < 1 || hyper.hidden_dim < 1 || hyper.layers < 1 || hyper.epochs < 1 {
        return Err(Error::InvalidInput(
            "window, hidden_dim, layers, epochs must all be at least 1".into(),
        ));
    }
    if series.len() <= hyper.window + 1 {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for window {}",
            series.len(),
            hyper.window
        )));
    }
    let norm_min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let norm_max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let layout = Layout::new(hyper.hidden_dim, hyper.layers);
    let mut rng = rng_from_seed(seed);
    let params: Vec<f64> = (0..layout.total)
        .map(|_| rng.random_range(-0.1..0.1))
        .collect();
    let mut model = LstmModel {
        window: hyper.window,
        hidden_dim: hyper.hidden_dim,
        layer_count: hyper.layers,
        norm_min,
        norm_max,
        params,
        layout: LayoutKey {
            hidden: hyper.hidden_dim,
            layers: hyper.layers,
        },
    };

    let denom = (norm_max - norm_min).max(1e-12);
    let normalized: Vec<f64> = series.iter().map(|v| (v - norm_min) / denom).collect();
    let samples: Vec<(&[f64], f64)> = (0..normalized.len() - hyper.window)
        .map(|i| {
            (
                &normalized[i..i + hyper.window],
                normalized[i + hyper.window],
            )
        })
        .collect();

    // Adam state.
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; layout.total];
    let mut v = vec![0.0; layout.total];
    let mut step = 0u64;
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);

    const BATCH: usize = 32;
    let mut batch_grads = vec![0.0; layout.total];
    #[allow(clippy::needless_range_loop)]
    for epoch in 0..hyper.epochs {
        let mut total = 0.0;
        for chunk in samples.chunks(BATCH) {
            batch_grads.iter_mut().for_each(|g| *g = 0.0);
            for (xs, target) in chunk {
                let (loss, grads) = model.backward(xs, *target, hyper.loss);
                total += loss;
                for (b, g) in batch_grads.iter_mut().zip(&grads) {
                    *b += g;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for j in 0..layout.total {
                let g = batch_grads[j] * scale;
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let update = hyper.learning_rate * (m[j] / bc1) / ((v[j] / bc2).sqrt() + eps);
                model.params[j] -= update;
            }
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite training loss {mean}"),
            });
        }
        epoch_losses.push(mean);
    }
    Ok(LstmTraining {
        model,
        epoch_losses,
    })
}

/// Gradients of the loss at one sample, exposed for verification.
pub fn lstm_gradients(
    model: &LstmModel,
    window_values: &[f64],
    target: f64,
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    if window_values.len() != model.window {
        return Err(Error::InvalidInput(format!(
            "window of length {} fed to model with window {}",
            window_values.len(),
            model.window
        )));
    }
    let xs: Vec<f64> = window_values.iter().map(|&v| model.normalize(v)).collect();
    let target_n = model.normalize(target);
    Ok(model.backward(&xs, target_n, loss))
}

/// Compare supplied gradients against central finite differences over every
/// parameter; returns the maximum relative error, with the relative
/// denominator floored at 1e-12.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check_against(
    model: &LstmModel,
    window_values: &[f64],
    target: f64,
    loss: LossKind,
    grads: &[f64],
) -> Result<f64> {
    if grads.len() != model.params.len() {
        return Err(Error::InvalidInput(format!(
            "{} gradients for {} parameters",
            grads.len(),
            model.params.len()
        )));
    }
    let xs: Vec<f64> = window_values.iter().map(|&v| model.normalize(v)).collect();
    let target_n = model.normalize(target);
    let h = 1e-5;
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    for j in 0..model.params.len() {
        let orig = model.params[j];
        probe.params[j] = orig + h;
        let (up, _) = probe.forward_cached(&xs);
        probe.params[j] = orig - h;
        let (down, _) = probe.forward_cached(&xs);
        probe.params[j] = orig;
        let loss_at = |pred: f64| match loss {
            LossKind::Mse => (pred - target_n) * (pred - target_n),
            LossKind::Mae => (pred - target_n).abs(),
        };
        let numeric = (loss_at(up) - loss_at(down)) / (2.0 * h);
        let analytic = grads[j];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

/// Full analytic-vs-numeric gradient check at one sample pair.
pub fn lstm_gradient_check(
    model: &LstmModel,
    window_values: &[f64],
    target: f64,
    loss: LossKind,
) -> Result<f64> {
    if model.parameter_count() > 1_000 {
        return Err(Error::SizeLimit(format!(
            "{} parameters exceed the finite-difference budget of 1000",
            model.parameter_count()
        )));
    }
    let (_, grads) = lstm_gradients(model, window_values, target, loss)?;
    gradient_check_against(model, window_values, target, loss, &grads)
}

/// Build an untrained model with given weights; used by deserialization and
/// tests that need hand-constructed networks.
pub fn lstm_from_parts(
    window: usize,
    hidden_dim: usize,
    layers: usize,
    norm_min: f64,
    norm_max: f64,
    params: Vec<f64>,
) -> Result<LstmModel> {
    let layout = Layout::new(hidden_dim, layers);
    if params.len() != layout.total {
        return Err(Error::InvalidInput(format!(
            "{} parameters supplied, layout needs {}",
            params.len(),
            layout.total
        )));
    }
    Ok(LstmModel {
        window,
        hidden_dim,
        layer_count: layers,
        norm_min,
        norm_max,
        params,
        layout: LayoutKey {
            hidden: hidden_dim,
            layers,
        },
    })
}

pub const LSTM_SCHEMA_VERSION: u32 = 1;

/// Versioned wire form: weights as one flat array per tensor, in layer order
/// (w_f, w_i, w_c, w_o, b_f, b_i, b_c, b_o per layer, then w_out, b_out).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmModelDoc {
    pub schema_version: u32,
    pub window: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub norm_min: f64,
    pub norm_max: f64,
    pub weights: Vec<Vec<f64>>,
}

impl LstmModel {
    pub fn to_doc(&self) -> LstmModelDoc {
        let layout = self.layout();
        let hid = layout.hidden;
        let mut weights = Vec::new();
        for off in &layout.layers {
            let mat = hid * off.ni;
            for base in [off.w_f, off.w_i, off.w_c, off.w_o] {
                weights.push(self.params[base..base + mat].to_vec());
            }
            for base in [off.b_f, off.b_i, off.b_c, off.b_o] {
                weights.push(self.params[base..base + hid].to_vec());
            }
        }
        weights.push(self.params[layout.w_out..layout.w_out + hid].to_vec());
        weights.push(vec![self.params[layout.b_out]]);
        LstmModelDoc {
            schema_version: LSTM_SCHEMA_VERSION,
            window: self.window,
            hidden_dim: self.hidden_dim,
            layers: self.layer_count,
            norm_min: self.norm_min,
            norm_max: self.norm_max,
            weights,
        }
    }

    pub fn from_doc(doc: &LstmModelDoc) -> Result<LstmModel> {
        if doc.schema_version != LSTM_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported LSTM schema version {}",
                doc.schema_version
            )));
        }
        let params: Vec<f64> = doc.weights.iter().flatten().copied().collect();
        lstm_from_parts(
            doc.window,
            doc.hidden_dim,
            doc.layers,
            doc.norm_min,
            doc.norm_max,
            params,
        )
    }
}
