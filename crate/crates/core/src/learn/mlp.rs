//! Fully connected toy classifier with a classification head and a HAG head.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::loss::{log_sum_exp, softmax, LossConfig};
use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Output index of the non-ground logit in the classification head.
pub const NON_GROUND_CLASS: usize = 0;
/// Output index of the ground logit in the classification head.
pub const GROUND_CLASS: usize = 1;

/// Samples per gradient work unit; partial sums are reduced in unit order.
const GRADIENT_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn uniform(inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.range(-bound, bound)).collect(),
            bias: (0..outputs).map(|_| rng.range(-bound, bound)).collect(),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    /// Accumulates parameter gradients into `grad` (weights then bias) and
    /// returns the gradient with respect to the input.
    fn backward(&self, x: &[f64], delta: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut dx = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            let d = delta[o];
            gb[o] += d;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
        dx
    }
}

/// Trunk of tanh layers feeding two independent linear heads.
#[derive(Debug)]
pub struct ToyClassifier {
    pub input_dim: usize,
    pub hidden: Vec<Dense>,
    pub cls_head: Dense,
    pub hag_head: Dense,
    /// Per-feature standardization applied before the trunk: `(x - shift) * scale`.
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    hag_head_evals: AtomicU64,
}

impl Clone for ToyClassifier {
    fn clone(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            hidden: self.hidden.clone(),
            cls_head: self.cls_head.clone(),
            hag_head: self.hag_head.clone(),
            input_shift: self.input_shift.clone(),
            input_scale: self.input_scale.clone(),
            hag_head_evals: AtomicU64::new(self.hag_head_evals.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for ToyClassifier {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.hidden == other.hidden
            && self.cls_head == other.cls_head
            && self.hag_head == other.hag_head
            && self.input_shift == other.input_shift
            && self.input_scale == other.input_scale
    }
}

/// Per-sample activations kept for backpropagation.
struct Trace {
    /// Normalized input followed by each hidden layer's tanh output.
    activations: Vec<Vec<f64>>,
    cls_logits: Vec<f64>,
    hag_logits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub cls: f64,
    pub hag: f64,
    pub total: f64,
}

/// Gradient of the total loss, laid out like [`ToyClassifier::flat_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl ToyClassifier {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization from `seed`.
    pub fn new(input_dim: usize, hidden: &[usize], hag_bins: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = input_dim;
        for &w in hidden {
            layers.push(Dense::uniform(fan_in, w, &mut rng));
            fan_in = w;
        }
        let cls_head = Dense::uniform(fan_in, 2, &mut rng);
        let hag_head = Dense::uniform(fan_in, hag_bins, &mut rng);
        Self {
            input_dim,
            hidden: layers,
            cls_head,
            hag_head,
            input_shift: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
            hag_head_evals: AtomicU64::new(0),
        }
    }

    /// Zeroes both heads so every input maps to uniform class and bin probabilities.
    pub fn with_symmetric_heads(mut self) -> Self {
        let width = self.trunk_width();
        self.cls_head = Dense::zeros(width, 2);
        self.hag_head = Dense::zeros(width, self.hag_head.outputs);
        self
    }

    pub fn from_parts(
        input_dim: usize,
        hidden: Vec<Dense>,
        cls_head: Dense,
        hag_head: Dense,
        input_shift: Vec<f64>,
        input_scale: Vec<f64>,
    ) -> Result<Self> {
        let mut fan_in = input_dim;
        let well_formed = |l: &Dense| {
            l.weights.len() == l.inputs * l.outputs && l.bias.len() == l.outputs
        };
        for layer in &hidden {
            if layer.inputs != fan_in || !well_formed(layer) {
                return Err(Error::Validation("inconsistent hidden layer dimensions".into()));
            }
            fan_in = layer.outputs;
        }
        for head in [&cls_head, &hag_head] {
            if head.inputs != fan_in || !well_formed(head) {
                return Err(Error::Validation("inconsistent head dimensions".into()));
            }
        }
        if cls_head.outputs != 2 || input_shift.len() != input_dim || input_scale.len() != input_dim
        {
            return Err(Error::Validation("inconsistent classifier heads or normalization".into()));
        }
        Ok(Self {
            input_dim,
            hidden,
            cls_head,
            hag_head,
            input_shift,
            input_scale,
            hag_head_evals: AtomicU64::new(0),
        })
    }

    pub fn trunk_width(&self) -> usize {
        self.hidden.last().map_or(self.input_dim, |l| l.outputs)
    }

    pub fn hag_bins(&self) -> usize {
        self.hag_head.outputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.outputs).collect()
    }

    /// Number of HAG head evaluations since construction.
    pub fn hag_head_evaluations(&self) -> u64 {
        self.hag_head_evals.load(Ordering::Relaxed)
    }

    /// Sets input standardization from feature means and standard deviations.
    pub fn fit_normalization(&mut self, features: &FeatureMatrix) {
        let n = features.rows().max(1) as f64;
        for j in 0..self.input_dim {
            let mean = (0..features.rows()).map(|i| features.row(i)[j]).sum::<f64>() / n;
            let var = (0..features.rows())
                .map(|i| (features.row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            self.input_shift[j] = mean;
            self.input_scale[j] = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain([&self.cls_head, &self.hag_head])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .chain([&mut self.cls_head, &mut self.hag_head])
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    /// All trainable parameters: each hidden layer (weights, bias), then the
    /// classification head, then the HAG head.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut offset = 0;
        for l in self.layers_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    /// Flat-parameter range of the classification head.
    pub fn cls_head_range(&self) -> Range<usize> {
        let start: usize = self.hidden.iter().map(Dense::param_count).sum();
        start..start + self.cls_head.param_count()
    }

    /// Flat-parameter range of the HAG head.
    pub fn hag_head_range(&self) -> Range<usize> {
        let start = self.cls_head_range().end;
        start..start + self.hag_head.param_count()
    }

    fn check_dim(&self, features: &FeatureMatrix) -> Result<()> {
        if features.dim() != self.input_dim {
            return Err(Error::Validation(format!(
                "feature dimension {} does not match classifier input {}",
                features.dim(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn trunk(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let input: Vec<f64> = x
            .iter()
            .zip(self.input_shift.iter().zip(&self.input_scale))
            .map(|(v, (s, k))| (v - s) * k)
            .collect();
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: "normalized input".into(),
            });
        }
        let mut activations = vec![input];
        let mut buf = Vec::new();
        for (li, layer) in self.hidden.iter().enumerate() {
            layer.forward(activations.last().unwrap(), &mut buf);
            let h: Vec<f64> = buf.iter().map(|a| a.tanh()).collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("hidden layer {li}"),
                });
            }
            activations.push(h);
        }
        Ok(activations)
    }

    fn head(&self, layer: &Dense, h: &[f64], name: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(layer.outputs);
        layer.forward(h, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: name.into(),
            });
        }
        Ok(out)
    }

    fn trace(&self, x: &[f64]) -> Result<Trace> {
        let activations = self.trunk(x)?;
        let h = activations.last().unwrap();
        let cls_logits = self.head(&self.cls_head, h, "classification head")?;
        self.hag_head_evals.fetch_add(1, Ordering::Relaxed);
        let hag_logits = self.head(&self.hag_head, h, "HAG head")?;
        Ok(Trace {
            activations,
            cls_logits,
            hag_logits,
        })
    }

    /// Classification and HAG logits for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.trace(x)?;
        Ok((t.cls_logits, t.hag_logits))
    }

    /// Ground probability per row. Only the trunk and the classification head run.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        (0..features.rows())
            .into_par_iter()
            .map(|i| {
                let acts = self.trunk(features.row(i))?;
                let logits = self.head(&self.cls_head, acts.last().unwrap(), "classification head")?;
                Ok(softmax(&logits)[GROUND_CLASS])
            })
            .collect()
    }

    /// Loss terms only, without gradients.
    pub fn loss(
        &self,
        features: &FeatureMatrix,
        classes: &[usize],
        bins: &[usize],
        cfg: &LossConfig,
    ) -> Result<LossBreakdown> {
        Ok(self.loss_and_gradients(features, classes, bins, cfg)?.0)
    }

    /// Mean total loss over the batch and its analytic gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        features: &FeatureMatrix,
        classes: &[usize],
        bins: &[usize],
        cfg: &LossConfig,
    ) -> Result<(LossBreakdown, Gradients)> {
        self.check_dim(features)?;
        let n = features.rows();
        if n == 0 {
            return Err(Error::Validation("empty batch".into()));
        }
        for len in [classes.len(), bins.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if !(0.0..=1.0).contains(&cfg.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", cfg.lambda)));
        }
        let weights = &cfg.hag_binning.weights;
        if weights.len() != self.hag_bins() {
            return Err(Error::LengthMismatch {
                expected: self.hag_bins(),
                actual: weights.len(),
            });
        }

        let chunks: Vec<Range<usize>> = (0..n)
            .step_by(GRADIENT_CHUNK)
            .map(|s| s..(s + GRADIENT_CHUNK).min(n))
            .collect();
        let partials: Vec<(f64, f64, Vec<f64>)> = chunks
            .into_par_iter()
            .map(|range| self.chunk_gradients(features, classes, bins, cfg, range))
            .collect::<Result<_>>()?;

        let mut cls_sum = 0.0;
        let mut hag_sum = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (c, h, g) in partials {
            cls_sum += c;
            hag_sum += h;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        let inv_n = 1.0 / n as f64;
        let cls = cls_sum * inv_n;
        let hag = hag_sum * inv_n;
        let breakdown = LossBreakdown {
            cls,
            hag,
            total: (1.0 - cfg.lambda) * cls + cfg.lambda * hag,
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                location: "parameter gradient".into(),
            });
        }
        Ok((breakdown, Gradients { values: grad }))
    }

    /// Unnormalized loss sums and gradient (already scaled by 1/N) over a sample range.
    fn chunk_gradients(
        &self,
        features: &FeatureMatrix,
        classes: &[usize],
        bins: &[usize],
        cfg: &LossConfig,
        range: Range<usize>,
    ) -> Result<(f64, f64, Vec<f64>)> {
        let n = features.rows() as f64;
        let lambda = cfg.lambda;
        let weights = &cfg.hag_binning.weights;
        let mut grad = vec![0.0; self.param_count()];
        let mut cls_sum = 0.0;
        let mut hag_sum = 0.0;

        // Offsets of each layer's block in the flat layout.
        let mut offsets = Vec::with_capacity(self.hidden.len() + 2);
        let mut off = 0;
        for l in self.layers() {
            offsets.push(off);
            off += l.param_count();
        }
        let cls_off = offsets[self.hidden.len()];
        let hag_off = offsets[self.hidden.len() + 1];

        for i in range {
            let (t_cls, t_bin) = (classes[i], bins[i]);
            if t_cls >= 2 || t_bin >= self.hag_bins() {
                return Err(Error::Validation(format!(
                    "sample {i}: targets ({t_cls}, {t_bin}) out of range"
                )));
            }
            let tr = self.trace(features.row(i))?;
            let cls_i = log_sum_exp(&tr.cls_logits) - tr.cls_logits[t_cls];
            let hag_i = weights[t_bin] * (log_sum_exp(&tr.hag_logits) - tr.hag_logits[t_bin]);
            cls_sum += cls_i;
            hag_sum += hag_i;

            let mut d_cls = softmax(&tr.cls_logits);
            d_cls[t_cls] -= 1.0;
            let s_cls = (1.0 - lambda) / n;
            d_cls.iter_mut().for_each(|d| *d *= s_cls);

            let mut d_hag = softmax(&tr.hag_logits);
            d_hag[t_bin] -= 1.0;
            let s_hag = lambda * weights[t_bin] / n;
            d_hag.iter_mut().for_each(|d| *d *= s_hag);

            let h = tr.activations.last().unwrap();
            let cls_len = self.cls_head.param_count();
            let hag_len = self.hag_head.param_count();
            let mut dh = self
                .cls_head
                .backward(h, &d_cls, &mut grad[cls_off..cls_off + cls_len]);
            let dh_hag = self
                .hag_head
                .backward(h, &d_hag, &mut grad[hag_off..hag_off + hag_len]);
            for (a, b) in dh.iter_mut().zip(dh_hag) {
                *a += b;
            }

            for li in (0..self.hidden.len()).rev() {
                let out = &tr.activations[li + 1];
                let delta: Vec<f64> = dh
                    .iter()
                    .zip(out)
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect();
                let layer = &self.hidden[li];
                let start = offsets[li];
                dh = layer.backward(
                    &tr.activations[li],
                    &delta,
                    &mut grad[start..start + layer.param_count()],
                );
            }
        }
        Ok((cls_sum, hag_sum, grad))
    }
}
