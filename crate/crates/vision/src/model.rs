//! Small convolutional classifier in f64.
//!
//! conv(3×3, same) → ReLU → maxpool(2×2), once per backbone block, then
//! flatten → dense(hidden) → ReLU → dense(3). All weights live in one flat
//! vector; the backbone is its prefix, which makes freezing a range check.
//!
//! Checkpoint layout:
//!
//! ```text
//! GHCKPT 1\n
//! {"arch":{...},"n_params":N}\n
//! N little-endian f64 weights
//! ```

use std::hash::{DefaultHasher, Hasher};
use std::path::Path;

use aerogh_core::simcore::DiseaseClass;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;

pub const N_CLASSES: usize = 3;
const CHECKPOINT_MAGIC: &str = "GHCKPT 1";
/// Samples per gradient chunk. Chunks are summed in order, so results do
/// not depend on how many threads computed them.
pub const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_width: usize,
    pub input_height: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { input_width: 64, input_height: 64, channels: vec![8, 16, 32], kernel: 3, hidden: 64 }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<(), VisionError> {
        let bad = |m: String| Err(VisionError::Config(m));
        if self.kernel % 2 == 0 {
            return bad(format!("kernel must be odd, got {}", self.kernel));
        }
        if self.channels.is_empty() || self.channels.contains(&0) || self.hidden == 0 {
            return bad("channels and hidden must be non-empty and positive".into());
        }
        let div = 1usize << self.channels.len();
        if self.input_width == 0 || self.input_width % div != 0 || self.input_height == 0 || self.input_height % div != 0 {
            return bad(format!("input {}x{} must be a positive multiple of {div}", self.input_width, self.input_height));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvSpec {
    w: usize,
    b: usize,
    cin: usize,
    cout: usize,
    height: usize,
    width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseSpec {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    convs: Vec<ConvSpec>,
    fc1: DenseSpec,
    fc2: DenseSpec,
    backbone_end: usize,
    total: usize,
}

impl Layout {
    fn new(arch: &Architecture) -> Self {
        let k2 = arch.kernel * arch.kernel;
        let (mut off, mut h, mut w, mut cin) = (0, arch.input_height, arch.input_width, 3);
        let mut convs = Vec::new();
        for &cout in &arch.channels {
            convs.push(ConvSpec { w: off, b: off + cout * cin * k2, cin, cout, height: h, width: w });
            off += cout * cin * k2 + cout;
            h /= 2;
            w /= 2;
            cin = cout;
        }
        let backbone_end = off;
        let flat = cin * h * w;
        let fc1 = DenseSpec { w: off, b: off + arch.hidden * flat, inp: flat, out: arch.hidden };
        off += arch.hidden * flat + arch.hidden;
        let fc2 = DenseSpec { w: off, b: off + N_CLASSES * arch.hidden, inp: arch.hidden, out: N_CLASSES };
        off += N_CLASSES * arch.hidden + N_CLASSES;
        Self { convs, fc1, fc2, backbone_end, total: off }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: DiseaseClass,
    pub probabilities: [f64; N_CLASSES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    arch: Architecture,
    layout: Layout,
    params: Vec<f64>,
    /// Only head weights are trainable while set.
    pub frozen_backbone: bool,
}

/// Intermediate values of one forward pass, kept for the backward pass.
struct Trace {
    /// Input of each conv block.
    inputs: Vec<Vec<f64>>,
    /// ReLU output of each conv block.
    relu: Vec<Vec<f64>>,
    /// For each pooled value, the index of the winning input element.
    argmax: Vec<Vec<u32>>,
    flat: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

/// Rows of the output that a kernel offset `d` can touch, as `lo..hi`.
fn valid(d: isize, n: usize) -> (usize, usize) {
    ((-d).max(0) as usize, (n as isize - d).min(n as isize).max(0) as usize)
}

fn conv_forward(x: &[f64], p: &[f64], s: &ConvSpec, k: usize, out: &mut [f64]) {
    let (h, w) = (s.height, s.width);
    let hw = h * w;
    let pad = (k / 2) as isize;
    for co in 0..s.cout {
        let o = &mut out[co * hw..(co + 1) * hw];
        o.fill(p[s.b + co]);
        for ci in 0..s.cin {
            let inp = &x[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = valid(dy, h);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid(dx, w);
                    let wv = p[s.w + ((co * s.cin + ci) * k + ky) * k + kx];
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let ix0 = (x0 as isize + dx) as usize;
                        let orow = &mut o[y * w + x0..y * w + x1];
                        let irow = &inp[iy * w + ix0..iy * w + ix0 + (x1 - x0)];
                        for (a, b) in orow.iter_mut().zip(irow) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulate weight/bias gradients; write the input gradient if asked.
fn conv_backward(
    x: &[f64],
    dout: &[f64],
    p: &[f64],
    s: &ConvSpec,
    k: usize,
    grad: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let (h, w) = (s.height, s.width);
    let hw = h * w;
    let pad = (k / 2) as isize;
    for co in 0..s.cout {
        let d = &dout[co * hw..(co + 1) * hw];
        grad[s.b + co] += d.iter().sum::<f64>();
        for ci in 0..s.cin {
            let inp = &x[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = valid(dy, h);
                for kx in 0..k {
                    let dxo = kx as isize - pad;
                    let (x0, x1) = valid(dxo, w);
                    let wi = s.w + ((co * s.cin + ci) * k + ky) * k + kx;
                    let ix0 = (x0 as isize + dxo) as usize;
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let drow = &d[y * w + x0..y * w + x1];
                        let irow = &inp[iy * w + ix0..iy * w + ix0 + (x1 - x0)];
                        acc += drow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad[wi] += acc;
                    if let Some(dx) = dx.as_deref_mut() {
                        let wv = p[wi];
                        let dxc = &mut dx[ci * hw..(ci + 1) * hw];
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let drow = &d[y * w + x0..y * w + x1];
                            let xrow = &mut dxc[iy * w + ix0..iy * w + ix0 + (x1 - x0)];
                            for (a, b) in xrow.iter_mut().zip(drow) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn maxpool(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    let mut idx = vec![0u32; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let base = ch * h * w + 2 * y * w + 2 * xo;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                let o = ch * oh * ow + y * ow + xo;
                out[o] = x[best];
                idx[o] = best as u32;
            }
        }
    }
    (out, idx)
}

fn dense_forward(x: &[f64], p: &[f64], s: &DenseSpec) -> Vec<f64> {
    (0..s.out)
        .map(|o| {
            let row = &p[s.w + o * s.inp..s.w + (o + 1) * s.inp];
            p[s.b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn dense_backward(x: &[f64], d: &[f64], p: &[f64], s: &DenseSpec, grad: &mut [f64], want_dx: bool) -> Vec<f64> {
    let mut dx = if want_dx { vec![0.0; s.inp] } else { Vec::new() };
    for (o, &dv) in d.iter().enumerate() {
        grad[s.b + o] += dv;
        let g = &mut grad[s.w + o * s.inp..s.w + (o + 1) * s.inp];
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += dv * xi;
        }
        if want_dx {
            let row = &p[s.w + o * s.inp..s.w + (o + 1) * s.inp];
            for (a, wv) in dx.iter_mut().zip(row) {
                *a += dv * wv;
            }
        }
    }
    dx
}

impl ClassifierModel {
    /// He-initialized weights, zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self, VisionError> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = model.arch.kernel * model.arch.kernel;
        let mut fill = |params: &mut [f64], fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive fan-in");
            for v in params {
                *v = normal.sample(&mut rng);
            }
        };
        let layout = model.layout.clone();
        for c in &layout.convs {
            fill(&mut model.params[c.w..c.b], c.cin * k2);
        }
        fill(&mut model.params[layout.fc1.w..layout.fc1.b], layout.fc1.inp);
        fill(&mut model.params[layout.fc2.w..layout.fc2.b], layout.fc2.inp);
        Ok(model)
    }

    pub fn zeros(arch: Architecture) -> Result<Self, VisionError> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        Ok(Self { params: vec![0.0; layout.total], arch, layout, frozen_backbone: false })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Parameters `0..backbone_len()` belong to the convolutional backbone.
    pub fn backbone_len(&self) -> usize {
        self.layout.backbone_end
    }

    pub fn input_len(&self) -> usize {
        3 * self.arch.input_width * self.arch.input_height
    }

    pub fn check_input(&self, img: &LabeledImage) -> Result<(), VisionError> {
        let expected = (self.arch.input_width, self.arch.input_height);
        if (img.width, img.height) != expected {
            return Err(VisionError::Dimension { expected, got: (img.width, img.height) });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let p = &self.params;
        let k = self.arch.kernel;
        let mut inputs = Vec::with_capacity(self.layout.convs.len());
        let mut relu = Vec::with_capacity(self.layout.convs.len());
        let mut argmax = Vec::with_capacity(self.layout.convs.len());
        let mut cur = x.to_vec();
        for s in &self.layout.convs {
            let mut out = vec![0.0; s.cout * s.height * s.width];
            conv_forward(&cur, p, s, k, &mut out);
            for v in &mut out {
                *v = v.max(0.0);
            }
            let (pooled, idx) = maxpool(&out, s.cout, s.height, s.width);
            inputs.push(std::mem::replace(&mut cur, pooled));
            relu.push(out);
            argmax.push(idx);
        }
        let mut hidden = dense_forward(&cur, p, &self.layout.fc1);
        for v in &mut hidden {
            *v = v.max(0.0);
        }
        let logits = dense_forward(&hidden, p, &self.layout.fc2);
        Trace { inputs, relu, argmax, flat: cur, hidden, logits }
    }

    /// Logits for one input tensor (see [`LabeledImage::tensor`]).
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "input tensor size");
        self.trace(x).logits
    }

    pub fn forward(&self, batch: &[LabeledImage]) -> Result<Vec<Vec<f64>>, VisionError> {
        batch
            .iter()
            .map(|img| {
                self.check_input(img)?;
                Ok(self.logits(&img.tensor()))
            })
            .collect()
    }

    pub fn predict(&self, img: &LabeledImage) -> Result<Prediction, VisionError> {
        self.check_input(img)?;
        let probs = softmax(&self.logits(&img.tensor()));
        let label = DiseaseClass::from_index(argmax(&probs)).expect("three outputs");
        Ok(Prediction { label, probabilities: [probs[0], probs[1], probs[2]] })
    }

    /// Cross-entropy of one sample; adds `scale ×` its gradient into `grad`.
    /// Returns the loss and whether the prediction was right.
    fn sample_grad(&self, x: &[f64], label: usize, scale: f64, grad: &mut [f64], backbone: bool) -> (f64, bool) {
        let tr = self.trace(x);
        let loss = log_sum_exp(&tr.logits) - tr.logits[label];
        let correct = argmax(&tr.logits) == label;
        let mut d = softmax(&tr.logits);
        d[label] -= 1.0;
        for v in &mut d {
            *v *= scale;
        }
        let p = &self.params;
        let mut dh = dense_backward(&tr.hidden, &d, p, &self.layout.fc2, grad, true);
        for (g, h) in dh.iter_mut().zip(&tr.hidden) {
            if *h <= 0.0 {
                *g = 0.0;
            }
        }
        let mut dcur = dense_backward(&tr.flat, &dh, p, &self.layout.fc1, grad, backbone);
        if !backbone {
            return (loss, correct);
        }
        let k = self.arch.kernel;
        for (i, s) in self.layout.convs.iter().enumerate().rev() {
            let mut drelu = vec![0.0; s.cout * s.height * s.width];
            for (o, &src) in tr.argmax[i].iter().enumerate() {
                drelu[src as usize] += dcur[o];
            }
            for (g, r) in drelu.iter_mut().zip(&tr.relu[i]) {
                if *r <= 0.0 {
                    *g = 0.0;
                }
            }
            if i > 0 {
                let mut dx = vec![0.0; s.cin * s.height * s.width];
                conv_backward(&tr.inputs[i], &drelu, p, s, k, grad, Some(&mut dx));
                dcur = dx;
            } else {
                conv_backward(&tr.inputs[i], &drelu, p, s, k, grad, None);
            }
        }
        (loss, correct)
    }

    /// Mean cross-entropy over `batch` and its gradient. With `backbone`
    /// false the backbone part of the gradient is left at zero.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize)], backbone: bool, parallel: bool) -> BatchGradient {
        let scale = 1.0 / batch.len().max(1) as f64;
        let chunk = |items: &[(&[f64], usize)]| {
            let mut grad = vec![0.0; self.params.len()];
            let (mut loss, mut correct) = (0.0, 0);
            for (x, y) in items {
                let (l, c) = self.sample_grad(x, *y, scale, &mut grad, backbone);
                loss += l;
                correct += c as usize;
            }
            (loss, correct, grad)
        };
        let parts: Vec<(f64, usize, Vec<f64>)> = if parallel {
            batch.par_chunks(GRAD_CHUNK).map(chunk).collect()
        } else {
            batch.chunks(GRAD_CHUNK).map(chunk).collect()
        };
        let mut out = BatchGradient { loss: 0.0, correct: 0, gradient: vec![0.0; self.params.len()] };
        for (l, c, g) in parts {
            out.loss += l;
            out.correct += c;
            for (a, b) in out.gradient.iter_mut().zip(&g) {
                *a += b;
            }
        }
        out.loss *= scale;
        out
    }

    /// Mean loss plus a hash of every discrete decision the forward pass made
    /// (ReLU gates, pool winners). Equal hashes at two parameter values mean
    /// the loss is smooth on the segment between them, barring collisions.
    pub fn loss_and_signature(&self, batch: &[(&[f64], usize)]) -> (f64, u64) {
        let mut h = DefaultHasher::new();
        let mut loss = 0.0;
        for (x, y) in batch {
            let tr = self.trace(x);
            loss += log_sum_exp(&tr.logits) - tr.logits[*y];
            for layer in tr.relu.iter().chain(std::iter::once(&tr.hidden)) {
                for chunk in layer.chunks(64) {
                    let bits = chunk.iter().enumerate().fold(0u64, |b, (i, v)| b | (((*v > 0.0) as u64) << i));
                    h.write_u64(bits);
                }
            }
            for idx in &tr.argmax {
                for i in idx {
                    h.write_u32(*i);
                }
            }
        }
        (loss / batch.len().max(1) as f64, h.finish())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let desc = serde_json::json!({"arch": self.arch, "n_params": self.params.len()});
        let mut out = format!("{CHECKPOINT_MAGIC}\n{desc}\n").into_bytes();
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        let bad = |m: String| VisionError::Checkpoint(m);
        let mut lines = bytes.splitn(3, |b| *b == b'\n');
        let magic = lines.next().unwrap_or_default();
        if magic != CHECKPOINT_MAGIC.as_bytes() {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let desc: serde_json::Value =
            serde_json::from_slice(lines.next().ok_or_else(|| bad("missing descriptor".into()))?)
                .map_err(|e| bad(format!("descriptor: {e}")))?;
        let arch: Architecture =
            serde_json::from_value(desc["arch"].clone()).map_err(|e| bad(format!("architecture: {e}")))?;
        let mut model = Self::zeros(arch)?;
        let n = desc["n_params"].as_u64().ok_or_else(|| bad("missing n_params".into()))? as usize;
        if n != model.params.len() {
            return Err(bad(format!("{n} weights for an architecture with {}", model.params.len())));
        }
        let raw = lines.next().unwrap_or_default();
        if raw.len() != 8 * n {
            return Err(bad(format!("expected {} weight bytes, found {}", 8 * n, raw.len())));
        }
        for (v, chunk) in model.params.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        if model.params.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite weight".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), VisionError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, VisionError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub loss: f64,
    pub correct: usize,
    pub gradient: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_synthetic_leaf;

    fn tiny() -> Architecture {
        Architecture { input_width: 8, input_height: 8, channels: vec![2, 3], kernel: 3, hidden: 5 }
    }

    #[test]
    fn default_parameter_count() {
        let m = ClassifierModel::zeros(Architecture::default()).unwrap();
        // 3 conv blocks, then 8·8·32 → 64 → 3
        let conv = (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (32 * 16 * 9 + 32);
        assert_eq!(m.backbone_len(), conv);
        assert_eq!(m.n_params(), conv + 2048 * 64 + 64 + 64 * 3 + 3);
    }

    #[test]
    fn zero_weights_give_uniform_healthy() {
        let m = ClassifierModel::zeros(Architecture::default()).unwrap();
        let p = m.predict(&generate_synthetic_leaf(DiseaseClass::Rust, 1)).unwrap();
        assert_eq!(p.probabilities, [1.0 / 3.0; 3]);
        assert_eq!(p.label, DiseaseClass::Healthy);
    }

    #[test]
    fn softmax_sums_to_one_and_shift_invariant() {
        let z = [3.0, -1.0, 0.5];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|v| v + 100.0).collect();
        assert_eq!(argmax(&softmax(&shifted)), argmax(&p));
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), 0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = ClassifierModel::zeros(tiny()).unwrap();
        let img = generate_synthetic_leaf(DiseaseClass::Healthy, 1);
        assert!(matches!(m.predict(&img), Err(VisionError::Dimension { expected: (8, 8), got: (64, 64) })));
    }

    #[test]
    fn bad_architectures_rejected() {
        let mut a = tiny();
        a.kernel = 2;
        assert!(a.validate().is_err());
        let mut a = tiny();
        a.input_width = 6;
        assert!(a.validate().is_err());
    }

    #[test]
    fn checkpoint_roundtrip_bit_exact() {
        let m = ClassifierModel::new(tiny(), 3).unwrap();
        let back = ClassifierModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back.architecture(), m.architecture());
        let mut bytes = m.to_bytes();
        bytes.pop();
        assert!(ClassifierModel::from_bytes(&bytes).is_err());
        assert!(ClassifierModel::from_bytes(b"nope\n{}\n").is_err());
    }

    #[test]
    fn parallel_and_serial_gradients_identical() {
        let m = ClassifierModel::new(tiny(), 5).unwrap();
        let xs: Vec<Vec<f64>> = (0..11).map(|i| (0..192).map(|j| ((i * 31 + j * 7) % 17) as f64 / 17.0 - 0.5).collect()).collect();
        let batch: Vec<(&[f64], usize)> = xs.iter().enumerate().map(|(i, x)| (x.as_slice(), i % 3)).collect();
        let a = m.loss_and_gradient(&batch, true, false);
        let b = m.loss_and_gradient(&batch, true, true);
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_backbone_gradient_is_zero() {
        let m = ClassifierModel::new(tiny(), 5).unwrap();
        let x: Vec<f64> = (0..192).map(|j| (j % 5) as f64 / 5.0 - 0.4).collect();
        let g = m.loss_and_gradient(&[(&x, 1)], false, false).gradient;
        assert!(g[..m.backbone_len()].iter().all(|v| *v == 0.0));
        assert!(g[m.backbone_len()..].iter().any(|v| *v != 0.0));
    }
}
