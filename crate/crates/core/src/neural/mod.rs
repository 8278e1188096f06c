//! Per-flow convolutional classifiers written from scratch.
//!
//! Each model reads the whole feature image (one channel, `rows x cols`) and
//! outputs a distribution over edge clouds for one flow row. Layers: zero or
//! more 3x3 same-padded convolutions with ReLU, then zero or more ReLU dense
//! layers, then a dense output layer and softmax. Parameters live in a
//! single flat vector; [`Layout`] says where each layer's block sits.

mod checkpoint;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_bank, save_bank, CHECKPOINT_VERSION};
pub use train::{train_bank, train_model, TrainHyper, TrainReport, TrainSample};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    /// Output channels of each 3x3 convolution.
    pub conv_channels: Vec<usize>,
    /// Widths of the hidden dense layers.
    pub hidden: Vec<usize>,
    pub outputs: usize,
}

impl Architecture {
    /// conv 16 -> conv 32 -> dense 128 -> dense `outputs`.
    pub fn standard(input_rows: usize, input_cols: usize, outputs: usize) -> Self {
        Self {
            input_rows,
            input_cols,
            conv_channels: vec![16, 32],
            hidden: vec![128],
            outputs,
        }
    }

    /// Single dense layer from pixels to logits.
    pub fn linear(input_rows: usize, input_cols: usize, outputs: usize) -> Self {
        Self {
            input_rows,
            input_cols,
            conv_channels: Vec::new(),
            hidden: Vec::new(),
            outputs,
        }
    }

    pub fn pixels(&self) -> usize {
        self.input_rows * self.input_cols
    }

    pub fn layout(&self) -> Layout {
        let plane = self.pixels();
        let mut offset = 0;
        let mut convs = Vec::new();
        let mut cin = 1;
        for &cout in &self.conv_channels {
            let weights = offset;
            offset += cout * cin * 9;
            let bias = offset;
            offset += cout;
            convs.push(ConvLayer {
                cin,
                cout,
                weights,
                bias,
            });
            cin = cout;
        }
        let mut dense = Vec::new();
        let mut width = cin * plane;
        for &n in self.hidden.iter().chain(std::iter::once(&self.outputs)) {
            let weights = offset;
            offset += n * width;
            let bias = offset;
            offset += n;
            dense.push(DenseLayer {
                inputs: width,
                outputs: n,
                weights,
                bias,
            });
            width = n;
        }
        Layout {
            rows: self.input_rows,
            cols: self.input_cols,
            convs,
            dense,
            params: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().params
    }

    fn validate(&self) -> Result<()> {
        if self.input_rows == 0 || self.input_cols == 0 || self.outputs == 0 {
            return Err(Error::ShapeMismatch("architecture has an empty dimension".into()));
        }
        if self.conv_channels.iter().chain(&self.hidden).any(|&c| c == 0) {
            return Err(Error::ShapeMismatch("zero-width layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub cin: usize,
    pub cout: usize,
    pub weights: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: usize,
    pub bias: usize,
}

/// Offsets of every layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub convs: Vec<ConvLayer>,
    pub dense: Vec<DenseLayer>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: Architecture,
    pub seed: u64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnBank {
    pub arch: Architecture,
    pub seed: u64,
    /// Epochs of training applied so far.
    pub epoch: usize,
    pub models: Vec<CnnModel>,
}

impl CnnBank {
    pub fn size(&self) -> usize {
        self.models.len()
    }

    /// One distribution per model, all reading the same image.
    pub fn predict(&self, image: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.models.iter().map(|m| m.forward(image)).collect()
    }
}

impl CnnModel {
    /// He-uniform weights, zero biases, drawn from a stream keyed on `seed`.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let mut params = vec![0.0; layout.params];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-limit..limit);
            }
        };
        for c in &layout.convs {
            fill(c.weights..c.bias, c.cin * 9);
        }
        for d in &layout.dense {
            fill(d.weights..d.bias, d.inputs);
        }
        Ok(Self { arch, seed, params })
    }

    /// All parameters zero: uniform output, symmetric under input permutations.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(Self {
            arch,
            seed: 0,
            params: vec![0.0; n],
        })
    }

    fn check_input(&self, image: &[f64]) -> Result<()> {
        if image.len() != self.arch.pixels() {
            return Err(Error::ShapeMismatch(format!(
                "image has {} entries, model expects {}x{}",
                image.len(),
                self.arch.input_rows,
                self.arch.input_cols
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.check_input(image)?;
        let layout = self.arch.layout();
        Ok(forward_pass(&layout, &self.params, image).probs)
    }

    /// Loss and gradient for one sample. `label` is the index of the true EC.
    pub fn gradients(&self, image: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        self.check_input(image)?;
        if label >= self.arch.outputs {
            return Err(Error::ShapeMismatch(format!("label {label} outside {} outputs", self.arch.outputs)));
        }
        let layout = self.arch.layout();
        let mut grad = vec![0.0; layout.params];
        let loss = accumulate_gradient(&layout, &self.params, image, label, &mut grad);
        Ok((loss, grad))
    }
}

/// One independently seeded model per flow row.
pub fn init_bank(arch: &Architecture, bank_size: usize, seed: u64) -> Result<CnnBank> {
    let models = (0..bank_size)
        .map(|i| CnnModel::new(arch.clone(), crate::scenario::derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CnnBank {
        arch: arch.clone(),
        seed,
        epoch: 0,
        models,
    })
}

/// Like [`init_bank`] but checks the output width against the topology.
pub fn init_bank_for(arch: &Architecture, bank_size: usize, edge_clouds: usize, seed: u64) -> Result<CnnBank> {
    if arch.outputs != edge_clouds {
        return Err(Error::ShapeMismatch(format!(
            "architecture has {} outputs but there are {edge_clouds} edge clouds",
            arch.outputs
        )));
    }
    init_bank(arch, bank_size, seed)
}

/// Cross entropy of a distribution against a one-hot label, with the
/// predicted probability floored at 1e-12.
pub fn loss(pred: &[f64], label: &[f64]) -> f64 {
    pred.iter()
        .zip(label)
        .map(|(&p, &y)| if y == 0.0 { 0.0 } else { -y * p.max(PROB_FLOOR).ln() })
        .sum()
}

pub fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

struct Activations {
    /// Input of every conv layer followed by the conv stack's output.
    planes: Vec<Vec<f64>>,
    /// Input of every dense layer (post-ReLU).
    dense_inputs: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn conv_forward(c: &ConvLayer, params: &[f64], input: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let plane = rows * cols;
    let mut out = vec![0.0; c.cout * plane];
    for o in 0..c.cout {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(params[c.bias + o]);
        for ci in 0..c.cin {
            let src = &input[ci * plane..(ci + 1) * plane];
            let kernel = &params[c.weights + (o * c.cin + ci) * 9..][..9];
            for di in 0..3 {
                for dj in 0..3 {
                    let w = kernel[di * 3 + dj];
                    if w == 0.0 {
                        continue;
                    }
                    let (i0, i1) = (1usize.saturating_sub(di), (rows + 1 - di).min(rows));
                    let (j0, j1) = (1usize.saturating_sub(dj), (cols + 1 - dj).min(cols));
                    for i in i0..i1 {
                        let si = i + di - 1;
                        let d = &mut dst[i * cols + j0..i * cols + j1];
                        let s = &src[si * cols + j0 + dj - 1..si * cols + j1 + dj - 1];
                        for (x, &y) in d.iter_mut().zip(s) {
                            *x += w * y;
                        }
                    }
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

fn forward_pass(layout: &Layout, params: &[f64], image: &[f64]) -> Activations {
    let (rows, cols) = (layout.rows, layout.cols);
    let mut planes = vec![image.to_vec()];
    for c in &layout.convs {
        let next = conv_forward(c, params, planes.last().unwrap(), rows, cols);
        planes.push(next);
    }
    let mut dense_inputs = Vec::with_capacity(layout.dense.len());
    let mut x = planes.last().unwrap().clone();
    let mut logits = Vec::new();
    for (idx, d) in layout.dense.iter().enumerate() {
        let mut out = params[d.bias..d.bias + d.outputs].to_vec();
        for (n, o) in out.iter_mut().enumerate() {
            let w = &params[d.weights + n * d.inputs..][..d.inputs];
            *o += w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        let last = idx + 1 == layout.dense.len();
        dense_inputs.push(std::mem::take(&mut x));
        if last {
            logits = out;
        } else {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            x = out;
        }
    }
    Activations {
        planes,
        dense_inputs,
        probs: softmax(&logits),
    }
}

/// Adds this sample's loss gradient into `grad` and returns the loss. Each
/// parameter receives exactly one addition per call, so feeding the same
/// sample twice into a zeroed buffer yields exactly twice the gradient.
fn accumulate_gradient(layout: &Layout, params: &[f64], image: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let act = forward_pass(layout, params, image);
    let loss = -act.probs[label].max(PROB_FLOOR).ln();
    let mut delta = act.probs.clone();
    delta[label] -= 1.0;

    for (idx, d) in layout.dense.iter().enumerate().rev() {
        let x = &act.dense_inputs[idx];
        for (n, &dn) in delta.iter().enumerate() {
            grad[d.bias + n] += dn;
            if dn != 0.0 {
                let g = &mut grad[d.weights + n * d.inputs..][..d.inputs];
                for (gw, &xi) in g.iter_mut().zip(x) {
                    *gw += dn * xi;
                }
            }
        }
        if idx == 0 && layout.convs.is_empty() {
            return loss;
        }
        let mut back = vec![0.0; d.inputs];
        for (n, &dn) in delta.iter().enumerate() {
            if dn == 0.0 {
                continue;
            }
            let w = &params[d.weights + n * d.inputs..][..d.inputs];
            for (b, &wi) in back.iter_mut().zip(w) {
                *b += dn * wi;
            }
        }
        // ReLU mask: inputs of dense layers and conv outputs are post-ReLU.
        for (b, &xi) in back.iter_mut().zip(x) {
            if xi <= 0.0 {
                *b = 0.0;
            }
        }
        delta = back;
    }

    let (rows, cols) = (layout.rows, layout.cols);
    let plane = rows * cols;
    for (idx, c) in layout.convs.iter().enumerate().rev() {
        let input = &act.planes[idx];
        let need_input_grad = idx > 0;
        let mut back = if need_input_grad { vec![0.0; c.cin * plane] } else { Vec::new() };
        for o in 0..c.cout {
            let dout = &delta[o * plane..(o + 1) * plane];
            grad[c.bias + o] += dout.iter().sum::<f64>();
            for ci in 0..c.cin {
                let src = &input[ci * plane..(ci + 1) * plane];
                let kbase = c.weights + (o * c.cin + ci) * 9;
                for di in 0..3 {
                    for dj in 0..3 {
                        let (i0, i1) = (1usize.saturating_sub(di), (rows + 1 - di).min(rows));
                        let (j0, j1) = (1usize.saturating_sub(dj), (cols + 1 - dj).min(cols));
                        let w = params[kbase + di * 3 + dj];
                        let mut acc = 0.0;
                        for i in i0..i1 {
                            let si = i + di - 1;
                            let d = &dout[i * cols + j0..i * cols + j1];
                            let s = &src[si * cols + j0 + dj - 1..si * cols + j1 + dj - 1];
                            acc += d.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                            if need_input_grad && w != 0.0 {
                                let bk = &mut back[ci * plane + si * cols + j0 + dj - 1..][..j1 - j0];
                                for (b, &dv) in bk.iter_mut().zip(d) {
                                    *b += w * dv;
                                }
                            }
                        }
                        grad[kbase + di * 3 + dj] += acc;
                    }
                }
            }
        }
        if need_input_grad {
            for (b, &xi) in back.iter_mut().zip(input) {
                if xi <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_arch() -> Architecture {
        Architecture {
            input_rows: 4,
            input_cols: 7,
            conv_channels: vec![3, 4],
            hidden: vec![10],
            outputs: 6,
        }
    }

    fn random_image(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    #[test]
    fn standard_layout_sizes() {
        let arch = Architecture::standard(5, 33, 6);
        let l = arch.layout();
        assert_eq!(l.convs[0].bias - l.convs[0].weights, 16 * 9);
        assert_eq!(l.convs[1].bias - l.convs[1].weights, 32 * 16 * 9);
        assert_eq!(l.dense[0].inputs, 32 * 5 * 33);
        assert_eq!(l.params, 160 + 4640 + 5280 * 128 + 128 + 128 * 6 + 6);
    }

    #[test]
    fn forward_is_a_distribution() {
        let m = CnnModel::new(small_arch(), 3).unwrap();
        let p = m.forward(&random_image(1, 28)).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_output_layer_gives_uniform() {
        let mut m = CnnModel::new(small_arch(), 3).unwrap();
        let last = *m.arch.layout().dense.last().unwrap();
        m.params[last.weights..].fill(0.0);
        let p = m.forward(&random_image(2, 28)).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn wrong_shapes_rejected() {
        let m = CnnModel::new(small_arch(), 3).unwrap();
        assert!(matches!(m.forward(&[0.0; 5]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(m.gradients(&[0.0; 28], 6), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            init_bank_for(&Architecture::standard(5, 33, 4), 5, 6, 1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn bank_is_deterministic() {
        let a = init_bank_for(&Architecture::standard(5, 33, 6), 5, 6, 7).unwrap();
        let b = init_bank_for(&Architecture::standard(5, 33, 6), 5, 6, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.size(), 5);
        assert!(a.models.iter().all(|m| m.arch.outputs == 6));
        assert_ne!(a.models[0].params, a.models[1].params);
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(&one_hot(2, 6), &one_hot(2, 6)), 0.0);
        assert!((loss(&[1.0 / 6.0; 6], &one_hot(0, 6)) - 6f64.ln()).abs() < 1e-12);
        let mut p = vec![0.0; 6];
        p[1] = 1.0;
        p[0] = 1e-12;
        assert!((loss(&p, &one_hot(0, 6)) - 27.631).abs() < 1e-3);
    }

    #[test]
    fn output_bias_gradient_is_softmax_minus_label() {
        let m = CnnModel::zeros(small_arch()).unwrap();
        let (_, g) = m.gradients(&[0.0; 28], 4).unwrap();
        let last = *m.arch.layout().dense.last().unwrap();
        for e in 0..6 {
            let expected = 1.0 / 6.0 - if e == 4 { 1.0 } else { 0.0 };
            assert!((g[last.bias + e] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicate_sample_doubles_gradient() {
        let m = CnnModel::new(small_arch(), 5).unwrap();
        let img = random_image(9, 28);
        let layout = m.arch.layout();
        let mut once = vec![0.0; layout.params];
        accumulate_gradient(&layout, &m.params, &img, 1, &mut once);
        let mut twice = vec![0.0; layout.params];
        accumulate_gradient(&layout, &m.params, &img, 1, &mut twice);
        accumulate_gradient(&layout, &m.params, &img, 1, &mut twice);
        assert!(once.iter().zip(&twice).all(|(a, b)| 2.0 * a == *b));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let m = CnnModel::new(small_arch(), 21).unwrap();
        let img = random_image(4, 28);
        let (_, g) = m.gradients(&img, 2).unwrap();
        let layout = m.arch.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut blocks = Vec::new();
        for c in &layout.convs {
            blocks.push(c.weights..c.bias);
            blocks.push(c.bias..c.bias + c.cout);
        }
        for d in &layout.dense {
            blocks.push(d.weights..d.bias);
            blocks.push(d.bias..d.bias + d.outputs);
        }
        let h = 1e-4;
        for i in 0..60 {
            let block = &blocks[i % blocks.len()];
            let j = rng.gen_range(block.clone());
            let mut p = m.clone();
            p.params[j] += h;
            let up = loss(&p.forward(&img).unwrap(), &one_hot(2, 6));
            p.params[j] -= 2.0 * h;
            let down = loss(&p.forward(&img).unwrap(), &one_hot(2, 6));
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - g[j]).abs() / (numeric.abs() + g[j].abs()).max(1e-7);
            assert!(err < 1e-3, "param {j}: backprop {} vs numeric {numeric}", g[j]);
        }
    }
}
