//! Fully convolutional policy/value network.
//!
//! The network has no spatial-size-dependent parameters: the same weights
//! evaluate on any (qubit, moment) grid. Computation is in f64 so analytic
//! gradients can be validated tightly against finite differences.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, Array4};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{NUM_GATE_CLASSES, NUM_SOFT_RULES};
use crate::error::{Error, Result};

/// 2D convolution with stride 1 and zero same-padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// (out_channels, in_channels, kh, kw)
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
}

impl Conv2d {
    pub fn zeros(out_ch: usize, in_ch: usize, k: usize) -> Self {
        Conv2d {
            weight: Array4::zeros((out_ch, in_ch, k, k)),
            bias: Array1::zeros(out_ch),
        }
    }

    pub fn randomized(out_ch: usize, in_ch: usize, k: usize, rng: &mut impl Rng) -> Self {
        let scale = (2.0 / (in_ch * k * k) as f64).sqrt();
        let mut w = Array4::zeros((out_ch, in_ch, k, k));
        for x in w.iter_mut() {
            *x = scale * rng.sample::<f64, _>(StandardNormal);
        }
        Conv2d {
            weight: w,
            bias: Array1::zeros(out_ch),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim().2
    }

    fn weight_matrix(&self) -> Array2<f64> {
        let (o, i, kh, kw) = self.weight.dim();
        self.weight
            .to_shape((o, i * kh * kw))
            .expect("contiguous weight")
            .to_owned()
    }

    /// Forward pass; input (C_in, H, W), output (C_out, H, W).
    pub fn forward(&self, x: &Array3<f64>) -> Array3<f64> {
        let (_, h, w) = x.dim();
        let cols = im2col(x, self.kernel());
        let mut out = self.weight_matrix().dot(&cols);
        for (c, mut row) in out.outer_iter_mut().enumerate() {
            row += self.bias[c];
        }
        out.to_shape((self.out_channels(), h, w))
            .expect("contiguous output")
            .to_owned()
    }

    /// Backward pass: returns grad wrt input, accumulates grads wrt weights.
    pub fn backward(
        &self,
        x: &Array3<f64>,
        grad_out: &Array3<f64>,
        grad_weight: &mut Array4<f64>,
        grad_bias: &mut Array1<f64>,
    ) -> Array3<f64> {
        let (c_in, h, w) = x.dim();
        let k = self.kernel();
        let go = grad_out
            .to_shape((self.out_channels(), h * w))
            .expect("contiguous grad")
            .to_owned();
        for (c, row) in go.outer_iter().enumerate() {
            grad_bias[c] += row.sum();
        }
        let cols = im2col(x, k);
        let gw = go.dot(&cols.t());
        *grad_weight += &gw
            .to_shape((self.out_channels(), c_in, k, k))
            .expect("contiguous grad weight");
        let gcols = self.weight_matrix().t().dot(&go);
        col2im(&gcols, c_in, h, w, k)
    }
}

/// Unfold (C, H, W) into (C*k*k, H*W) patches with zero same-padding.
fn im2col(x: &Array3<f64>, k: usize) -> Array2<f64> {
    let (c_in, h, w) = x.dim();
    let pad = (k / 2) as isize;
    let mut cols = Array2::zeros((c_in * k * k, h * w));
    for c in 0..c_in {
        for dy in 0..k {
            for dx in 0..k {
                let row = (c * k + dy) * k + dx;
                for y in 0..h {
                    let sy = y as isize + dy as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for xx in 0..w {
                        let sx = xx as isize + dx as isize - pad;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        cols[(row, y * w + xx)] = x[(c, sy as usize, sx as usize)];
                    }
                }
            }
        }
    }
    cols
}

/// Fold (C*k*k, H*W) patch gradients back into an input gradient (C, H, W).
fn col2im(cols: &Array2<f64>, c_in: usize, h: usize, w: usize, k: usize) -> Array3<f64> {
    let pad = (k / 2) as isize;
    let mut out = Array3::zeros((c_in, h, w));
    for c in 0..c_in {
        for dy in 0..k {
            for dx in 0..k {
                let row = (c * k + dy) * k + dx;
                for y in 0..h {
                    let sy = y as isize + dy as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for xx in 0..w {
                        let sx = xx as isize + dx as isize - pad;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        out[(c, sy as usize, sx as usize)] += cols[(row, y * w + xx)];
                    }
                }
            }
        }
    }
    out
}

/// Network architecture knobs.
#[derive(Debug, Clone, Copy)]
pub struct NetConfig {
    pub trunk_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            trunk_layers: 4,
            channels: 32,
            kernel: 3,
            seed: 0,
        }
    }
}

/// Convolutional trunk with a per-cell policy head (one channel per soft
/// rule) and a spatially averaged value head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    pub trunk: Vec<Conv2d>,
    pub policy: Conv2d,
    pub value: Conv2d,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    /// Input plus post-ReLU activation of every trunk layer.
    pub activations: Vec<Array3<f64>>,
    pub policy_logits: Array3<f64>,
    pub value_map: Array3<f64>,
    pub value: f64,
}

impl PolicyValueNet {
    /// Random trunk, zero-initialized heads (uniform initial policy,
    /// zero initial value).
    pub fn new(cfg: &NetConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut trunk = Vec::with_capacity(cfg.trunk_layers);
        let mut in_ch = NUM_GATE_CLASSES;
        for _ in 0..cfg.trunk_layers {
            trunk.push(Conv2d::randomized(cfg.channels, in_ch, cfg.kernel, &mut rng));
            in_ch = cfg.channels;
        }
        PolicyValueNet {
            trunk,
            policy: Conv2d::zeros(NUM_SOFT_RULES, in_ch, cfg.kernel),
            value: Conv2d::zeros(1, in_ch, cfg.kernel),
        }
    }

    /// Forward pass over an input of shape (gate classes, qubits, moments).
    /// Policy logits come out as (soft rules, qubits, moments); the value is
    /// the spatial mean of the value map.
    pub fn forward(&self, input: &Array3<f64>) -> ForwardCache {
        let mut activations = vec![input.clone()];
        let mut x = input.clone();
        for layer in &self.trunk {
            x = layer.forward(&x);
            x.mapv_inplace(|v| v.max(0.0));
            activations.push(x.clone());
        }
        let policy_logits = self.policy.forward(&x);
        let value_map = self.value.forward(&x);
        let value = value_map.mean().unwrap_or(0.0);
        ForwardCache {
            activations,
            policy_logits,
            value_map,
            value,
        }
    }

    /// Backward pass from head gradients, accumulating into `grads`.
    /// `grad_value` is the gradient wrt the scalar value output.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_logits: &Array3<f64>,
        grad_value: f64,
        grads: &mut Grads,
    ) {
        let last = cache.activations.last().unwrap();
        let spatial = (cache.value_map.len()) as f64;
        let grad_value_map = Array3::from_elem(cache.value_map.dim(), grad_value / spatial);

        let n = self.trunk.len();
        let (gw, gb) = grads.layer_mut(n);
        let mut gx = self.policy.backward(last, grad_logits, gw, gb);
        let (gw, gb) = grads.layer_mut(n + 1);
        gx += &self.value.backward(last, &grad_value_map, gw, gb);

        for (i, layer) in self.trunk.iter().enumerate().rev() {
            // ReLU mask on the layer output.
            let act = &cache.activations[i + 1];
            ndarray::Zip::from(&mut gx).and(act).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            let (gw, gb) = grads.layer_mut(i);
            gx = layer.backward(&cache.activations[i], &gx, gw, gb);
        }
    }

    fn all_layers(&self) -> Vec<&Conv2d> {
        let mut v: Vec<&Conv2d> = self.trunk.iter().collect();
        v.push(&self.policy);
        v.push(&self.value);
        v
    }

    fn all_layers_mut(&mut self) -> Vec<&mut Conv2d> {
        let mut v: Vec<&mut Conv2d> = self.trunk.iter_mut().collect();
        v.push(&mut self.policy);
        v.push(&mut self.value);
        v
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            layers: self
                .all_layers()
                .iter()
                .map(|l| (Array4::zeros(l.weight.dim()), Array1::zeros(l.bias.dim())))
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.all_layers()
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.all_layers() {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_vec(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for l in self.all_layers_mut() {
            for w in l.weight.iter_mut() {
                *w = *it.next().expect("parameter vector too short");
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().expect("parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }

    /// Versioned binary file: magic, version, layer count, then per layer
    /// the shape as u32s and row-major weights plus bias as little-endian
    /// f32s.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"QCPN")?;
        f.write_all(&1u32.to_le_bytes())?;
        let layers = self.all_layers();
        f.write_all(&(layers.len() as u32).to_le_bytes())?;
        for l in layers {
            let (o, i, kh, kw) = l.weight.dim();
            for d in [o, i, kh, kw] {
                f.write_all(&(d as u32).to_le_bytes())?;
            }
            for w in l.weight.iter() {
                f.write_all(&(*w as f32).to_le_bytes())?;
            }
            for b in l.bias.iter() {
                f.write_all(&(*b as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > buf.len() {
                return Err(Error::Format("truncated network file".into()));
            }
            let s = &buf[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        if take(&mut pos, 4)? != b"QCPN" {
            return Err(Error::Format("bad network file magic".into()));
        }
        let version = read_u32(&mut pos)?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported network version {version}")));
        }
        let count = read_u32(&mut pos)? as usize;
        if count < 3 {
            return Err(Error::Format("network needs at least 3 layers".into()));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let o = read_u32(&mut pos)? as usize;
            let i = read_u32(&mut pos)? as usize;
            let kh = read_u32(&mut pos)? as usize;
            let kw = read_u32(&mut pos)? as usize;
            let mut weight = Array4::zeros((o, i, kh, kw));
            for w in weight.iter_mut() {
                *w = f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as f64;
            }
            let mut bias = Array1::zeros(o);
            for b in bias.iter_mut() {
                *b = f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as f64;
            }
            layers.push(Conv2d { weight, bias });
        }
        let value = layers.pop().unwrap();
        let policy = layers.pop().unwrap();
        Ok(PolicyValueNet {
            trunk: layers,
            policy,
            value,
        })
    }
}

/// Per-layer gradient accumulators, aligned with the net's layer order.
pub struct Grads {
    pub layers: Vec<(Array4<f64>, Array1<f64>)>,
}

impl Grads {
    fn layer_mut(&mut self, i: usize) -> (&mut Array4<f64>, &mut Array1<f64>) {
        let l = &mut self.layers[i];
        (&mut l.0, &mut l.1)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            *w *= factor;
            *b *= factor;
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// Adam optimizer over the flattened parameter vector.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// Descend `params` along `grads` (pass the gradient of the loss; to
    /// ascend an objective, negate first).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(c: usize, h: usize, w: usize, seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array3::zeros((c, h, w));
        for v in x.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        x
    }

    #[test]
    fn conv_matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::randomized(3, 2, 3, &mut rng);
        let x = random_input(2, 4, 5, 2);
        let y = conv.forward(&x);
        for o in 0..3 {
            for cy in 0..4usize {
                for cx in 0..5usize {
                    let mut acc = conv.bias[o];
                    for ci in 0..2 {
                        for dy in 0..3usize {
                            for dx in 0..3usize {
                                let sy = cy as isize + dy as isize - 1;
                                let sx = cx as isize + dx as isize - 1;
                                if sy < 0 || sy >= 4 || sx < 0 || sx >= 5 {
                                    continue;
                                }
                                acc += conv.weight[(o, ci, dy, dx)]
                                    * x[(ci, sy as usize, sx as usize)];
                            }
                        }
                    }
                    assert!((acc - y[(o, cy, cx)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv2d::randomized(2, 2, 3, &mut rng);
        let x = random_input(2, 3, 4, 4);
        // Scalar loss: sum of outputs weighted by fixed coefficients.
        let coef = random_input(2, 3, 4, 5);
        let loss = |c: &Conv2d, x: &Array3<f64>| (c.forward(x) * &coef).sum();

        let mut gw = Array4::zeros(conv.weight.dim());
        let mut gb = Array1::zeros(conv.bias.dim());
        let gx = conv.backward(&x, &coef, &mut gw, &mut gb);

        let h = 1e-6;
        let mut c2 = conv.clone();
        c2.weight[(1, 0, 2, 1)] += h;
        let num = (loss(&c2, &x) - loss(&conv, &x)) / h;
        assert!((num - gw[(1, 0, 2, 1)]).abs() < 1e-5);

        let mut x2 = x.clone();
        x2[(1, 2, 3)] += h;
        let num = (loss(&conv, &x2) - loss(&conv, &x)) / h;
        assert!((num - gx[(1, 2, 3)]).abs() < 1e-5);
    }

    #[test]
    fn net_evaluates_on_any_spatial_size() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 6,
            kernel: 3,
            seed: 0,
        });
        let small = net.forward(&random_input(NUM_GATE_CLASSES, 4, 10, 1));
        let large = net.forward(&random_input(NUM_GATE_CLASSES, 50, 120, 2));
        assert_eq!(small.policy_logits.dim(), (NUM_SOFT_RULES, 4, 10));
        assert_eq!(large.policy_logits.dim(), (NUM_SOFT_RULES, 50, 120));
        assert!(small.value.is_finite() && large.value.is_finite());
    }

    #[test]
    fn zero_initialized_heads_give_uniform_logits_and_zero_value() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 4,
            kernel: 3,
            seed: 7,
        });
        let out = net.forward(&random_input(NUM_GATE_CLASSES, 3, 5, 3));
        assert!(out.policy_logits.iter().all(|&x| x == 0.0));
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn save_load_round_trip() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 5,
            kernel: 3,
            seed: 9,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.qcpn");
        net.save(&path).unwrap();
        let loaded = PolicyValueNet::load(&path).unwrap();
        assert_eq!(loaded.trunk.len(), net.trunk.len());
        // f32 storage loses precision; compare within f32 epsilon.
        for (a, b) in net.params_vec().iter().zip(loaded.params_vec()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn params_vec_round_trip() {
        let mut net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 4,
            kernel: 3,
            seed: 11,
        });
        let mut p = net.params_vec();
        p[0] = 123.0;
        net.set_params_vec(&p);
        assert_eq!(net.params_vec()[0], 123.0);
    }
}
