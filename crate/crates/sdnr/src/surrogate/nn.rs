//! Minimal dense/1-D-convolution layers with hand-written backpropagation
//! over a single flat parameter vector, plus Adam updates. Single-threaded:
//! training reproducibility outranks speed at the intended data scale.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Network structure descriptor. Parameters live in one flat vector whose
/// layout is fixed by this descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Architecture {
    /// Flattened input, two hidden ReLU layers, scalar output.
    Mlp {
        input: usize,
        hidden1: usize,
        hidden2: usize,
    },
    /// Four 1-D convolutions along the branch axis, global average pooling,
    /// dense scalar head.
    Conv1d {
        t_len: usize,
        in_channels: usize,
        channels: [usize; 4],
        kernel: usize,
    },
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Mlp {
                input,
                hidden1,
                hidden2,
            } => hidden1 * input + hidden1 + hidden2 * hidden1 + hidden2 + hidden2 + 1,
            Architecture::Conv1d {
                in_channels,
                channels,
                kernel,
                ..
            } => {
                let mut count = 0;
                let mut c_in = in_channels;
                for &c_out in &channels {
                    count += c_out * c_in * kernel + c_out;
                    c_in = c_out;
                }
                count + c_in + 1
            }
        }
    }

    pub fn input_len(&self) -> usize {
        match *self {
            Architecture::Mlp { input, .. } => input,
            Architecture::Conv1d {
                t_len, in_channels, ..
            } => t_len * in_channels,
        }
    }

    /// Glorot-uniform initialization, deterministic under the given RNG.
    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.param_count()];
        let fill = |slice: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in slice {
                *p = rng.random_range(-lim..lim);
            }
        };
        match *self {
            Architecture::Mlp {
                input,
                hidden1,
                hidden2,
            } => {
                let (o1, o2, o3) = mlp_offsets(input, hidden1, hidden2);
                fill(&mut params[o1.0..o1.1], input, hidden1, rng);
                fill(&mut params[o2.0..o2.1], hidden1, hidden2, rng);
                fill(&mut params[o3.0..o3.1], hidden2, 1, rng);
            }
            Architecture::Conv1d {
                in_channels,
                channels,
                kernel,
                ..
            } => {
                let mut off = 0;
                let mut c_in = in_channels;
                for &c_out in &channels {
                    let w_len = c_out * c_in * kernel;
                    fill(&mut params[off..off + w_len], c_in * kernel, c_out, rng);
                    off += w_len + c_out;
                    c_in = c_out;
                }
                let w_len = c_in;
                fill(&mut params[off..off + w_len], c_in, 1, rng);
            }
        }
        params
    }
}

/// Weight slice ranges for the three dense layers (biases follow each weight
/// block).
fn mlp_offsets(input: usize, h1: usize, h2: usize) -> ((usize, usize), (usize, usize), (usize, usize)) {
    let w1 = (0, h1 * input);
    let b1_end = w1.1 + h1;
    let w2 = (b1_end, b1_end + h2 * h1);
    let b2_end = w2.1 + h2;
    let w3 = (b2_end, b2_end + h2);
    ((w1.0, w1.1), (w2.0, w2.1), (w3.0, w3.1))
}

fn dense_forward(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        let mut acc = *bias;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o = acc;
    }
}

/// dx += W^T dy; dw += dy x^T; db += dy.
fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let n_in = x.len();
    for (k, &dyk) in dy.iter().enumerate() {
        db[k] += dyk;
        let row = &w[k * n_in..(k + 1) * n_in];
        let drow = &mut dw[k * n_in..(k + 1) * n_in];
        for i in 0..n_in {
            drow[i] += dyk * x[i];
            dx[i] += dyk * row[i];
        }
    }
}

/// Same-padding 1-D convolution over a t-major `[t * c_in + ci]` buffer.
fn conv_forward(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    t_len: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    out: &mut [f64],
) {
    let pad = (kernel - 1) / 2;
    for t in 0..t_len {
        for co in 0..c_out {
            let mut acc = b[co];
            let w_base = co * c_in * kernel;
            for dt in 0..kernel {
                let tt = t + dt;
                if tt < pad || tt - pad >= t_len {
                    continue;
                }
                let x_base = (tt - pad) * c_in;
                let w_off = w_base + dt;
                for ci in 0..c_in {
                    acc += w[w_off + ci * kernel] * x[x_base + ci];
                }
            }
            out[t * c_out + co] = acc;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    w: &[f64],
    x: &[f64],
    t_len: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let pad = (kernel - 1) / 2;
    for t in 0..t_len {
        for co in 0..c_out {
            let g = dy[t * c_out + co];
            if g == 0.0 {
                continue;
            }
            db[co] += g;
            let w_base = co * c_in * kernel;
            for dt in 0..kernel {
                let tt = t + dt;
                if tt < pad || tt - pad >= t_len {
                    continue;
                }
                let x_base = (tt - pad) * c_in;
                let w_off = w_base + dt;
                for ci in 0..c_in {
                    dw[w_off + ci * kernel] += g * x[x_base + ci];
                    dx[x_base + ci] += g * w[w_off + ci * kernel];
                }
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

fn relu_grad(pre: &[f64], grad: &mut [f64]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Forward pass in inference mode (dropout disabled).
pub fn forward_eval(arch: &Architecture, params: &[f64], x: &[f64]) -> f64 {
    forward(arch, params, x, None).0
}

/// Forward pass; with `Some(mask)` the pre-output hidden vector is dropped
/// out with inverted scaling, and all pre-activations are returned for the
/// backward pass.
fn forward(
    arch: &Architecture,
    params: &[f64],
    x: &[f64],
    dropout_mask: Option<&[f64]>,
) -> (f64, Vec<Vec<f64>>) {
    match *arch {
        Architecture::Mlp {
            input,
            hidden1,
            hidden2,
        } => {
            let (w1, w2, w3) = mlp_offsets(input, hidden1, hidden2);
            let mut z1 = vec![0.0; hidden1];
            dense_forward(&params[w1.0..w1.1], &params[w1.1..w1.1 + hidden1], x, &mut z1);
            let mut a1 = z1.clone();
            relu(&mut a1);
            let mut z2 = vec![0.0; hidden2];
            dense_forward(&params[w2.0..w2.1], &params[w2.1..w2.1 + hidden2], &a1, &mut z2);
            let mut a2 = z2.clone();
            relu(&mut a2);
            if let Some(mask) = dropout_mask {
                for (a, m) in a2.iter_mut().zip(mask) {
                    *a *= m;
                }
            }
            let mut y = vec![0.0];
            dense_forward(&params[w3.0..w3.1], &params[w3.1..w3.1 + 1], &a2, &mut y);
            (y[0], vec![z1, a1, z2, a2])
        }
        Architecture::Conv1d {
            t_len,
            in_channels,
            channels,
            kernel,
        } => {
            let mut caches: Vec<Vec<f64>> = Vec::with_capacity(10);
            let mut h = x.to_vec();
            let mut c_in = in_channels;
            let mut off = 0;
            for &c_out in &channels {
                let w_len = c_out * c_in * kernel;
                let mut z = vec![0.0; t_len * c_out];
                conv_forward(
                    &params[off..off + w_len],
                    &params[off + w_len..off + w_len + c_out],
                    &h,
                    t_len,
                    c_in,
                    c_out,
                    kernel,
                    &mut z,
                );
                caches.push(z.clone());
                relu(&mut z);
                caches.push(z.clone());
                h = z;
                off += w_len + c_out;
                c_in = c_out;
            }
            // global average pool over the branch axis
            let mut pooled = vec![0.0; c_in];
            for t in 0..t_len {
                for c in 0..c_in {
                    pooled[c] += h[t * c_in + c];
                }
            }
            for p in pooled.iter_mut() {
                *p /= t_len as f64;
            }
            if let Some(mask) = dropout_mask {
                for (p, m) in pooled.iter_mut().zip(mask) {
                    *p *= m;
                }
            }
            caches.push(pooled.clone());
            let mut y = vec![0.0];
            dense_forward(&params[off..off + c_in], &params[off + c_in..off + c_in + 1], &pooled, &mut y);
            (y[0], caches)
        }
    }
}

/// One forward/backward pass. `dy` is dLoss/dOutput; gradients accumulate
/// into `grads` (same layout as `params`). Returns the model output.
pub fn forward_backward(
    arch: &Architecture,
    params: &[f64],
    x: &[f64],
    dropout_mask: Option<&[f64]>,
    target: f64,
    grads: &mut [f64],
) -> f64 {
    let (y, caches) = forward(arch, params, x, dropout_mask);
    let dy = 2.0 * (y - target);
    match *arch {
        Architecture::Mlp {
            input,
            hidden1,
            hidden2,
        } => {
            let (w1, w2, w3) = mlp_offsets(input, hidden1, hidden2);
            let (z1, a1, z2, a2) = (&caches[0], &caches[1], &caches[2], &caches[3]);
            // output layer
            let mut da2 = vec![0.0; hidden2];
            {
                let (gw3, rest) = grads[w3.0..].split_at_mut(w3.1 - w3.0);
                dense_backward(&params[w3.0..w3.1], a2, &[dy], gw3, &mut rest[..1], &mut da2);
            }
            if let Some(mask) = dropout_mask {
                for (d, m) in da2.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            relu_grad(z2, &mut da2);
            let mut da1 = vec![0.0; hidden1];
            {
                let (gw2, rest) = grads[w2.0..].split_at_mut(w2.1 - w2.0);
                dense_backward(&params[w2.0..w2.1], a1, &da2, gw2, &mut rest[..hidden2], &mut da1);
            }
            relu_grad(z1, &mut da1);
            let mut dx = vec![0.0; input];
            {
                let (gw1, rest) = grads[w1.0..].split_at_mut(w1.1 - w1.0);
                dense_backward(&params[w1.0..w1.1], x, &da1, gw1, &mut rest[..hidden1], &mut dx);
            }
        }
        Architecture::Conv1d {
            t_len,
            in_channels,
            channels,
            kernel,
        } => {
            // offsets per layer
            let mut offsets = Vec::with_capacity(5);
            let mut c_in = in_channels;
            let mut off = 0;
            for &c_out in &channels {
                offsets.push((off, c_in, c_out));
                off += c_out * c_in * kernel + c_out;
                c_in = c_out;
            }
            let head_off = off;
            let c_last = c_in;
            let pooled = &caches[8];
            let mut dpooled = vec![0.0; c_last];
            {
                let (gw, rest) = grads[head_off..].split_at_mut(c_last);
                dense_backward(
                    &params[head_off..head_off + c_last],
                    pooled,
                    &[dy],
                    gw,
                    &mut rest[..1],
                    &mut dpooled,
                );
            }
            if let Some(mask) = dropout_mask {
                for (d, m) in dpooled.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            // back through GAP
            let mut dh = vec![0.0; t_len * c_last];
            for t in 0..t_len {
                for c in 0..c_last {
                    dh[t * c_last + c] = dpooled[c] / t_len as f64;
                }
            }
            for layer in (0..4).rev() {
                let (off, c_in, c_out) = offsets[layer];
                let w_len = c_out * c_in * kernel;
                let pre = &caches[2 * layer];
                relu_grad(pre, &mut dh);
                let x_in: &[f64] = if layer == 0 { x } else { &caches[2 * layer - 1] };
                let mut dx = vec![0.0; t_len * c_in];
                let (gw, rest) = grads[off..].split_at_mut(w_len);
                conv_backward(
                    &params[off..off + w_len],
                    x_in,
                    t_len,
                    c_in,
                    c_out,
                    kernel,
                    &dh,
                    gw,
                    &mut rest[..c_out],
                    &mut dx,
                );
                dh = dx;
            }
        }
    }
    y
}

/// Size of the vector that dropout applies to (the pre-output hidden layer).
pub fn dropout_width(arch: &Architecture) -> usize {
    match *arch {
        Architecture::Mlp { hidden2, .. } => hidden2,
        Architecture::Conv1d { channels, .. } => channels[3],
    }
}

pub fn sample_dropout_mask(width: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..width)
        .map(|_| {
            if rng.random_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect()
}

pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
