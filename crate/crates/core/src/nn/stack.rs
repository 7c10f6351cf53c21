//! Generic feedforward layer stack with hand-rolled backpropagation.
//!
//! Data flows as flat `Vec<f64>` buffers; spatial layers carry their own
//! shape information so the stack itself stays shape-agnostic.

use rand::Rng;

use super::arch::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        fan_in: usize,
        fan_out: usize,
    },
    /// Valid convolution, stride 1, square kernel.
    Conv {
        in_c: usize,
        out_c: usize,
        k: usize,
        in_h: usize,
        in_w: usize,
    },
    MaxPool {
        c: usize,
        k: usize,
        s: usize,
        in_h: usize,
        in_w: usize,
    },
    Act(Activation),
    /// Inverted dropout; identity at inference.
    Dropout {
        rate: f64,
    },
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { fan_in, fan_out } => fan_in * fan_out + fan_out,
            Layer::Conv { in_c, out_c, k, .. } => out_c * in_c * k * k + out_c,
            _ => 0,
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        match *self {
            Layer::Dense { fan_out, .. } => fan_out,
            Layer::Conv {
                out_c, k, in_h, in_w, ..
            } => out_c * (in_h - k + 1) * (in_w - k + 1),
            Layer::MaxPool { c, k, s, in_h, in_w } => {
                c * ((in_h - k) / s + 1) * ((in_w - k) / s + 1)
            }
            Layer::Act(_) | Layer::Dropout { .. } => in_len,
        }
    }
}

fn activate(a: Activation, x: f64) -> f64 {
    match a {
        Activation::ReLU => x.max(0.0),
        Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        Activation::Tanh => x.tanh(),
    }
}

/// Derivative expressed through the activation output.
fn activate_deriv_from_out(a: Activation, y: f64) -> f64 {
    match a {
        Activation::ReLU => {
            if y > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Sigmoid => y * (1.0 - y),
        Activation::Tanh => 1.0 - y * y,
    }
}

/// A layer stack plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StackNet {
    layers: Vec<Layer>,
    in_len: usize,
    params: Vec<f64>,
}

/// Per-evaluation cache: activations at every layer boundary plus dropout
/// masks, used by backward.
pub struct Trace {
    /// acts[0] is the input; acts[i+1] the output of layer i.
    acts: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl StackNet {
    pub fn new(layers: Vec<Layer>, in_len: usize) -> Self {
        let d: usize = layers.iter().map(Layer::param_count).sum();
        StackNet {
            layers,
            in_len,
            params: vec![0.0; d],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        let mut len = self.in_len;
        for l in &self.layers {
            len = l.out_len(len);
        }
        len
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, w: &[f64]) {
        assert_eq!(w.len(), self.params.len());
        self.params.copy_from_slice(w);
    }

    /// Named parameter slices in layout order; disjoint and covering.
    pub fn param_layout(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (i, l) in self.layers.iter().enumerate() {
            match *l {
                Layer::Dense { fan_in, fan_out } => {
                    out.push((format!("layer{i}.weight"), off..off + fan_in * fan_out));
                    off += fan_in * fan_out;
                    out.push((format!("layer{i}.bias"), off..off + fan_out));
                    off += fan_out;
                }
                Layer::Conv { in_c, out_c, k, .. } => {
                    let nw = out_c * in_c * k * k;
                    out.push((format!("layer{i}.kernel"), off..off + nw));
                    off += nw;
                    out.push((format!("layer{i}.bias"), off..off + out_c));
                    off += out_c;
                }
                _ => {}
            }
        }
        out
    }

    /// Uniform(-s, s) weight init with s = sqrt(6 / (fan_in + fan_out));
    /// biases start at zero.
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        let mut off = 0;
        for l in &self.layers {
            match *l {
                Layer::Dense { fan_in, fan_out } => {
                    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for w in &mut self.params[off..off + fan_in * fan_out] {
                        *w = rng.gen_range(-s..s);
                    }
                    off += fan_in * fan_out + fan_out;
                }
                Layer::Conv { in_c, out_c, k, .. } => {
                    let fan_in = in_c * k * k;
                    let fan_out = out_c * k * k;
                    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let nw = out_c * in_c * k * k;
                    for w in &mut self.params[off..off + nw] {
                        *w = rng.gen_range(-s..s);
                    }
                    off += nw + out_c;
                }
                _ => {}
            }
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_len {
            return Err(Error::DimensionMismatch {
                expected: self.in_len,
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping per-layer activations. `dropout_rng` enables
    /// dropout layers (training mode); `None` makes them the identity.
    pub fn forward_trace<R: Rng>(
        &self,
        input: &[f64],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<Trace> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        let mut off = 0;
        for l in &self.layers {
            let x = acts.last().unwrap();
            let mut mask = None;
            let y = match *l {
                Layer::Dense { fan_in, fan_out } => {
                    let w = &self.params[off..off + fan_in * fan_out];
                    let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
                    let mut y = vec![0.0; fan_out];
                    for (o, yo) in y.iter_mut().enumerate() {
                        let row = &w[o * fan_in..(o + 1) * fan_in];
                        let mut acc = b[o];
                        for (wi, xi) in row.iter().zip(x.iter()) {
                            acc += wi * xi;
                        }
                        *yo = acc;
                    }
                    y
                }
                Layer::Conv {
                    in_c,
                    out_c,
                    k,
                    in_h,
                    in_w,
                } => {
                    let nw = out_c * in_c * k * k;
                    let w = &self.params[off..off + nw];
                    let b = &self.params[off + nw..off + nw + out_c];
                    conv_forward(x, w, b, in_c, out_c, k, in_h, in_w)
                }
                Layer::MaxPool { c, k, s, in_h, in_w } => pool_forward(x, c, k, s, in_h, in_w),
                Layer::Act(a) => x.iter().map(|&v| activate(a, v)).collect(),
                Layer::Dropout { rate } => match dropout_rng.as_deref_mut() {
                    Some(rng) => {
                        let keep = 1.0 - rate;
                        let m: Vec<f64> = (0..x.len())
                            .map(|_| {
                                if rng.gen::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        let y = x.iter().zip(m.iter()).map(|(a, b)| a * b).collect();
                        mask = Some(m);
                        y
                    }
                    None => x.clone(),
                },
            };
            off += l.param_count();
            masks.push(mask);
            acts.push(y);
        }
        Ok(Trace { acts, masks })
    }

    /// Scalar forward (inference mode); requires out_len() == 1.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        let trace = self.forward_trace::<rand_chacha::ChaCha8Rng>(input, None)?;
        Ok(trace.acts.last().unwrap()[0])
    }

    /// Backpropagate `dl_dout` through the stack, adding `scale *` the
    /// parameter gradient into `grad_acc`. Returns the input gradient.
    pub fn backward(
        &self,
        trace: &Trace,
        dl_dout: &[f64],
        scale: f64,
        grad_acc: &mut [f64],
    ) -> Vec<f64> {
        assert_eq!(grad_acc.len(), self.params.len());
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        let mut g = dl_dout.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &trace.acts[i];
            let y = &trace.acts[i + 1];
            let off = offsets[i];
            g = match *l {
                Layer::Dense { fan_in, fan_out } => {
                    let w = &self.params[off..off + fan_in * fan_out];
                    let gw = off;
                    let gb = off + fan_in * fan_out;
                    let mut gx = vec![0.0; fan_in];
                    for o in 0..fan_out {
                        let go = g[o];
                        if go == 0.0 {
                            continue;
                        }
                        grad_acc[gb + o] += scale * go;
                        let row = &w[o * fan_in..(o + 1) * fan_in];
                        for i2 in 0..fan_in {
                            grad_acc[gw + o * fan_in + i2] += scale * go * x[i2];
                            gx[i2] += go * row[i2];
                        }
                    }
                    gx
                }
                Layer::Conv {
                    in_c,
                    out_c,
                    k,
                    in_h,
                    in_w,
                } => {
                    let nw = out_c * in_c * k * k;
                    let w = &self.params[off..off + nw];
                    conv_backward(
                        x, w, &g, in_c, out_c, k, in_h, in_w, scale,
                        &mut grad_acc[off..off + nw + out_c],
                    )
                }
                Layer::MaxPool { c, k, s, in_h, in_w } => {
                    pool_backward(x, &g, c, k, s, in_h, in_w)
                }
                Layer::Act(a) => g
                    .iter()
                    .zip(y.iter())
                    .map(|(&gi, &yi)| gi * activate_deriv_from_out(a, yi))
                    .collect(),
                Layer::Dropout { .. } => match &trace.masks[i] {
                    Some(m) => g.iter().zip(m.iter()).map(|(a, b)| a * b).collect(),
                    None => g,
                },
            };
        }
        g
    }

    pub fn output_of(trace: &Trace) -> f64 {
        trace.acts.last().unwrap()[0]
    }
}

fn conv_forward(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    in_c: usize,
    out_c: usize,
    k: usize,
    in_h: usize,
    in_w: usize,
) -> Vec<f64> {
    let oh = in_h - k + 1;
    let ow = in_w - k + 1;
    let mut y = vec![0.0; out_c * oh * ow];
    for oc in 0..out_c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[oc];
                for ic in 0..in_c {
                    let wbase = ((oc * in_c) + ic) * k * k;
                    let xbase = ic * in_h * in_w;
                    for ky in 0..k {
                        let xrow = xbase + (oy + ky) * in_w + ox;
                        let wrow = wbase + ky * k;
                        for kx in 0..k {
                            acc += w[wrow + kx] * x[xrow + kx];
                        }
                    }
                }
                y[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    in_c: usize,
    out_c: usize,
    k: usize,
    in_h: usize,
    in_w: usize,
    scale: f64,
    grad_acc: &mut [f64],
) -> Vec<f64> {
    let oh = in_h - k + 1;
    let ow = in_w - k + 1;
    let nw = out_c * in_c * k * k;
    let mut gx = vec![0.0; in_c * in_h * in_w];
    for oc in 0..out_c {
        for oy in 0..oh {
            for ox in 0..ow {
                let go = g[(oc * oh + oy) * ow + ox];
                if go == 0.0 {
                    continue;
                }
                grad_acc[nw + oc] += scale * go;
                for ic in 0..in_c {
                    let wbase = ((oc * in_c) + ic) * k * k;
                    let xbase = ic * in_h * in_w;
                    for ky in 0..k {
                        let xrow = xbase + (oy + ky) * in_w + ox;
                        let wrow = wbase + ky * k;
                        for kx in 0..k {
                            grad_acc[wrow + kx] += scale * go * x[xrow + kx];
                            gx[xrow + kx] += go * w[wrow + kx];
                        }
                    }
                }
            }
        }
    }
    gx
}

fn pool_forward(x: &[f64], c: usize, k: usize, s: usize, in_h: usize, in_w: usize) -> Vec<f64> {
    let oh = (in_h - k) / s + 1;
    let ow = (in_w - k) / s + 1;
    let mut y = vec![0.0; c * oh * ow];
    for ch in 0..c {
        let base = ch * in_h * in_w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..k {
                    for kx in 0..k {
                        let v = x[base + (oy * s + ky) * in_w + ox * s + kx];
                        if v > best {
                            best = v;
                        }
                    }
                }
                y[(ch * oh + oy) * ow + ox] = best;
            }
        }
    }
    y
}

/// Gradient routed to the first (row-major) argmax of each window.
fn pool_backward(
    x: &[f64],
    g: &[f64],
    c: usize,
    k: usize,
    s: usize,
    in_h: usize,
    in_w: usize,
) -> Vec<f64> {
    let oh = (in_h - k) / s + 1;
    let ow = (in_w - k) / s + 1;
    let mut gx = vec![0.0; c * in_h * in_w];
    for ch in 0..c {
        let base = ch * in_h * in_w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for ky in 0..k {
                    for kx in 0..k {
                        let idx = base + (oy * s + ky) * in_w + ox * s + kx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                gx[best_idx] += g[(ch * oh + oy) * ow + ox];
            }
        }
    }
    gx
}
