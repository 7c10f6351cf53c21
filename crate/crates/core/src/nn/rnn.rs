//! Stacked recurrent network with sigmoid state recurrence.
//!
//! The input window is consumed one scalar per time step; the output is a
//! scalar read off the final step of the top layer through a linear or tanh
//! head. Gradients are computed by backpropagation through time.

use rand::Rng;

/// Output head applied to z = V h + b'.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnHead {
    Linear,
    Tanh,
    Sigmoid,
}

/// Shape of a stacked RNN: `window` time steps, `state` units per layer,
/// `layers` stacked recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnShape {
    pub window: usize,
    pub state: usize,
    pub layers: usize,
    pub head: RnnHead,
}

impl RnnShape {
    fn in_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            1
        } else {
            self.state
        }
    }

    /// Per-layer (U, W, b) blocks followed by the output (V, b') head.
    pub fn param_count(&self) -> usize {
        let k = self.state;
        let mut d = 0;
        for l in 0..self.layers {
            d += k * self.in_dim(l) + k * k + k;
        }
        d + k + 1
    }

    pub fn param_layout(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let k = self.state;
        let mut out = Vec::new();
        let mut off = 0;
        for l in 0..self.layers {
            let nu = k * self.in_dim(l);
            out.push((format!("rnn{l}.input_weight"), off..off + nu));
            off += nu;
            out.push((format!("rnn{l}.recurrent_weight"), off..off + k * k));
            off += k * k;
            out.push((format!("rnn{l}.bias"), off..off + k));
            off += k;
        }
        out.push(("head.weight".into(), off..off + k));
        off += k;
        out.push(("head.bias".into(), off..off + 1));
        out
    }

    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.state;
        let mut w = Vec::with_capacity(self.param_count());
        for l in 0..self.layers {
            let in_dim = self.in_dim(l);
            let su = (6.0 / (in_dim + k) as f64).sqrt();
            for _ in 0..k * in_dim {
                w.push(rng.gen_range(-su..su));
            }
            let sw = (6.0 / (2 * k) as f64).sqrt();
            for _ in 0..k * k {
                w.push(rng.gen_range(-sw..sw));
            }
            w.extend(std::iter::repeat(0.0).take(k));
        }
        let sv = (6.0 / (k + 1) as f64).sqrt();
        for _ in 0..k {
            w.push(rng.gen_range(-sv..sv));
        }
        w.push(0.0);
        w
    }

    fn offsets(&self) -> (Vec<(usize, usize, usize)>, usize, usize) {
        let k = self.state;
        let mut off = 0;
        let mut per_layer = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            let u = off;
            let w = u + k * self.in_dim(l);
            let b = w + k * k;
            per_layer.push((u, w, b));
            off = b + k;
        }
        (per_layer, off, off + k)
    }

    /// Forward pass; returns (per-step hidden states `h[t][l]`, pre-head z,
    /// output o). `h` is indexed by time step 1..=T at position t-1.
    pub fn forward_trace(&self, params: &[f64], input: &[f64]) -> (Vec<Vec<Vec<f64>>>, f64, f64) {
        debug_assert_eq!(input.len(), self.window);
        debug_assert_eq!(params.len(), self.param_count());
        let k = self.state;
        let (layer_off, v_off, bp_off) = self.offsets();
        let mut h: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.window);
        let mut prev: Vec<Vec<f64>> = vec![vec![0.0; k]; self.layers];
        for &x_t in input {
            let mut step: Vec<Vec<f64>> = Vec::with_capacity(self.layers);
            for l in 0..self.layers {
                let (uo, wo, bo) = layer_off[l];
                let in_dim = self.in_dim(l);
                let mut hl = vec![0.0; k];
                for i in 0..k {
                    let mut c = params[bo + i];
                    if l == 0 {
                        c += params[uo + i] * x_t;
                    } else {
                        let below = &step[l - 1];
                        for (j, hb) in below.iter().enumerate().take(in_dim) {
                            c += params[uo + i * in_dim + j] * hb;
                        }
                    }
                    for j in 0..k {
                        c += params[wo + i * k + j] * prev[l][j];
                    }
                    hl[i] = 1.0 / (1.0 + (-c).exp());
                }
                step.push(hl);
            }
            prev = step.clone();
            h.push(step);
        }
        let top = &h[self.window - 1][self.layers - 1];
        let mut z = params[bp_off];
        for i in 0..k {
            z += params[v_off + i] * top[i];
        }
        let o = match self.head {
            RnnHead::Linear => z,
            RnnHead::Tanh => z.tanh(),
            RnnHead::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        };
        (h, z, o)
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        self.forward_trace(params, input).2
    }

    /// Backpropagation through time. `dl_do` is the loss derivative at the
    /// network output; `scale *` the parameter gradient is added to
    /// `grad_acc`.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        trace: &(Vec<Vec<Vec<f64>>>, f64, f64),
        dl_do: f64,
        scale: f64,
        grad_acc: &mut [f64],
    ) {
        let k = self.state;
        let t_max = self.window;
        let (layer_off, v_off, bp_off) = self.offsets();
        let (h, _z, o) = trace;
        let dz = match self.head {
            RnnHead::Linear => dl_do,
            RnnHead::Tanh => dl_do * (1.0 - o * o),
            RnnHead::Sigmoid => dl_do * o * (1.0 - o),
        };
        grad_acc[bp_off] += scale * dz;
        let top = &h[t_max - 1][self.layers - 1];
        for i in 0..k {
            grad_acc[v_off + i] += scale * dz * top[i];
        }
        // dh[t][l] accumulated while walking time backwards.
        let mut dh: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; k]; self.layers]; t_max];
        for i in 0..k {
            dh[t_max - 1][self.layers - 1][i] = dz * params[v_off + i];
        }
        for t in (0..t_max).rev() {
            for l in (0..self.layers).rev() {
                let (uo, wo, bo) = layer_off[l];
                let in_dim = self.in_dim(l);
                let hl = &h[t][l];
                let mut dc = vec![0.0; k];
                for i in 0..k {
                    dc[i] = dh[t][l][i] * hl[i] * (1.0 - hl[i]);
                }
                for i in 0..k {
                    let dci = dc[i];
                    if dci == 0.0 {
                        continue;
                    }
                    grad_acc[bo + i] += scale * dci;
                    if l == 0 {
                        grad_acc[uo + i] += scale * dci * input[t];
                    } else {
                        let below = &h[t][l - 1];
                        for j in 0..in_dim {
                            grad_acc[uo + i * in_dim + j] += scale * dci * below[j];
                            dh[t][l - 1][j] += dci * params[uo + i * in_dim + j];
                        }
                    }
                    if t > 0 {
                        let prev = &h[t - 1][l];
                        for j in 0..k {
                            grad_acc[wo + i * k + j] += scale * dci * prev[j];
                            dh[t - 1][l][j] += dci * params[wo + i * k + j];
                        }
                    }
                    // t == 0: previous state is the zero vector, so the
                    // recurrent weight gradient vanishes there.
                }
            }
        }
    }
}
