use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::arch::{Activation, ArchSpec, Family, OutputHead};
use super::rnn::RnnShape;
use super::stack::{Layer, StackNet};
use crate::error::{Error, Result};

/// Clamp bound used when evaluating cross-entropy on a sigmoid output.
const CE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Stack(StackNet),
    Rnn { shape: RnnShape, params: Vec<f64> },
}

/// A network: architecture descriptor plus the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: ArchSpec,
    repr: Repr,
}

/// Compile an architecture into a feedforward layer stack (MLP/CNN only).
fn build_stack(arch: &ArchSpec) -> Result<StackNet> {
    let mut layers = Vec::new();
    match arch.family {
        Family::Mlp => {
            let mut fan_in = arch.input_dim;
            for _ in 0..arch.depth {
                layers.push(Layer::Dense {
                    fan_in,
                    fan_out: arch.hidden_size,
                });
                layers.push(Layer::Act(arch.activation));
                fan_in = arch.hidden_size;
            }
            layers.push(Layer::Dense { fan_in, fan_out: 1 });
        }
        Family::Cnn => {
            let f = arch.cnn_fields.unwrap();
            let mut side = arch.cnn_side();
            let mut in_c = 1;
            for _ in 0..2 {
                layers.push(Layer::Conv {
                    in_c,
                    out_c: f.out_channels,
                    k: f.conv_kernel,
                    in_h: side,
                    in_w: side,
                });
                layers.push(Layer::Act(arch.activation));
                side = side - f.conv_kernel + 1;
                layers.push(Layer::MaxPool {
                    c: f.out_channels,
                    k: f.pool_kernel,
                    s: f.pool_stride,
                    in_h: side,
                    in_w: side,
                });
                side = (side - f.pool_kernel) / f.pool_stride + 1;
                in_c = f.out_channels;
            }
            let flat = in_c * side * side;
            layers.push(Layer::Dense {
                fan_in: flat,
                fan_out: arch.hidden_size,
            });
            layers.push(Layer::Act(arch.activation));
            layers.push(Layer::Dense {
                fan_in: arch.hidden_size,
                fan_out: 1,
            });
        }
        Family::Rnn => unreachable!(),
    }
    if arch.output_head == OutputHead::SigmoidClamped {
        layers.push(Layer::Act(Activation::Sigmoid));
    }
    Ok(StackNet::new(layers, arch.input_dim))
}

impl Network {
    /// Build a network with all parameters zero.
    pub fn new(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let repr = match arch.family {
            Family::Rnn => {
                let shape = RnnShape {
                    window: arch.input_dim,
                    state: arch.hidden_size,
                    layers: arch.depth,
                    head: match arch.output_head {
                        OutputHead::Linear => super::rnn::RnnHead::Linear,
                        OutputHead::SigmoidClamped => super::rnn::RnnHead::Sigmoid,
                    },
                };
                Repr::Rnn {
                    params: vec![0.0; shape.param_count()],
                    shape,
                }
            }
            _ => Repr::Stack(build_stack(&arch)?),
        };
        Ok(Network { arch, repr })
    }

    /// Build a network with seeded uniform weight initialization.
    pub fn init<R: Rng>(arch: ArchSpec, rng: &mut R) -> Result<Self> {
        let mut net = Network::new(arch)?;
        match &mut net.repr {
            Repr::Stack(s) => s.init_params(rng),
            Repr::Rnn { shape, params } => *params = shape.init_params(rng),
        }
        Ok(net)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub fn params(&self) -> &[f64] {
        match &self.repr {
            Repr::Stack(s) => s.params(),
            Repr::Rnn { params, .. } => params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match &mut self.repr {
            Repr::Stack(s) => s.params_mut(),
            Repr::Rnn { params, .. } => params,
        }
    }

    pub fn param_layout(&self) -> Vec<(String, std::ops::Range<usize>)> {
        match &self.repr {
            Repr::Stack(s) => s.param_layout(),
            Repr::Rnn { shape, .. } => shape.param_layout(),
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim,
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        match &self.repr {
            Repr::Stack(s) => s.forward(input),
            Repr::Rnn { shape, params } => Ok(shape.forward(params, input)),
        }
    }

    /// Per-sample loss value.
    pub fn loss_value(&self, output: f64, target: f64, loss: Loss) -> f64 {
        match loss {
            Loss::Mse => (output - target) * (output - target),
            Loss::CrossEntropy => {
                let f = output.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
                -(target * f.ln() + (1.0 - target) * (1.0 - f).ln())
            }
        }
    }

    fn check_loss_target(&self, target: f64, loss: Loss) -> Result<()> {
        if loss == Loss::CrossEntropy {
            if target != 0.0 && target != 1.0 {
                return Err(Error::NonBinaryTarget(target));
            }
            if self.arch.output_head != OutputHead::SigmoidClamped {
                return Err(Error::InvalidConfig(
                    "cross-entropy requires the sigmoid output head".into(),
                ));
            }
        }
        Ok(())
    }

    /// Gradient of the per-sample loss w.r.t. the parameter vector.
    pub fn backward(&self, input: &[f64], target: f64, loss: Loss) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_loss_grad(input, target, loss, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Add `scale *` the per-sample loss gradient into `grad_acc`; returns
    /// the per-sample loss value.
    pub fn accumulate_loss_grad(
        &self,
        input: &[f64],
        target: f64,
        loss: Loss,
        scale: f64,
        grad_acc: &mut [f64],
    ) -> Result<f64> {
        self.check_input(input)?;
        self.check_loss_target(target, loss)?;
        match &self.repr {
            Repr::Stack(s) => {
                let trace = s.forward_trace::<ChaCha8Rng>(input, None)?;
                let out = StackNet::output_of(&trace);
                let dl = self.loss_deriv(out, target, loss);
                s.backward(&trace, &[dl], scale, grad_acc);
                Ok(self.loss_value(out, target, loss))
            }
            Repr::Rnn { shape, params } => {
                let trace = shape.forward_trace(params, input);
                let out = trace.2;
                let dl = self.loss_deriv(out, target, loss);
                shape.backward(params, input, &trace, dl, scale, grad_acc);
                Ok(self.loss_value(out, target, loss))
            }
        }
    }

    fn loss_deriv(&self, output: f64, target: f64, loss: Loss) -> f64 {
        match loss {
            Loss::Mse => 2.0 * (output - target),
            Loss::CrossEntropy => {
                let f = output.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
                (f - target) / (f * (1.0 - f))
            }
        }
    }

    /// Gradient of the raw network output w.r.t. the parameters (identity
    /// loss factor).
    pub fn output_gradient(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut grad = vec![0.0; self.param_count()];
        match &self.repr {
            Repr::Stack(s) => {
                let trace = s.forward_trace::<ChaCha8Rng>(input, None)?;
                s.backward(&trace, &[1.0], 1.0, &mut grad);
            }
            Repr::Rnn { shape, params } => {
                let trace = shape.forward_trace(params, input);
                shape.backward(params, input, &trace, 1.0, 1.0, &mut grad);
            }
        }
        Ok(grad)
    }
}
