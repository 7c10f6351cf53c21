use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mlp,
    Cnn,
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Linear,
    /// Sigmoid output, clamped away from {0,1} only when evaluating
    /// cross-entropy loss.
    SigmoidClamped,
}

/// Convolution/pooling settings, present only for the CNN family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnFields {
    pub conv_kernel: usize,
    pub out_channels: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
}

/// Architecture descriptor for one hyperparameter point.
///
/// `input_dim` is the flattened input length: the number of predictors for
/// MLP, a square pixel count for CNN, and the window length for RNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchSpec {
    pub family: Family,
    pub input_dim: usize,
    pub hidden_size: usize,
    pub depth: usize,
    pub activation: Activation,
    pub output_head: OutputHead,
    pub cnn_fields: Option<CnnFields>,
}

impl ArchSpec {
    pub fn mlp(
        input_dim: usize,
        hidden_size: usize,
        depth: usize,
        activation: Activation,
        output_head: OutputHead,
    ) -> Result<Self> {
        let spec = ArchSpec {
            family: Family::Mlp,
            input_dim,
            hidden_size,
            depth,
            activation,
            output_head,
            cnn_fields: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cnn(
        input_dim: usize,
        hidden_size: usize,
        fields: CnnFields,
        activation: Activation,
        output_head: OutputHead,
    ) -> Result<Self> {
        let spec = ArchSpec {
            family: Family::Cnn,
            input_dim,
            hidden_size,
            depth: 1,
            activation,
            output_head,
            cnn_fields: Some(fields),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rnn(
        window_len: usize,
        state_size: usize,
        depth: usize,
        output_head: OutputHead,
    ) -> Result<Self> {
        let spec = ArchSpec {
            family: Family::Rnn,
            input_dim: window_len,
            hidden_size: state_size,
            depth,
            activation: Activation::Sigmoid,
            output_head,
            cnn_fields: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Side length of the square CNN input image.
    pub fn cnn_side(&self) -> usize {
        (self.input_dim as f64).sqrt().round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_size == 0 || self.depth == 0 {
            return Err(Error::InvalidArch("every dimension must be >= 1".into()));
        }
        match self.family {
            Family::Cnn => {
                let f = self.cnn_fields.ok_or_else(|| {
                    Error::InvalidArch("CNN family requires cnn_fields".into())
                })?;
                if f.conv_kernel == 0 || f.out_channels == 0 || f.pool_kernel == 0 {
                    return Err(Error::InvalidArch("CNN dimensions must be >= 1".into()));
                }
                if f.pool_stride == 0 || f.pool_stride > f.pool_kernel {
                    return Err(Error::InvalidArch(format!(
                        "pool stride {} must be in 1..=pool kernel {}",
                        f.pool_stride, f.pool_kernel
                    )));
                }
                let side = self.cnn_side();
                if side * side != self.input_dim {
                    return Err(Error::InvalidArch(format!(
                        "CNN input_dim {} is not a perfect square",
                        self.input_dim
                    )));
                }
                // Two conv/pool stages; the spatial extent must survive both.
                let mut s = side;
                for stage in 0..2 {
                    if s < f.conv_kernel {
                        return Err(Error::InvalidArch(format!(
                            "conv stage {stage}: spatial size {s} < kernel {}",
                            f.conv_kernel
                        )));
                    }
                    s = s - f.conv_kernel + 1;
                    if s < f.pool_kernel {
                        return Err(Error::InvalidArch(format!(
                            "pool stage {stage}: spatial size {s} < kernel {}",
                            f.pool_kernel
                        )));
                    }
                    s = (s - f.pool_kernel) / f.pool_stride + 1;
                }
            }
            Family::Mlp | Family::Rnn => {
                if self.cnn_fields.is_some() {
                    return Err(Error::InvalidArch(
                        "cnn_fields only valid for the CNN family".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
