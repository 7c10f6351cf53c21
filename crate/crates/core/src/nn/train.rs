use rand::seq::SliceRandom;

use super::network::{Loss, Network};
use super::optimizer::{OptimizerKind, OptimizerState};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::nn::ArchSpec;
use crate::seed::{derive_rng, StreamRole};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Derived into independent init and shuffle streams, keyed together
    /// with `stream_replication` and `stream_grid` so no two trainings in a
    /// suite can share a stream.
    pub rng_seed: u64,
    pub stream_replication: u64,
    pub stream_grid: u64,
}

impl TrainConfig {
    pub fn simple(
        epochs: usize,
        batch_size: usize,
        loss: Loss,
        optimizer: OptimizerKind,
        learning_rate: f64,
        rng_seed: u64,
    ) -> Self {
        TrainConfig {
            epochs,
            batch_size,
            loss,
            optimizer,
            learning_rate,
            rng_seed,
            stream_replication: 0,
            stream_grid: 0,
        }
    }
}

/// Full-batch-or-smaller mini-batch training; returns the final-epoch
/// parameters. Deterministic given (arch, config, train_set).
pub fn train(arch: ArchSpec, config: &TrainConfig, train_set: &Dataset) -> Result<Network> {
    let n = train_set.len();
    if n == 0 {
        return Err(Error::InsufficientSamples {
            needed: 1,
            available: 0,
        });
    }
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be >= 1".into()));
    }
    let batch = config.batch_size.clamp(1, n);

    let mut init_rng = derive_rng(
        config.rng_seed,
        config.stream_replication,
        config.stream_grid,
        StreamRole::Init,
    );
    let mut shuffle_rng = derive_rng(
        config.rng_seed,
        config.stream_replication,
        config.stream_grid,
        StreamRole::Shuffle,
    );
    let mut net = Network::init(arch, &mut init_rng)?;
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, net.param_count());

    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.param_count()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                let loss = net.accumulate_loss_grad(
                    train_set.input(i),
                    train_set.target(i),
                    config.loss,
                    scale,
                    &mut grad,
                )?;
                batch_loss += scale * loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}"),
                });
            }
            opt.step(net.params_mut(), &grad)?;
        }
    }
    Ok(net)
}
