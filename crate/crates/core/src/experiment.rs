//! Grid expansion, sample splitting, validation-based selection, and the
//! per-replication driver.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::datagen::{
    gen_classification, gen_linear, gen_nonlinear, gen_timeseries, sliding_window, Dataset,
    ScenarioKind, TimeSeries, TimeSeriesKind, CLASSIFICATION_DIM, LINEAR_DIM,
};
use crate::error::{Error, Result};
use crate::metrics::compute_l0;
use crate::nn::{
    train, Activation, ArchSpec, CnnFields, Loss, Network, OptimizerKind, OutputHead, TrainConfig,
};
use crate::seed::{derive_rng, StreamRole};

pub const CNN_LEARNING_RATE: f64 = 0.0005;
pub const CNN_BATCH_SIZE: usize = 16;
pub const CNN_HIDDEN_SIZE: usize = 128;
pub const CNN_INPUT_DIM: usize = 28 * 28;
/// Batch size for the RNN experiments (not varied by the grid).
pub const RNN_BATCH_SIZE: usize = 16;

/// Hyperparameter axes for one network family. Expansion order is row-major
/// in field order, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxes {
    Mlp {
        learning_rate: Vec<f64>,
        hidden_size: Vec<usize>,
        depth: Vec<usize>,
        batch_size: Vec<usize>,
    },
    Cnn {
        /// (conv kernel, output channels) pairs.
        conv: Vec<(usize, usize)>,
        pool_kernel: Vec<usize>,
        pool_stride: Vec<usize>,
    },
    Rnn {
        learning_rate: Vec<f64>,
        hidden_size: Vec<usize>,
        depth: Vec<usize>,
        window: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub scenario: ScenarioKind,
    pub axes: GridAxes,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointKind {
    Mlp {
        hidden_size: usize,
        depth: usize,
    },
    Cnn {
        conv_kernel: usize,
        out_channels: usize,
        pool_kernel: usize,
        pool_stride: usize,
    },
    Rnn {
        hidden_size: usize,
        depth: usize,
        window: usize,
    },
}

/// One concrete grid point; `grid_index` identifies it under the canonical
/// row-major enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub grid_index: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub kind: PointKind,
}

impl HyperParams {
    /// Window length for RNN points; 0 otherwise.
    pub fn window(&self) -> usize {
        match self.kind {
            PointKind::Rnn { window, .. } => window,
            _ => 0,
        }
    }
}

/// Cartesian product in canonical row-major axis order.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<HyperParams>> {
    let mut out = Vec::new();
    match &spec.axes {
        GridAxes::Mlp {
            learning_rate,
            hidden_size,
            depth,
            batch_size,
        } => {
            for axis in [learning_rate.is_empty(), hidden_size.is_empty(), depth.is_empty(), batch_size.is_empty()] {
                if axis {
                    return Err(Error::InvalidConfig("empty grid axis".into()));
                }
            }
            for &lr in learning_rate {
                for &hs in hidden_size {
                    for &d in depth {
                        for &bs in batch_size {
                            out.push(HyperParams {
                                grid_index: out.len(),
                                learning_rate: lr,
                                batch_size: bs,
                                kind: PointKind::Mlp {
                                    hidden_size: hs,
                                    depth: d,
                                },
                            });
                        }
                    }
                }
            }
        }
        GridAxes::Cnn {
            conv,
            pool_kernel,
            pool_stride,
        } => {
            if conv.is_empty() || pool_kernel.is_empty() || pool_stride.is_empty() {
                return Err(Error::InvalidConfig("empty grid axis".into()));
            }
            for &(k, c) in conv {
                for &pk in pool_kernel {
                    for &ps in pool_stride {
                        out.push(HyperParams {
                            grid_index: out.len(),
                            learning_rate: CNN_LEARNING_RATE,
                            batch_size: CNN_BATCH_SIZE,
                            kind: PointKind::Cnn {
                                conv_kernel: k,
                                out_channels: c,
                                pool_kernel: pk,
                                pool_stride: ps,
                            },
                        });
                    }
                }
            }
        }
        GridAxes::Rnn {
            learning_rate,
            hidden_size,
            depth,
            window,
        } => {
            for axis in [learning_rate.is_empty(), hidden_size.is_empty(), depth.is_empty(), window.is_empty()] {
                if axis {
                    return Err(Error::InvalidConfig("empty grid axis".into()));
                }
            }
            for &lr in learning_rate {
                for &hs in hidden_size {
                    for &d in depth {
                        for &w in window {
                            out.push(HyperParams {
                                grid_index: out.len(),
                                learning_rate: lr,
                                batch_size: RNN_BATCH_SIZE,
                                kind: PointKind::Rnn {
                                    hidden_size: hs,
                                    depth: d,
                                    window: w,
                                },
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Split sizes: n1 = n2 = n, n0 = max(n / 5, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub n1: usize,
    pub n2: usize,
    pub n0: usize,
}

impl SplitSpec {
    pub fn from_n(n: usize) -> Self {
        SplitSpec {
            n1: n,
            n2: n,
            n0: (n / 5).max(1),
        }
    }

    pub fn total(&self) -> usize {
        self.n1 + self.n2 + self.n0
    }
}

/// Disjoint (train, validation, test) subsets taken as contiguous slices of
/// a seeded permutation.
pub fn split_samples(
    full_set: &Dataset,
    split: SplitSpec,
    master_seed: u64,
    replication: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if full_set.len() < split.total() {
        return Err(Error::InsufficientSamples {
            needed: split.total(),
            available: full_set.len(),
        });
    }
    let mut rng = derive_rng(master_seed, replication, 0, StreamRole::Split);
    let mut perm: Vec<usize> = (0..full_set.len()).collect();
    perm.shuffle(&mut rng);
    let train = full_set.subset(&perm[..split.n1]);
    let val = full_set.subset(&perm[split.n1..split.n1 + split.n2]);
    let test = full_set.subset(&perm[split.n1 + split.n2..split.total()]);
    Ok((train, val, test))
}

/// Per-hyperparameter result within one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEntry {
    pub grid_index: usize,
    pub validation_loss: f64,
    pub oracle_loss: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replication_id: u64,
    pub master_seed: u64,
    pub entries: Vec<LambdaEntry>,
    pub selected_index: usize,
}

impl ReplicationRecord {
    pub fn selected_entry(&self) -> &LambdaEntry {
        self.entries
            .iter()
            .find(|e| e.grid_index == self.selected_index)
            .expect("selected index always present")
    }

    /// Smallest oracle loss among non-diverged entries.
    pub fn inf_oracle_loss(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| !e.diverged)
            .map(|e| e.oracle_loss)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Argmin of validation loss over non-diverged entries; ties broken by the
/// smallest grid index.
pub fn select_lambda(entries: &[LambdaEntry]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for e in entries {
        if e.diverged || !e.validation_loss.is_finite() {
            continue;
        }
        match best {
            Some((_, l)) if e.validation_loss >= l => {}
            _ => best = Some((e.grid_index, e.validation_loss)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::AllDiverged)
}

/// Data-generation and training settings for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Noise variance for regression and time-series scenarios.
    pub sigma2: f64,
    /// Centering constant for the classification scenario.
    pub mu: Option<f64>,
    pub epochs: usize,
}

impl ScenarioConfig {
    fn train_loss(&self) -> Loss {
        match self.kind {
            ScenarioKind::Classification | ScenarioKind::Image => Loss::CrossEntropy,
            _ => Loss::Mse,
        }
    }

    fn input_dim(&self) -> usize {
        match self.kind {
            ScenarioKind::Linear | ScenarioKind::Nonlinear => LINEAR_DIM,
            ScenarioKind::Classification => CLASSIFICATION_DIM,
            ScenarioKind::Image => CNN_INPUT_DIM,
            // RNN input length comes from the grid point.
            ScenarioKind::TimeSeriesLinear | ScenarioKind::TimeSeriesNonlinear => 0,
        }
    }

    fn output_head(&self) -> OutputHead {
        match self.kind {
            ScenarioKind::Classification | ScenarioKind::Image => OutputHead::SigmoidClamped,
            _ => OutputHead::Linear,
        }
    }
}

/// Architecture for one grid point under a scenario.
pub fn arch_for(scenario: &ScenarioConfig, hp: &HyperParams) -> Result<ArchSpec> {
    match hp.kind {
        PointKind::Mlp { hidden_size, depth } => ArchSpec::mlp(
            scenario.input_dim(),
            hidden_size,
            depth,
            Activation::ReLU,
            scenario.output_head(),
        ),
        PointKind::Cnn {
            conv_kernel,
            out_channels,
            pool_kernel,
            pool_stride,
        } => ArchSpec::cnn(
            CNN_INPUT_DIM,
            CNN_HIDDEN_SIZE,
            CnnFields {
                conv_kernel,
                out_channels,
                pool_kernel,
                pool_stride,
            },
            Activation::ReLU,
            scenario.output_head(),
        ),
        PointKind::Rnn {
            hidden_size,
            depth,
            window,
        } => ArchSpec::rnn(window, hidden_size, depth, scenario.output_head()),
    }
}

fn train_config(
    scenario: &ScenarioConfig,
    hp: &HyperParams,
    master_seed: u64,
    replication: u64,
) -> TrainConfig {
    TrainConfig {
        epochs: scenario.epochs,
        batch_size: hp.batch_size,
        loss: scenario.train_loss(),
        optimizer: OptimizerKind::Adam,
        learning_rate: hp.learning_rate,
        rng_seed: master_seed,
        stream_replication: replication,
        stream_grid: hp.grid_index as u64,
    }
}

/// Validation loss: MSE between network output and the observed response,
/// for every scenario (classification included).
pub fn validation_mse(net: &Network, val_set: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..val_set.len() {
        let f = net.forward(val_set.input(i))?;
        let d = f - val_set.target(i);
        acc += d * d;
    }
    Ok(acc / val_set.len() as f64)
}

fn train_eval_one(
    scenario: &ScenarioConfig,
    hp: &HyperParams,
    master_seed: u64,
    replication: u64,
    train_set: &Dataset,
    val_set: &Dataset,
    test_set: &Dataset,
) -> Result<LambdaEntry> {
    let arch = arch_for(scenario, hp)?;
    let config = train_config(scenario, hp, master_seed, replication);
    match train(arch, &config, train_set) {
        Ok(net) => {
            let val = validation_mse(&net, val_set)?;
            let l0 = compute_l0(&net, test_set)?;
            if !val.is_finite() || !l0.is_finite() {
                return Ok(LambdaEntry {
                    grid_index: hp.grid_index,
                    validation_loss: f64::NAN,
                    oracle_loss: f64::NAN,
                    diverged: true,
                });
            }
            Ok(LambdaEntry {
                grid_index: hp.grid_index,
                validation_loss: val,
                oracle_loss: l0,
                diverged: false,
            })
        }
        Err(Error::NonFinite { .. }) => Ok(LambdaEntry {
            grid_index: hp.grid_index,
            validation_loss: f64::NAN,
            oracle_loss: f64::NAN,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

/// Run one replication: generate data, split, train every grid point,
/// select by validation MSE, and record oracle losses.
///
/// For image scenarios the caller supplies the relabeled pool in
/// `image_pool`; samples are drawn from it without replacement.
pub fn run_replication(
    scenario: &ScenarioConfig,
    grid: &GridSpec,
    n: usize,
    master_seed: u64,
    replication_id: u64,
    image_pool: Option<&Dataset>,
) -> Result<ReplicationRecord> {
    let wrap = |e: Error| Error::Replication {
        replication_id,
        source: Box::new(e),
    };
    let points = expand_grid(grid).map_err(wrap)?;
    let split = SplitSpec::from_n(n);
    let entries: Vec<LambdaEntry> = match scenario.kind {
        ScenarioKind::TimeSeriesLinear | ScenarioKind::TimeSeriesNonlinear => {
            let kind = if scenario.kind == ScenarioKind::TimeSeriesLinear {
                TimeSeriesKind::Linear
            } else {
                TimeSeriesKind::Nonlinear
            };
            let window_max = points.iter().map(HyperParams::window).max().unwrap();
            let t_len = split.total() + window_max;
            let series =
                gen_timeseries(kind, t_len, scenario.sigma2, master_seed, replication_id)
                    .map_err(wrap)?;
            points
                .par_iter()
                .map(|hp| {
                    let (train_set, val_set, test_set) =
                        chronological_windows(&series, hp.window(), split)?;
                    train_eval_one(
                        scenario,
                        hp,
                        master_seed,
                        replication_id,
                        &train_set,
                        &val_set,
                        &test_set,
                    )
                })
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?
        }
        _ => {
            let full = match scenario.kind {
                ScenarioKind::Linear => {
                    gen_linear(split.total(), scenario.sigma2, master_seed, replication_id)
                }
                ScenarioKind::Nonlinear => {
                    gen_nonlinear(split.total(), scenario.sigma2, master_seed, replication_id)
                }
                ScenarioKind::Classification => {
                    let mu = scenario.mu.ok_or_else(|| {
                        Error::InvalidConfig("classification scenario requires mu".into())
                    })?;
                    gen_classification(split.total(), mu, master_seed, replication_id)
                }
                ScenarioKind::Image => {
                    let pool = image_pool.ok_or_else(|| {
                        Error::InvalidConfig("image scenario requires a relabeled pool".into())
                    })?;
                    pool.clone()
                }
                _ => unreachable!(),
            };
            let (train_set, val_set, test_set) =
                split_samples(&full, split, master_seed, replication_id).map_err(wrap)?;
            points
                .par_iter()
                .map(|hp| {
                    train_eval_one(
                        scenario,
                        hp,
                        master_seed,
                        replication_id,
                        &train_set,
                        &val_set,
                        &test_set,
                    )
                })
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?
        }
    };
    let selected_index = select_lambda(&entries).map_err(wrap)?;
    Ok(ReplicationRecord {
        replication_id,
        master_seed,
        entries,
        selected_index,
    })
}

/// Chronologically ordered contiguous window splits for the time-series
/// scenario: the most recent `n1 + n2 + n0 + window` values are windowed,
/// then assigned train/validation/test in time order.
fn chronological_windows(
    series: &TimeSeries,
    window: usize,
    split: SplitSpec,
) -> Result<(Dataset, Dataset, Dataset)> {
    let needed = split.total() + window;
    let t_len = series.values.len();
    if t_len < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: t_len,
        });
    }
    let start = t_len - needed;
    let sub = TimeSeries {
        kind: series.kind,
        values: series.values[start..].to_vec(),
        cond_mean: series.cond_mean[start..].to_vec(),
    };
    let all = sliding_window(&sub, window)?;
    let idx: Vec<usize> = (0..all.len()).collect();
    let train = all.subset(&idx[..split.n1]);
    let val = all.subset(&idx[split.n1..split.n1 + split.n2]);
    let test = all.subset(&idx[split.n1 + split.n2..]);
    Ok((train, val, test))
}
