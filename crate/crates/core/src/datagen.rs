//! Seeded generators for the synthetic scenarios, with exact conditional
//! means stored alongside the draws.
//!
//! Input draws and noise draws come from independently derived substreams,
//! so the stored conditional means are reproducible regardless of the noise
//! realization.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::{derive_rng, StreamRole};

pub const LINEAR_DIM: usize = 5;
pub const CLASSIFICATION_DIM: usize = 10;
/// Coefficients of the linear scenario.
pub const LINEAR_BETA: [f64; 5] = [1.0, 1.0, 1.0, -1.0, -1.0];
/// Signal variance of the linear scenario: beta' Omega beta.
pub const LINEAR_SIGNAL_VARIANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Linear,
    Nonlinear,
    Classification,
    TimeSeriesLinear,
    TimeSeriesNonlinear,
    Image,
}

/// Generation settings for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub noise_variance: f64,
    /// Centering constant for the classification scenario.
    pub mu: Option<f64>,
    /// Window length for time-series scenarios.
    pub window: Option<usize>,
}

/// Predictors, responses, and the true conditional mean per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    targets: Vec<f64>,
    true_mean: Vec<f64>,
    pub scenario_tag: ScenarioKind,
}

impl Dataset {
    pub fn from_parts(
        inputs: Vec<f64>,
        dim: usize,
        targets: Vec<f64>,
        true_mean: Vec<f64>,
        scenario_tag: ScenarioKind,
    ) -> Self {
        assert_eq!(inputs.len(), dim * targets.len());
        assert_eq!(targets.len(), true_mean.len());
        Dataset {
            inputs,
            dim,
            targets,
            true_mean,
            scenario_tag,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn true_mean(&self, i: usize) -> f64 {
        self.true_mean[i]
    }

    /// New dataset holding the rows at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        let mut true_mean = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            targets.push(self.targets[i]);
            true_mean.push(self.true_mean[i]);
        }
        Dataset {
            inputs,
            dim: self.dim,
            targets,
            true_mean,
            scenario_tag: self.scenario_tag,
        }
    }
}

/// Lower Cholesky factor of the equicorrelated covariance (unit diagonal,
/// 0.5 off-diagonal).
fn cholesky_equicorrelated(p: usize) -> Vec<f64> {
    let mut a = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            a[i * p + j] = if i == j { 1.0 } else { 0.5 };
        }
    }
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum: f64 = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                l[i * p + j] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    l
}

/// Linear scenario: X ~ N(0, Omega), Y = X'beta + eps.
pub fn gen_linear(n: usize, sigma2: f64, master_seed: u64, replication: u64) -> Dataset {
    assert!(n >= 1);
    let p = LINEAR_DIM;
    let chol = cholesky_equicorrelated(p);
    let mut input_rng = derive_rng(master_seed, replication, 0, StreamRole::DataInputs);
    let mut noise_rng = derive_rng(master_seed, replication, 0, StreamRole::DataNoise);
    let sigma = sigma2.sqrt();
    let mut inputs = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    let mut true_mean = Vec::with_capacity(n);
    let mut z = [0.0f64; LINEAR_DIM];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = input_rng.sample(StandardNormal);
        }
        let mut mean = 0.0;
        for i in 0..p {
            let mut xi = 0.0;
            for j in 0..=i {
                xi += chol[i * p + j] * z[j];
            }
            inputs.push(xi);
            mean += LINEAR_BETA[i] * xi;
        }
        let eps: f64 = noise_rng.sample(StandardNormal);
        targets.push(mean + sigma * eps);
        true_mean.push(mean);
    }
    Dataset::from_parts(inputs, p, targets, true_mean, ScenarioKind::Linear)
}

/// 10 sin(r)/r with the removable singularity at r = 0 evaluated as 10.
pub fn scaled_sinc(r: f64) -> f64 {
    if r < 1e-12 {
        10.0
    } else {
        10.0 * r.sin() / r
    }
}

/// Nonlinear scenario: X uniform(-10, 10)^5, Y = 10 sin(|X|)/|X| + eps.
pub fn gen_nonlinear(n: usize, sigma2: f64, master_seed: u64, replication: u64) -> Dataset {
    assert!(n >= 1);
    let p = LINEAR_DIM;
    let mut input_rng = derive_rng(master_seed, replication, 0, StreamRole::DataInputs);
    let mut noise_rng = derive_rng(master_seed, replication, 0, StreamRole::DataNoise);
    let sigma = sigma2.sqrt();
    let mut inputs = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    let mut true_mean = Vec::with_capacity(n);
    for _ in 0..n {
        let mut norm2: f64 = 0.0;
        for _ in 0..p {
            let x = input_rng.gen_range(-10.0..10.0);
            norm2 += x * x;
            inputs.push(x);
        }
        let mean = scaled_sinc(norm2.sqrt());
        let eps: f64 = noise_rng.sample(StandardNormal);
        targets.push(mean + sigma * eps);
        true_mean.push(mean);
    }
    Dataset::from_parts(inputs, p, targets, true_mean, ScenarioKind::Nonlinear)
}

/// The nonlinear link of the classification scenario.
///
/// On [0,1]^10 the tan argument stays in [0.1, 1.1] and the log argument is
/// bounded below by a positive constant; both are asserted.
pub fn classification_h(x: &[f64]) -> f64 {
    assert_eq!(x.len(), CLASSIFICATION_DIM);
    let t1 = 12.0 * x[0] * (x[1] - 0.5) * (x[1] - 0.5);
    let t2 = -16.0 * (x[2] * (x[4] - 0.2)).powi(4);
    let log_arg = 3.0 - 4.0 * (x[3] - 0.3) * (x[3] - 0.3) + x[4] + (-x[5] * x[6] + x[4]).exp();
    assert!(log_arg > 0.0, "log argument must stay positive on [0,1]^10");
    let t3 = 2.0 * log_arg.ln();
    let tan_arg = 4.0 * (x[0] * (x[7] - 0.5)).powi(2) + 0.1;
    assert!(
        tan_arg < std::f64::consts::FRAC_PI_2,
        "tan argument must stay below pi/2 on [0,1]^10"
    );
    let t4 = 2.0 * tan_arg.tan();
    t1 + t2 + t3 + t4
}

/// Conditional class-1 probability g(x) = 1 / (1 + exp(-(h(x) - mu)^2)).
pub fn classification_g(x: &[f64], mu: f64) -> f64 {
    let d = classification_h(x) - mu;
    1.0 / (1.0 + (-(d * d)).exp())
}

/// Classification scenario: X uniform(0,1)^10, Y ~ Bernoulli(g(X)).
pub fn gen_classification(n: usize, mu: f64, master_seed: u64, replication: u64) -> Dataset {
    assert!(n >= 1);
    let p = CLASSIFICATION_DIM;
    let mut input_rng = derive_rng(master_seed, replication, 0, StreamRole::DataInputs);
    let mut noise_rng = derive_rng(master_seed, replication, 0, StreamRole::DataNoise);
    let mut inputs = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    let mut true_mean = Vec::with_capacity(n);
    let mut x = [0.0f64; CLASSIFICATION_DIM];
    for _ in 0..n {
        for xi in x.iter_mut() {
            *xi = input_rng.gen_range(0.0..1.0);
        }
        inputs.extend_from_slice(&x);
        let g = classification_g(&x, mu);
        let y = if noise_rng.gen::<f64>() < g { 1.0 } else { 0.0 };
        targets.push(y);
        true_mean.push(g);
    }
    Dataset::from_parts(inputs, p, targets, true_mean, ScenarioKind::Classification)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSeriesKind {
    Linear,
    Nonlinear,
}

impl TimeSeriesKind {
    pub fn lags(self) -> usize {
        match self {
            TimeSeriesKind::Linear => 3,
            TimeSeriesKind::Nonlinear => 2,
        }
    }
}

/// A realized series together with its one-step-ahead conditional means.
/// `cond_mean[t]` is NaN for the initial (directly drawn) values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub kind: TimeSeriesKind,
    pub values: Vec<f64>,
    pub cond_mean: Vec<f64>,
}

fn ts_linear_mean(y1: f64, y2: f64, y3: f64) -> f64 {
    0.6 * y1 + 0.3 * y2 - 0.1 * y3
}

fn ts_nonlinear_mean(y1: f64, y2: f64) -> f64 {
    let logistic = 1.0 / (1.0 + (-10.0 * y1).exp());
    0.3 * y1 + 0.6 * y2 + (0.1 - 0.9 * y1 + 0.8 * y2) * logistic
}

/// Generate a series of length `t_len` by the autoregressive recursion;
/// initial values are uniform(-6, 6).
pub fn gen_timeseries(
    kind: TimeSeriesKind,
    t_len: usize,
    sigma2: f64,
    master_seed: u64,
    replication: u64,
) -> Result<TimeSeries> {
    let lags = kind.lags();
    assert!(t_len > lags, "series must extend past its initial values");
    let mut input_rng = derive_rng(master_seed, replication, 0, StreamRole::DataInputs);
    let mut noise_rng = derive_rng(master_seed, replication, 0, StreamRole::DataNoise);
    let sigma = sigma2.sqrt();
    let mut values = Vec::with_capacity(t_len);
    let mut cond_mean = Vec::with_capacity(t_len);
    for _ in 0..lags {
        values.push(input_rng.gen_range(-6.0..6.0));
        cond_mean.push(f64::NAN);
    }
    for t in lags..t_len {
        let mean = match kind {
            TimeSeriesKind::Linear => ts_linear_mean(values[t - 1], values[t - 2], values[t - 3]),
            TimeSeriesKind::Nonlinear => ts_nonlinear_mean(values[t - 1], values[t - 2]),
        };
        let eps: f64 = noise_rng.sample(StandardNormal);
        let y = mean + sigma * eps;
        if !y.is_finite() {
            return Err(Error::NonFinite {
                context: format!("time series value at step {t}"),
            });
        }
        values.push(y);
        cond_mean.push(mean);
    }
    Ok(TimeSeries {
        kind,
        values,
        cond_mean,
    })
}

/// Slide windows of length `p` over the series: sample j has input
/// (y_j, ..., y_{j+p-1}) and target y_{j+p}, giving exactly T - p samples.
pub fn sliding_window(series: &TimeSeries, p: usize) -> Result<Dataset> {
    assert!(p >= 1);
    let t_len = series.values.len();
    if t_len <= p {
        return Err(Error::EmptyWindowSet {
            series_len: t_len,
            window: p,
        });
    }
    let n = t_len - p;
    let mut inputs = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    let mut true_mean = Vec::with_capacity(n);
    for j in 0..n {
        inputs.extend_from_slice(&series.values[j..j + p]);
        targets.push(series.values[j + p]);
        true_mean.push(series.cond_mean[j + p]);
    }
    let tag = match series.kind {
        TimeSeriesKind::Linear => ScenarioKind::TimeSeriesLinear,
        TimeSeriesKind::Nonlinear => ScenarioKind::TimeSeriesNonlinear,
    };
    Ok(Dataset::from_parts(inputs, p, targets, true_mean, tag))
}

/// Monte-Carlo estimates of the paper-unstated constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimates {
    /// var(10 sin|X| / |X|) under uniform(-10,10)^5 inputs.
    pub nonlinear_signal_variance: f64,
    /// Standard error of the variance estimate.
    pub nonlinear_signal_variance_se: f64,
    /// E h(X) under uniform(0,1)^10 inputs.
    pub classification_mu: f64,
    pub classification_mu_se: f64,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

/// Estimate the nonlinear signal variance and the classification centering
/// constant by Monte Carlo; deterministic given `mc_seed`.
pub fn estimate_constants(mc_samples: usize, mc_seed: u64) -> ConstantEstimates {
    assert!(mc_samples >= 100_000);
    let mut rng = derive_rng(mc_seed, 0, 0, StreamRole::MonteCarlo);

    // Nonlinear signal: accumulate moments for the variance and its SE.
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut vals = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let mut norm2: f64 = 0.0;
        for _ in 0..LINEAR_DIM {
            let x: f64 = rng.gen_range(-10.0..10.0);
            norm2 += x * x;
        }
        let s = scaled_sinc(norm2.sqrt());
        sum += s;
        sum2 += s * s;
        vals.push(s);
    }
    let m = mc_samples as f64;
    let mean = sum / m;
    let var = sum2 / m - mean * mean;
    let m4: f64 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
    let var_se = ((m4 - var * var).max(0.0) / m).sqrt();

    // Classification centering constant.
    let mut hsum = 0.0;
    let mut hsum2 = 0.0;
    let mut x = [0.0f64; CLASSIFICATION_DIM];
    for _ in 0..mc_samples {
        for xi in x.iter_mut() {
            *xi = rng.gen_range(0.0..1.0);
        }
        let h = classification_h(&x);
        hsum += h;
        hsum2 += h * h;
    }
    let mu = hsum / m;
    let h_var = hsum2 / m - mu * mu;
    let mu_se = (h_var / m).sqrt();

    ConstantEstimates {
        nonlinear_signal_variance: var,
        nonlinear_signal_variance_se: var_se,
        classification_mu: mu,
        classification_mu_se: mu_se,
        mc_samples,
        mc_seed,
    }
}

/// Noise SD achieving the requested R^2 for a given signal variance.
pub fn sigma_for_r2(signal_variance: f64, r2: f64) -> f64 {
    assert!(r2 > 0.0 && r2 < 1.0);
    (signal_variance * (1.0 - r2) / r2).sqrt()
}
