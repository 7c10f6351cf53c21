//! Suite configuration: TOML parsing, validation, and grid resolution.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use optsel_core::datagen::ScenarioKind;
use optsel_core::experiment::GridAxes;

/// Environment variable that overrides `output_dir` from the config file.
pub const OUTPUT_DIR_ENV: &str = "OPTSEL_OUTPUT_DIR";

/// Raw config file shape. Unknown keys are rejected at parse time.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    sample_sizes: Vec<usize>,
    replications: usize,
    master_seed: u64,
    sigma_setting: Option<f64>,
    epochs: Option<usize>,
    output_dir: Option<String>,
    parallelism: Option<usize>,
    full_grid: Option<bool>,
    mnist_images_path: Option<String>,
    mnist_labels_path: Option<String>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    learning_rate: Option<Vec<f64>>,
    hidden_size: Option<Vec<usize>>,
    depth: Option<Vec<usize>>,
    batch_size: Option<Vec<usize>>,
    window: Option<Vec<usize>>,
    /// (conv kernel, output channels) pairs for the image scenario.
    conv: Option<Vec<[usize; 2]>>,
    pool_kernel: Option<Vec<usize>>,
    pool_stride: Option<Vec<usize>>,
}

/// Fully validated suite configuration.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub scenario: ScenarioKind,
    pub axes: GridAxes,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// R² target for the regression scenarios, noise variance for the
    /// time-series scenarios; `None` means the scenario default.
    pub sigma_setting: Option<f64>,
    pub epochs: usize,
    pub output_dir: PathBuf,
    pub parallelism: Option<usize>,
    pub mnist_images_path: Option<PathBuf>,
    pub mnist_labels_path: Option<PathBuf>,
}

/// A config rejection: every offending key with its complaint.
#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Invalid(errs) => {
                let mut out = String::from("invalid config:");
                for e in errs {
                    let _ = write!(out, "\n  - {e}");
                }
                f.write_str(&out)
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn scenario_from_name(name: &str) -> Option<ScenarioKind> {
    Some(match name {
        "linear" => ScenarioKind::Linear,
        "nonlinear" => ScenarioKind::Nonlinear,
        "classification" => ScenarioKind::Classification,
        "ts_linear" => ScenarioKind::TimeSeriesLinear,
        "ts_nonlinear" => ScenarioKind::TimeSeriesNonlinear,
        "image" => ScenarioKind::Image,
        _ => return None,
    })
}

/// Default pruned grid (fast, CI-sized) or the full published grid.
pub fn default_axes(scenario: ScenarioKind, full: bool) -> GridAxes {
    match scenario {
        ScenarioKind::Linear => {
            if full {
                GridAxes::Mlp {
                    learning_rate: vec![0.1, 0.01, 0.001],
                    hidden_size: vec![5, 10, 20],
                    depth: vec![1, 2],
                    batch_size: vec![8, 16, 32],
                }
            } else {
                GridAxes::Mlp {
                    learning_rate: vec![0.1, 0.01],
                    hidden_size: vec![5, 20],
                    depth: vec![1, 2],
                    batch_size: vec![16],
                }
            }
        }
        ScenarioKind::Nonlinear => {
            if full {
                GridAxes::Mlp {
                    learning_rate: vec![0.01, 0.001],
                    hidden_size: vec![50, 100],
                    depth: vec![1, 2, 3],
                    batch_size: vec![16, 32, 64],
                }
            } else {
                GridAxes::Mlp {
                    learning_rate: vec![0.01, 0.001],
                    hidden_size: vec![10, 50],
                    depth: vec![1, 2],
                    batch_size: vec![32],
                }
            }
        }
        ScenarioKind::Classification => {
            if full {
                GridAxes::Mlp {
                    learning_rate: vec![0.001, 0.0001],
                    hidden_size: vec![50, 100],
                    depth: vec![1, 3, 5],
                    batch_size: vec![16, 32, 128],
                }
            } else {
                GridAxes::Mlp {
                    learning_rate: vec![0.001, 0.0001],
                    hidden_size: vec![10, 50],
                    depth: vec![1, 3],
                    batch_size: vec![32],
                }
            }
        }
        ScenarioKind::TimeSeriesLinear | ScenarioKind::TimeSeriesNonlinear => {
            if full {
                GridAxes::Rnn {
                    learning_rate: vec![0.01, 0.001],
                    hidden_size: vec![50, 100],
                    depth: vec![1, 2],
                    window: vec![3, 4, 5, 6],
                }
            } else {
                GridAxes::Rnn {
                    learning_rate: vec![0.01, 0.001],
                    hidden_size: vec![10, 20],
                    depth: vec![1],
                    window: vec![3, 5],
                }
            }
        }
        ScenarioKind::Image => {
            if full {
                GridAxes::Cnn {
                    conv: vec![
                        (3, 4),
                        (3, 8),
                        (3, 16),
                        (5, 4),
                        (5, 8),
                        (5, 16),
                        (7, 4),
                        (7, 8),
                    ],
                    pool_kernel: vec![2, 3],
                    pool_stride: vec![1, 2],
                }
            } else {
                GridAxes::Cnn {
                    conv: vec![(3, 4), (3, 16), (5, 4), (5, 16)],
                    pool_kernel: vec![2, 3],
                    pool_stride: vec![2],
                }
            }
        }
    }
}

fn merge_grid(
    scenario: ScenarioKind,
    raw: &RawGrid,
    errors: &mut Vec<String>,
) -> GridAxes {
    let base = default_axes(scenario, false);
    let unused = |name: &str, set: bool, errors: &mut Vec<String>| {
        if set {
            errors.push(format!(
                "grid.{name}: axis does not apply to scenario '{}'",
                optsel_core::metrics::scenario_name(scenario)
            ));
        }
    };
    let nonempty_f = |name: &str, v: &Option<Vec<f64>>, d: Vec<f64>, errors: &mut Vec<String>| {
        match v {
            Some(vals) if vals.is_empty() => {
                errors.push(format!("grid.{name}: axis must be non-empty"));
                d
            }
            Some(vals) => vals.clone(),
            None => d,
        }
    };
    let nonempty_u =
        |name: &str, v: &Option<Vec<usize>>, d: Vec<usize>, errors: &mut Vec<String>| match v {
            Some(vals) if vals.is_empty() => {
                errors.push(format!("grid.{name}: axis must be non-empty"));
                d
            }
            Some(vals) => vals.clone(),
            None => d,
        };
    match base {
        GridAxes::Mlp {
            learning_rate,
            hidden_size,
            depth,
            batch_size,
        } => {
            unused("window", raw.window.is_some(), errors);
            unused("conv", raw.conv.is_some(), errors);
            unused("pool_kernel", raw.pool_kernel.is_some(), errors);
            unused("pool_stride", raw.pool_stride.is_some(), errors);
            GridAxes::Mlp {
                learning_rate: nonempty_f("learning_rate", &raw.learning_rate, learning_rate, errors),
                hidden_size: nonempty_u("hidden_size", &raw.hidden_size, hidden_size, errors),
                depth: nonempty_u("depth", &raw.depth, depth, errors),
                batch_size: nonempty_u("batch_size", &raw.batch_size, batch_size, errors),
            }
        }
        GridAxes::Rnn {
            learning_rate,
            hidden_size,
            depth,
            window,
        } => {
            unused("batch_size", raw.batch_size.is_some(), errors);
            unused("conv", raw.conv.is_some(), errors);
            unused("pool_kernel", raw.pool_kernel.is_some(), errors);
            unused("pool_stride", raw.pool_stride.is_some(), errors);
            GridAxes::Rnn {
                learning_rate: nonempty_f("learning_rate", &raw.learning_rate, learning_rate, errors),
                hidden_size: nonempty_u("hidden_size", &raw.hidden_size, hidden_size, errors),
                depth: nonempty_u("depth", &raw.depth, depth, errors),
                window: nonempty_u("window", &raw.window, window, errors),
            }
        }
        GridAxes::Cnn {
            conv,
            pool_kernel,
            pool_stride,
        } => {
            unused("learning_rate", raw.learning_rate.is_some(), errors);
            unused("hidden_size", raw.hidden_size.is_some(), errors);
            unused("depth", raw.depth.is_some(), errors);
            unused("batch_size", raw.batch_size.is_some(), errors);
            unused("window", raw.window.is_some(), errors);
            let conv = match &raw.conv {
                Some(pairs) if pairs.is_empty() => {
                    errors.push("grid.conv: axis must be non-empty".into());
                    conv
                }
                Some(pairs) => pairs.iter().map(|p| (p[0], p[1])).collect(),
                None => conv,
            };
            GridAxes::Cnn {
                conv,
                pool_kernel: nonempty_u("pool_kernel", &raw.pool_kernel, pool_kernel, errors),
                pool_stride: nonempty_u("pool_stride", &raw.pool_stride, pool_stride, errors),
            }
        }
    }
}

/// Parse and validate a config file's text. Every offending key is reported.
pub fn parse_config(text: &str) -> Result<SuiteConfig, ConfigError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut errors = Vec::new();

    let scenario = match scenario_from_name(&raw.scenario) {
        Some(s) => s,
        None => {
            errors.push(format!(
                "scenario: unknown value '{}' (expected linear, nonlinear, classification, ts_linear, ts_nonlinear, or image)",
                raw.scenario
            ));
            ScenarioKind::Linear
        }
    };

    if raw.sample_sizes.is_empty() {
        errors.push("sample_sizes: must list at least one n".into());
    }
    if raw.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
        errors.push("sample_sizes: must be strictly increasing".into());
    }
    if raw.sample_sizes.iter().any(|&n| n == 0) {
        errors.push("sample_sizes: every n must be at least 1".into());
    }
    if raw.replications == 0 {
        errors.push("replications: must be at least 1".into());
    }
    if raw.epochs == Some(0) {
        errors.push("epochs: must be at least 1".into());
    }
    if raw.parallelism == Some(0) {
        errors.push("parallelism: must be at least 1".into());
    }
    if let Some(s) = raw.sigma_setting {
        match scenario {
            ScenarioKind::Linear | ScenarioKind::Nonlinear => {
                if !(s > 0.0 && s < 1.0) {
                    errors.push(
                        "sigma_setting: R-squared target must lie strictly in (0, 1)".into(),
                    );
                }
            }
            ScenarioKind::TimeSeriesLinear | ScenarioKind::TimeSeriesNonlinear => {
                if !(s > 0.0 && s.is_finite()) {
                    errors.push("sigma_setting: noise variance must be positive".into());
                }
            }
            ScenarioKind::Classification | ScenarioKind::Image => {
                errors.push("sigma_setting: not applicable to this scenario".into());
            }
        }
    }

    if raw.full_grid == Some(true) && raw.grid.is_some() {
        errors.push("full_grid: cannot combine with an explicit [grid] table".into());
    }
    let axes = if let Some(g) = &raw.grid {
        merge_grid(scenario, g, &mut errors)
    } else {
        default_axes(scenario, raw.full_grid == Some(true))
    };

    let path_check = |key: &str, v: &Option<String>, errors: &mut Vec<String>| -> Option<PathBuf> {
        match v {
            Some(p) => {
                let pb = PathBuf::from(p);
                if !pb.exists() {
                    errors.push(format!("{key}: path '{p}' does not exist"));
                }
                Some(pb)
            }
            None => {
                if scenario == ScenarioKind::Image {
                    errors.push(format!("{key}: required for the image scenario"));
                }
                None
            }
        }
    };
    let mnist_images_path = path_check("mnist_images_path", &raw.mnist_images_path, &mut errors);
    let mnist_labels_path = path_check("mnist_labels_path", &raw.mnist_labels_path, &mut errors);

    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }

    let output_dir = std::env::var(OUTPUT_DIR_ENV)
        .ok()
        .filter(|v| !v.is_empty())
        .or(raw.output_dir)
        .unwrap_or_else(|| "results".into());

    Ok(SuiteConfig {
        scenario,
        axes,
        sample_sizes: raw.sample_sizes,
        replications: raw.replications,
        master_seed: raw.master_seed,
        sigma_setting: raw.sigma_setting,
        epochs: raw.epochs.unwrap_or(50),
        output_dir: PathBuf::from(output_dir),
        parallelism: raw.parallelism,
        mnist_images_path,
        mnist_labels_path,
    })
}

/// Read and parse a config file from disk.
pub fn load_config(path: &Path) -> Result<SuiteConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
