//! Suite orchestration: constants, data pools, the (n, replication) sweep,
//! aggregation, and artifact emission.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use optsel_core::datagen::{
    estimate_constants, sigma_for_r2, Dataset, ScenarioKind, LINEAR_SIGNAL_VARIANCE,
};
use optsel_core::experiment::{
    expand_grid, run_replication, GridSpec, ReplicationRecord, ScenarioConfig, SplitSpec,
};
use optsel_core::image::{
    binarize_labels, load_image_set, relabel, train_reference_model, ReferenceTrainConfig,
    SourceTag,
};
use optsel_core::metrics::{aggregate_ratios, scenario_name, write_records, RatioSummary};
use optsel_core::{Error, Result};

use crate::config::SuiteConfig;

/// Monte Carlo budget for scenario constants resolved at suite startup.
const CONSTANT_MC_SAMPLES: usize = 200_000;
const CONSTANT_MC_SEED: u64 = 0;

/// In-memory results of one suite run, in canonical (n, replication) order.
pub struct SuiteResults {
    pub scenario: ScenarioKind,
    pub records: Vec<(usize, ReplicationRecord)>,
    pub summaries: Vec<RatioSummary>,
    /// Constants block echoed into metadata (empty if none were needed).
    pub constants_note: String,
}

fn resolve_scenario(cfg: &SuiteConfig) -> (ScenarioConfig, String) {
    let mut note = String::new();
    let (sigma2, mu) = match cfg.scenario {
        ScenarioKind::Linear => {
            let r2 = cfg.sigma_setting.unwrap_or(0.75);
            (sigma_for_r2(LINEAR_SIGNAL_VARIANCE, r2).powi(2), None)
        }
        ScenarioKind::Nonlinear => {
            let c = estimate_constants(CONSTANT_MC_SAMPLES, CONSTANT_MC_SEED);
            let _ = writeln!(
                note,
                "nonlinear_signal_variance: {} (se {}, {} samples, seed {})",
                c.nonlinear_signal_variance,
                c.nonlinear_signal_variance_se,
                c.mc_samples,
                c.mc_seed
            );
            let r2 = cfg.sigma_setting.unwrap_or(0.75);
            (sigma_for_r2(c.nonlinear_signal_variance, r2).powi(2), None)
        }
        ScenarioKind::Classification => {
            let c = estimate_constants(CONSTANT_MC_SAMPLES, CONSTANT_MC_SEED);
            let _ = writeln!(
                note,
                "classification_mu: {} (se {}, {} samples, seed {})",
                c.classification_mu, c.classification_mu_se, c.mc_samples, c.mc_seed
            );
            (0.0, Some(c.classification_mu))
        }
        ScenarioKind::TimeSeriesLinear | ScenarioKind::TimeSeriesNonlinear => {
            (cfg.sigma_setting.unwrap_or(1.0), None)
        }
        ScenarioKind::Image => (0.0, None),
    };
    (
        ScenarioConfig {
            kind: cfg.scenario,
            sigma2,
            mu,
            epochs: cfg.epochs,
        },
        note,
    )
}

/// Build the relabeled image pool for the image scenario: load the IDX
/// files, train the frozen reference model, and regenerate labels from it.
fn build_image_pool(cfg: &SuiteConfig, note: &mut String) -> Result<Dataset> {
    let images = cfg.mnist_images_path.as_ref().expect("validated");
    let labels = cfg.mnist_labels_path.as_ref().expect("validated");
    let set = load_image_set(images, labels, SourceTag::Mnist)?;
    let needed = cfg
        .sample_sizes
        .iter()
        .map(|&n| SplitSpec::from_n(n).total())
        .max()
        .unwrap_or(1);
    if set.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: set.len(),
        });
    }
    let binary = binarize_labels(&set);
    let ref_cfg = ReferenceTrainConfig {
        seed: cfg.master_seed,
        ..ReferenceTrainConfig::default()
    };
    let model = train_reference_model(&set, &binary, &ref_cfg)?;
    let _ = writeln!(
        note,
        "reference_model: epochs {}, seed {}, train_accuracy {}",
        model.epochs, model.seed, model.train_accuracy
    );
    Ok(relabel(&set, &model, cfg.master_seed))
}

/// Execute every (n, replication) cell and aggregate per sample size.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResults> {
    let (scenario, mut constants_note) = resolve_scenario(cfg);
    let grid = GridSpec {
        scenario: cfg.scenario,
        axes: cfg.axes.clone(),
        epochs: cfg.epochs,
    };
    // Fail fast on a malformed grid before any training starts.
    expand_grid(&grid)?;
    let image_pool = if cfg.scenario == ScenarioKind::Image {
        Some(build_image_pool(cfg, &mut constants_note)?)
    } else {
        None
    };

    let cells: Vec<(usize, u64)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications as u64).map(move |r| (n, r)))
        .collect();
    let run_cells = || -> Result<Vec<(usize, ReplicationRecord)>> {
        cells
            .par_iter()
            .map(|&(n, rep)| {
                run_replication(
                    &scenario,
                    &grid,
                    n,
                    cfg.master_seed,
                    rep,
                    image_pool.as_ref(),
                )
                .map(|rec| (n, rec))
            })
            .collect()
    };
    // An explicit parallelism cap runs the sweep inside a dedicated pool;
    // results are collected in canonical order either way.
    let records = match cfg.parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run_cells),
        None => run_cells(),
    }?;

    let mut summaries = Vec::with_capacity(cfg.sample_sizes.len());
    for &n in &cfg.sample_sizes {
        let cell: Vec<ReplicationRecord> = records
            .iter()
            .filter(|(rn, _)| *rn == n)
            .map(|(_, r)| r.clone())
            .collect();
        summaries.push(aggregate_ratios(cfg.scenario, n, &cell)?);
    }
    Ok(SuiteResults {
        scenario: cfg.scenario,
        records,
        summaries,
        constants_note,
    })
}

/// Everything below the first (timestamp) line is a pure function of the
/// config, so reruns differ only in that line.
pub fn metadata_text(cfg: &SuiteConfig, results: &SuiteResults) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "timestamp_unix: {stamp}");
    let _ = writeln!(out, "scenario: {}", scenario_name(cfg.scenario));
    let _ = writeln!(
        out,
        "sample_sizes: {}",
        cfg.sample_sizes
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(out, "replications: {}", cfg.replications);
    let _ = writeln!(out, "master_seed: {}", cfg.master_seed);
    if let Some(s) = cfg.sigma_setting {
        let _ = writeln!(out, "sigma_setting: {s}");
    }
    let _ = writeln!(out, "epochs: {}", cfg.epochs);
    let _ = writeln!(out, "grid: {:?}", cfg.axes);
    out.push_str(&results.constants_note);
    out
}

/// Write detail/summary CSVs and the metadata file into the output dir.
pub fn write_suite_outputs(cfg: &SuiteConfig, results: &SuiteResults) -> Result<()> {
    let rows: Vec<(ScenarioKind, usize, &ReplicationRecord)> = results
        .records
        .iter()
        .map(|(n, rec)| (results.scenario, *n, rec))
        .collect();
    write_records(
        &rows,
        &results.summaries,
        &metadata_text(cfg, results),
        &cfg.output_dir,
    )
}
