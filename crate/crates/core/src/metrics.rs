//! Oracle loss, ratio estimators, and CSV persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datagen::{Dataset, ScenarioKind};
use crate::error::{Error, Result};
use crate::experiment::ReplicationRecord;
use crate::nn::Network;

/// Replications with an infimum oracle loss below this are excluded from the
/// ratio estimators (and counted) to keep float noise floors out of the
/// denominators.
pub const DEGENERATE_INF_FLOOR: f64 = 1e-12;

/// Mean squared deviation of the network output from the true conditional
/// mean over the test set.
pub fn compute_l0(network: &Network, test_set: &Dataset) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            available: 0,
        });
    }
    let mut acc = 0.0;
    for i in 0..test_set.len() {
        let m = test_set.true_mean(i);
        if !m.is_finite() {
            return Err(Error::MissingTrueMean);
        }
        let d = network.forward(test_set.input(i))? - m;
        acc += d * d;
    }
    Ok(acc / test_set.len() as f64)
}

/// Aggregated ratio estimators for one (scenario, n) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub replications: usize,
    /// Mean over replications of L0(selected) / inf L0.
    pub ratio_a: f64,
    pub ratio_a_se: f64,
    /// Mean L0(selected) divided by mean inf L0.
    pub ratio_b: f64,
    /// Jackknife-over-replications standard error.
    pub ratio_b_se: f64,
    pub mean_selected_loss: f64,
    pub mean_inf_loss: f64,
    pub diverged_count: usize,
    /// Replications dropped for a degenerate infimum.
    pub excluded_count: usize,
}

/// Compute both ratio estimators over a set of replication records.
pub fn aggregate_ratios(
    scenario: ScenarioKind,
    n: usize,
    records: &[ReplicationRecord],
) -> Result<RatioSummary> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to aggregate".into()));
    }
    let mut selected = Vec::new();
    let mut infimum = Vec::new();
    let mut diverged_count = 0;
    let mut excluded_count = 0;
    for r in records {
        diverged_count += r.entries.iter().filter(|e| e.diverged).count();
        let inf = r.inf_oracle_loss();
        if inf < DEGENERATE_INF_FLOOR {
            excluded_count += 1;
            continue;
        }
        selected.push(r.selected_entry().oracle_loss);
        infimum.push(inf);
    }
    if selected.is_empty() {
        return Err(Error::InvalidConfig(
            "every replication had a degenerate infimum".into(),
        ));
    }
    let m = selected.len() as f64;
    let per_rep: Vec<f64> = selected
        .iter()
        .zip(&infimum)
        .map(|(s, i)| s / i)
        .collect();
    let ratio_a = per_rep.iter().sum::<f64>() / m;
    let ratio_a_se = if per_rep.len() > 1 {
        let var = per_rep.iter().map(|r| (r - ratio_a).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    let mean_selected = selected.iter().sum::<f64>() / m;
    let mean_inf = infimum.iter().sum::<f64>() / m;
    let ratio_b = mean_selected / mean_inf;
    let ratio_b_se = if selected.len() > 1 {
        // Jackknife: leave one replication out of both averages.
        let sum_s: f64 = selected.iter().sum();
        let sum_i: f64 = infimum.iter().sum();
        let jack: Vec<f64> = selected
            .iter()
            .zip(&infimum)
            .map(|(s, i)| (sum_s - s) / (sum_i - i))
            .collect();
        let jack_mean = jack.iter().sum::<f64>() / m;
        let var = jack.iter().map(|j| (j - jack_mean).powi(2)).sum::<f64>() * (m - 1.0) / m;
        var.sqrt()
    } else {
        0.0
    };
    Ok(RatioSummary {
        scenario,
        n,
        replications: records.len(),
        ratio_a,
        ratio_a_se,
        ratio_b,
        ratio_b_se,
        mean_selected_loss: mean_selected,
        mean_inf_loss: mean_inf,
        diverged_count,
        excluded_count,
    })
}

pub fn scenario_name(s: ScenarioKind) -> &'static str {
    match s {
        ScenarioKind::Linear => "linear",
        ScenarioKind::Nonlinear => "nonlinear",
        ScenarioKind::Classification => "classification",
        ScenarioKind::TimeSeriesLinear => "ts_linear",
        ScenarioKind::TimeSeriesNonlinear => "ts_nonlinear",
        ScenarioKind::Image => "image",
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub const DETAIL_HEADER: &str = "scenario,n,replication,grid_index,val_loss,l0,diverged";
pub const SUMMARY_HEADER: &str = "scenario,n,reps,ratio_a,ratio_a_se,ratio_b,ratio_b_se,mean_selected_loss,mean_inf_loss,excluded_count";

/// Render the per-(replication, lambda) detail CSV.
pub fn detail_csv(rows: &[(ScenarioKind, usize, &ReplicationRecord)]) -> String {
    let mut out = String::from(DETAIL_HEADER);
    out.push('\n');
    for (scenario, n, rec) in rows {
        for e in &rec.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                scenario_name(*scenario),
                n,
                rec.replication_id,
                e.grid_index,
                fmt_real(e.validation_loss),
                fmt_real(e.oracle_loss),
                e.diverged
            );
        }
    }
    out
}

/// Render the per-(scenario, n) summary CSV.
pub fn summary_csv(summaries: &[RatioSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            scenario_name(s.scenario),
            s.n,
            s.replications,
            fmt_real(s.ratio_a),
            fmt_real(s.ratio_a_se),
            fmt_real(s.ratio_b),
            fmt_real(s.ratio_b_se),
            fmt_real(s.mean_selected_loss),
            fmt_real(s.mean_inf_loss),
            s.excluded_count
        );
    }
    out
}

/// Write detail and summary CSVs plus a metadata file; overwrites existing
/// files.
pub fn write_records(
    rows: &[(ScenarioKind, usize, &ReplicationRecord)],
    summaries: &[RatioSummary],
    metadata: &str,
    output_dir: &Path,
) -> Result<()> {
    let io_err = |path: &Path, source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(output_dir).map_err(|e| io_err(output_dir, e))?;
    let detail_path = output_dir.join("detail.csv");
    fs::write(&detail_path, detail_csv(rows)).map_err(|e| io_err(&detail_path, e))?;
    let summary_path = output_dir.join("summary.csv");
    fs::write(&summary_path, summary_csv(summaries)).map_err(|e| io_err(&summary_path, e))?;
    let meta_path = output_dir.join("metadata.txt");
    fs::write(&meta_path, metadata).map_err(|e| io_err(&meta_path, e))?;
    Ok(())
}
