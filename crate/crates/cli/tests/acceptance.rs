//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Heavy convergence runs share results through OnceLock
//! so the per-replication invariants and the determinism rerun reuse the
//! same records.

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::Rng;

use optsel_cli::config::{default_axes, SuiteConfig};
use optsel_cli::oracle_report::run_gradcheck;
use optsel_cli::suite::{run_suite, SuiteResults};
use optsel_core::datagen::{
    classification_g, estimate_constants, gen_classification, gen_linear, gen_timeseries,
    sliding_window, ScenarioKind, TimeSeriesKind, LINEAR_SIGNAL_VARIANCE,
};
use optsel_core::experiment::GridAxes;
use optsel_core::image::{
    binarize_labels, load_image_set, read_idx_images, read_idx_labels, relabel,
    train_reference_model, write_idx_images, write_idx_labels, IdxImages, ReferenceTrainConfig,
    SourceTag, IMAGE_PIXELS, IMAGE_SIDE,
};
use optsel_core::metrics::{detail_csv, summary_csv, RatioSummary};
use optsel_core::oracles::{
    lemma1_check, random_bounded_rnn_params, rnn_bound_check, LemmaScenario,
};
use optsel_core::seed::{derive_rng, StreamRole};

const MASTER_SEED: u64 = 20260826;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id}: {} - {name} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn suite_config(scenario: ScenarioKind, axes: GridAxes, ns: &[usize], reps: usize) -> SuiteConfig {
    SuiteConfig {
        scenario,
        axes,
        sample_sizes: ns.to_vec(),
        replications: reps,
        master_seed: MASTER_SEED,
        sigma_setting: None,
        epochs: 50,
        output_dir: PathBuf::from("unused"),
        parallelism: None,
        mnist_images_path: None,
        mnist_labels_path: None,
    }
}

fn linear_config() -> SuiteConfig {
    // Pruned Linear grid: LR {0.1, 0.01} x HS {5, 20} x depth {1, 2} x
    // BS 16, sigma^2 = 1 (the default R^2 = 0.75 setting).
    suite_config(
        ScenarioKind::Linear,
        default_axes(ScenarioKind::Linear, false),
        &[50, 200, 1000, 4000],
        10,
    )
}

fn linear_results() -> &'static SuiteResults {
    static CELL: OnceLock<SuiteResults> = OnceLock::new();
    CELL.get_or_init(|| run_suite(&linear_config()).expect("linear suite"))
}

fn rnn_config() -> SuiteConfig {
    suite_config(
        ScenarioKind::TimeSeriesLinear,
        GridAxes::Rnn {
            learning_rate: vec![0.01, 0.001],
            hidden_size: vec![10, 20],
            depth: vec![1],
            window: vec![3, 5],
        },
        &[200, 1000, 4000],
        10,
    )
}

fn rnn_results() -> &'static SuiteResults {
    static CELL: OnceLock<SuiteResults> = OnceLock::new();
    CELL.get_or_init(|| run_suite(&rnn_config()).expect("rnn suite"))
}

/// ratio(n_max) - 1 < factor * (ratio(n_min) - 1) for both estimators,
/// plus the absolute ceiling on the largest-n ratio when requested.
fn trend_ok(summaries: &[RatioSummary], factor: f64, ceiling: Option<f64>) -> (bool, String) {
    let first = summaries.first().expect("summaries");
    let last = summaries.last().expect("summaries");
    let shrink_a = last.ratio_a - 1.0 < factor * (first.ratio_a - 1.0);
    let shrink_b = last.ratio_b - 1.0 < factor * (first.ratio_b - 1.0);
    let ceil_ok = ceiling.is_none_or(|c| last.ratio_a <= c && last.ratio_b <= c);
    let detail = format!(
        "ratio_a {:.4}->{:.4}, ratio_b {:.4}->{:.4}, n {}->{}",
        first.ratio_a, last.ratio_a, first.ratio_b, last.ratio_b, first.n, last.n
    );
    (shrink_a && shrink_b && ceil_ok, detail)
}

#[test]
fn criterion_01_linear_convergence_trend() {
    let results = linear_results();
    let (ok, detail) = trend_ok(&results.summaries, 0.5, Some(1.25));
    report(1, "linear convergence trend", ok, &detail);
}

#[test]
fn criterion_02_nonlinear_and_classification_trends() {
    let nonlinear = run_suite(&suite_config(
        ScenarioKind::Nonlinear,
        default_axes(ScenarioKind::Nonlinear, false),
        &[50, 200, 1000, 4000],
        10,
    ))
    .expect("nonlinear suite");
    let (ok_n, detail_n) = trend_ok(&nonlinear.summaries, 0.5, None);
    let classification = run_suite(&suite_config(
        ScenarioKind::Classification,
        default_axes(ScenarioKind::Classification, false),
        &[50, 200, 1000, 4000],
        10,
    ))
    .expect("classification suite");
    let (ok_c, detail_c) = trend_ok(&classification.summaries, 0.5, None);
    report(
        2,
        "nonlinear and classification trends",
        ok_n && ok_c,
        &format!("nonlinear: {detail_n}; classification: {detail_c}"),
    );
}

#[test]
fn criterion_03_recurrent_convergence_trend() {
    let results = rnn_results();
    let (ok, detail) = trend_ok(&results.summaries, 0.8, None);
    report(3, "recurrent convergence trend", ok, &detail);
}

#[test]
fn criterion_04_per_replication_selection_invariants() {
    let mut checked = 0usize;
    let mut ok = true;
    for results in [linear_results(), rnn_results()] {
        for (_, rec) in &results.records {
            let min_val = rec
                .entries
                .iter()
                .filter(|e| !e.diverged)
                .map(|e| e.validation_loss)
                .fold(f64::INFINITY, f64::min);
            ok &= rec.selected_entry().validation_loss == min_val;
            ok &= rec.selected_entry().oracle_loss / rec.inf_oracle_loss() >= 1.0;
            checked += 1;
        }
    }
    report(
        4,
        "per-replication selection invariants",
        ok,
        &format!("{checked} replications, zero tolerance"),
    );
}

#[test]
fn criterion_05_gradient_oracle_suite() {
    let started = std::time::Instant::now();
    let gc = run_gradcheck(20, 0).expect("gradcheck");
    let elapsed = started.elapsed();
    let worst = gc
        .families
        .iter()
        .map(|f| f.max_rel_err)
        .fold(0.0f64, f64::max);
    report(
        5,
        "gradient oracle suite",
        gc.passed() && elapsed.as_secs() <= 60,
        &format!(
            "worst fd error {:.2e}, closed-form error {:.2e}, {:?}",
            worst, gc.analytic_max_err, elapsed
        ),
    );
}

#[test]
fn criterion_06_generator_oracles() {
    // Variance of X'beta at 1e5 draws.
    let data = gen_linear(100_000, 1.0, MASTER_SEED, 0);
    let n = data.len() as f64;
    let mean: f64 = (0..data.len()).map(|i| data.true_mean(i)).sum::<f64>() / n;
    let var: f64 = (0..data.len())
        .map(|i| (data.true_mean(i) - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let var_ok = (var - LINEAR_SIGNAL_VARIANCE).abs() < 0.1;

    // Classification calibration on the [0.7, 0.8) bucket at 1e5 samples.
    let c = estimate_constants(200_000, 0);
    let cls = gen_classification(100_000, c.classification_mu, MASTER_SEED, 1);
    let (mut hits, mut count, mut gsum) = (0usize, 0usize, 0.0f64);
    for i in 0..cls.len() {
        let g = classification_g(cls.input(i), c.classification_mu);
        if (0.7..0.8).contains(&g) {
            count += 1;
            gsum += g;
            hits += (cls.target(i) == 1.0) as usize;
        }
    }
    let cal_err = (hits as f64 / count as f64 - gsum / count as f64).abs();
    let cal_ok = count > 0 && cal_err <= 0.02;

    // Window counts for 50 random (T, p) pairs.
    let mut rng = derive_rng(MASTER_SEED, 0, 0, StreamRole::MonteCarlo);
    let mut windows_ok = true;
    for _ in 0..50 {
        let p = rng.gen_range(1..=10usize);
        // The linear recursion needs more than 3 seed values.
        let t = (p + rng.gen_range(1..=200usize)).max(4);
        let ts = gen_timeseries(TimeSeriesKind::Linear, t, 1.0, MASTER_SEED, 2).unwrap();
        windows_ok &= sliding_window(&ts, p).unwrap().len() == t - p;
    }
    report(
        6,
        "generator oracles",
        var_ok && cal_ok && windows_ok,
        &format!(
            "var(X'beta) {var:.4}, calibration gap {cal_err:.4} over {count} samples, 50 window counts exact: {windows_ok}"
        ),
    );
}

#[test]
fn criterion_07_recurrent_derivative_bounds() {
    let mut violations = 0usize;
    for i in 0..1000u64 {
        let mut rng = derive_rng(MASTER_SEED, i, 7, StreamRole::Init);
        let window = rng.gen_range(2..=6usize);
        let state = rng.gen_range(2..=6usize);
        let params = random_bounded_rnn_params(window, state, &mut rng);
        let input: Vec<f64> = (0..window).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rep = rnn_bound_check(&input, state, &params).unwrap();
        violations += rep.violations.len();
    }
    report(
        7,
        "recurrent derivative bounds",
        violations == 0,
        &format!("{violations} violations over 1000 instances"),
    );
}

#[test]
fn criterion_08_perturbed_argmin_rate() {
    let n_values = [100usize, 1_000, 10_000, 100_000];
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    for s in 0..10u64 {
        let scenario = LemmaScenario::random(12, 0.5, s);
        let rep = lemma1_check(&scenario, &n_values).unwrap();
        for p in &rep.points {
            ok &= p.ratio >= 1.0;
            ok &= p.ratio - 1.0 <= rep.bound_constant * LemmaScenario::eta(p.n);
        }
        worst_margin = worst_margin.min(rep.bound_constant - rep.empirical_constant);
    }
    report(
        8,
        "perturbed-argmin rate bound",
        ok,
        &format!("10 scenarios, smallest constant margin {worst_margin:.4}"),
    );
}

#[test]
fn criterion_09_image_pipeline() {
    // Always-on part: bit-exact IDX round trip on crafted fixtures.
    let dir = tempfile::tempdir().unwrap();
    let mut rng = derive_rng(MASTER_SEED, 0, 9, StreamRole::MonteCarlo);
    let images = IdxImages {
        count: 5,
        rows: IMAGE_SIDE,
        cols: IMAGE_SIDE,
        data: (0..5 * IMAGE_PIXELS).map(|_| rng.gen()).collect(),
    };
    let labels: Vec<u8> = (0..5).map(|_| rng.gen_range(0..10)).collect();
    let img_path = dir.path().join("img");
    let lbl_path = dir.path().join("lbl");
    write_idx_images(&img_path, &images).unwrap();
    write_idx_labels(&lbl_path, &labels).unwrap();
    let round = read_idx_images(&img_path).unwrap();
    let idx_ok = round.data == images.data && read_idx_labels(&lbl_path).unwrap() == labels;

    let images_env = std::env::var("OPTSEL_MNIST_IMAGES_PATH").ok();
    let labels_env = std::env::var("OPTSEL_MNIST_LABELS_PATH").ok();
    let (Some(images_path), Some(labels_path)) = (images_env, labels_env) else {
        report(
            9,
            "image pipeline",
            idx_ok,
            "IDX round trip bit-exact; dataset-dependent checks SKIPPED: set \
             OPTSEL_MNIST_IMAGES_PATH and OPTSEL_MNIST_LABELS_PATH to run them",
        );
        return;
    };

    // Dataset-backed part: deterministic reference model, relabel
    // calibration, and the CNN convergence trend.
    let set = load_image_set(
        images_path.as_ref(),
        labels_path.as_ref(),
        SourceTag::Mnist,
    )
    .expect("image set");
    let binary = binarize_labels(&set);
    let cfg = ReferenceTrainConfig {
        seed: MASTER_SEED,
        ..ReferenceTrainConfig::default()
    };
    let m1 = train_reference_model(&set, &binary, &cfg).unwrap();
    let m2 = train_reference_model(&set, &binary, &cfg).unwrap();
    let deterministic = m1.net().params() == m2.net().params();

    let relabeled = relabel(&set, &m1, MASTER_SEED);
    // Bucket empirical label frequency against mean F(X) per decile with
    // at least 5000 images.
    let mut cal_ok = true;
    for lo in 0..10 {
        let (mut hits, mut count, mut fsum) = (0usize, 0usize, 0.0f64);
        for i in 0..relabeled.len() {
            let f = relabeled.true_mean(i);
            if f >= lo as f64 / 10.0 && f < (lo + 1) as f64 / 10.0 {
                count += 1;
                fsum += f;
                hits += (relabeled.target(i) == 1.0) as usize;
            }
        }
        if count >= 5000 {
            cal_ok &= (hits as f64 / count as f64 - fsum / count as f64).abs() <= 0.03;
        }
    }

    let mut cnn_cfg = suite_config(
        ScenarioKind::Image,
        default_axes(ScenarioKind::Image, false),
        &[200, 1000, 4000],
        10,
    );
    cnn_cfg.mnist_images_path = Some(images_path.into());
    cnn_cfg.mnist_labels_path = Some(labels_path.into());
    let results = run_suite(&cnn_cfg).expect("image suite");
    let (trend, detail) = trend_ok(&results.summaries, 0.8, None);
    report(
        9,
        "image pipeline",
        idx_ok && deterministic && cal_ok && trend,
        &format!(
            "idx {idx_ok}, deterministic {deterministic}, calibration {cal_ok}, {detail}"
        ),
    );
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let first = linear_results();
    let rerun = run_suite(&linear_config()).expect("linear rerun");
    let to_rows = |r: &SuiteResults| {
        r.records
            .iter()
            .map(|(n, rec)| (ScenarioKind::Linear, *n, rec.clone()))
            .collect::<Vec<_>>()
    };
    let rows_a = to_rows(first);
    let rows_b = to_rows(&rerun);
    let refs_a: Vec<_> = rows_a.iter().map(|(s, n, r)| (*s, *n, r)).collect();
    let refs_b: Vec<_> = rows_b.iter().map(|(s, n, r)| (*s, *n, r)).collect();
    let detail_same = detail_csv(&refs_a) == detail_csv(&refs_b);
    let summary_same = summary_csv(&first.summaries) == summary_csv(&rerun.summaries);
    report(
        10,
        "end-to-end determinism",
        detail_same && summary_same,
        &format!("detail identical {detail_same}, summary identical {summary_same}"),
    );
}
