//! Front door to the verification oracles: constants estimation, gradient
//! checking, and the perturbed-argmin lemma suite. Each run produces a
//! human-readable text report and a machine-readable JSON body.

use std::fmt::Write as _;

use rand::Rng;

use optsel_core::datagen::estimate_constants;
use optsel_core::nn::stack::{Layer, StackNet};
use optsel_core::nn::{Activation, ArchSpec, Network, OutputHead};
use optsel_core::oracles::{
    finite_diff_grad, lemma1_check, max_relative_error, mlp_analytic_grad, LemmaScenario,
};
use optsel_core::seed::{derive_rng, StreamRole};
use optsel_core::Result;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
pub const ANALYTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub passed: bool,
    pub text: String,
    pub json: String,
}

/// Worst finite-difference agreement over a batch of random instances.
#[derive(Debug, Clone)]
pub struct FamilyCheck {
    pub family: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub families: Vec<FamilyCheck>,
    /// Backprop vs the closed-form single-hidden-layer gradient.
    pub analytic_max_err: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.max_rel_err < FD_TOLERANCE)
            && self.analytic_max_err < ANALYTIC_TOLERANCE
    }
}

fn network_output_fd(net: &Network, input: &[f64]) -> Result<f64> {
    let backprop = net.output_gradient(input)?;
    let mut probe = net.clone();
    let fd = finite_diff_grad(
        |params: &[f64]| {
            probe.params_mut().copy_from_slice(params);
            probe.forward(input).unwrap()
        },
        net.params(),
        FD_STEP,
    )?;
    Ok(max_relative_error(&backprop, &fd))
}

fn stack_output_fd(net: &StackNet, input: &[f64]) -> Result<f64> {
    let trace = net.forward_trace::<rand_chacha::ChaCha8Rng>(input, None)?;
    let mut backprop = vec![0.0; net.params().len()];
    net.backward(&trace, &[1.0], 1.0, &mut backprop);
    let mut probe = net.clone();
    let fd = finite_diff_grad(
        |params: &[f64]| {
            probe.params_mut().copy_from_slice(params);
            probe.forward(input).unwrap()
        },
        net.params(),
        FD_STEP,
    )?;
    Ok(max_relative_error(&backprop, &fd))
}

fn random_input<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn mlp_instances(count: usize, seed: u64) -> Result<(f64, f64)> {
    let mut max_fd: f64 = 0.0;
    let mut max_analytic: f64 = 0.0;
    for i in 0..count as u64 {
        let mut rng = derive_rng(seed, i, 0, StreamRole::Init);
        let dim = rng.gen_range(2..=4usize);
        let hidden = rng.gen_range(2..=4usize);
        let depth = rng.gen_range(1..=2usize);
        let arch = ArchSpec::mlp(dim, hidden, depth, Activation::Sigmoid, OutputHead::Linear)?;
        let net = Network::init(arch, &mut rng)?;
        debug_assert!(net.param_count() <= 50);
        let x = random_input(dim, &mut rng);
        max_fd = max_fd.max(network_output_fd(&net, &x)?);
        if depth == 1 {
            let analytic = mlp_analytic_grad(&x, net.params(), hidden)?;
            let backprop = net.output_gradient(&x)?;
            max_analytic = max_analytic.max(max_relative_error(&backprop, &analytic));
        }
    }
    // Make sure the closed-form comparison always runs at least once.
    let mut rng = derive_rng(seed, count as u64, 1, StreamRole::Init);
    let arch = ArchSpec::mlp(3, 4, 1, Activation::Sigmoid, OutputHead::Linear)?;
    let net = Network::init(arch, &mut rng)?;
    let x = random_input(3, &mut rng);
    let analytic = mlp_analytic_grad(&x, net.params(), 4)?;
    let backprop = net.output_gradient(&x)?;
    max_analytic = max_analytic.max(max_relative_error(&backprop, &analytic));
    Ok((max_fd, max_analytic))
}

/// A small convolutional stack (well under 500 parameters) exercising the
/// conv, pooling, dense, and activation backward paths together.
pub fn small_cnn_stack(side: usize, channels: usize, hidden: usize) -> StackNet {
    let conv_out = side - 2;
    let pool_out = (conv_out - 2) / 2 + 1;
    let layers = vec![
        Layer::Conv {
            in_c: 1,
            out_c: channels,
            k: 3,
            in_h: side,
            in_w: side,
        },
        Layer::Act(Activation::Sigmoid),
        Layer::MaxPool {
            c: channels,
            k: 2,
            s: 2,
            in_h: conv_out,
            in_w: conv_out,
        },
        Layer::Dense {
            fan_in: channels * pool_out * pool_out,
            fan_out: hidden,
        },
        Layer::Act(Activation::Sigmoid),
        Layer::Dense {
            fan_in: hidden,
            fan_out: 1,
        },
    ];
    StackNet::new(layers, side * side)
}

fn cnn_instances(count: usize, seed: u64) -> Result<f64> {
    let mut max_fd: f64 = 0.0;
    for i in 0..count as u64 {
        let mut rng = derive_rng(seed, i, 2, StreamRole::Init);
        let side = rng.gen_range(6..=8usize);
        let channels = rng.gen_range(1..=2usize);
        let mut net = small_cnn_stack(side, channels, 3);
        net.init_params(&mut rng);
        debug_assert!(net.params().len() <= 500);
        let x = random_input(side * side, &mut rng);
        max_fd = max_fd.max(stack_output_fd(&net, &x)?);
    }
    Ok(max_fd)
}

fn rnn_instances(count: usize, seed: u64) -> Result<f64> {
    let mut max_fd: f64 = 0.0;
    for i in 0..count as u64 {
        let mut rng = derive_rng(seed, i, 3, StreamRole::Init);
        let window = rng.gen_range(2..=6usize);
        let state = rng.gen_range(2..=4usize);
        let depth = rng.gen_range(1..=2usize);
        let arch = ArchSpec::rnn(window, state, depth, OutputHead::Linear)?;
        let net = Network::init(arch, &mut rng)?;
        let x = random_input(window, &mut rng);
        max_fd = max_fd.max(network_output_fd(&net, &x)?);
    }
    Ok(max_fd)
}

/// Run the full finite-difference + closed-form gradient suite.
pub fn run_gradcheck(instances_per_family: usize, seed: u64) -> Result<GradcheckReport> {
    let (mlp_fd, analytic) = mlp_instances(instances_per_family, seed)?;
    let cnn_fd = cnn_instances(instances_per_family, seed)?;
    let rnn_fd = rnn_instances(instances_per_family, seed)?;
    Ok(GradcheckReport {
        families: vec![
            FamilyCheck {
                family: "mlp",
                instances: instances_per_family,
                max_rel_err: mlp_fd,
            },
            FamilyCheck {
                family: "cnn",
                instances: instances_per_family,
                max_rel_err: cnn_fd,
            },
            FamilyCheck {
                family: "rnn",
                instances: instances_per_family,
                max_rel_err: rnn_fd,
            },
        ],
        analytic_max_err: analytic,
    })
}

pub fn constants_outcome() -> OracleOutcome {
    let c = estimate_constants(1_000_000, 0);
    let passed = c.nonlinear_signal_variance > 0.0
        && c.nonlinear_signal_variance.is_finite()
        && c.classification_mu.is_finite()
        && c.nonlinear_signal_variance_se < 0.05
        && c.classification_mu_se < 0.05;
    let mut text = String::from("scenario constants (Monte Carlo)\n");
    let _ = writeln!(text, "  samples: {}", c.mc_samples);
    let _ = writeln!(text, "  seed: {}", c.mc_seed);
    let _ = writeln!(
        text,
        "  nonlinear_signal_variance: {} (se {})",
        c.nonlinear_signal_variance, c.nonlinear_signal_variance_se
    );
    let _ = writeln!(
        text,
        "  classification_mu: {} (se {})",
        c.classification_mu, c.classification_mu_se
    );
    let _ = writeln!(text, "result: {}", if passed { "PASS" } else { "FAIL" });
    let json = format!(
        "{{\"kind\":\"constants\",\"passed\":{passed},\"mc_samples\":{},\"mc_seed\":{},\"nonlinear_signal_variance\":{},\"nonlinear_signal_variance_se\":{},\"classification_mu\":{},\"classification_mu_se\":{}}}\n",
        c.mc_samples,
        c.mc_seed,
        c.nonlinear_signal_variance,
        c.nonlinear_signal_variance_se,
        c.classification_mu,
        c.classification_mu_se
    );
    OracleOutcome { passed, text, json }
}

pub fn gradcheck_outcome() -> OracleOutcome {
    match run_gradcheck(20, 0) {
        Ok(report) => {
            let passed = report.passed();
            let mut text = String::from("gradient oracle suite\n");
            let mut json_families = Vec::new();
            for f in &report.families {
                let _ = writeln!(
                    text,
                    "  {}: {} instances, max relative error {:.3e} (tolerance {:.0e})",
                    f.family, f.instances, f.max_rel_err, FD_TOLERANCE
                );
                json_families.push(format!(
                    "{{\"family\":\"{}\",\"instances\":{},\"max_rel_err\":{}}}",
                    f.family, f.instances, f.max_rel_err
                ));
            }
            let _ = writeln!(
                text,
                "  mlp closed-form vs backprop: {:.3e} (tolerance {:.0e})",
                report.analytic_max_err, ANALYTIC_TOLERANCE
            );
            let _ = writeln!(text, "result: {}", if passed { "PASS" } else { "FAIL" });
            let json = format!(
                "{{\"kind\":\"gradcheck\",\"passed\":{passed},\"families\":[{}],\"analytic_max_err\":{}}}\n",
                json_families.join(","),
                report.analytic_max_err
            );
            OracleOutcome { passed, text, json }
        }
        Err(e) => OracleOutcome {
            passed: false,
            text: format!("gradient oracle suite failed to run: {e}\nresult: FAIL\n"),
            json: format!("{{\"kind\":\"gradcheck\",\"passed\":false,\"error\":\"{e}\"}}\n"),
        },
    }
}

pub fn lemma_outcome() -> OracleOutcome {
    let n_values = [100usize, 1_000, 10_000, 100_000];
    let mut passed = true;
    let mut text = String::from("perturbed-argmin lemma suite\n");
    let mut json_rows = Vec::new();
    for s in 0..10u64 {
        let scenario = LemmaScenario::random(12, 0.5, s);
        match lemma1_check(&scenario, &n_values) {
            Ok(report) => {
                let monotone_ok = report.points.iter().all(|p| p.ratio >= 1.0);
                let bound_ok = report.empirical_constant <= report.bound_constant;
                let ok = monotone_ok && bound_ok;
                passed &= ok;
                let _ = writeln!(
                    text,
                    "  scenario {s}: empirical constant {:.4}, bound {:.4}, ratios >= 1: {} -> {}",
                    report.empirical_constant,
                    report.bound_constant,
                    monotone_ok,
                    if ok { "ok" } else { "VIOLATION" }
                );
                json_rows.push(format!(
                    "{{\"scenario\":{s},\"empirical_constant\":{},\"bound_constant\":{},\"passed\":{ok}}}",
                    report.empirical_constant, report.bound_constant
                ));
            }
            Err(e) => {
                passed = false;
                let _ = writeln!(text, "  scenario {s}: failed to run: {e}");
                json_rows.push(format!("{{\"scenario\":{s},\"passed\":false}}"));
            }
        }
    }
    let _ = writeln!(text, "result: {}", if passed { "PASS" } else { "FAIL" });
    let json = format!(
        "{{\"kind\":\"lemma\",\"passed\":{passed},\"scenarios\":[{}]}}\n",
        json_rows.join(",")
    );
    OracleOutcome { passed, text, json }
}
