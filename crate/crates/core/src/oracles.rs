//! Numeric oracles: finite-difference gradients, closed-form two-layer MLP
//! derivatives, recurrent-network derivative bounds, and the perturbed-argmin
//! rate check on constructed sequences.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::rnn::{RnnHead, RnnShape};
use crate::seed::{derive_rng, StreamRole};

/// Central finite differences per coordinate: (f(w+he) - f(w-he)) / 2h.
pub fn finite_diff_grad<F>(mut evaluate: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(step > 0.0);
    let mut w = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = w[i];
        w[i] = orig + step;
        let up = evaluate(&w);
        w[i] = orig - step;
        let down = evaluate(&w);
        w[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite-difference probe at coordinate {i}"),
            });
        }
        grad[i] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// Largest componentwise relative error between two gradients, with an
/// absolute floor to keep near-zero entries comparable.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Sigmoid of x.
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Closed-form output gradient of a two-layer sigmoid MLP, assembled in the
/// network parameter layout order: hidden weights, hidden biases, output
/// weights, output bias.
///
/// With h_i = sigmoid(sum_j beta_ij x_j + b_i):
/// df/d beta_ij = alpha_i x_j h_i (1 - h_i), df/d b_i = alpha_i h_i (1 - h_i),
/// df/d alpha_i = h_i, df/d alpha_0 = 1.
pub fn mlp_analytic_grad(x: &[f64], params: &[f64], hidden: usize) -> Result<Vec<f64>> {
    let p = x.len();
    let expected = hidden * p + hidden + hidden + 1;
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: params.len(),
        });
    }
    let beta = &params[0..hidden * p];
    let b = &params[hidden * p..hidden * p + hidden];
    let alpha = &params[hidden * p + hidden..hidden * p + 2 * hidden];
    let mut grad = vec![0.0; expected];
    for i in 0..hidden {
        let mut c = b[i];
        for j in 0..p {
            c += beta[i * p + j] * x[j];
        }
        let h = sigmoid(c);
        let s = h * (1.0 - h);
        for j in 0..p {
            grad[i * p + j] = alpha[i] * x[j] * s;
        }
        grad[hidden * p + i] = alpha[i] * s;
        grad[hidden * p + hidden + i] = h;
    }
    grad[expected - 1] = 1.0;
    Ok(grad)
}

/// Does the squared gradient norm satisfy
/// `|grad|^2 <= c1 + c2 (1 + |x|^2) |w|^2`?
pub fn mlp_grad_bound_check(x: &[f64], params: &[f64], hidden: usize, c1: f64, c2: f64) -> bool {
    let grad = mlp_analytic_grad(x, params, hidden).expect("layout checked by caller");
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let w2: f64 = params.iter().map(|v| v * v).sum();
    g2 <= c1 + c2 * (1.0 + x2) * w2
}

/// Fit the smallest constants (c1, c2) covering a probe set, with c1 at
/// least 1 (the output-bias gradient alone contributes 1).
pub fn calibrate_mlp_grad_bound(probes: &[(Vec<f64>, Vec<f64>)], hidden: usize) -> (f64, f64) {
    let mut c2 = 0.0f64;
    for (x, w) in probes {
        let grad = mlp_analytic_grad(x, w, hidden).expect("probe layout");
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let w2: f64 = w.iter().map(|v| v * v).sum();
        let u = (1.0 + x2) * w2;
        if u > 0.0 {
            c2 = c2.max(g2 / u);
        }
    }
    let mut c1 = 1.0f64;
    for (x, w) in probes {
        let grad = mlp_analytic_grad(x, w, hidden).expect("probe layout");
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let w2: f64 = w.iter().map(|v| v * v).sum();
        c1 = c1.max(g2 - c2 * (1.0 + x2) * w2);
    }
    (c1, c2)
}

/// Per-instance report of the recurrent-network derivative bounds.
#[derive(Debug, Clone)]
pub struct RnnBoundReport {
    pub max_abs_state: f64,
    pub max_abs_pre_head: f64,
    pub max_state_deriv: f64,
    pub head_deriv: f64,
    /// Output gradient from the chain-rule recursion (backpropagation
    /// through time).
    pub gradient: Vec<f64>,
    pub violations: Vec<String>,
}

impl RnnBoundReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluate a single-layer sigmoid-recurrence, tanh-head network and check
/// the strict per-step bounds |h| < 1, |z| < 1, and every derivative factor
/// below 1. The |z| < 1 bound presumes head weights with |V|_1 + |b'| < 1;
/// use `random_bounded_rnn_params` to sample in that regime.
pub fn rnn_bound_check(input: &[f64], state: usize, params: &[f64]) -> Result<RnnBoundReport> {
    let shape = RnnShape {
        window: input.len(),
        state,
        layers: 1,
        head: RnnHead::Tanh,
    };
    if params.len() != shape.param_count() {
        return Err(Error::DimensionMismatch {
            expected: shape.param_count(),
            actual: params.len(),
        });
    }
    let trace = shape.forward_trace(params, input);
    let (h, z, o) = &trace;
    let mut violations = Vec::new();
    let mut max_abs_state = 0.0f64;
    let mut max_state_deriv = 0.0f64;
    for (t, step) in h.iter().enumerate() {
        for (j, &hj) in step[0].iter().enumerate() {
            max_abs_state = max_abs_state.max(hj.abs());
            if hj.abs() >= 1.0 {
                violations.push(format!("|h[{t}][{j}]| = {} >= 1", hj.abs()));
            }
            let d = hj * (1.0 - hj);
            max_state_deriv = max_state_deriv.max(d.abs());
            if d.abs() >= 1.0 {
                violations.push(format!("state derivative factor at ({t},{j}) >= 1"));
            }
        }
    }
    if z.abs() >= 1.0 {
        violations.push(format!("|z| = {} >= 1", z.abs()));
    }
    let head_deriv = 1.0 - o * o;
    if head_deriv.abs() >= 1.0 {
        violations.push("head derivative factor >= 1".into());
    }
    let mut gradient = vec![0.0; shape.param_count()];
    shape.backward(params, input, &trace, 1.0, 1.0, &mut gradient);
    Ok(RnnBoundReport {
        max_abs_state,
        max_abs_pre_head: z.abs(),
        max_state_deriv,
        head_deriv,
        gradient,
        violations,
    })
}

/// Random single-layer RNN parameters with the head rescaled so that
/// |V|_1 sup|h| + |b'| <= 0.99, keeping |z| < 1 surely.
pub fn random_bounded_rnn_params<R: Rng>(window: usize, state: usize, rng: &mut R) -> Vec<f64> {
    let shape = RnnShape {
        window,
        state,
        layers: 1,
        head: RnnHead::Tanh,
    };
    let mut params = shape.init_params(rng);
    // Perturb biases too so the probe is not at the init special case.
    for p in params.iter_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    let k = state;
    let v_off = params.len() - k - 1;
    let l1: f64 = params[v_off..v_off + k].iter().map(|v| v.abs()).sum();
    let total = l1 + params[v_off + k].abs();
    if total > 0.99 {
        let scale = 0.99 / total;
        for v in &mut params[v_off..] {
            *v *= scale;
        }
    }
    params
}

/// A constructed perturbed-argmin scenario: per-candidate base risks B,
/// perturbations a with |a/B| <= c eta_n, and risk proxies A with
/// |A - B|/B <= c eta_n, all realized from a seeded stream.
#[derive(Debug, Clone)]
pub struct LemmaScenario {
    pub base: Vec<f64>,
    pub kappa: f64,
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct LemmaPoint {
    pub n: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub points: Vec<LemmaPoint>,
    /// Empirical constant sup_n (ratio - 1) / eta_n.
    pub empirical_constant: f64,
    /// Analytic bound constant recorded from the scenario construction.
    pub bound_constant: f64,
}

impl LemmaScenario {
    /// Random scenario with `count` candidates and base risks in [1, 2].
    pub fn random(count: usize, c: f64, seed: u64) -> Self {
        let mut rng = derive_rng(seed, 0, 0, StreamRole::MonteCarlo);
        let base: Vec<f64> = (0..count).map(|_| rng.gen_range(1.0..2.0)).collect();
        let kappa = base.iter().copied().fold(f64::INFINITY, f64::min);
        LemmaScenario {
            base,
            kappa,
            c,
            seed,
        }
    }

    pub fn eta(n: usize) -> f64 {
        1.0 / (n as f64).sqrt()
    }

    /// Realize (a, A) at sample size n; magnitudes obey the construction
    /// invariants surely.
    pub fn realize(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let eta = Self::eta(n);
        let mut rng = derive_rng(self.seed, n as u64, 0, StreamRole::MonteCarlo);
        let a: Vec<f64> = self
            .base
            .iter()
            .map(|b| self.c * eta * b * rng.gen_range(-1.0..1.0))
            .collect();
        let big_a: Vec<f64> = self
            .base
            .iter()
            .map(|b| b * (1.0 + self.c * eta * rng.gen_range(-1.0..1.0)))
            .collect();
        (a, big_a)
    }

    /// Analytic rate constant from the construction: ratio - 1 is at most
    /// 2 c B_max / (kappa (1 - c eta)) * eta for every realized n.
    pub fn bound_constant(&self, n_min: usize) -> f64 {
        let b_max = self.base.iter().copied().fold(0.0, f64::max);
        2.0 * self.c * b_max / (self.kappa * (1.0 - self.c * Self::eta(n_min)))
    }
}

/// Argmin of A + a per sample size; returns the ratio A(selected)/inf A.
pub fn lemma1_check(scenario: &LemmaScenario, n_values: &[usize]) -> Result<LemmaReport> {
    if scenario.base.is_empty() || scenario.kappa <= 0.0 {
        return Err(Error::InvalidConfig(
            "lemma scenario needs candidates and kappa > 0".into(),
        ));
    }
    let mut points = Vec::with_capacity(n_values.len());
    let mut empirical = 0.0f64;
    for &n in n_values {
        let (a, big_a) = scenario.realize(n);
        let mut best = 0;
        for i in 1..big_a.len() {
            if big_a[i] + a[i] < big_a[best] + a[best] {
                best = i;
            }
        }
        let inf_a = big_a.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = big_a[best] / inf_a;
        empirical = empirical.max((ratio - 1.0) / LemmaScenario::eta(n));
        points.push(LemmaPoint { n, ratio });
    }
    let n_min = *n_values.iter().min().unwrap();
    Ok(LemmaReport {
        points,
        empirical_constant: empirical,
        bound_constant: scenario.bound_constant(n_min),
    })
}
