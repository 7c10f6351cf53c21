//! Gradient correctness: hand-computed layer examples, backpropagation vs
//! central finite differences, and the closed-form two-layer MLP gradient.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use optsel_core::nn::stack::{Layer, StackNet};
use optsel_core::nn::{Activation, ArchSpec, Network, OutputHead};
use optsel_core::oracles::{
    calibrate_mlp_grad_bound, finite_diff_grad, max_relative_error, mlp_analytic_grad,
    mlp_grad_bound_check,
};
use optsel_core::seed::{derive_rng, StreamRole};

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn fd_vs_backprop_output(net: &Network, input: &[f64]) -> f64 {
    let backprop = net.output_gradient(input).unwrap();
    let mut probe = net.clone();
    let fd = finite_diff_grad(
        |w: &[f64]| {
            probe.params_mut().copy_from_slice(w);
            probe.forward(input).unwrap()
        },
        net.params(),
        FD_STEP,
    )
    .unwrap();
    max_relative_error(&backprop, &fd)
}

#[test]
fn dense_forward_matches_hand_computation() {
    // y = w.x + b with w = [2, 3], b = 1, x = [1, 2] -> 9.
    let mut net = StackNet::new(vec![Layer::Dense { fan_in: 2, fan_out: 1 }], 2);
    net.set_params(&[2.0, 3.0, 1.0]);
    assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), 9.0);
}

#[test]
fn conv_forward_matches_hand_computation() {
    // 3x3 input, single 2x2 kernel picking the top-left and bottom-right
    // corners of each window: kernel = [[1,0],[0,1]], bias 0.
    let layers = vec![Layer::Conv {
        in_c: 1,
        out_c: 1,
        k: 2,
        in_h: 3,
        in_w: 3,
    }];
    let mut net = StackNet::new(layers, 9);
    net.set_params(&[1.0, 0.0, 0.0, 1.0, 0.0]);
    let x: Vec<f64> = (1..=9).map(f64::from).collect();
    let trace = net.forward_trace::<ChaCha8Rng>(&x, None).unwrap();
    assert_eq!(net.out_len(), 4);
    // Gradient of the first window output w.r.t. the kernel is the window
    // corners [x0, x1, x3, x4], bias gradient 1; input gradient mirrors the
    // kernel.
    let mut grad = vec![0.0; 5];
    let gx = net.backward(&trace, &[1.0, 0.0, 0.0, 0.0], 1.0, &mut grad);
    assert_eq!(&grad[..5], &[1.0, 2.0, 4.0, 5.0, 1.0]);
    assert_eq!(gx[0], 1.0);
    assert_eq!(gx[4], 1.0);
    assert_eq!(gx[8], 0.0);
}

#[test]
fn conv_forward_output_values() {
    let x: Vec<f64> = (1..=9).map(f64::from).collect();
    // Windows (row-major): (1+5, 2+6, 4+8, 5+9) + bias 0.5. Each output is
    // read through a Dense head that selects one coordinate.
    let expected = [6.5, 8.5, 12.5, 14.5];
    for (i, &e) in expected.iter().enumerate() {
        let mut layers = vec![
            Layer::Conv {
                in_c: 1,
                out_c: 1,
                k: 2,
                in_h: 3,
                in_w: 3,
            },
            Layer::Dense { fan_in: 4, fan_out: 1 },
        ];
        let mut sel = StackNet::new(std::mem::take(&mut layers), 9);
        let mut params = vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        params[5 + i] = 1.0;
        sel.set_params(&params);
        assert!((sel.forward(&x).unwrap() - e).abs() < 1e-12);
    }
}

#[test]
fn maxpool_forward_matches_hand_computation() {
    // 4x4 input, 2x2 pool stride 2: maxima of the four quadrants.
    let layers = vec![
        Layer::MaxPool {
            c: 1,
            k: 2,
            s: 2,
            in_h: 4,
            in_w: 4,
        },
        Layer::Dense { fan_in: 4, fan_out: 1 },
    ];
    let mut net = StackNet::new(layers, 16);
    net.set_params(&[1.0, 1.0, 1.0, 1.0, 0.0]);
    #[rustfmt::skip]
    let x = vec![
        1.0, 2.0, 9.0, 1.0,
        3.0, 4.0, 1.0, 1.0,
        0.0, 0.0, 5.0, 6.0,
        0.0, 7.0, 8.0, 5.0,
    ];
    // Quadrant maxima: 4, 9, 7, 8 -> sum 28.
    assert_eq!(net.forward(&x).unwrap(), 28.0);
}

#[test]
fn maxpool_gradient_routes_to_argmax() {
    let layers = vec![Layer::MaxPool {
        c: 1,
        k: 2,
        s: 2,
        in_h: 2,
        in_w: 2,
    }];
    let net = StackNet::new(layers, 4);
    let x = vec![1.0, 5.0, 2.0, 3.0];
    let trace = net.forward_trace::<ChaCha8Rng>(&x, None).unwrap();
    let mut grad = vec![];
    let gx = net.backward(&trace, &[2.0], 1.0, &mut grad);
    assert_eq!(gx, vec![0.0, 2.0, 0.0, 0.0]);
}

#[test]
fn mlp_backprop_matches_finite_differences() {
    for i in 0..20u64 {
        let mut rng = derive_rng(11, i, 0, StreamRole::Init);
        let dim = rng.gen_range(2..=4usize);
        let hidden = rng.gen_range(2..=4usize);
        let depth = rng.gen_range(1..=2usize);
        let arch =
            ArchSpec::mlp(dim, hidden, depth, Activation::Sigmoid, OutputHead::Linear).unwrap();
        let net = Network::init(arch, &mut rng).unwrap();
        assert!(net.param_count() <= 50);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = fd_vs_backprop_output(&net, &x);
        assert!(err < FD_TOL, "mlp instance {i}: relative error {err}");
    }
}

#[test]
fn mlp_sigmoid_head_backprop_matches_finite_differences() {
    for i in 0..10u64 {
        let mut rng = derive_rng(12, i, 0, StreamRole::Init);
        let arch =
            ArchSpec::mlp(3, 4, 1, Activation::Sigmoid, OutputHead::SigmoidClamped).unwrap();
        let net = Network::init(arch, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = fd_vs_backprop_output(&net, &x);
        assert!(err < FD_TOL, "instance {i}: relative error {err}");
    }
}

#[test]
fn cnn_backprop_matches_finite_differences() {
    for i in 0..20u64 {
        let mut rng = derive_rng(13, i, 0, StreamRole::Init);
        let side = rng.gen_range(6..=8usize);
        let channels = rng.gen_range(1..=2usize);
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
                fan_out: 3,
            },
            Layer::Act(Activation::Sigmoid),
            Layer::Dense { fan_in: 3, fan_out: 1 },
        ];
        let mut net = StackNet::new(layers, side * side);
        net.init_params(&mut rng);
        assert!(net.param_count() <= 500);
        let x: Vec<f64> = (0..side * side).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trace = net.forward_trace::<ChaCha8Rng>(&x, None).unwrap();
        let mut backprop = vec![0.0; net.param_count()];
        net.backward(&trace, &[1.0], 1.0, &mut backprop);
        let mut probe = net.clone();
        let fd = finite_diff_grad(
            |w: &[f64]| {
                probe.params_mut().copy_from_slice(w);
                probe.forward(&x).unwrap()
            },
            net.params(),
            FD_STEP,
        )
        .unwrap();
        let err = max_relative_error(&backprop, &fd);
        assert!(err < FD_TOL, "cnn instance {i}: relative error {err}");
    }
}

#[test]
fn rnn_backprop_matches_finite_differences() {
    for i in 0..20u64 {
        let mut rng = derive_rng(14, i, 0, StreamRole::Init);
        let window = rng.gen_range(2..=6usize);
        let state = rng.gen_range(2..=4usize);
        let depth = rng.gen_range(1..=2usize);
        let arch = ArchSpec::rnn(window, state, depth, OutputHead::Linear).unwrap();
        let net = Network::init(arch, &mut rng).unwrap();
        let x: Vec<f64> = (0..window).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = fd_vs_backprop_output(&net, &x);
        assert!(err < FD_TOL, "rnn instance {i}: relative error {err}");
    }
}

#[test]
fn mlp_backprop_matches_closed_form() {
    for i in 0..20u64 {
        let mut rng = derive_rng(15, i, 0, StreamRole::Init);
        let dim = rng.gen_range(2..=5usize);
        let hidden = rng.gen_range(2..=6usize);
        let arch =
            ArchSpec::mlp(dim, hidden, 1, Activation::Sigmoid, OutputHead::Linear).unwrap();
        let net = Network::init(arch, &mut rng).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let analytic = mlp_analytic_grad(&x, net.params(), hidden).unwrap();
        let backprop = net.output_gradient(&x).unwrap();
        let err = max_relative_error(&backprop, &analytic);
        assert!(err < 1e-12, "instance {i}: relative error {err}");
    }
}

#[test]
fn mse_loss_gradient_matches_finite_differences() {
    use optsel_core::nn::Loss;
    let mut rng = derive_rng(16, 0, 0, StreamRole::Init);
    let arch = ArchSpec::mlp(3, 4, 2, Activation::Sigmoid, OutputHead::Linear).unwrap();
    let net = Network::init(arch, &mut rng).unwrap();
    let x = [0.3, -0.7, 0.2];
    let target = 0.9;
    let backprop = net.backward(&x, target, Loss::Mse).unwrap();
    let mut probe = net.clone();
    let fd = finite_diff_grad(
        |w: &[f64]| {
            probe.params_mut().copy_from_slice(w);
            let f = probe.forward(&x).unwrap();
            (f - target) * (f - target)
        },
        net.params(),
        FD_STEP,
    )
    .unwrap();
    assert!(max_relative_error(&backprop, &fd) < FD_TOL);
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    use optsel_core::nn::Loss;
    let mut rng = derive_rng(17, 0, 0, StreamRole::Init);
    let arch = ArchSpec::mlp(3, 4, 1, Activation::Sigmoid, OutputHead::SigmoidClamped).unwrap();
    let net = Network::init(arch, &mut rng).unwrap();
    let x = [0.1, 0.5, -0.4];
    for target in [0.0, 1.0] {
        let backprop = net.backward(&x, target, Loss::CrossEntropy).unwrap();
        let mut probe = net.clone();
        let fd = finite_diff_grad(
            |w: &[f64]| {
                probe.params_mut().copy_from_slice(w);
                let f = probe.forward(&x).unwrap().clamp(1e-12, 1.0 - 1e-12);
                -(target * f.ln() + (1.0 - target) * (1.0 - f).ln())
            },
            net.params(),
            FD_STEP,
        )
        .unwrap();
        assert!(max_relative_error(&backprop, &fd) < FD_TOL);
    }
}

#[test]
fn finite_diff_on_quadratic_is_exact() {
    // f(w) = sum w_i^2 has exact central differences.
    let w = [1.0, -2.0, 0.5];
    let g = finite_diff_grad(|v: &[f64]| v.iter().map(|x| x * x).sum(), &w, 1e-4).unwrap();
    for (gi, wi) in g.iter().zip(&w) {
        assert!((gi - 2.0 * wi).abs() < 1e-9);
    }
}

#[test]
fn gradient_bound_calibration_covers_probes() {
    let hidden = 4;
    let dim = 3;
    let mut rng = derive_rng(18, 0, 0, StreamRole::Init);
    let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w: Vec<f64> = (0..hidden * dim + 2 * hidden + 1)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            (x, w)
        })
        .collect();
    let (c1, c2) = calibrate_mlp_grad_bound(&probes, hidden);
    assert!(c1 >= 1.0 && c2 >= 0.0);
    for (x, w) in &probes {
        assert!(mlp_grad_bound_check(x, w, hidden, c1, c2));
    }
    // The bound with slack also covers fresh draws.
    let mut rng = derive_rng(18, 1, 0, StreamRole::Init);
    for _ in 0..200 {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..hidden * dim + 2 * hidden + 1)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        assert!(mlp_grad_bound_check(&x, &w, hidden, 4.0 * c1, 4.0 * c2));
    }
}

#[test]
fn dropout_scales_and_masks() {
    let layers = vec![Layer::Dropout { rate: 0.5 }];
    let net = StackNet::new(layers, 4);
    let x = vec![1.0, 1.0, 1.0, 1.0];
    // Inference mode: identity.
    assert_eq!(
        net.forward_trace::<ChaCha8Rng>(&x, None)
            .map(|t| StackNet::output_of(&t))
            .unwrap(),
        1.0
    );
    // Training mode: every surviving unit is scaled by 1 / keep.
    let mut rng = derive_rng(19, 0, 0, StreamRole::Dropout);
    let trace = net.forward_trace(&x, Some(&mut rng)).unwrap();
    let mut grad = vec![];
    let gx = net.backward(&trace, &[1.0, 1.0, 1.0, 1.0], 1.0, &mut grad);
    for g in gx {
        assert!(g == 0.0 || (g - 2.0).abs() < 1e-15);
    }
}
