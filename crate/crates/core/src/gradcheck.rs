//! Finite-difference gradient verification.
//!
//! The numeric side evaluates layers through their forward pass only, so it
//! stays independent of the analytic backward implementations it checks.
//! Central differences with `h = 1e-5` in double precision; relative error
//! floor 1e-6 keeps zero-gradient slots well-defined.

use crate::rng::DetRng;
use crate::tensor::ops::*;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
/// Per-layer relative tolerance.
pub const LAYER_TOL: f64 = 1e-4;
/// End-to-end (deep chain) relative tolerance.
pub const END_TO_END_TOL: f64 = 1e-3;

/// Result of one gradient comparison.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

/// Full gradient report over every layer.
#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<44} max rel err {:.3e} (tol {:.0e})\n",
                if c.passed() { "ok  " } else { "FAIL" },
                c.name,
                c.max_rel_err,
                c.tolerance
            ));
        }
        out
    }
}

/// Central finite differences of a scalar function at `x`.
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let plus = f(&xs);
        xs[i] = orig - h;
        let minus = f(&xs);
        xs[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Elementwise relative error with a 1e-6 floor.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn rand_tensor(rng: &mut DetRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let data = (0..shape.iter().product())
        .map(|_| rng.uniform_in(lo, hi))
        .collect();
    Tensor::from_vec(shape, data).expect("shape/data agree")
}

/// Random tensor whose values keep a margin from ReLU kinks and max-pool
/// ties, so central differences stay on one linear piece.
fn rand_tensor_safe(rng: &mut DetRng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let mut data: Vec<f64> = Vec::with_capacity(n);
    while data.len() < n {
        let v = rng.uniform_in(-1.0, 1.0);
        if v.abs() < 50.0 * FD_STEP {
            continue;
        }
        if data.iter().all(|&u| (u - v).abs() > 50.0 * FD_STEP) {
            data.push(v);
        }
    }
    Tensor::from_vec(shape, data).expect("shape/data agree")
}

/// Contract the output against a fixed random cotangent so the check covers
/// general upstream gradients, not just sum-of-outputs.
fn weighted_sum(out: &Tensor, weights: &[f64]) -> f64 {
    out.data().iter().zip(weights).map(|(a, b)| a * b).sum()
}

fn check(
    report: &mut GradCheckReport,
    name: impl Into<String>,
    analytic: &[f64],
    numeric: &[f64],
    tolerance: f64,
) {
    report.checks.push(CheckResult {
        name: name.into(),
        max_rel_err: max_relative_error(analytic, numeric),
        tolerance,
    });
}

fn conv_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    let cases = [
        (1usize, 1usize, 4usize, 5usize, 1usize, 1usize, 0usize),
        (2, 3, 6, 7, 3, 1, 1),
        (3, 2, 8, 6, 3, 2, 1),
        (2, 4, 9, 9, 5, 2, 2),
        (4, 2, 7, 11, 7, 2, 3),
        (3, 3, 5, 5, 1, 1, 0),
    ];
    for (ci, co, h, w, k, s, p) in cases {
        let spec = ConvSpec::new(k, s, p);
        let input = rand_tensor(rng, &[ci, h, w], -1.0, 1.0);
        let weights = rand_tensor(rng, &[co, ci, k, k], -0.7, 0.7);
        let bias = rand_tensor(rng, &[co], -0.3, 0.3);
        let out = conv2d_forward(&input, &weights, &bias, &spec).unwrap();
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let grad_out = Tensor::from_vec(out.shape(), cotangent.clone()).unwrap();
        let grads = conv2d_backward(&input, &weights, &spec, &grad_out).unwrap();
        let tag = format!("conv2d {ci}->{co} k{k}s{s}p{p} {h}x{w}");

        let fd_w = finite_difference(
            |wv| {
                let wt = Tensor::from_vec(weights.shape(), wv.to_vec()).unwrap();
                weighted_sum(&conv2d_forward(&input, &wt, &bias, &spec).unwrap(), &cotangent)
            },
            weights.data(),
            FD_STEP,
        );
        check(report, format!("{tag} / weights"), grads.weights.data(), &fd_w, LAYER_TOL);

        let fd_b = finite_difference(
            |bv| {
                let bt = Tensor::from_vec(bias.shape(), bv.to_vec()).unwrap();
                weighted_sum(&conv2d_forward(&input, &weights, &bt, &spec).unwrap(), &cotangent)
            },
            bias.data(),
            FD_STEP,
        );
        check(report, format!("{tag} / bias"), grads.bias.data(), &fd_b, LAYER_TOL);

        let fd_x = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(input.shape(), xv.to_vec()).unwrap();
                weighted_sum(&conv2d_forward(&xt, &weights, &bias, &spec).unwrap(), &cotangent)
            },
            input.data(),
            FD_STEP,
        );
        check(report, format!("{tag} / input"), grads.input.data(), &fd_x, LAYER_TOL);
    }
}

fn relu_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    for (i, shape) in [[6usize, 1, 1], [2, 3, 4], [1, 8, 8], [4, 2, 2], [3, 5, 7]]
        .iter()
        .enumerate()
    {
        let input = rand_tensor_safe(rng, shape);
        let out = relu_forward(&input);
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let grad =
            relu_backward(&input, &Tensor::from_vec(out.shape(), cotangent.clone()).unwrap());
        let fd = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(input.shape(), xv.to_vec()).unwrap();
                weighted_sum(&relu_forward(&xt), &cotangent)
            },
            input.data(),
            FD_STEP,
        );
        check(report, format!("relu case {i} / input"), grad.data(), &fd, LAYER_TOL);
    }
}

fn maxpool_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    let cases = [
        (1usize, 4usize, 4usize, 2usize, 2usize),
        (2, 6, 6, 2, 2),
        (3, 5, 7, 3, 2),
        (2, 8, 8, 2, 1),
        (4, 8, 8, 4, 4),
    ];
    for (c, h, w, k, s) in cases {
        let input = rand_tensor_safe(rng, &[c, h, w]);
        let (out, argmax) = maxpool2d_forward(&input, k, s).unwrap();
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let grad = maxpool2d_backward(
            input.shape(),
            &argmax,
            &Tensor::from_vec(out.shape(), cotangent.clone()).unwrap(),
        );
        let fd = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(input.shape(), xv.to_vec()).unwrap();
                weighted_sum(&maxpool2d_forward(&xt, k, s).unwrap().0, &cotangent)
            },
            input.data(),
            FD_STEP,
        );
        check(
            report,
            format!("maxpool2d {c}x{h}x{w} k{k}s{s} / input"),
            grad.data(),
            &fd,
            LAYER_TOL,
        );
    }

    for (i, shape) in [[2usize, 3, 4], [1, 5, 5], [4, 2, 6], [3, 7, 3], [6, 4, 4]]
        .iter()
        .enumerate()
    {
        let input = rand_tensor_safe(rng, shape);
        let (out, argmax) = global_maxpool_forward(&input).unwrap();
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let grad = global_maxpool_backward(
            input.shape(),
            &argmax,
            &Tensor::from_vec(out.shape(), cotangent.clone()).unwrap(),
        );
        let fd = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(input.shape(), xv.to_vec()).unwrap();
                weighted_sum(&global_maxpool_forward(&xt).unwrap().0, &cotangent)
            },
            input.data(),
            FD_STEP,
        );
        check(report, format!("global_maxpool case {i} / input"), grad.data(), &fd, LAYER_TOL);
    }
}

fn concat_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    let cases = [
        (1usize, 1usize, 3usize, 3usize),
        (2, 3, 4, 5),
        (3, 1, 2, 6),
        (4, 4, 3, 3),
        (2, 5, 6, 2),
    ];
    for (ca, cb, h, w) in cases {
        let a = rand_tensor(rng, &[ca, h, w], -1.0, 1.0);
        let b = rand_tensor(rng, &[cb, h, w], -1.0, 1.0);
        let out = concat_channels(&a, &b).unwrap();
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let (ga, gb) = concat_channels_backward(
            &Tensor::from_vec(out.shape(), cotangent.clone()).unwrap(),
            ca,
        )
        .unwrap();
        let fd_a = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(a.shape(), xv.to_vec()).unwrap();
                weighted_sum(&concat_channels(&xt, &b).unwrap(), &cotangent)
            },
            a.data(),
            FD_STEP,
        );
        check(report, format!("concat {ca}+{cb} / a"), ga.data(), &fd_a, LAYER_TOL);
        let fd_b = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(b.shape(), xv.to_vec()).unwrap();
                weighted_sum(&concat_channels(&a, &xt).unwrap(), &cotangent)
            },
            b.data(),
            FD_STEP,
        );
        check(report, format!("concat {ca}+{cb} / b"), gb.data(), &fd_b, LAYER_TOL);
    }
}

fn fc_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    for (i, (n_in, n_out)) in [(1usize, 1usize), (4, 2), (7, 5), (16, 3), (9, 9)]
        .iter()
        .enumerate()
    {
        let input = rand_tensor(rng, &[*n_in], -1.0, 1.0);
        let weights = rand_tensor(rng, &[*n_out, *n_in], -0.8, 0.8);
        let bias = rand_tensor(rng, &[*n_out], -0.3, 0.3);
        let out = fully_connected_forward(&input, &weights, &bias).unwrap();
        let cotangent: Vec<f64> = (0..out.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let grad_out = Tensor::from_vec(out.shape(), cotangent.clone()).unwrap();
        let grads = fully_connected_backward(&input, &weights, &grad_out).unwrap();

        let fd_w = finite_difference(
            |wv| {
                let wt = Tensor::from_vec(weights.shape(), wv.to_vec()).unwrap();
                weighted_sum(&fully_connected_forward(&input, &wt, &bias).unwrap(), &cotangent)
            },
            weights.data(),
            FD_STEP,
        );
        check(report, format!("fc case {i} / weights"), grads.weights.data(), &fd_w, LAYER_TOL);

        let fd_x = finite_difference(
            |xv| {
                let xt = Tensor::from_vec(input.shape(), xv.to_vec()).unwrap();
                weighted_sum(&fully_connected_forward(&xt, &weights, &bias).unwrap(), &cotangent)
            },
            input.data(),
            FD_STEP,
        );
        check(report, format!("fc case {i} / input"), grads.input.data(), &fd_x, LAYER_TOL);
    }
}

fn loss_cases(report: &mut GradCheckReport, rng: &mut DetRng) {
    for i in 0..5 {
        let n = 3 + 2 * i;
        let pred = rand_tensor(rng, &[n], -2.0, 2.0);
        let target = rand_tensor(rng, &[n], -2.0, 2.0);
        let (_, grad) = euclidean_loss(&pred, &target).unwrap();
        let fd = finite_difference(
            |pv| {
                let pt = Tensor::from_vec(pred.shape(), pv.to_vec()).unwrap();
                euclidean_loss(&pt, &target).unwrap().0
            },
            pred.data(),
            FD_STEP,
        );
        check(report, format!("euclidean_loss n={n} / pred"), grad.data(), &fd, LAYER_TOL);
    }
}

/// Runs the per-layer finite-difference suite.
pub fn run_layer_suite(seed: u64) -> GradCheckReport {
    let mut rng = DetRng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    conv_cases(&mut report, &mut rng);
    relu_cases(&mut report, &mut rng);
    maxpool_cases(&mut report, &mut rng);
    concat_cases(&mut report, &mut rng);
    fc_cases(&mut report, &mut rng);
    loss_cases(&mut report, &mut rng);
    report
}
