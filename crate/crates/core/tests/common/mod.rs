//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use padgan::datasets::{preset, Example};
use padgan::dpp::{build_kernel, pad_loss, pad_loss_gradients, SimilarityKernel};
use padgan::nn::{DenseNetwork, HiddenActivation, OutputActivation};
use padgan::quality::{Point, QualityFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - b|` relative to the larger magnitude, with an absolute floor so
/// that tiny gradients are compared absolutely.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Determinant by cofactor expansion; exact enough for n ≤ 6.
pub fn naive_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != c)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * naive_det(&minor)
            })
            .sum(),
    }
}

pub fn rbf(x: &Point, y: &Point, h: f64) -> f64 {
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    (-0.5 * d2 / (h * h)).exp()
}

/// Scalar loss `sum(W ∘ net(x))` used to seed backward with `W`.
fn weighted_output(net: &DenseNetwork, x: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    net.predict(x).unwrap().component_mul(w).sum()
}

/// Signs of every hidden pre-activation, from a naive re-evaluation of the
/// layer formulas.
fn hidden_signs(net: &DenseNetwork, x: &DMatrix<f64>) -> Vec<bool> {
    let mut signs = Vec::new();
    let mut a = x.clone();
    let layers = net.weights().len();
    for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        let mut z = &a * w;
        for mut row in z.row_iter_mut() {
            row += b;
        }
        if l + 1 < layers {
            signs.extend(z.iter().map(|v| *v > 0.0));
            a = z.map(|v| if v > 0.0 { v } else { 0.2 * v });
        }
    }
    signs
}

/// Worst relative error of analytic parameter and input gradients against
/// central differences for one random network instance.
///
/// Coordinates whose ±h perturbation moves a hidden unit across the
/// leaky-relu kink are skipped, since the central difference is not a
/// derivative estimate there.
pub fn network_fd_errors(
    layers: &[usize],
    output: OutputActivation,
    seed: u64,
    params_checked: usize,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net =
        DenseNetwork::init(layers, HiddenActivation::LeakyRelu(0.2), output, seed).unwrap();
    // random biases so that the zero-bias initialization is not the only case
    let mut flat = net.flatten_parameters();
    for v in flat.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    net.set_flat_parameters(&flat).unwrap();

    let batch = 4;
    let x = DMatrix::from_fn(batch, layers[0], |_, _| rng.random_range(-1.0..1.0));
    let w = DMatrix::from_fn(batch, *layers.last().unwrap(), |_, _| {
        rng.random_range(-1.0..1.0)
    });
    let (_, tape) = net.forward(&x).unwrap();
    let (grads, input_grads) = net.backward(&tape, &w).unwrap();
    let analytic = grads.flatten();

    let h = 1e-4;
    let mut worst_param = 0.0f64;
    for _ in 0..params_checked {
        let i = rng.random_range(0..flat.len());
        let mut p = flat.clone();
        p[i] += h;
        net.set_flat_parameters(&p).unwrap();
        let up = weighted_output(&net, &x, &w);
        let up_signs = hidden_signs(&net, &x);
        p[i] -= 2.0 * h;
        net.set_flat_parameters(&p).unwrap();
        let down = weighted_output(&net, &x, &w);
        if up_signs != hidden_signs(&net, &x) {
            continue;
        }
        worst_param = worst_param.max(rel_err(analytic[i], (up - down) / (2.0 * h), 1e-4));
    }
    net.set_flat_parameters(&flat).unwrap();

    let mut worst_input = 0.0f64;
    for r in 0..batch {
        for c in 0..layers[0] {
            let mut xp = x.clone();
            xp[(r, c)] += h;
            let up = weighted_output(&net, &xp, &w);
            let up_signs = hidden_signs(&net, &xp);
            xp[(r, c)] -= 2.0 * h;
            let down = weighted_output(&net, &xp, &w);
            if up_signs != hidden_signs(&net, &xp) {
                continue;
            }
            worst_input =
                worst_input.max(rel_err(input_grads[(r, c)], (up - down) / (2.0 * h), 1e-4));
        }
    }
    (worst_param, worst_input)
}

/// Worst relative error of the analytic quality gradient at random points.
pub fn quality_fd_error(example: Example, points: usize, seed: u64) -> f64 {
    let q = preset(example).build_quality().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
        let g = q.gradient(&x);
        for d in 0..2 {
            let mut up = x;
            let mut down = x;
            up[d] += h;
            down[d] -= h;
            let num = (q.evaluate(&up) - q.evaluate(&down)) / (2.0 * h);
            worst = worst.max(rel_err(g[d], num, 1e-4));
        }
    }
    worst
}

/// An 8-point batch drawn from the Example-I data and its DPP loss as a
/// function of the point coordinates (qualities recomputed at every point).
pub fn pad_fd_error(seed: u64) -> f64 {
    let p = preset(Example::Ring);
    let q = p.build_quality().unwrap();
    let data = p.sample(8, seed).unwrap();
    let kernel = SimilarityKernel::default();
    let jitter = 1e-6;
    let loss_at = |pts: &[Point]| {
        let qs: Vec<f64> = pts.iter().map(|x| q.evaluate(x)).collect();
        pad_loss(&build_kernel(pts, &qs, 2.0, &kernel, jitter).unwrap()).unwrap()
    };
    let pts = data.points.clone();
    let qs: Vec<f64> = pts.iter().map(|x| q.evaluate(x)).collect();
    let dq: Vec<Point> = pts.iter().map(|x| q.gradient(x)).collect();
    let k = build_kernel(&pts, &qs, 2.0, &kernel, jitter).unwrap();
    let grads = pad_loss_gradients(&k, &pts, &qs, &dq, &kernel).unwrap();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..pts.len() {
        for d in 0..2 {
            let mut up = pts.clone();
            let mut down = pts.clone();
            up[i][d] += h;
            down[i][d] -= h;
            let num = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
            worst = worst.max(rel_err(grads[i][d], num, 1e-3));
        }
    }
    worst
}

/// Random points in a square of half-width `scale`.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            ]
        })
        .collect()
}

/// Largest deviation between `subset_probability` and brute-force
/// normalization over every subset of a 5-point ground set; also returns
/// the total probability.
pub fn dpp_probability_deviation(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = random_points(&mut rng, 5, 1.5);
    let qs: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..1.0)).collect();
    let kernel = build_kernel(&pts, &qs, 2.0, &SimilarityKernel::default(), 0.0).unwrap();
    let l = kernel.matrix();

    // oracle kernel entries written out directly
    let entry = |i: usize, j: usize| rbf(&pts[i], &pts[j], 1.0) * (qs[i] * qs[j]).powf(2.0);
    let subsets: Vec<Vec<usize>> = (0u32..32)
        .map(|mask| (0..5).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    let minor = |s: &Vec<usize>| {
        let m: Vec<Vec<f64>> = s
            .iter()
            .map(|&i| s.iter().map(|&j| entry(i, j)).collect())
            .collect();
        naive_det(&m)
    };
    let total: f64 = subsets.iter().map(minor).sum();
    let mut worst = 0.0f64;
    let mut prob_sum = 0.0;
    for s in &subsets {
        let p = padgan::dpp::subset_probability(l, s).unwrap();
        prob_sum += p;
        worst = worst.max((p - minor(s) / total).abs());
    }
    (worst, prob_sum)
}

/// Exhaustive mean and per-subset standard deviation of the 3-subset
/// log-determinants of a 12-point set.
pub fn exhaustive_diversity(points: &[Point]) -> (f64, f64) {
    let n = points.len();
    let mut values = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let s = [a, b, c];
                let m: Vec<Vec<f64>> = s
                    .iter()
                    .map(|&i| {
                        s.iter()
                            .map(|&j| rbf(&points[i], &points[j], 1.0))
                            .collect()
                    })
                    .collect();
                values.push(naive_det(&m).max(1e-300).ln());
            }
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

pub fn twelve_points() -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    random_points(&mut rng, 12, 1.0)
}
