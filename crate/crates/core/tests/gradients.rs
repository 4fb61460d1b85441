mod common;

use common::{network_fd_errors, pad_fd_error, quality_fd_error};
use padgan::datasets::Example;
use padgan::nn::OutputActivation;

const TOL: f64 = 1e-3;

#[test]
fn generator_shape_matches_finite_differences() {
    for seed in 0..20 {
        let (p, i) = network_fd_errors(&[5, 64, 64, 2], OutputActivation::Identity, seed, 40);
        assert!(
            p < TOL && i < TOL,
            "seed {seed}: params {p:e}, inputs {i:e}"
        );
    }
}

#[test]
fn discriminator_shape_matches_finite_differences() {
    for seed in 0..20 {
        let (p, i) = network_fd_errors(&[2, 64, 64, 1], OutputActivation::Sigmoid, seed, 40);
        assert!(
            p < TOL && i < TOL,
            "seed {seed}: params {p:e}, inputs {i:e}"
        );
    }
}

#[test]
fn small_networks_match_finite_differences_on_every_parameter() {
    for seed in 0..20 {
        let (p, i) = network_fd_errors(&[3, 7, 5, 2], OutputActivation::Sigmoid, seed, 200);
        assert!(
            p < TOL && i < TOL,
            "seed {seed}: params {p:e}, inputs {i:e}"
        );
    }
}

#[test]
fn quality_gradients_match_finite_differences() {
    for ex in Example::ALL {
        let e = quality_fd_error(ex, 100, 3);
        assert!(e < TOL, "{ex}: {e:e}");
    }
}

#[test]
fn dpp_loss_gradients_match_finite_differences() {
    for seed in 0..100 {
        let e = pad_fd_error(seed);
        assert!(e < TOL, "batch {seed}: {e:e}");
    }
}
