//! Quality landscapes over the 2-D design space.
//!
//! The synthetic benchmarks score a design with an unnormalized Gaussian
//! mixture whose modes sit on a ring, rescaled so the best design in the
//! domain scores 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A design in the 2-D synthetic design space.
pub type Point = [f64; 2];

/// Anything that can score a design and report the score's gradient.
pub trait QualityFunction {
    fn evaluate(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
}

/// Axis-aligned rectangle used for normalization and plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Point,
    pub max: Point,
}

impl Domain {
    pub fn square(half_width: f64) -> Self {
        Domain {
            min: [-half_width, -half_width],
            max: [half_width, half_width],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0..2).all(|d| {
            self.min[d].is_finite() && self.max[d].is_finite() && self.min[d] < self.max[d]
        });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("degenerate domain {self:?}")))
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..2).all(|d| x[d] >= self.min[d] && x[d] <= self.max[d])
    }

    fn clamp(&self, x: Point) -> Point {
        [
            x[0].clamp(self.min[0], self.max[0]),
            x[1].clamp(self.min[1], self.max[1]),
        ]
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain::square(0.7)
    }
}

/// `K` points evenly spaced on an origin-centred circle, starting on the +x axis.
pub fn ring_centers(count: usize, radius: f64) -> Result<Vec<Point>> {
    if count == 0 || !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "ring needs count >= 1 and radius > 0 (got {count}, {radius})"
        )));
    }
    Ok((0..count)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / count as f64;
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect())
}

/// Sum of isotropic Gaussian bumps, divided by a normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureQuality {
    centers: Vec<Point>,
    sigma: f64,
    normalizer: f64,
}

impl GaussianMixtureQuality {
    /// Unnormalized mixture (normalizer = 1).
    pub fn new(centers: Vec<Point>, sigma: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidInput(
                "mixture needs at least one center".into(),
            ));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture centers"));
        }
        Ok(GaussianMixtureQuality {
            centers,
            sigma,
            normalizer: 1.0,
        })
    }

    /// Ring-shaped mixture normalized over `domain`.
    pub fn ring(count: usize, radius: f64, sigma: f64, domain: &Domain) -> Result<Self> {
        Self::new(ring_centers(count, radius)?, sigma)?.normalized(domain)
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn num_components(&self) -> usize {
        self.centers.len()
    }

    fn component_weights(&self, x: &Point) -> impl Iterator<Item = (f64, &Point)> + '_ {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let x = *x;
        self.centers.iter().map(move |mu| {
            let d2 = (x[0] - mu[0]).powi(2) + (x[1] - mu[1]).powi(2);
            ((-d2 * inv).exp(), mu)
        })
    }

    /// Mixture value before normalization.
    pub fn raw(&self, x: &Point) -> f64 {
        self.component_weights(x).map(|(w, _)| w).sum()
    }

    /// Sets the normalizer to the maximum of the raw mixture over `domain`:
    /// a 512×512 grid search refined by mean-shift ascent from the best node.
    pub fn normalized(mut self, domain: &Domain) -> Result<Self> {
        domain.validate()?;
        const GRID: usize = 512;
        let step = [
            (domain.max[0] - domain.min[0]) / (GRID - 1) as f64,
            (domain.max[1] - domain.min[1]) / (GRID - 1) as f64,
        ];
        let mut best = (f64::NEG_INFINITY, domain.min);
        for i in 0..GRID {
            for j in 0..GRID {
                let x = [
                    domain.min[0] + i as f64 * step[0],
                    domain.min[1] + j as f64 * step[1],
                ];
                let v = self.raw(&x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        // Mean shift climbs monotonically to a local mode of a Gaussian mixture.
        let mut x = best.1;
        for _ in 0..200 {
            let (mut wsum, mut acc) = (0.0, [0.0, 0.0]);
            for (w, mu) in self.component_weights(&x) {
                wsum += w;
                acc[0] += w * mu[0];
                acc[1] += w * mu[1];
            }
            if wsum <= 0.0 {
                break;
            }
            let next = domain.clamp([acc[0] / wsum, acc[1] / wsum]);
            let moved = (next[0] - x[0]).abs() + (next[1] - x[1]).abs();
            x = next;
            if moved < 1e-15 {
                break;
            }
        }
        let peak = best.0.max(self.raw(&x));
        if !(peak > 0.0) {
            return Err(Error::InvalidInput(
                "mixture vanishes over the whole domain".into(),
            ));
        }
        self.normalizer = peak;
        Ok(self)
    }

    /// Index of the nearest center and the distance to it.
    pub fn nearest_center(&self, x: &Point) -> (usize, f64) {
        self.centers
            .iter()
            .enumerate()
            .map(|(k, mu)| (k, ((x[0] - mu[0]).powi(2) + (x[1] - mu[1]).powi(2)).sqrt()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}

impl QualityFunction for GaussianMixtureQuality {
    fn evaluate(&self, x: &Point) -> f64 {
        self.raw(x) / self.normalizer
    }

    fn gradient(&self, x: &Point) -> Point {
        let s2 = self.sigma * self.sigma;
        let mut g = [0.0, 0.0];
        for (w, mu) in self.component_weights(x) {
            g[0] += w * (mu[0] - x[0]);
            g[1] += w * (mu[1] - x[1]);
        }
        let scale = 1.0 / (s2 * self.normalizer);
        [g[0] * scale, g[1] * scale]
    }
}

/// Discounts a predicted quality by the discriminator's belief that the
/// design is real.
#[inline]
pub fn realisticity_weighted_quality(d_out: f64, q_raw: f64) -> f64 {
    debug_assert!(d_out > 0.0 && d_out < 1.0, "discriminator output {d_out}");
    debug_assert!(q_raw >= 0.0, "quality {q_raw}");
    d_out * q_raw
}
