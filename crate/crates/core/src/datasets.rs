//! Synthetic training distributions and the benchmark presets that pair them
//! with quality landscapes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::quality::{ring_centers, Domain, GaussianMixtureQuality, Point};
use crate::{Error, Result};

/// Support of a synthetic training distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetDescriptor {
    Ring {
        r_in: f64,
        r_out: f64,
    },
    Grid {
        centers: Vec<Point>,
        cluster_std: f64,
    },
    ThinRing {
        r_in: f64,
        r_out: f64,
    },
}

impl DatasetDescriptor {
    /// Membership in the training support: the annulus for rings, a
    /// three-sigma ball around some cluster center for grids.
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            DatasetDescriptor::Ring { r_in, r_out }
            | DatasetDescriptor::ThinRing { r_in, r_out } => {
                let r = x[0].hypot(x[1]);
                r >= *r_in && r <= *r_out
            }
            DatasetDescriptor::Grid {
                centers,
                cluster_std,
            } => {
                let limit = 3.0 * cluster_std;
                centers
                    .iter()
                    .any(|c| (x[0] - c[0]).hypot(x[1] - c[1]) <= limit)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub points: Vec<Point>,
    pub descriptor: DatasetDescriptor,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_annulus(r_in: f64, r_out: f64, n: usize) -> Result<()> {
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "annulus needs 0 < r_in < r_out (got {r_in}, {r_out})"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    Ok(())
}

fn annulus_points(r_in: f64, r_out: f64, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (r_in * r_in, r_out * r_out);
    (0..n)
        .map(|_| {
            let angle = rng.random_range(0.0..2.0 * PI);
            let r = rng.random_range(a..=b).sqrt();
            [r * angle.cos(), r * angle.sin()]
        })
        .collect()
}

/// Area-uniform samples from the annulus `r_in <= |x| <= r_out`.
pub fn sample_ring(r_in: f64, r_out: f64, n: usize, seed: u64) -> Result<SyntheticDataset> {
    check_annulus(r_in, r_out, n)?;
    Ok(SyntheticDataset {
        points: annulus_points(r_in, r_out, n, seed),
        descriptor: DatasetDescriptor::Ring { r_in, r_out },
        seed,
    })
}

/// Same sampler as [`sample_ring`], tagged as the narrow ring.
pub fn sample_thin_ring(r_in: f64, r_out: f64, n: usize, seed: u64) -> Result<SyntheticDataset> {
    check_annulus(r_in, r_out, n)?;
    Ok(SyntheticDataset {
        points: annulus_points(r_in, r_out, n, seed),
        descriptor: DatasetDescriptor::ThinRing { r_in, r_out },
        seed,
    })
}

/// Each point picks a cluster uniformly and adds isotropic Gaussian noise.
pub fn sample_grid(
    centers: &[Point],
    cluster_std: f64,
    n: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    if centers.is_empty() || n == 0 || !(cluster_std >= 0.0) {
        return Err(Error::InvalidInput(
            "grid needs centers, n >= 1 and cluster_std >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cluster_std).expect("non-negative std");
    let points = (0..n)
        .map(|_| {
            let c = centers[rng.random_range(0..centers.len())];
            [c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]
        })
        .collect();
    Ok(SyntheticDataset {
        points,
        descriptor: DatasetDescriptor::Grid {
            centers: centers.to_vec(),
            cluster_std,
        },
        seed,
    })
}

/// The 3×3 grid `{-0.4, 0, 0.4}^2`.
pub fn grid_centers() -> Vec<Point> {
    let ticks = [-0.4, 0.0, 0.4];
    ticks
        .iter()
        .flat_map(|&x| ticks.iter().map(move |&y| [x, y]))
        .collect()
}

pub const GRID_CLUSTER_STD: f64 = 0.04;
pub const DEFAULT_DATASET_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Example {
    #[serde(rename = "example1")]
    Ring,
    #[serde(rename = "example2")]
    Grid,
    #[serde(rename = "example3")]
    ThinRing,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Ring, Example::Grid, Example::ThinRing];

    pub fn name(self) -> &'static str {
        match self {
            Example::Ring => "example1",
            Example::Grid => "example2",
            Example::ThinRing => "example3",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" | "I" | "1" => Ok(Example::Ring),
            "example2" | "II" | "2" => Ok(Example::Grid),
            "example3" | "III" | "3" => Ok(Example::ThinRing),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

/// Parameters of a ring-shaped Gaussian-mixture quality landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitySpec {
    pub components: usize,
    pub radius: f64,
    pub sigma: f64,
}

/// A training distribution bundled with its quality landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub example: Example,
    pub descriptor: DatasetDescriptor,
    pub quality: QualitySpec,
    pub domain: Domain,
}

pub fn preset(example: Example) -> ExperimentPreset {
    let ring_quality = QualitySpec {
        components: 6,
        radius: 0.4,
        sigma: 0.10,
    };
    let (descriptor, quality) = match example {
        Example::Ring => (
            DatasetDescriptor::Ring {
                r_in: 0.25,
                r_out: 0.5,
            },
            ring_quality,
        ),
        Example::Grid => (
            DatasetDescriptor::Grid {
                centers: grid_centers(),
                cluster_std: GRID_CLUSTER_STD,
            },
            QualitySpec {
                components: 4,
                radius: 0.4,
                sigma: 0.16,
            },
        ),
        Example::ThinRing => (
            DatasetDescriptor::ThinRing {
                r_in: 0.325,
                r_out: 0.375,
            },
            ring_quality,
        ),
    };
    ExperimentPreset {
        example,
        descriptor,
        quality,
        domain: Domain::default(),
    }
}

impl ExperimentPreset {
    pub fn name(&self) -> &'static str {
        self.example.name()
    }

    pub fn build_quality(&self) -> Result<GaussianMixtureQuality> {
        GaussianMixtureQuality::ring(
            self.quality.components,
            self.quality.radius,
            self.quality.sigma,
            &self.domain,
        )
    }

    pub fn quality_centers(&self) -> Result<Vec<Point>> {
        ring_centers(self.quality.components, self.quality.radius)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<SyntheticDataset> {
        match &self.descriptor {
            DatasetDescriptor::Ring { r_in, r_out } => sample_ring(*r_in, *r_out, n, seed),
            DatasetDescriptor::ThinRing { r_in, r_out } => sample_thin_ring(*r_in, *r_out, n, seed),
            DatasetDescriptor::Grid {
                centers,
                cluster_std,
            } => sample_grid(centers, *cluster_std, n, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radius(p: &Point) -> f64 {
        p[0].hypot(p[1])
    }

    #[test]
    fn ring_radii_stay_in_annulus() {
        let d = preset(Example::Ring).sample(20_000, 1).unwrap();
        assert!(d.points.iter().all(|p| (0.25..=0.5).contains(&radius(p))));
        assert!(d.points.iter().all(|p| d.descriptor.contains(p)));
    }

    #[test]
    fn ring_mean_square_radius() {
        let d = sample_ring(0.25, 0.5, 100_000, 2).unwrap();
        let msr = d
            .points
            .iter()
            .map(|p| p[0] * p[0] + p[1] * p[1])
            .sum::<f64>()
            / 1e5;
        let expected = (0.25f64.powi(2) + 0.5f64.powi(2)) / 2.0;
        assert!((expected - 0.15625).abs() < 1e-15);
        assert!((msr - expected).abs() / expected < 0.01);
    }

    #[test]
    fn ring_angles_are_uniform() {
        let n = 100_000;
        let d = sample_ring(0.25, 0.5, n, 3).unwrap();
        let mut bins = [0usize; 16];
        for p in &d.points {
            let a = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            bins[((a / (2.0 * PI) * 16.0) as usize).min(15)] += 1;
        }
        let p = 1.0 / 16.0;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for b in bins {
            assert!((b as f64 - mean).abs() < 3.0 * sd, "bin {b} vs {mean}");
        }
    }

    #[test]
    fn ring_rejects_bad_radii() {
        assert!(sample_ring(0.5, 0.25, 10, 0).is_err());
        assert!(sample_ring(0.0, 0.25, 10, 0).is_err());
        assert!(sample_ring(0.1, 0.25, 0, 0).is_err());
    }

    #[test]
    fn zero_spread_grid_hits_centers() {
        let centers = grid_centers();
        let d = sample_grid(&centers, 0.0, 500, 4).unwrap();
        assert!(d.points.iter().all(|p| centers.contains(p)));
    }

    #[test]
    fn grid_counts_are_balanced() {
        let n = 90_000;
        let centers = grid_centers();
        let d = sample_grid(&centers, GRID_CLUSTER_STD, n, 5).unwrap();
        let mut counts = [0usize; 9];
        for p in &d.points {
            let k = centers
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (p[0] - a.1[0]).hypot(p[1] - a.1[1]);
                    let db = (p[0] - b.1[0]).hypot(p[1] - b.1[1]);
                    da.total_cmp(&db)
                })
                .unwrap()
                .0;
            assert!((p[0] - centers[k][0]).hypot(p[1] - centers[k][1]) < 6.0 * GRID_CLUSTER_STD);
            counts[k] += 1;
        }
        let p = 1.0 / 9.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * sd, "count {c}");
        }
        let mean = d
            .points
            .iter()
            .fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        // per-axis sd of one sample: spread of {-0.4, 0, 0.4} plus cluster noise
        let axis_sd = (2.0 * 0.16 / 3.0 + GRID_CLUSTER_STD.powi(2)).sqrt();
        let se = axis_sd / (n as f64).sqrt();
        assert!((mean[0] / n as f64).abs() < 3.0 * se);
        assert!((mean[1] / n as f64).abs() < 3.0 * se);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = preset(Example::Grid).sample(100, 7).unwrap();
        let b = preset(Example::Grid).sample(100, 7).unwrap();
        let c = preset(Example::Grid).sample(100, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn ring_preset_quality() {
        let q = preset(Example::Ring).build_quality().unwrap();
        assert_eq!(q.num_components(), 6);
        assert!(q.centers().iter().all(|c| (radius(c) - 0.4).abs() < 1e-12));
        assert_eq!(q.sigma(), 0.1);
    }

    #[test]
    fn thin_ring_preset_is_nested() {
        let d = preset(Example::ThinRing).sample(20_000, 9).unwrap();
        assert!(d
            .points
            .iter()
            .all(|p| (0.325..=0.375).contains(&radius(p))));
        // the quality modes sit outside the thin support
        let q = preset(Example::ThinRing).build_quality().unwrap();
        assert!(q.centers().iter().all(|c| !d.descriptor.contains(c)));
    }

    #[test]
    fn four_grid_clusters_are_quality_modes() {
        let p = preset(Example::Grid);
        let modes = p.quality_centers().unwrap();
        let shared = grid_centers()
            .iter()
            .filter(|g| {
                modes
                    .iter()
                    .any(|m| (g[0] - m[0]).hypot(g[1] - m[1]) < 1e-12)
            })
            .count();
        assert_eq!(shared, 4);
        assert_eq!(p.quality.sigma, 0.16);
    }

    #[test]
    fn ring_and_grid_modes_lie_inside_support_hull() {
        // modes at radius 0.4 are inside the outer ring and inside the grid square
        for ex in [Example::Ring, Example::Grid] {
            for m in preset(ex).quality_centers().unwrap() {
                assert!(
                    radius(&m) <= 0.5 && m[0].abs() <= 0.4 + 1e-12 && m[1].abs() <= 0.4 + 1e-12
                );
            }
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for ex in Example::ALL {
            assert_eq!(ex.name().parse::<Example>().unwrap(), ex);
        }
        assert!("example4".parse::<Example>().is_err());
    }
}
