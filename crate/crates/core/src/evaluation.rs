//! Diversity, quality and overall scores of a generated sample set, the
//! out-of-support novelty split, and multi-run aggregation.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetDescriptor;
use crate::dpp::SimilarityKernel;
use crate::quality::{GaussianMixtureQuality, Point, QualityFunction};
use crate::{Error, Result};

/// Determinants below this are treated as degenerate.
pub const DETERMINANT_FLOOR: f64 = 1e-300;

/// Quality level separating high- from low-quality novel samples.
pub const NOVELTY_QUALITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationProtocol {
    /// Number of generated samples `|Y|`.
    pub samples: usize,
    /// Size of each random subset used by the diversity score.
    pub subset_size: usize,
    /// Number of random subsets.
    pub subsets: usize,
    pub bandwidth: f64,
    /// Seed of the subset draws.
    pub seed: u64,
}

impl Default for EvaluationProtocol {
    fn default() -> Self {
        EvaluationProtocol {
            samples: 1000,
            subset_size: 10,
            subsets: 1000,
            bandwidth: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub diversity_score: f64,
    pub quality_score: f64,
    pub overall_score: Option<f64>,
    pub mode_counts: Vec<usize>,
    pub novelty_high_q: f64,
    pub novelty_low_q: f64,
}

impl ScoreReport {
    /// Largest share of samples captured by a single mode interval.
    pub fn max_mode_share(&self, total: usize) -> f64 {
        self.mode_counts.iter().copied().max().unwrap_or(0) as f64 / total as f64
    }
}

/// `log det` of the similarity matrix of `points`, floored at `log(1e-300)`.
pub fn similarity_log_det(points: &[Point], kernel: &SimilarityKernel) -> f64 {
    let det = kernel.matrix(points).lu().determinant();
    if det > DETERMINANT_FLOOR {
        det.ln()
    } else {
        DETERMINANT_FLOOR.ln()
    }
}

/// Mean log-determinant of similarity matrices of random subsets.
///
/// Each subset is drawn without replacement; subsets are drawn independently
/// of each other.
pub fn diversity_score(
    samples: &[Point],
    subset_size: usize,
    n_subsets: usize,
    kernel: &SimilarityKernel,
    seed: u64,
) -> Result<f64> {
    if subset_size < 2 || subset_size > samples.len() {
        return Err(Error::InvalidInput(format!(
            "subset size {subset_size} must be in [2, {}]",
            samples.len()
        )));
    }
    if n_subsets == 0 {
        return Err(Error::InvalidInput("need at least one subset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = Vec::with_capacity(subset_size);
    let mut total = 0.0;
    for _ in 0..n_subsets {
        subset.clear();
        subset.extend(
            index::sample(&mut rng, samples.len(), subset_size)
                .into_iter()
                .map(|i| samples[i]),
        );
        total += similarity_log_det(&subset, kernel);
    }
    Ok(total / n_subsets as f64)
}

/// Mean quality of the samples.
pub fn quality_score<Q: QualityFunction + ?Sized>(samples: &[Point], quality: &Q) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    Ok(samples.iter().map(|x| quality.evaluate(x)).sum::<f64>() / samples.len() as f64)
}

/// Entropy of the shares of samples inside each component's one-sigma ball.
///
/// Samples outside every ball count towards `|Y|` but towards no mode; a
/// sample inside overlapping balls goes to the nearest center.
pub fn overall_score(samples: &[Point], quality: &GaussianMixtureQuality) -> (f64, Vec<usize>) {
    let mut counts = vec![0usize; quality.num_components()];
    for x in samples {
        let (k, d) = quality.nearest_center(x);
        if d <= quality.sigma() {
            counts[k] += 1;
        }
    }
    (entropy_of_counts(&counts, samples.len()), counts)
}

/// `-sum_k (m_k / total) ln(m_k / total)` with `0 ln 0 = 0`.
pub fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

/// Fractions of all samples that fall outside the training support, split
/// into high quality (`q >= 0.5`) and low quality.
pub fn novelty_split<Q: QualityFunction + ?Sized>(
    samples: &[Point],
    descriptor: &DatasetDescriptor,
    quality: &Q,
) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let (mut high, mut low) = (0usize, 0usize);
    for x in samples.iter().filter(|x| !descriptor.contains(x)) {
        if quality.evaluate(x) >= NOVELTY_QUALITY_THRESHOLD {
            high += 1;
        } else {
            low += 1;
        }
    }
    let n = samples.len() as f64;
    (high as f64 / n, low as f64 / n)
}

/// All scores for one generated sample set.
pub fn evaluate_samples(
    samples: &[Point],
    quality: &GaussianMixtureQuality,
    descriptor: &DatasetDescriptor,
    protocol: &EvaluationProtocol,
) -> Result<ScoreReport> {
    let kernel = SimilarityKernel::rbf(protocol.bandwidth)?;
    let diversity = diversity_score(
        samples,
        protocol.subset_size,
        protocol.subsets,
        &kernel,
        protocol.seed,
    )?;
    let quality_mean = quality_score(samples, quality)?;
    let (overall, counts) = overall_score(samples, quality);
    let (high, low) = novelty_split(samples, descriptor, quality);
    Ok(ScoreReport {
        diversity_score: diversity,
        quality_score: quality_mean,
        overall_score: Some(overall),
        mode_counts: counts,
        novelty_high_q: high,
        novelty_low_q: low,
    })
}

/// Mean, sample standard deviation and `mean ± 1.96 std` of one score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ScoreStats {
    /// A single value gets a zero-width interval.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("no runs to aggregate".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() == 1 {
            0.0
        } else {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Ok(Self::from_mean_std(mean, var.sqrt()))
    }

    pub fn from_mean_std(mean: f64, std: f64) -> Self {
        ScoreStats {
            mean,
            std,
            ci_low: mean - 1.96 * std,
            ci_high: mean + 1.96 * std,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// Parses `"mean ± half_width"` (also accepts `+-` and a unicode minus).
    pub fn parse_interval(text: &str) -> Result<Self> {
        let cleaned = text.replace('\u{2212}', "-").replace("+-", "±");
        let mut parts = cleaned.split('±');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.map(str::trim)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("cannot parse interval '{text}'")))
        };
        let mean = parse(parts.next())?;
        let half = parse(parts.next())?;
        Ok(Self::from_mean_std(mean, half / 1.96))
    }
}

impl std::fmt::Display for ScoreStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.half_width())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub runs: usize,
    pub diversity: ScoreStats,
    pub quality: ScoreStats,
    pub overall: Option<ScoreStats>,
}

/// Per-score statistics across runs.
pub fn aggregate_runs(reports: &[ScoreReport]) -> Result<AggregateScores> {
    let collect = |f: fn(&ScoreReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let diversity = ScoreStats::from_values(&collect(|r| r.diversity_score))?;
    let quality = ScoreStats::from_values(&collect(|r| r.quality_score))?;
    let overall: Option<Vec<f64>> = reports.iter().map(|r| r.overall_score).collect();
    Ok(AggregateScores {
        runs: reports.len(),
        diversity,
        quality,
        overall: overall.map(|v| ScoreStats::from_values(&v)).transpose()?,
    })
}

/// The similarity matrix of an explicit subset; exposed for oracles.
pub fn subset_similarity(
    points: &[Point],
    subset: &[usize],
    kernel: &SimilarityKernel,
) -> DMatrix<f64> {
    let chosen: Vec<Point> = subset.iter().map(|&i| points[i]).collect();
    kernel.matrix(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::{ring_centers, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    fn example_one() -> GaussianMixtureQuality {
        GaussianMixtureQuality::ring(6, 0.4, 0.1, &Domain::default()).unwrap()
    }

    #[test]
    fn identical_samples_hit_the_floor() {
        let pts = vec![[0.1, 0.1]; 50];
        let s = diversity_score(&pts, 10, 20, &SimilarityKernel::default(), 0).unwrap();
        assert!((s - DETERMINANT_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn distant_samples_score_zero() {
        let pts: Vec<Point> = (0..30).map(|i| [100.0 * i as f64, 0.0]).collect();
        let s = diversity_score(&pts, 10, 50, &SimilarityKernel::default(), 1).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn diversity_rejects_oversized_subsets() {
        let pts = vec![[0.0, 0.0]; 5];
        assert!(diversity_score(&pts, 6, 10, &SimilarityKernel::default(), 0).is_err());
        assert!(diversity_score(&pts, 1, 10, &SimilarityKernel::default(), 0).is_err());
    }

    #[test]
    fn quality_score_extremes() {
        let q = example_one();
        let at_modes: Vec<Point> = q.centers().iter().cycle().take(60).copied().collect();
        assert!((quality_score(&at_modes, &q).unwrap() - 1.0).abs() < 1e-2);
        let far = vec![[5.0, 5.0]; 10];
        assert!(quality_score(&far, &q).unwrap() < 1e-12);
        assert!(quality_score(&[], &q).is_err());
    }

    #[test]
    fn overall_score_examples() {
        let q = example_one();
        let even: Vec<Point> = q.centers().iter().cycle().take(600).copied().collect();
        let (s, counts) = overall_score(&even, &q);
        assert!((s - 6f64.ln()).abs() < 1e-12);
        assert_eq!(counts, vec![100; 6]);

        let single = vec![q.centers()[2]; 100];
        assert_eq!(overall_score(&single, &q).0, 0.0);

        let mut half_out = even.clone();
        half_out.extend(std::iter::repeat_n([0.0, 0.0], 600));
        let (s, _) = overall_score(&half_out, &q);
        let expected = 6.0 * (1.0 / 12.0) * 12f64.ln();
        assert!((s - expected).abs() < 1e-12);
        assert!((expected - 1.2425).abs() < 1e-4);
    }

    #[test]
    fn novelty_cases() {
        let q = example_one();
        let thin = DatasetDescriptor::ThinRing {
            r_in: 0.325,
            r_out: 0.375,
        };
        let mode = ring_centers(6, 0.4).unwrap()[1];
        assert_eq!(novelty_split(&[mode], &thin, &q), (1.0, 0.0));
        // radius 0.6, bearing halfway between two modes
        let angle = std::f64::consts::PI / 6.0;
        let between = [0.6 * angle.cos(), 0.6 * angle.sin()];
        assert!(q.evaluate(&between) < 0.5);
        assert_eq!(novelty_split(&[between], &thin, &q), (0.0, 1.0));
        let inside = [0.35, 0.0];
        assert_eq!(novelty_split(&[inside], &thin, &q), (0.0, 0.0));
    }

    #[test]
    fn aggregate_statistics() {
        let report = |d: f64| ScoreReport {
            diversity_score: d,
            quality_score: d,
            overall_score: Some(d),
            mode_counts: vec![],
            novelty_high_q: 0.0,
            novelty_low_q: 0.0,
        };
        let same = aggregate_runs(&[report(0.3), report(0.3), report(0.3)]).unwrap();
        assert_eq!(same.quality.ci_low, same.quality.ci_high);

        let two = aggregate_runs(&[report(0.0), report(1.0)]).unwrap();
        assert_eq!(two.diversity.mean, 0.5);
        assert!((two.diversity.std - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((two.overall.unwrap().half_width() - 1.96 * 0.5f64.sqrt()).abs() < 1e-12);

        let one = aggregate_runs(&[report(1.0)]).unwrap();
        assert_eq!(one.quality.std, 0.0);
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn parses_table_intervals() {
        let d = ScoreStats::parse_interval("−57.2489 ± 1.16202").unwrap();
        let q = ScoreStats::parse_interval("0.6955 ± 0.0269").unwrap();
        let o = ScoreStats::parse_interval("1.4897 +- 0.0624").unwrap();
        assert_eq!(d.mean, -57.2489);
        assert!((d.half_width() - 1.16202).abs() < 1e-12);
        assert_eq!(q.mean, 0.6955);
        assert!((o.half_width() - 0.0624).abs() < 1e-12);
        assert!(ScoreStats::parse_interval("nonsense").is_err());
    }

    proptest! {
        #[test]
        fn overall_score_is_permutation_invariant(seed in 0u64..1000) {
            let q = example_one();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..200)
                .map(|_| [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)])
                .collect();
            let (s, _) = overall_score(&pts, &q);
            let mut shuffled = pts.clone();
            shuffled.reverse();
            shuffled.rotate_left(17);
            let mut centers = q.centers().to_vec();
            centers.reverse();
            let permuted = GaussianMixtureQuality::new(centers, 0.1).unwrap();
            let (s2, _) = overall_score(&shuffled, &permuted);
            prop_assert!((s - s2).abs() < 1e-12);
            prop_assert!(s >= 0.0 && s <= 6f64.ln() + 1e-12);
        }

        #[test]
        fn quality_score_is_monotone(seed in 0u64..1000, idx in 0usize..50) {
            let q = example_one();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<Point> = (0..50)
                .map(|_| [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)])
                .collect();
            let before = quality_score(&pts, &q).unwrap();
            let (k, _) = q.nearest_center(&pts[idx]);
            let mu = q.centers()[k];
            // halfway to the nearest mode is strictly better unless already there
            let old = pts[idx];
            pts[idx] = [(old[0] + mu[0]) / 2.0, (old[1] + mu[1]) / 2.0];
            prop_assume!(q.evaluate(&pts[idx]) > q.evaluate(&old));
            prop_assert!(quality_score(&pts, &q).unwrap() > before);
        }

        #[test]
        fn diversity_is_translation_invariant(seed in 0u64..200, dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..40)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let moved: Vec<Point> = pts.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
            let k = SimilarityKernel::default();
            let a = diversity_score(&pts, 5, 30, &k, seed).unwrap();
            let b = diversity_score(&moved, 5, 30, &k, seed).unwrap();
            prop_assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
        }
    }
}
