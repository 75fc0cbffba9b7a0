//! Histograms over the 0..255 alphabet, Shannon entropy, arrangement
//! multiplicity (exact and Stirling), and the two aesthetic measures.
//!
//! Each pyramid level is reduced to an occupation histogram: `counts[i]` is
//! the number of pixels at intensity `i`, the level energy is
//! `sum(i * counts[i])`. The `m_eq14` measure is the plain sum of the three
//! level entropies in bits; `m_eq15` additionally folds in the level
//! energies after scaling both terms to [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::GrayImage;
use crate::levels;
use crate::search;

/// Size of the intensity alphabet shared by every pyramid level.
pub const ALPHABET: usize = 256;

/// Occupation counts over the 256 intensity levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; ALPHABET],
    total: u64,
    energy: u64,
}

impl Histogram {
    /// Histogram of all pixels of an image.
    pub fn from_image(img: &GrayImage) -> Self {
        let mut counts = [0u64; ALPHABET];
        for &p in img.pixels() {
            counts[p as usize] += 1;
        }
        Self::from_counts(counts)
    }

    /// Histogram from raw counts; total and energy are derived.
    pub fn from_counts(counts: [u64; ALPHABET]) -> Self {
        let total = counts.iter().sum();
        let energy = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| i as u64 * c)
            .sum();
        Self {
            counts,
            total,
            energy,
        }
    }

    pub fn counts(&self) -> &[u64; ALPHABET] {
        &self.counts
    }

    /// Number of pixels counted.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `sum(i * counts[i])`.
    pub fn energy(&self) -> u64 {
        self.energy
    }
}

/// Histogram of an image (operation form of [`Histogram::from_image`]).
pub fn histogram(img: &GrayImage) -> Histogram {
    Histogram::from_image(img)
}

/// Shannon entropy of the normalized histogram, in bits.
///
/// Zero-count levels contribute nothing (the 0 log 0 = 0 convention).
pub fn shannon_entropy(h: &Histogram) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let n = h.total as f64;
    let mut bits = 0.0;
    for &c in h.counts.iter() {
        if c > 0 {
            let p = c as f64 / n;
            bits -= p * p.log2();
        }
    }
    Ok(bits)
}

/// `ln(N!) - sum(ln(n_i!))` in nats, via summed log-factorials.
pub fn log_multiplicity_exact(h: &Histogram) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut out = ln_factorial(h.total);
    for &c in h.counts.iter() {
        if c > 1 {
            out -= ln_factorial(c);
        }
    }
    Ok(out)
}

/// Stirling form `N ln N - N - sum(n_i ln n_i - n_i)` in nats.
pub fn log_multiplicity_stirling(h: &Histogram) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let n = h.total as f64;
    let mut out = n * n.ln() - n;
    for &c in h.counts.iter() {
        if c > 0 {
            let c = c as f64;
            out -= c * c.ln() - c;
        }
    }
    Ok(out)
}

/// `ln(n!)` without forming the factorial.
///
/// Exact table up to 20!, Stirling series beyond; the series error at n = 21
/// is below 1e-12 relative.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 20 {
        let mut f: u64 = 1;
        for k in 2..=n {
            f *= k;
        }
        return (f as f64).ln();
    }
    let n = n as f64;
    let series = 1.0 / (12.0 * n) - 1.0 / (360.0 * n.powi(3)) + 1.0 / (1260.0 * n.powi(5));
    n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + series
}

/// Per-level entropy and energy, raw and scaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub entropy_bits: f64,
    pub energy: u64,
    pub entropy_scaled: f64,
    pub energy_scaled: f64,
    pub pixel_count: u64,
}

/// Scales entropy by the 8-bit maximum and energy by `255 * pixel_count`,
/// the tight attainable bounds for the 0..255 alphabet.
pub fn scale_stats(h: &Histogram, entropy_bits: f64) -> Result<LevelStats> {
    if h.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(LevelStats {
        entropy_bits,
        energy: h.energy,
        entropy_scaled: entropy_bits / 8.0,
        energy_scaled: h.energy as f64 / (255.0 * h.total as f64),
        pixel_count: h.total,
    })
}

/// Which aesthetic measure to rank by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Measure {
    /// Sum of the three level entropies, in bits.
    #[serde(rename = "eq14")]
    Entropy,
    /// Sum of the three scaled entropies plus the three scaled energies.
    #[default]
    #[serde(rename = "eq15")]
    Combined,
}

impl Measure {
    /// The stable token used on the CLI and in serialized reports.
    pub fn token(self) -> &'static str {
        match self {
            Measure::Entropy => "eq14",
            Measure::Combined => "eq15",
        }
    }
}

/// Full score of one image: per-level stats plus both measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AestheticScore {
    /// Stats for pyramid levels 1, 2, 3 in order.
    pub levels: [LevelStats; 3],
    /// Sum of level entropies in bits; ranges over [0, 24].
    #[serde(rename = "m_eq14")]
    pub m_entropy: f64,
    /// Sum of scaled entropies and scaled energies; ranges over [0, 6].
    #[serde(rename = "m_eq15")]
    pub m_combined: f64,
    /// 150-way bin of the scaled level-1 energy.
    pub l1_energy_bin: usize,
}

impl AestheticScore {
    /// Value of the chosen measure.
    pub fn m(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Entropy => self.m_entropy,
            Measure::Combined => self.m_combined,
        }
    }
}

/// Scores an image with the default gradient operator.
pub fn score(img: &GrayImage) -> Result<AestheticScore> {
    score_with(img, levels::GradientKind::default())
}

/// Scores an image with an explicit gradient operator.
pub fn score_with(img: &GrayImage, kind: levels::GradientKind) -> Result<AestheticScore> {
    let pyramid = levels::build_pyramid_with(img, kind)?;
    let mut stats = Vec::with_capacity(3);
    for level in pyramid.levels() {
        let h = Histogram::from_image(level);
        let bits = shannon_entropy(&h)?;
        stats.push(scale_stats(&h, bits)?);
    }
    let levels: [LevelStats; 3] = [stats[0], stats[1], stats[2]];
    let m_entropy = levels.iter().map(|s| s.entropy_bits).sum();
    let m_combined = levels.iter().map(|s| s.entropy_scaled).sum::<f64>()
        + levels.iter().map(|s| s.energy_scaled).sum::<f64>();
    let l1_energy_bin = search::energy_bin(levels[0].energy_scaled)?;
    Ok(AestheticScore {
        levels,
        m_entropy,
        m_combined,
        l1_energy_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn hist_of(values: &[(usize, u64)]) -> Histogram {
        let mut counts = [0u64; ALPHABET];
        for &(i, c) in values {
            counts[i] = c;
        }
        Histogram::from_counts(counts)
    }

    #[test]
    fn histogram_of_zero_image() {
        let h = histogram(&GrayImage::filled(4, 4, 0).unwrap());
        assert_eq!(h.counts()[0], 16);
        assert_eq!(h.counts()[1..].iter().sum::<u64>(), 0);
        assert_eq!((h.total(), h.energy()), (16, 0));
    }

    #[test]
    fn histogram_energy_is_weighted_sum() {
        let h = histogram(&GrayImage::new(2, 2, vec![10, 20, 30, 40]).unwrap());
        assert_eq!((h.total(), h.energy()), (4, 100));
    }

    #[test]
    fn ramp_image_hits_every_level_once() {
        let h = histogram(&GrayImage::new(256, 1, (0..=255).collect()).unwrap());
        assert!(h.counts().iter().all(|&c| c == 1));
        assert_eq!(h.energy(), 32640); // 255 * 256 / 2
    }

    #[test]
    fn entropy_endpoints() {
        let constant = histogram(&GrayImage::filled(5, 5, 42).unwrap());
        assert_eq!(shannon_entropy(&constant).unwrap(), 0.0);

        let uniform = hist_of(&(0..256).map(|i| (i, 3)).collect::<Vec<_>>());
        assert_relative_eq!(shannon_entropy(&uniform).unwrap(), 8.0, max_relative = 1e-12);

        let coin = hist_of(&[(3, 10), (200, 10)]);
        assert_relative_eq!(shannon_entropy(&coin).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let empty = Histogram::from_counts([0; ALPHABET]);
        assert!(matches!(shannon_entropy(&empty), Err(Error::EmptyHistogram)));
        assert!(matches!(
            log_multiplicity_exact(&empty),
            Err(Error::EmptyHistogram)
        ));
        assert!(matches!(
            log_multiplicity_stirling(&empty),
            Err(Error::EmptyHistogram)
        ));
        assert!(matches!(scale_stats(&empty, 0.0), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn exact_multiplicity_small_cases() {
        // single arrangement
        assert_eq!(
            log_multiplicity_exact(&hist_of(&[(7, 12)])).unwrap(),
            0.0
        );
        // 4! / (2! 2!) = 6 by enumeration
        assert_relative_eq!(
            log_multiplicity_exact(&hist_of(&[(0, 2), (1, 2)])).unwrap(),
            6f64.ln(),
            max_relative = 1e-12
        );
        // two arrangements
        assert_relative_eq!(
            log_multiplicity_exact(&hist_of(&[(0, 1), (255, 1)])).unwrap(),
            2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn stirling_multiplicity_small_cases() {
        assert_eq!(
            log_multiplicity_stirling(&hist_of(&[(9, 31)])).unwrap(),
            0.0
        );
        // N ln N - N - sum(n ln n - n) at {2, 2} reduces to 4 ln 2
        assert_relative_eq!(
            log_multiplicity_stirling(&hist_of(&[(0, 2), (1, 2)])).unwrap(),
            4.0 * 2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn stirling_error_at_ten_thousand_uniform() {
        // 10000 pixels spread over all 256 levels (16 bins hold one extra).
        let counts: Vec<(usize, u64)> = (0..256).map(|i| (i, if i < 16 { 40 } else { 39 })).collect();
        let h = hist_of(&counts);
        assert_eq!(h.total(), 10_000);
        let exact = log_multiplicity_exact(&h).unwrap();
        let stirling = log_multiplicity_stirling(&h).unwrap();
        let rel = (stirling - exact).abs() / exact;
        // Frozen from the log-factorial oracle: the gap at this size is
        // about 1.28%, shrinking as counts grow.
        assert_relative_eq!(rel, 0.012774, max_relative = 1e-2);
    }

    #[test]
    fn stirling_matches_exact_within_1pct_for_large_many_bin_histograms() {
        let all_100 = hist_of(&(0..256).map(|i| (i, 100)).collect::<Vec<_>>());
        let uniform_64 = hist_of(&(0..64).map(|i| (i * 4, 1000)).collect::<Vec<_>>());
        let skewed: Vec<(usize, u64)> = (0..256).map(|i| (i, 100 + (i as u64) * 37)).collect();
        for h in [all_100, uniform_64, hist_of(&skewed)] {
            let exact = log_multiplicity_exact(&h).unwrap();
            let stirling = log_multiplicity_stirling(&h).unwrap();
            assert!(((stirling - exact) / exact).abs() < 0.01);
        }
    }

    #[test]
    fn ln_factorial_matches_integer_products() {
        let mut product: u128 = 1;
        for n in 0..=30u64 {
            if n > 0 {
                product *= u128::from(n);
            }
            assert_relative_eq!(
                ln_factorial(n),
                (product as f64).ln(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn scale_stats_endpoints() {
        let uniform = hist_of(&(0..256).map(|i| (i, 2)).collect::<Vec<_>>());
        let bits = shannon_entropy(&uniform).unwrap();
        assert_relative_eq!(
            scale_stats(&uniform, bits).unwrap().entropy_scaled,
            1.0,
            max_relative = 1e-12
        );

        let white = hist_of(&[(255, 9)]);
        assert_eq!(scale_stats(&white, 0.0).unwrap().energy_scaled, 1.0);

        let black = hist_of(&[(0, 9)]);
        assert_eq!(scale_stats(&black, 0.0).unwrap().energy_scaled, 0.0);
    }

    #[test]
    fn score_of_black_and_white_constants() {
        let black = score(&GrayImage::filled(3, 3, 0).unwrap()).unwrap();
        assert_eq!(black.m_entropy, 0.0);
        assert_eq!(black.m_combined, 0.0);
        assert_eq!(black.l1_energy_bin, 0);

        let white = score(&GrayImage::filled(3, 3, 255).unwrap()).unwrap();
        assert_eq!(white.m_entropy, 0.0);
        assert_eq!(white.m_combined, 1.0); // only the L1 energy term survives
        assert_eq!(white.levels[0].energy_scaled, 1.0);
        assert_eq!(white.l1_energy_bin, 149);
    }

    #[test]
    fn score_rejects_tiny_images() {
        let img = GrayImage::filled(2, 3, 0).unwrap();
        assert!(matches!(score(&img), Err(Error::ImageTooSmall { .. })));
    }

    /// Straight-line recomputation of the combined measure, independent of
    /// the score pipeline.
    fn oracle_combined(img: &GrayImage) -> f64 {
        fn grad(p: &[Vec<u8>]) -> Vec<Vec<u8>> {
            let (h, w) = (p.len(), p[0].len());
            let mut out = vec![vec![0u8; w - 1]; h - 1];
            for y in 0..h - 1 {
                for x in 0..w - 1 {
                    let d = (i32::from(p[y][x + 1]) - i32::from(p[y][x])).abs()
                        + (i32::from(p[y + 1][x]) - i32::from(p[y][x])).abs();
                    out[y][x] = d.min(255) as u8;
                }
            }
            out
        }
        let l1: Vec<Vec<u8>> = (0..img.height())
            .map(|y| (0..img.width()).map(|x| img.get(x, y)).collect())
            .collect();
        let l2 = grad(&l1);
        let l3 = grad(&l2);
        let mut m = 0.0;
        for level in [&l1, &l2, &l3] {
            let flat: Vec<u8> = level.iter().flatten().copied().collect();
            let n = flat.len() as f64;
            let mut counts = [0u64; 256];
            let mut energy = 0u64;
            for &v in &flat {
                counts[v as usize] += 1;
                energy += u64::from(v);
            }
            let mut bits = 0.0;
            for &c in &counts {
                if c > 0 {
                    let p = c as f64 / n;
                    bits -= p * p.log2();
                }
            }
            m += bits / 8.0 + energy as f64 / (255.0 * n);
        }
        m
    }

    #[test]
    fn score_agrees_with_straight_line_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let img = GrayImage::from_fn(8, 8, |_, _| rng.gen()).unwrap();
        let s = score(&img).unwrap();
        assert_relative_eq!(s.m_combined, oracle_combined(&img), epsilon = 1e-12);
    }

    #[test]
    fn l1_stats_survive_pixel_permutation_but_the_measure_does_not() {
        let img = GrayImage::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 }).unwrap();
        let mut shuffled = img.pixels().to_vec();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        shuffled.shuffle(&mut rng);
        let img2 = GrayImage::new(8, 8, shuffled).unwrap();

        let (a, b) = (score(&img).unwrap(), score(&img2).unwrap());
        assert_eq!(a.levels[0].entropy_bits, b.levels[0].entropy_bits);
        assert_eq!(a.levels[0].energy, b.levels[0].energy);
        assert_eq!(a.l1_energy_bin, b.l1_energy_bin);
        assert_ne!(a.m_combined, b.m_combined);
    }

    #[test]
    fn identical_images_score_identically() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let img = GrayImage::from_fn(9, 7, |_, _| rng.gen()).unwrap();
        assert_eq!(score(&img).unwrap(), score(&img.clone()).unwrap());
    }

    proptest! {
        #[test]
        fn measures_stay_in_bounds(w in 3u32..20, h in 3u32..20, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap();
            let s = score(&img).unwrap();
            prop_assert!((0.0..=24.0).contains(&s.m_entropy));
            prop_assert!((0.0..=6.0).contains(&s.m_combined));
            prop_assert!(s.l1_energy_bin < 150);
            for level in &s.levels {
                prop_assert!((0.0..=8.0).contains(&level.entropy_bits));
                prop_assert!((0.0..=1.0).contains(&level.entropy_scaled));
                prop_assert!((0.0..=1.0).contains(&level.energy_scaled));
            }
        }

        #[test]
        fn entropy_bounds_multiplicity(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(12, 12, |_, _| rng.gen()).unwrap();
            let h = histogram(&img);
            let shannon_nats = h.total() as f64 * 2f64.ln() * shannon_entropy(&h).unwrap();
            let exact = log_multiplicity_exact(&h).unwrap();
            prop_assert!(shannon_nats + 1e-9 >= exact);
        }
    }
}
