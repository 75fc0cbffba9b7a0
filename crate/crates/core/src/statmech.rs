//! Constrained maximum-entropy occupations and Maxwell-Boltzmann shape
//! fitting.
//!
//! `solve_maxent` finds the real-valued occupations that maximize entropy
//! under a fixed total count and fixed total energy; the solution is
//! exponential in the energy levels, `n_i = exp(-alpha - beta * e_i)`. The
//! speed-density evaluators and `fit_mb` use the combined shape parameter
//! `b` in `exp(-b v^2)`; the underlying physical constants are not
//! separately identifiable from a histogram and are never reported.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::Histogram;

/// Energy levels with count and energy constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntProblem {
    levels: Vec<f64>,
    total_count: f64,
    total_energy: f64,
}

impl MaxEntProblem {
    /// Validates and builds a problem.
    ///
    /// Levels must be at least two, finite, and strictly increasing; the
    /// energy must lie strictly inside `(min * N, max * N)`.
    pub fn new(levels: Vec<f64>, total_count: f64, total_energy: f64) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::TooFewLevels);
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidProblem("non-finite energy level".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem(
                "levels must be strictly increasing".into(),
            ));
        }
        if !total_count.is_finite() || total_count <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "total count {total_count} must be positive"
            )));
        }
        let lo = levels[0] * total_count;
        let hi = levels[levels.len() - 1] * total_count;
        if !total_energy.is_finite() || total_energy <= lo || total_energy >= hi {
            return Err(Error::DegenerateEnergy {
                energy: total_energy,
                lo,
                hi,
            });
        }
        Ok(Self {
            levels,
            total_count,
            total_energy,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn total_count(&self) -> f64 {
        self.total_count
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }
}

/// Entropy-maximizing occupations with their Lagrange multipliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxEntSolution {
    pub occupations: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

/// Mean energy of the exponential family at inverse-temperature `beta`,
/// computed with a shifted exponent so nothing overflows.
fn mean_energy(levels: &[f64], beta: f64) -> f64 {
    let shift = if beta >= 0.0 {
        levels[0]
    } else {
        levels[levels.len() - 1]
    };
    let mut weight_sum = 0.0;
    let mut energy_sum = 0.0;
    for &level in levels {
        let w = (-beta * (level - shift)).exp();
        weight_sum += w;
        energy_sum += level * w;
    }
    energy_sum / weight_sum
}

/// Solves for the unique entropy-maximizing occupations.
///
/// `beta` is found by bisection on the mean energy, which is strictly
/// decreasing in `beta`; the bracket is doubled outward from [-1, 1] until it
/// straddles the target, then halved to floating-point collapse.
pub fn solve_maxent(problem: &MaxEntProblem) -> Result<MaxEntSolution> {
    let levels = &problem.levels;
    let n = problem.total_count;
    let target = problem.total_energy / n;
    let span = levels[levels.len() - 1] - levels[0];
    let tolerance = 1e-12 * span;

    let mut lo = -1.0f64; // g(lo) >= target
    let mut hi = 1.0f64; // g(hi) <= target
    while mean_energy(levels, lo) < target {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::DegenerateEnergy {
                energy: problem.total_energy,
                lo: levels[0] * n,
                hi: levels[levels.len() - 1] * n,
            });
        }
    }
    while mean_energy(levels, hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::DegenerateEnergy {
                energy: problem.total_energy,
                lo: levels[0] * n,
                hi: levels[levels.len() - 1] * n,
            });
        }
    }

    let mut beta = 0.5 * (lo + hi);
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket collapsed to adjacent floats
        }
        beta = mid;
        let g = mean_energy(levels, mid);
        if (g - target).abs() <= 0.25 * tolerance {
            break;
        }
        if g > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Occupations via the shifted weights; alpha from normalization.
    let shift = if beta >= 0.0 {
        levels[0]
    } else {
        levels[levels.len() - 1]
    };
    let weights: Vec<f64> = levels.iter().map(|&l| (-beta * (l - shift)).exp()).collect();
    let weight_sum: f64 = weights.iter().sum();
    let occupations: Vec<f64> = weights.iter().map(|w| n * w / weight_sum).collect();
    let ln_partition = -beta * shift + weight_sum.ln();
    let alpha = ln_partition - n.ln();

    Ok(MaxEntSolution {
        occupations,
        alpha,
        beta,
    })
}

/// 2-D speed density `2 b v exp(-b v^2)`; integrates to 1 over [0, inf).
pub fn mb_pdf_2d(v: f64, b: f64) -> f64 {
    debug_assert!(v >= 0.0 && b > 0.0);
    2.0 * b * v * (-b * v * v).exp()
}

/// 3-D speed density `(b/pi)^(3/2) 4 pi v^2 exp(-b v^2)`; integrates to 1.
pub fn mb_pdf_3d(v: f64, b: f64) -> f64 {
    debug_assert!(v >= 0.0 && b > 0.0);
    (b / std::f64::consts::PI).powf(1.5) * 4.0 * std::f64::consts::PI * v * v * (-b * v * v).exp()
}

/// Result of fitting `C v exp(-b v^2)` to histogram counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MBFit {
    /// Fitted amplitude `C`.
    pub amplitude: f64,
    /// Fitted shape parameter `b`.
    pub shape: f64,
    /// `1 - RSS / TSS` on unweighted residuals.
    pub r_squared: f64,
    /// `sqrt(RSS)` on unweighted residuals.
    pub residual_norm: f64,
}

/// Residual weighting for [`fit_mb_weighted`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWeighting {
    /// Plain least squares on raw counts.
    #[default]
    Uniform,
    /// Poisson-style weights `1 / max(count, 1)`.
    Poisson,
}

/// Unweighted least-squares fit of `C i exp(-b i^2)` over bin centers
/// `i = 0..=255`.
pub fn fit_mb(h: &Histogram) -> Result<MBFit> {
    fit_mb_weighted(h, FitWeighting::Uniform)
}

/// Weighted variant of [`fit_mb`]. Reported residuals stay unweighted so the
/// `r_squared` of the two weightings are comparable.
pub fn fit_mb_weighted(h: &Histogram, weighting: FitWeighting) -> Result<MBFit> {
    if h.total() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let y: Vec<f64> = h.counts().iter().map(|&c| c as f64).collect();
    let nonzero = h.counts().iter().filter(|&&c| c > 0).count();
    if h.counts()[0] == h.total() {
        return Err(Error::DegenerateFit(
            "all mass at bin 0, where the model is pinned to zero".into(),
        ));
    }
    if nonzero < 3 {
        return Err(Error::DegenerateFit(format!(
            "only {nonzero} nonzero bins, need at least 3"
        )));
    }
    let weights: Vec<f64> = match weighting {
        FitWeighting::Uniform => vec![1.0; y.len()],
        FitWeighting::Poisson => y.iter().map(|&c| 1.0 / c.max(1.0)).collect(),
    };

    let basis = |b: f64| -> Vec<f64> {
        (0..y.len())
            .map(|i| {
                let x = i as f64;
                x * (-b * x * x).exp()
            })
            .collect()
    };
    let weighted_ss = |c: f64, b: f64| -> f64 {
        let g = basis(b);
        y.iter()
            .zip(&g)
            .zip(&weights)
            .map(|((&yi, &gi), &wi)| wi * (yi - c * gi) * (yi - c * gi))
            .sum()
    };

    // Coarse search over b in log space; the amplitude is linear for fixed b.
    let mut best = (0.0f64, 0.0f64, f64::INFINITY); // (c, b, ss)
    for k in 0..=600 {
        let b = 10f64.powf(-8.0 + k as f64 * (10.0 / 600.0));
        let g = basis(b);
        let (mut num, mut den) = (0.0, 0.0);
        for ((&yi, &gi), &wi) in y.iter().zip(&g).zip(&weights) {
            num += wi * yi * gi;
            den += wi * gi * gi;
        }
        if den <= 0.0 {
            continue;
        }
        let c = num / den;
        let ss = weighted_ss(c, b);
        if ss < best.2 {
            best = (c, b, ss);
        }
    }
    let (mut c, mut b, mut ss) = best;
    if c <= 0.0 {
        return Err(Error::DegenerateFit("no positive amplitude fits".into()));
    }

    // Gauss-Newton refinement with step halving.
    for _ in 0..200 {
        let g = basis(b);
        let (mut jcc, mut jcb, mut jbb, mut rc, mut rb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, ((&yi, &gi), &wi)) in y.iter().zip(&g).zip(&weights).enumerate() {
            let x = i as f64;
            let dc = gi; // d model / d C
            let db = -c * x * x * gi; // d model / d b
            let r = yi - c * gi;
            jcc += wi * dc * dc;
            jcb += wi * dc * db;
            jbb += wi * db * db;
            rc += wi * dc * r;
            rb += wi * db * r;
        }
        let det = jcc * jbb - jcb * jcb;
        if det.abs() < 1e-300 {
            break;
        }
        let mut dc = (jbb * rc - jcb * rb) / det;
        let mut db = (jcc * rb - jcb * rc) / det;
        let mut improved = false;
        for _ in 0..40 {
            let (nc, nb) = (c + dc, b + db);
            if nb > 0.0 && nc > 0.0 {
                let nss = weighted_ss(nc, nb);
                if nss <= ss {
                    let step = (dc / c.abs().max(1e-300))
                        .abs()
                        .max((db / b.abs().max(1e-300)).abs());
                    c = nc;
                    b = nb;
                    ss = nss;
                    improved = true;
                    if step < 1e-10 {
                        return Ok(finish_fit(&y, c, b));
                    }
                    break;
                }
            }
            dc *= 0.5;
            db *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(finish_fit(&y, c, b))
}

fn finish_fit(y: &[f64], c: f64, b: f64) -> MBFit {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let x = i as f64;
            let r = yi - c * x * (-b * x * x).exp();
            r * r
        })
        .sum();
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    MBFit {
        amplitude: c,
        shape: b,
        r_squared,
        residual_norm: rss.sqrt(),
    }
}
