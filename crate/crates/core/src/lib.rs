//! Entropy/energy scoring of simple grayscale patterns.
//!
//! An image is expanded into a three-level pyramid (image, gradient,
//! gradient of gradient), each level is histogrammed over the shared 0..255
//! intensity alphabet, and two aesthetic measures are derived from the
//! per-level Shannon entropies and energies. The crate also carries the
//! supporting statistical machinery (constrained maximum-entropy
//! occupations, Maxwell-Boltzmann shape fitting of gradient histograms), a
//! corpus ranker that compares images within equal-energy bins, and an
//! elitist generator that keeps the best pattern per energy bin.

pub mod error;
pub mod image_io;
pub mod levels;
pub mod measures;
pub mod ranker;
pub mod search;
pub mod statmech;

pub use error::{Error, Result};
pub use image_io::{load_image, save_image, save_image_png, GrayImage};
pub use levels::{build_pyramid, build_pyramid_with, gradient, gradient_with, GradientKind, LevelPyramid};
pub use measures::{
    histogram, log_multiplicity_exact, log_multiplicity_stirling, scale_stats, score, score_with,
    shannon_entropy, AestheticScore, Histogram, LevelStats, Measure, ALPHABET,
};
pub use ranker::{compare_labeled, rank_corpus, CorpusReport, LabeledPair, ScoredImage, SkippedFile};
pub use search::{
    energy_bin, evolve, load_archive, propose, save_archive, ArchiveEntry, EnergyBinnedArchive,
    GeneratorConfig, GeneratorKind, ENERGY_BINS,
};
pub use statmech::{
    fit_mb, fit_mb_weighted, mb_pdf_2d, mb_pdf_3d, solve_maxent, FitWeighting, MBFit,
    MaxEntProblem, MaxEntSolution,
};
