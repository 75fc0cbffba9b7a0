//! Corpus-level scoring: group a directory of images by energy bin, rank
//! within each bin, and compare a labeled corpus against a control corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::load_image;
use crate::measures::{score, Measure};
use crate::search::ENERGY_BINS;

/// Score record for one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredImage {
    pub file: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub score: crate::measures::AestheticScore,
}

/// A file that could not be scored, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub file: String,
    pub error: String,
}

/// One cross-corpus comparison within a shared energy bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub appealing_file: String,
    pub control_file: String,
    pub same_bin: bool,
    pub m_appealing: f64,
    pub m_control: f64,
}

/// Scored corpus with per-bin rankings and optional labeled pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub measure: Measure,
    pub bins: usize,
    /// Every successfully scored file, ordered by file name.
    pub entries: Vec<ScoredImage>,
    /// Energy bin -> entries sorted by the chosen measure, descending;
    /// ties broken by file name.
    pub groups: BTreeMap<usize, Vec<ScoredImage>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<LabeledPair>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub win_fraction: Option<f64>,
    /// Files that failed to load or score; never fatal.
    pub errors: Vec<SkippedFile>,
}

impl CorpusReport {
    /// True when a labeled comparison found no bin shared by both sides.
    pub fn no_shared_bins(&self) -> bool {
        matches!(&self.pairs, Some(p) if p.is_empty())
    }
}

fn is_image_file(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.ends_with(".pgm") || lower.ends_with(".png")
}

/// Scores every image file of a directory in parallel; errors are collected,
/// not fatal. Results come back ordered by file name.
fn score_dir(dir: &Path) -> Result<(Vec<ScoredImage>, Vec<SkippedFile>)> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_file())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| is_image_file(name))
        .collect();
    names.sort();

    let results: Vec<std::result::Result<ScoredImage, SkippedFile>> = names
        .par_iter()
        .map(|name| {
            let attempt = load_image(dir.join(name)).and_then(|img| {
                score(&img).map(|s| ScoredImage {
                    file: name.clone(),
                    width: img.width(),
                    height: img.height(),
                    score: s,
                })
            });
            attempt.map_err(|e| SkippedFile {
                file: name.clone(),
                error: e.to_string(),
            })
        })
        .collect();

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => entries.push(s),
            Err(e) => errors.push(e),
        }
    }
    Ok((entries, errors))
}

fn group(entries: &[ScoredImage], measure: Measure) -> BTreeMap<usize, Vec<ScoredImage>> {
    let mut groups: BTreeMap<usize, Vec<ScoredImage>> = BTreeMap::new();
    for e in entries {
        groups.entry(e.score.l1_energy_bin).or_default().push(e.clone());
    }
    for members in groups.values_mut() {
        members.sort_by(|a, b| {
            b.score
                .m(measure)
                .total_cmp(&a.score.m(measure))
                .then_with(|| a.file.cmp(&b.file))
        });
    }
    groups
}

/// Scores a directory and ranks images inside each energy bin.
pub fn rank_corpus(dir: impl AsRef<Path>, measure: Measure) -> Result<CorpusReport> {
    let dir = dir.as_ref();
    let (mut entries, errors) = score_dir(dir)?;
    if entries.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    let groups = group(&entries, measure);
    Ok(CorpusReport {
        measure,
        bins: ENERGY_BINS,
        entries,
        groups,
        pairs: None,
        win_fraction: None,
        errors,
    })
}

/// Scores two labeled directories and pairs them inside shared energy bins.
///
/// Every (appealing, control) pair sharing a bin is recorded along with both
/// measure values; `win_fraction` is the share of those pairs where the
/// appealing side is strictly larger. When no bin is shared, `pairs` is
/// present but empty and `win_fraction` is absent.
pub fn compare_labeled(
    dir_appealing: impl AsRef<Path>,
    dir_control: impl AsRef<Path>,
    measure: Measure,
) -> Result<CorpusReport> {
    let dir_appealing = dir_appealing.as_ref();
    let dir_control = dir_control.as_ref();
    let (appealing, mut errors_a) = score_dir(dir_appealing)?;
    if appealing.is_empty() {
        return Err(Error::EmptyCorpus(dir_appealing.to_path_buf()));
    }
    let (control, errors_c) = score_dir(dir_control)?;
    if control.is_empty() {
        return Err(Error::EmptyCorpus(dir_control.to_path_buf()));
    }

    let by_bin = |side: &[ScoredImage]| {
        let mut map: BTreeMap<usize, Vec<ScoredImage>> = BTreeMap::new();
        for e in side {
            map.entry(e.score.l1_energy_bin).or_default().push(e.clone());
        }
        map
    };
    let bins_a = by_bin(&appealing);
    let bins_c = by_bin(&control);

    let mut pairs = Vec::new();
    let mut wins = 0usize;
    for (bin, side_a) in &bins_a {
        if let Some(side_c) = bins_c.get(bin) {
            for a in side_a {
                for c in side_c {
                    let (m_a, m_c) = (a.score.m(measure), c.score.m(measure));
                    if m_a > m_c {
                        wins += 1;
                    }
                    pairs.push(LabeledPair {
                        appealing_file: a.file.clone(),
                        control_file: c.file.clone(),
                        same_bin: true,
                        m_appealing: m_a,
                        m_control: m_c,
                    });
                }
            }
        }
    }
    let win_fraction = if pairs.is_empty() {
        None
    } else {
        Some(wins as f64 / pairs.len() as f64)
    };

    let mut entries: Vec<ScoredImage> = appealing
        .into_iter()
        .map(|mut e| {
            e.file = format!("appealing/{}", e.file);
            e
        })
        .chain(control.into_iter().map(|mut e| {
            e.file = format!("control/{}", e.file);
            e
        }))
        .collect();
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    let groups = group(&entries, measure);

    let mut errors: Vec<SkippedFile> = errors_a
        .drain(..)
        .map(|mut e| {
            e.file = format!("appealing/{}", e.file);
            e
        })
        .collect();
    errors.extend(errors_c.into_iter().map(|mut e| {
        e.file = format!("control/{}", e.file);
        e
    }));

    Ok(CorpusReport {
        measure,
        bins: ENERGY_BINS,
        entries,
        groups,
        pairs: Some(pairs),
        win_fraction,
        errors,
    })
}
