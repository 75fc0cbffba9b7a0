//! `aesth`: score, rank, compare, and generate simple grayscale patterns,
//! plus the supporting maxent and distribution-fit tooling.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable input,
//! degenerate fit, ...), 3 labeled comparison with no shared energy bin.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aesthetics_core::{
    compare_labeled, evolve, fit_mb_weighted, gradient, load_image, rank_corpus, save_archive,
    save_image, score, solve_maxent, CorpusReport, Error, FitWeighting, GeneratorConfig,
    GeneratorKind, GrayImage, MaxEntProblem, Measure, Result, ScoredImage, ENERGY_BINS,
};

#[derive(Parser)]
#[command(
    name = "aesth",
    version,
    about = "Entropy/energy scoring and generation of grayscale patterns",
    after_help = "Energy binning is fixed at 150 bins of scaled level-1 energy.\n\
                  All randomized commands take --seed; the default is printed so runs stay reproducible."
)]
struct Cli {
    /// Print progress notes to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one image: per-level entropy/energy plus both measures.
    Score {
        /// PGM (binary P5) or PNG file, at least 3x3.
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a directory and rank images within each energy bin.
    Rank {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = MeasureArg::Eq15)]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a labeled corpus against a control corpus, bin by bin.
    Compare {
        /// Directory of aesthetically appealing images.
        appealing: PathBuf,
        /// Directory of control images.
        control: PathBuf,
        #[arg(long, value_enum, default_value_t = MeasureArg::Eq15)]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate patterns, keeping the best of each energy bin.
    Generate {
        /// Archive directory; receives archive.json and bin_<k>.pgm files.
        #[arg(long)]
        out: PathBuf,
        /// Canvas size as WxH.
        #[arg(long, default_value = "64x64", value_parser = parse_size)]
        size: (u32, u32),
        #[arg(long, value_enum, default_value_t = KindArg::BlockMosaic)]
        kind: KindArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        iterations: u64,
        #[arg(long, value_enum, default_value_t = MeasureArg::Eq15)]
        measure: MeasureArg,
    },
    /// Solve for entropy-maximizing occupations under count and energy
    /// constraints.
    Maxent {
        /// Comma-separated, strictly increasing energy levels.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        /// Total occupation count.
        #[arg(long)]
        count: f64,
        /// Total energy; must lie strictly between min(levels)*count and
        /// max(levels)*count.
        #[arg(long)]
        energy: f64,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the 2-D speed-density shape C*v*exp(-b*v^2) to a pyramid-level
    /// histogram.
    FitMb {
        image: PathBuf,
        /// Pyramid level: 1 image, 2 gradient, 3 gradient of gradient.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
        level: u8,
        /// Weight residuals by 1/max(count, 1) instead of uniformly.
        #[arg(long)]
        poisson: bool,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the 256-bin histogram of a pyramid level as CSV.
    Hist {
        image: PathBuf,
        /// Pyramid level: 1 image, 2 gradient, 3 gradient of gradient.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        level: u8,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the selected level as a PGM for inspection.
        #[arg(long)]
        dump_pgm: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    /// Sum of the three level entropies (bits).
    Eq14,
    /// Sum of scaled level entropies plus scaled level energies.
    Eq15,
}

impl From<MeasureArg> for Measure {
    fn from(arg: MeasureArg) -> Self {
        match arg {
            MeasureArg::Eq14 => Measure::Entropy,
            MeasureArg::Eq15 => Measure::Combined,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    UniformNoise,
    BlockMosaic,
    SymmetricTile,
}

impl From<KindArg> for GeneratorKind {
    fn from(arg: KindArg) -> Self {
        match arg {
            KindArg::UniformNoise => GeneratorKind::UniformNoise,
            KindArg::BlockMosaic => GeneratorKind::BlockMosaic,
            KindArg::SymmetricTile => GeneratorKind::SymmetricTile,
        }
    }
}

fn parse_size(raw: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = raw
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{raw}'"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width '{w}'"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height '{h}'"))?;
    if w < 3 || h < 3 {
        return Err(format!("size {w}x{h} too small, need at least 3x3"));
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Score { image, format, out } => {
            let img = load_image(&image)?;
            let scored = ScoredImage {
                file: image.display().to_string(),
                width: img.width(),
                height: img.height(),
                score: score(&img)?,
            };
            let text = match format {
                FormatArg::Json => json_pretty(&scored)?,
                FormatArg::Csv => score_csv(&scored),
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Rank {
            dir,
            measure,
            format,
            out,
        } => {
            let report = rank_corpus(&dir, measure.into())?;
            if verbose {
                eprintln!(
                    "scored {} files, skipped {}, {} occupied bins",
                    report.entries.len(),
                    report.errors.len(),
                    report.groups.len()
                );
            }
            emit_report(&report, format, out.as_deref())?;
            Ok(0)
        }
        Command::Compare {
            appealing,
            control,
            measure,
            format,
            out,
        } => {
            let report = compare_labeled(&appealing, &control, measure.into())?;
            if verbose {
                eprintln!(
                    "{} same-bin pairs, win fraction {:?}",
                    report.pairs.as_ref().map_or(0, Vec::len),
                    report.win_fraction
                );
            }
            emit_report(&report, format, out.as_deref())?;
            if report.no_shared_bins() {
                eprintln!("note: the two corpora share no energy bin");
                return Ok(3);
            }
            Ok(0)
        }
        Command::Generate {
            out,
            size,
            kind,
            seed,
            iterations,
            measure,
        } => {
            let cfg = GeneratorConfig {
                width: size.0,
                height: size.1,
                kind: kind.into(),
                seed,
                iterations,
                measure: measure.into(),
            };
            eprintln!(
                "generating {}x{} {} seed={} iterations={} measure={} bins={}",
                cfg.width,
                cfg.height,
                kind_token(kind),
                cfg.seed,
                cfg.iterations,
                cfg.measure.token(),
                ENERGY_BINS
            );
            let archive = evolve(&cfg)?;
            save_archive(&archive, &out)?;

            #[derive(Serialize)]
            struct GenerateSummary {
                archive: String,
                bins: usize,
                seed: u64,
                iterations: u64,
                occupied: usize,
                top_groups: Vec<usize>,
            }
            let summary = GenerateSummary {
                archive: out.join("archive.json").display().to_string(),
                bins: ENERGY_BINS,
                seed: cfg.seed,
                iterations: cfg.iterations,
                occupied: archive.occupied_count(),
                top_groups: archive.top_groups(10),
            };
            emit(None, &json_pretty(&summary)?)?;
            Ok(0)
        }
        Command::Maxent {
            levels,
            count,
            energy,
            format,
            out,
        } => {
            let problem = MaxEntProblem::new(levels, count, energy)?;
            let solution = solve_maxent(&problem)?;

            #[derive(Serialize)]
            struct MaxEntOutput<'a> {
                levels: &'a [f64],
                count: f64,
                energy: f64,
                alpha: f64,
                beta: f64,
                occupations: &'a [f64],
            }
            let text = match format {
                FormatArg::Json => json_pretty(&MaxEntOutput {
                    levels: problem.levels(),
                    count: problem.total_count(),
                    energy: problem.total_energy(),
                    alpha: solution.alpha,
                    beta: solution.beta,
                    occupations: &solution.occupations,
                })?,
                FormatArg::Csv => {
                    let mut text = String::from("level,occupation\n");
                    for (level, occupation) in problem.levels().iter().zip(&solution.occupations) {
                        let _ = writeln!(text, "{level},{occupation}");
                    }
                    text
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::FitMb {
            image,
            level,
            poisson,
            format,
            out,
        } => {
            let img = load_image(&image)?;
            let level_img = level_image(&img, level)?;
            let hist = aesthetics_core::histogram(&level_img);
            let weighting = if poisson {
                FitWeighting::Poisson
            } else {
                FitWeighting::Uniform
            };
            let fit = fit_mb_weighted(&hist, weighting)?;

            #[derive(Serialize)]
            struct FitOutput {
                file: String,
                level: u8,
                amplitude: f64,
                shape: f64,
                r_squared: f64,
                residual_norm: f64,
            }
            let text = match format {
                FormatArg::Json => json_pretty(&FitOutput {
                    file: image.display().to_string(),
                    level,
                    amplitude: fit.amplitude,
                    shape: fit.shape,
                    r_squared: fit.r_squared,
                    residual_norm: fit.residual_norm,
                })?,
                FormatArg::Csv => {
                    let mut text = String::from("bin,count,fitted\n");
                    for (i, &count) in hist.counts().iter().enumerate() {
                        let x = i as f64;
                        let fitted = fit.amplitude * x * (-fit.shape * x * x).exp();
                        let _ = writeln!(text, "{i},{count},{fitted}");
                    }
                    text
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Hist {
            image,
            level,
            out,
            dump_pgm,
        } => {
            let img = load_image(&image)?;
            let level_img = level_image(&img, level)?;
            if let Some(path) = dump_pgm {
                save_image(&level_img, path)?;
            }
            let hist = aesthetics_core::histogram(&level_img);
            let mut text = String::from("value,count\n");
            for (i, &count) in hist.counts().iter().enumerate() {
                let _ = writeln!(text, "{i},{count}");
            }
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
    }
}

fn kind_token(kind: KindArg) -> &'static str {
    match kind {
        KindArg::UniformNoise => "uniform_noise",
        KindArg::BlockMosaic => "block_mosaic",
        KindArg::SymmetricTile => "symmetric_tile",
    }
}

/// The requested pyramid level of an image; level 1 is the image itself.
fn level_image(img: &GrayImage, level: u8) -> Result<GrayImage> {
    match level {
        1 => Ok(img.clone()),
        2 => gradient(img),
        3 => gradient(&gradient(img)?),
        _ => unreachable!("clap restricts --level to 1..=3"),
    }
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    Ok(text)
}

fn emit(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn score_csv(scored: &ScoredImage) -> String {
    let mut text = String::from(
        "file,width,height,m_eq14,m_eq15,l1_energy_bin,\
         l1_entropy_bits,l1_energy,l2_entropy_bits,l2_energy,l3_entropy_bits,l3_energy\n",
    );
    let s = &scored.score;
    let _ = writeln!(
        text,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        scored.file,
        scored.width,
        scored.height,
        s.m_entropy,
        s.m_combined,
        s.l1_energy_bin,
        s.levels[0].entropy_bits,
        s.levels[0].energy,
        s.levels[1].entropy_bits,
        s.levels[1].energy,
        s.levels[2].entropy_bits,
        s.levels[2].energy,
    );
    text
}

fn emit_report(report: &CorpusReport, format: FormatArg, out: Option<&std::path::Path>) -> Result<()> {
    let text = match format {
        FormatArg::Json => json_pretty(report)?,
        FormatArg::Csv => {
            let mut text = String::from("file,bin,m_eq14,m_eq15,rank_in_bin\n");
            for (bin, members) in &report.groups {
                for (rank, entry) in members.iter().enumerate() {
                    let _ = writeln!(
                        text,
                        "{},{bin},{},{},{}",
                        entry.file,
                        entry.score.m_entropy,
                        entry.score.m_combined,
                        rank + 1
                    );
                }
            }
            text
        }
    };
    emit(out, &text)
}
