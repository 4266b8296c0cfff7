use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use glyphformer::experiment::{
    compare_formats, compute_splits, evaluate, font_records, realize, train, ExperimentError,
    Manifest, MetricsReport, TrainProfile,
};
use glyphformer::model::Checkpoint;
use glyphformer::outline::{convert, to_svg_path, Converted, Representation};
use glyphformer::parse_font;

mod plot;

const EXIT_INPUT: u8 = 2;
const EXIT_TRAINING: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "glyphformer", about = "TrueType outline extraction, conversion, and classification")]
struct Cli {
    /// Override the manifest's random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report artifacts
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Training scale: paper (512 epochs, batch 1024) or desk (64 epochs,
    /// batch 256, 500 glyphs per font)
    #[arg(long, global = true, value_enum, default_value = "desk")]
    preset: Preset,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Original,
    Decomposed,
    Segmented,
    Postscript,
}

impl Format {
    fn rep(self) -> Representation {
        match self {
            Format::Original => Representation::OriginalTT,
            Format::Decomposed => Representation::DecomposedTT,
            Format::Segmented => Representation::SegmentedTT,
            Format::Postscript => Representation::PostScript,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Print a font summary and per-glyph statistics
    Inspect {
        font: PathBuf,
        /// Codepoint to detail, e.g. U+0041
        #[arg(long)]
        glyph: Option<String>,
        /// Also write the glyph's cubic outline as an SVG file
        #[arg(long)]
        svg: bool,
    },
    /// Dump token records for every usable glyph as line-delimited JSON
    Convert {
        font: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier from a manifest
    Train {
        manifest: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Evaluate a checkpoint on one split of the manifest's dataset
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
    },
    /// Train and evaluate all four outline representations on shared splits
    Compare {
        manifest: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    if let Ok(threads) = std::env::var("GLYPHFORMER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring invalid GLYPHFORMER_THREADS={threads}"),
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                ExperimentError::Divergence { .. } => EXIT_TRAINING,
                ExperimentError::ConfigMismatch(_) => EXIT_CONFIG,
                _ => EXIT_INPUT,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Inspect { font, glyph, svg } => inspect(cli, font, glyph.as_deref(), *svg),
        Command::Convert { font, format, out } => cmd_convert(font, format.rep(), out),
        Command::Train {
            manifest,
            epochs,
            batch_size,
        } => cmd_train(cli, manifest, *epochs, *batch_size),
        Command::Eval {
            manifest,
            checkpoint,
            split,
        } => cmd_eval(cli, manifest, checkpoint, *split),
        Command::Compare {
            manifest,
            epochs,
            batch_size,
        } => cmd_compare(cli, manifest, *epochs, *batch_size),
    }
}

fn profile_for(cli: &Cli, epochs: Option<usize>, batch_size: Option<usize>) -> TrainProfile {
    let mut p = match cli.preset {
        Preset::Paper => TrainProfile::paper(),
        Preset::Desk => TrainProfile::desk(),
    };
    if let Some(e) = epochs {
        p.epochs = e;
    }
    if let Some(b) = batch_size {
        p.batch_size = b;
    }
    p
}

fn load_manifest(cli: &Cli, path: &Path) -> Result<Manifest, ExperimentError> {
    let mut m = Manifest::load(path)?;
    if let Some(seed) = cli.seed {
        m.seed = seed;
    }
    Ok(m)
}

fn parse_codepoint(s: &str) -> Result<char, ExperimentError> {
    let hex = s.strip_prefix("U+").or_else(|| s.strip_prefix("u+"));
    let value = match hex {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse::<u32>().map_err(|_| u32::from_str_radix(s, 16).unwrap_err()),
    }
    .map_err(|_| ExperimentError::Manifest(format!("cannot parse codepoint {s}")))?;
    char::from_u32(value)
        .ok_or_else(|| ExperimentError::Manifest(format!("invalid codepoint {s}")))
}

fn load_font_file(path: &Path) -> Result<glyphformer::FontFile, ExperimentError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ExperimentError::Manifest(format!("cannot read {}: {e}", path.display())))?;
    parse_font(&bytes).map_err(|source| ExperimentError::FontLoad {
        path: path.display().to_string(),
        source,
    })
}

fn inspect(cli: &Cli, path: &Path, glyph: Option<&str>, svg: bool) -> Result<(), ExperimentError> {
    let font = load_font_file(path)?;
    let codepoints = font.list_codepoints().map_err(|source| ExperimentError::FontLoad {
        path: path.display().to_string(),
        source,
    })?;
    println!(
        "glyphs: {}, codepoints: {}, upm: {}",
        font.num_glyphs,
        codepoints.len(),
        font.units_per_em
    );
    let Some(glyph) = glyph else { return Ok(()) };
    let c = parse_codepoint(glyph)?;
    let gid = font
        .char_to_glyph(c)
        .ok()
        .flatten()
        .ok_or_else(|| ExperimentError::Manifest(format!("codepoint {glyph} not mapped")))?;
    let outline = font.glyph_outline(gid).map_err(|source| ExperimentError::FontLoad {
        path: path.display().to_string(),
        source,
    })?;
    println!("U+{:04X} glyph {} contours {}", c as u32, gid, outline.contours.len());
    for rep in Representation::ALL {
        match convert(&outline, rep) {
            Ok(Converted::Points(o)) => {
                println!("  {}: points={}", rep.name(), o.num_points())
            }
            Ok(Converted::Commands(p)) => {
                println!("  {}: commands={}", rep.name(), p.commands.len())
            }
            Err(e) => println!("  {}: unconvertible ({e})", rep.name()),
        }
    }
    if svg {
        let Ok(Converted::Commands(cubic)) = convert(&outline, Representation::PostScript) else {
            return Err(ExperimentError::Manifest(format!(
                "glyph {glyph} has no cubic form"
            )));
        };
        let upm = font.units_per_em as f64;
        let d = to_svg_path(&cubic, upm);
        let doc = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {upm} {upm}\">\
             <path d=\"{d}\" fill=\"black\"/></svg>\n"
        );
        let out = cli.out_dir.join(format!("glyph_{:04X}.svg", c as u32));
        std::fs::write(&out, doc)?;
        println!("svg: {}", out.display());
    }
    Ok(())
}

fn cmd_convert(font: &Path, rep: Representation, out: &Path) -> Result<(), ExperimentError> {
    let records = font_records(font, rep, 256)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| ExperimentError::Manifest(format!("serialize record: {e}")))?;
        writeln!(w)?;
    }
    w.flush()?;
    log::info!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn write_metrics(
    out_dir: &Path,
    stem: &str,
    outline: &str,
    report: &MetricsReport,
    labels: &[String],
) -> Result<(), ExperimentError> {
    let csv = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row(outline));
    std::fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| ExperimentError::Manifest(format!("serialize report: {e}")))?;
    std::fs::write(out_dir.join(format!("{stem}.json")), json)?;
    std::fs::write(
        out_dir.join(format!("{stem}_confusion.svg")),
        plot::confusion_heatmap(report, labels),
    )?;
    Ok(())
}

fn cmd_train(
    cli: &Cli,
    manifest_path: &Path,
    epochs: Option<usize>,
    batch_size: Option<usize>,
) -> Result<(), ExperimentError> {
    let manifest = load_manifest(cli, manifest_path)?;
    let profile = profile_for(cli, epochs, batch_size);
    let result = train(&manifest, &profile);
    if let Err(ExperimentError::Divergence { epoch, last_good }) = &result {
        let path = cli.out_dir.join("checkpoint_last_good.json");
        last_good.save(&path)?;
        log::error!("diverged at epoch {epoch}; last good checkpoint at {}", path.display());
    }
    let (_, _, outcome) = result?;
    outcome.best.save(&cli.out_dir.join("checkpoint_best.json"))?;
    outcome.last.save(&cli.out_dir.join("checkpoint_final.json"))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(cli.out_dir.join("train_log.jsonl"))?);
    for e in &outcome.log {
        serde_json::to_writer(&mut w, e)
            .map_err(|e| ExperimentError::Manifest(format!("serialize log: {e}")))?;
        writeln!(w)?;
    }
    w.flush()?;
    println!(
        "trained {} epochs; best validation at epoch {}; artifacts in {}",
        outcome.log.len(),
        outcome.best_epoch,
        cli.out_dir.display()
    );
    Ok(())
}

fn cmd_eval(
    cli: &Cli,
    manifest_path: &Path,
    checkpoint: &Path,
    split: Split,
) -> Result<(), ExperimentError> {
    let manifest = load_manifest(cli, manifest_path)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    if ckpt.quantizer.bins != manifest.bins {
        return Err(ExperimentError::ConfigMismatch(format!(
            "checkpoint uses {} bins, manifest {}",
            ckpt.quantizer.bins, manifest.bins
        )));
    }
    let profile = profile_for(cli, None, None);
    let plan = compute_splits(&manifest, profile.glyph_cap)?;
    if plan.labels.len() != ckpt.config.classes {
        return Err(ExperimentError::ConfigMismatch(format!(
            "checkpoint has {} classes, manifest {}",
            ckpt.config.classes,
            plan.labels.len()
        )));
    }
    let dataset = realize(&manifest, &plan, manifest.representation)?;
    let seqs = match split {
        Split::Train => &dataset.train,
        Split::Val => &dataset.val,
        Split::Test => &dataset.test,
    };
    let report = evaluate(&ckpt, seqs)?;
    write_metrics(
        &cli.out_dir,
        "metrics",
        manifest.representation.name(),
        &report,
        &plan.labels,
    )?;
    println!("{}", MetricsReport::CSV_HEADER);
    println!("{}", report.csv_row(manifest.representation.name()));
    Ok(())
}

fn cmd_compare(
    cli: &Cli,
    manifest_path: &Path,
    epochs: Option<usize>,
    batch_size: Option<usize>,
) -> Result<(), ExperimentError> {
    let manifest = load_manifest(cli, manifest_path)?;
    let profile = profile_for(cli, epochs, batch_size);
    let report = compare_formats(&manifest, &profile)?;
    let csv = report.csv();
    std::fs::write(cli.out_dir.join("compare.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| ExperimentError::Manifest(format!("serialize report: {e}")))?;
    std::fs::write(cli.out_dir.join("compare.json"), json)?;
    let series: Vec<(&str, &[_])> = report
        .rows
        .iter()
        .map(|r| (r.representation.name(), r.log.as_slice()))
        .collect();
    std::fs::write(cli.out_dir.join("loss_curves.svg"), plot::loss_curves(&series))?;
    for row in &report.rows {
        std::fs::write(
            cli.out_dir
                .join(format!("confusion_{}.svg", row.representation.name())),
            plot::confusion_heatmap(&row.best_test, &report.labels),
        )?;
    }
    print!("{csv}");
    Ok(())
}
