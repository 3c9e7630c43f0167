use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gvq::bench::{self, BenchReport, Experiment, ExperimentConfig, MethodSpec, Sweep};
use gvq::{dataset, format, report};
use gvq_core::bow::BowVector;
use gvq_core::sequence::{self, match_frames, SequenceConfig, WorldModel};
use gvq_core::synth::{DescriptorModel, DescriptorModelConfig};
use gvq_core::vocabulary::{build_vocabulary, KMeansConfig};
use gvq_core::{Rng, VectorStore};
use serde::Serialize;

const DEFAULT_CARRY_SIGMA: f64 = sequence::CALIBRATED_CARRY_SIGMA;

#[derive(Parser)]
#[command(name = "gvq", version, about = "Graph-based visual-word quantization toolkit")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GVQ_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample synthetic training descriptors.
    GenTrain {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster training descriptors into a vocabulary with its k-NN graph.
    BuildVocab {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        graph_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic frame sequence with ground-truth feature links.
    GenSeq {
        #[arg(long)]
        frames: usize,
        /// Features per frame.
        #[arg(long)]
        size: usize,
        /// Probability that a feature is carried into the next frame.
        #[arg(long)]
        overlap: f64,
        /// Per-component noise added to carried features.
        #[arg(long, default_value_t = DEFAULT_CARRY_SIGMA)]
        sigma: f64,
        /// Vocabulary anchoring fresh features; without it they are uniform in the unit cube.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Feature dimension when no vocabulary is given.
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = WorldModel::default().anchor_fraction)]
        anchor_fraction: f64,
        #[arg(long, default_value_t = WorldModel::default().anchor_sigma)]
        anchor_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize images into bag-of-words vectors (one JSON line per image).
    Quantize(QuantizeArgs),
    /// Run every configured method and write a report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave timings out of the JSON report.
        #[arg(long)]
        no_wall_clock: bool,
    },
    /// Evaluate every configured method as a grid point and write the frontier.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved report or sweep.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    Gnns,
    Sgnns,
    Kd,
    Hkm,
    Linear,
}

#[derive(clap::Args)]
struct QuantizeArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// A vector file (one image) or a sequence directory (one image per frame).
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    expansions: Option<usize>,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[arg(long, default_value_t = 8)]
    branching: usize,
    #[arg(long, default_value_t = 3)]
    iterations: usize,
    #[arg(long)]
    checks: Option<usize>,
    /// Link source for sgnns hints on sequence directories.
    #[arg(long, value_enum, default_value_t = Hints::Truth)]
    hints: Hints,
    #[arg(long, default_value_t = bench::DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Hints {
    None,
    Truth,
    Ratio,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::GenTrain { count, dim, seed, out } => {
            let model = DescriptorModel::new(DescriptorModelConfig { dim, seed, ..Default::default() })?;
            let train = model.sample(count, &mut Rng::new(seed).split(1));
            format::save_vectors(&out, &train).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::BuildVocab { train, clusters, graph_k, seed, max_iters, tol, out } => {
            let train = format::load_vectors(&train).with_context(|| format!("reading {}", train.display()))?;
            let cfg = KMeansConfig { max_iters, tol, ..KMeansConfig::new(clusters, seed) };
            let (vocab, run) = build_vocabulary(&train, &cfg, graph_k)?;
            format::save_vocabulary(&out, &vocab).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "{} words, objective {:.6}, {} iterations{}",
                vocab.len(),
                run.objective,
                run.iterations,
                if run.converged { "" } else { " (iteration cap reached)" }
            );
        }
        Command::GenSeq { frames, size, overlap, sigma, vocab, dim, anchor_fraction, anchor_sigma, seed, out } => {
            let vocab = match &vocab {
                Some(p) => Some(format::load_vocabulary(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let cfg = SequenceConfig {
                num_frames: frames,
                features_per_frame: size,
                overlap,
                carry_sigma: sigma,
                world: WorldModel { anchor_fraction, anchor_sigma },
                dim: vocab.as_ref().map_or(dim, |v| v.words.dim()),
                seed,
            };
            let ds = sequence::generate(&cfg, vocab.as_ref().map(|v| &v.words))?;
            let generator = serde_json::json!({
                "frames": frames,
                "size": size,
                "overlap": overlap,
                "sigma": sigma,
                "anchor_fraction": anchor_fraction,
                "anchor_sigma": anchor_sigma,
                "dim": cfg.dim,
                "seed": seed,
            });
            dataset::save_dataset(&out, &ds, generator)?;
        }
        Command::Quantize(args) => quantize(args)?,
        Command::Bench { config, out, no_wall_clock } => {
            let cfg = load_config(&config)?;
            let mut report = run_bench(&cfg)?;
            if no_wall_clock {
                report.wall_clock_ms = None;
            }
            print!("{}", report::render_table(&report));
            if let Some(path) = out.or(cfg.output) {
                write_json(&path, &report)?;
            }
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config)?;
            let sweep = run_sweep(&cfg)?;
            print!("{}", report::render_sweep(&sweep));
            if let Some(target) = cfg.target_accuracy {
                for method in sweep.methods() {
                    match sweep.select(method, target, cfg.tolerance) {
                        Some(p) => println!(
                            "{method} at accuracy {target}: {} (accuracy {:.4}, speedup {:.4})",
                            p.params.describe(),
                            p.accuracy,
                            p.speedup
                        ),
                        None => println!("{method}: no frontier point within {} of {target}", cfg.tolerance),
                    }
                }
            }
            if let Some(path) = out.or(cfg.output) {
                write_json(&path, &sweep)?;
            }
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("points").is_some() {
                let sweep: Sweep = serde_json::from_value(value)?;
                print!("{}", report::render_sweep(&sweep));
            } else {
                let rep: BenchReport = serde_json::from_value(value)?;
                match format {
                    ReportFormat::Text => print!("{}", report::render_table(&rep)),
                    ReportFormat::Csv => print!("{}", report::render_csv(&rep)),
                }
            }
        }
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    // Relative data paths are resolved against the config's directory.
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.vocab = base.join(&cfg.vocab);
    cfg.dataset = base.join(&cfg.dataset);
    cfg.validate()?;
    Ok(cfg)
}

fn load_inputs(cfg: &ExperimentConfig) -> Result<(gvq_core::Vocabulary, gvq_core::sequence::SequenceDataset)> {
    let vocab = format::load_vocabulary(&cfg.vocab).with_context(|| format!("reading vocabulary {}", cfg.vocab.display()))?;
    let ds = dataset::load_dataset(&cfg.dataset)?;
    Ok((vocab, ds))
}

fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let (vocab, ds) = load_inputs(cfg)?;
    let exp = Experiment::new(&vocab, &ds, cfg.hint_source, cfg.ratio)?;
    Ok(exp.report(&cfg.methods, &cfg.seeds)?)
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<Sweep> {
    let (vocab, ds) = load_inputs(cfg)?;
    let exp = Experiment::new(&vocab, &ds, cfg.hint_source, cfg.ratio)?;
    Ok(exp.sweep(&cfg.methods, &cfg.seeds, cfg.feature_subset)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ImageRecord {
    image_id: usize,
    words: Vec<(u32, f64)>,
    evals_total: u64,
    evals_per_feature: Vec<u64>,
}

fn quantize(args: QuantizeArgs) -> Result<()> {
    let vocab = format::load_vocabulary(&args.vocab).with_context(|| format!("reading {}", args.vocab.display()))?;
    let (frames, truth): (Vec<VectorStore>, Option<Vec<Vec<(u32, u32)>>>) = if args.features.is_dir() {
        let ds = dataset::load_dataset(&args.features)?;
        (ds.frames, Some(ds.truth_links))
    } else {
        let f = format::load_vectors(&args.features).with_context(|| format!("reading {}", args.features.display()))?;
        (vec![f], None)
    };
    let checks = || args.checks.context("--checks is required for kd and hkm");
    let expansions = || args.expansions.context("--expansions is required for gnns and sgnns");
    let spec = match args.method {
        Method::Linear => MethodSpec::Linear,
        Method::Gnns => MethodSpec::Gnns { expansions: expansions()?, restarts: args.restarts, steps: args.steps },
        Method::Sgnns => MethodSpec::Sgnns { expansions: expansions()?, restarts: args.restarts, steps: args.steps },
        Method::Kd => MethodSpec::Kd { trees: args.trees, checks: checks()? },
        Method::Hkm => MethodSpec::Hkm { branching: args.branching, iterations: args.iterations, checks: checks()? },
    };
    let links = match (args.method, args.hints) {
        (Method::Sgnns, Hints::Truth) => match truth {
            Some(t) => Some(t),
            None => bail!("truth hints need a sequence directory as --features"),
        },
        (Method::Sgnns, Hints::Ratio) => Some(
            std::iter::once(Ok(Vec::new()))
                .chain(frames.windows(2).map(|w| match_frames(&w[0], &w[1], args.ratio).map(|m| m.links)))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let results = bench::with_quantizer(&spec, &vocab, args.seed, |q| {
        bench::quantize_stream(q, &frames, links.as_deref(), args.seed)
    })?;
    let mut out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    let mut rest = results.as_slice();
    for (image_id, frame) in frames.iter().enumerate() {
        let (mine, tail) = rest.split_at(frame.len());
        rest = tail;
        let words: Vec<u32> = mine.iter().map(|r| r.word).collect();
        let evals_per_feature: Vec<u64> = mine.iter().map(|r| r.dist_evals).collect();
        let record = ImageRecord {
            image_id,
            words: BowVector::term_frequencies(&words).entries().to_vec(),
            evals_total: evals_per_feature.iter().sum(),
            evals_per_feature,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
