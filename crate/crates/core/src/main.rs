//! `mcwb` command line: synthetic data generation, the staged training
//! pipeline, encoding, evaluation, and the early-exit benchmark.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcwb::config::PipelineConfig;
use mcwb::model::ModelContainer;
use mcwb::patchio::{load_manifest, DatasetManifest};
use mcwb::pipeline::{
    bench_csv, bench_table, build_codebook_stage, encode_stage, encoded_from_csv, encoded_to_csv,
    evaluate_stage, run_all, run_bench_stage, train_mapper_stage, train_svm_stage, Mode,
};
use mcwb::synth::{generate_dataset, SynthParams};
use mcwb::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mcwb",
    version,
    about = "Featureless video classification: boosted patch-to-codeword mapping with early exit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic drifting-grating dataset.
    GenSynthetic(GenSyntheticArgs),
    /// Cluster train-split descriptors into a codebook.
    BuildCodebook(BuildCodebookArgs),
    /// Train the boosted mapper and its stopping stages.
    TrainMapper(TrainMapperArgs),
    /// Encode videos into histogram rows.
    Encode(EncodeArgs),
    /// Fit the linear one-vs-rest classifier on encoded train rows.
    TrainSvm(TrainSvmArgs),
    /// Report MAP and top-1 accuracy on the test split.
    Evaluate(EvaluateArgs),
    /// Sweep early-exit thresholds and report cost/accuracy rows.
    RunBench(RunBenchArgs),
    /// The whole pipeline in one command.
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Dataset output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    train_videos: usize,
    #[arg(long, default_value_t = 4)]
    test_videos: usize,
    #[arg(long, default_value_t = 12)]
    frames: usize,
    #[arg(long, default_value_t = 72)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Std-dev of additive pixel noise in gray levels.
    #[arg(long, default_value_t = 4.0)]
    noise: f64,
}

#[derive(Args)]
struct BuildCodebookArgs {
    /// Pipeline config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// Model file to write (config + codebook sections).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainMapperArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Existing model with a codebook; required for codebook labeling.
    #[arg(long, conflicts_with = "config")]
    model: Option<PathBuf>,
    /// Fresh config; works stand-alone only with codebookless labeling.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// bow | featureless | codebookless | combined
    #[arg(long, default_value = "featureless")]
    mode: String,
    /// Early-exit threshold override for mapper modes.
    #[arg(long)]
    alpha: Option<f64>,
    /// Histogram CSV to write (one row per video, both splits).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSvmArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Histogram CSV produced by `encode`.
    #[arg(long)]
    histograms: PathBuf,
    /// Model file to write (adds the linear section).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    histograms: PathBuf,
    /// Optional file for the report (always printed to stdout too).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunBenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated early-exit thresholds.
    #[arg(long, default_value = "0.999,0.97,0.9,0.5")]
    alphas: String,
    /// Optional CSV output (alpha,mean_stages,time_per_frame_s,speedup,map).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunAllArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory: model.mcwb, histograms.csv, report.txt.
    #[arg(long)]
    out: PathBuf,
    /// bow | featureless | codebookless | combined
    #[arg(long, default_value = "featureless")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::BuildCodebook(args) => build_codebook(args),
        Command::TrainMapper(args) => train_mapper(args),
        Command::Encode(args) => encode(args),
        Command::TrainSvm(args) => train_svm(args),
        Command::Evaluate(args) => evaluate(args),
        Command::RunBench(args) => run_bench(args),
        Command::RunAll(args) => run_all_cmd(args),
    }
}

fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    alpha: Option<f64>,
) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(alpha) = alpha {
        config.alpha = alpha;
    }
    config.validate()?;
    Ok(config)
}

fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest = load_manifest(path)?;
    println!(
        "manifest: {} videos, {} classes",
        manifest.entries.len(),
        manifest.num_classes()
    );
    Ok(manifest)
}

fn gen_synthetic(args: GenSyntheticArgs) -> Result<()> {
    let params = SynthParams {
        num_classes: args.classes,
        train_videos_per_class: args.train_videos,
        test_videos_per_class: args.test_videos,
        frames_per_video: args.frames,
        width: args.width,
        height: args.height,
        noise: args.noise,
        seed: args.seed,
    };
    let manifest_path = generate_dataset(&args.out, &params)?;
    println!(
        "generated {} classes x {} videos x {} frames ({}x{})",
        params.num_classes,
        params.train_videos_per_class + params.test_videos_per_class,
        params.frames_per_video,
        params.width,
        params.height
    );
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

fn build_codebook(args: BuildCodebookArgs) -> Result<()> {
    let config = load_config(args.config.as_deref(), args.seed, None)?;
    let manifest = read_manifest(&args.manifest)?;
    let codebook = build_codebook_stage(&manifest, &config)?;
    println!("codebook: {} words over {}-dim descriptors", codebook.k(), codebook.dim());
    let mut container = ModelContainer::new(config);
    container.codebook = Some(codebook);
    container.save(&args.out)?;
    println!("wrote model: {}", args.out.display());
    Ok(())
}

fn train_mapper(args: TrainMapperArgs) -> Result<()> {
    let mut container = match &args.model {
        Some(path) => ModelContainer::load(path)?,
        None => {
            let config = load_config(args.config.as_deref(), None, None)?;
            ModelContainer::new(config)
        }
    };
    if let Some(seed) = args.seed {
        container.config.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        container.config.alpha = alpha;
    }
    container.config.validate()?;
    let manifest = read_manifest(&args.manifest)?;
    let ensemble = train_mapper_stage(&manifest, &container.config, container.codebook.as_ref())?;
    println!(
        "mapper: {} stages, {} classes, {}-dim samples",
        ensemble.stages(),
        ensemble.num_classes,
        ensemble.dim
    );
    container.ensemble = Some(ensemble);
    container.save(&args.out)?;
    println!("wrote model: {}", args.out.display());
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let mode = Mode::parse(&args.mode)?;
    let container = ModelContainer::load(&args.model)?;
    let manifest = read_manifest(&args.manifest)?;
    let encoded = encode_stage(&manifest, &container, mode, args.alpha)?;
    let dim = encoded.first().map_or(0, |r| r.values.len());
    println!("encoded {} videos into {}-dim {} rows", encoded.len(), dim, mode.as_str());
    std::fs::write(&args.out, encoded_to_csv(&encoded)).map_err(|e| Error::io(&args.out, e))?;
    println!("wrote histograms: {}", args.out.display());
    Ok(())
}

fn train_svm(args: TrainSvmArgs) -> Result<()> {
    let mut container = ModelContainer::load(&args.model)?;
    if let Some(seed) = args.seed {
        container.config.seed = seed;
    }
    let manifest = read_manifest(&args.manifest)?;
    let text =
        std::fs::read_to_string(&args.histograms).map_err(|e| Error::io(&args.histograms, e))?;
    let encoded = encoded_from_csv(&text, &manifest)?;
    let linear = train_svm_stage(&encoded, manifest.num_classes(), &container.config)?;
    println!("svm: {} classes over {}-dim rows", linear.num_classes(), linear.dim());
    container.linear = Some(linear);
    container.save(&args.out)?;
    println!("wrote model: {}", args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let container = ModelContainer::load(&args.model)?;
    let linear = container
        .linear
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model has no linear section: run train-svm".into()))?;
    let manifest = read_manifest(&args.manifest)?;
    let text =
        std::fs::read_to_string(&args.histograms).map_err(|e| Error::io(&args.histograms, e))?;
    let encoded = encoded_from_csv(&text, &manifest)?;
    let report = evaluate_stage(&encoded, linear, &manifest)?;
    print!("{report}");
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_string()).map_err(|e| Error::io(out, e))?;
        println!("wrote report: {}", out.display());
    }
    Ok(())
}

fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    let mut alphas = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let alpha: f64 = part
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad alpha `{part}` in --alphas")))?;
        alphas.push(alpha);
    }
    if alphas.is_empty() {
        return Err(Error::InvalidInput("--alphas is empty".into()));
    }
    Ok(alphas)
}

fn run_bench(args: RunBenchArgs) -> Result<()> {
    let container = ModelContainer::load(&args.model)?;
    let manifest = read_manifest(&args.manifest)?;
    let alphas = parse_alphas(&args.alphas)?;
    let rows = run_bench_stage(&manifest, &container, &alphas)?;
    print!("{}", bench_table(&rows));
    if let Some(out) = &args.out {
        std::fs::write(out, bench_csv(&rows)).map_err(|e| Error::io(out, e))?;
        println!("wrote bench rows: {}", out.display());
    }
    Ok(())
}

fn run_all_cmd(args: RunAllArgs) -> Result<()> {
    let mode = Mode::parse(&args.mode)?;
    let config = load_config(args.config.as_deref(), args.seed, args.alpha)?;
    let manifest = read_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let (container, encoded, report) = run_all(&manifest, &config, mode)?;

    let model_path = args.out.join("model.mcwb");
    container.save(&model_path)?;
    let histo_path = args.out.join("histograms.csv");
    std::fs::write(&histo_path, encoded_to_csv(&encoded)).map_err(|e| Error::io(&histo_path, e))?;
    let report_path = args.out.join("report.txt");
    std::fs::write(&report_path, report.to_string()).map_err(|e| Error::io(&report_path, e))?;

    print!("{report}");
    println!("wrote model: {}", model_path.display());
    println!("wrote histograms: {}", histo_path.display());
    println!("wrote report: {}", report_path.display());
    Ok(())
}
