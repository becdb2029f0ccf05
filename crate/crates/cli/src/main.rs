//! `sparselets` — sparse edge coding of natural images from the command
//! line. One binary with subcommands wiring the whole pipeline; every output
//! gets a sidecar metadata file recording the configuration hash, seed and
//! tool version.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::Digest;

use sparselets_core::bench;
use sparselets_core::config::{parse_homeo_mode, RunConfig};
use sparselets_core::imagecore::{
    apply_circular_mask, load_corpus, load_image, make_circle_in_noise, save_pgm16, whiten, Image,
    SyntheticStimulusSpec,
};
use sparselets_core::loggabor::{BankParams, LogGaborBank};
use sparselets_core::priors::{
    chevron_stats, equalize_orientations, extract_with_prior, orientation_stats, ChevronBinning,
    ChevronHistogram, OrientationHistogram,
};
use sparselets_core::pursuit::{extract, reconstruct, EdgeList};
use sparselets_core::shl::{learn, ImagePatchSampler};

#[derive(Parser)]
#[command(
    name = "sparselets",
    version,
    about = "Sparse edge coding over a log-Gabor pyramid"
)]
struct Cli {
    /// Configuration file (key = value); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. --set bank.n_scales=6 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a sparse edge list from an image (whiten → mask → pursue).
    Extract(ExtractArgs),
    /// Reconstruct an image from an edge list.
    Reconstruct(ReconstructArgs),
    /// Learn a patch dictionary by sparse Hebbian learning.
    Learn(LearnArgs),
    /// Accumulate orientation and co-occurrence statistics over edge lists.
    Stats(StatsArgs),
    /// Equalize an orientation set against a measured histogram.
    Equalize(EqualizeArgs),
    /// Efficiency experiments and parameter sweeps.
    Bench(BenchArgs),
    /// Synthesize the circle-in-noise stimulus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Input image (PGM or PNG grayscale; color is averaged).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output edge list (JSON).
    #[arg(long)]
    edges: PathBuf,
    /// Square working size (central crop).
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "max-edges")]
    max_edges: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Chevron prior (JSON) enabling co-occurrence-guided selection.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Prediction strength when a prior is given.
    #[arg(long)]
    eta: Option<f64>,
    /// Skip whitening and masking (input already preprocessed).
    #[arg(long, default_value_t = false)]
    raw: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Output image (16-bit PGM).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    /// Corpus manifest (one image path per line).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    atoms: Option<usize>,
    /// Homeostasis: none | gain | histogram.
    #[arg(long)]
    homeo: Option<String>,
    /// Output dictionary file.
    #[arg(long)]
    out: PathBuf,
    /// Training log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Image size at which corpus images are loaded.
    #[arg(long, default_value_t = 256)]
    size: usize,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of edge-list JSON files.
    #[arg(long = "edges-dir")]
    edges_dir: PathBuf,
    /// Output chevron histogram (JSON).
    #[arg(long)]
    chevron: Option<PathBuf>,
    /// Output orientation histogram (JSON).
    #[arg(long)]
    orient: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    bins: usize,
}

#[derive(Args)]
struct EqualizeArgs {
    /// Orientation histogram (JSON) to invert.
    #[arg(long)]
    hist: PathBuf,
    #[arg(long, default_value_t = 24)]
    n: usize,
    /// Output orientation set (JSON array of radians).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Which experiment: efficiency | sweep | noise.
    experiment: String,
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for CSV tables.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Swept variable for `sweep`: b_f | b_theta | n_orientations |
    /// n_scales | scale_ratio.
    #[arg(long)]
    variable: Option<String>,
    /// Comma-separated grid values for `sweep`.
    #[arg(long)]
    values: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    clutter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    size: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.shl.seed = seed;
    }

    match &cli.command {
        Command::Extract(args) => cmd_extract(&cfg, args),
        Command::Reconstruct(args) => cmd_reconstruct(&cfg, args),
        Command::Learn(args) => cmd_learn(&cfg, args),
        Command::Stats(args) => cmd_stats(&cfg, args),
        Command::Equalize(args) => cmd_equalize(&cfg, args),
        Command::Bench(args) => cmd_bench(&cfg, args),
        Command::Synth(args) => cmd_synth(&cfg, args),
    }
}

/// Writes `<output>.meta.json` describing the run that produced an output.
fn write_sidecar(cfg: &RunConfig, output: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let text = cfg.to_text();
    let hash = hex(&sha2::Sha256::digest(text.as_bytes()));
    let args: Vec<String> = std::env::args().collect();
    let meta = serde_json::json!({
        "tool": "sparselets",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": hash,
        "seed": cfg.seed,
        "command": args,
    });
    let mut path = output.as_os_str().to_owned();
    path.push(".meta.json");
    std::fs::write(PathBuf::from(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn bank_for(cfg: &RunConfig, size: usize) -> Result<LogGaborBank, Box<dyn std::error::Error>> {
    let params = BankParams {
        n_scales: cfg
            .bank
            .n_scales
            .min(sparselets_core::loggabor::max_feasible_scales(
                cfg.bank.f_max,
                cfg.bank.scale_ratio,
                size,
            )),
        ..cfg.bank.clone()
    };
    Ok(LogGaborBank::build(params, size)?)
}

fn preprocess(cfg: &RunConfig, img: &Image) -> Result<Image, Box<dyn std::error::Error>> {
    let wp = cfg.whitening.for_size(img.size());
    Ok(apply_circular_mask(&whiten(img, &wp)?))
}

fn cmd_extract(cfg: &RunConfig, args: &ExtractArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut pursuit = cfg.pursuit;
    if let Some(v) = args.alpha {
        pursuit.alpha = v;
    }
    if let Some(v) = args.max_edges {
        pursuit.max_edges = v;
    }
    if let Some(v) = args.threshold {
        pursuit.energy_threshold = v;
    }
    let mut cooc = cfg.cooc;
    if let Some(v) = args.eta {
        cooc.eta = v;
    }

    let img = load_image(&args.input, args.size)?;
    let img = if args.raw { img } else { preprocess(cfg, &img)? };
    let bank = bank_for(cfg, args.size)?;
    let list = match &args.prior {
        Some(prior_path) => {
            let prior = ChevronHistogram::load(prior_path)?;
            extract_with_prior(&img, &bank, &prior, &pursuit, &cooc)?
        }
        None => extract(&img, &bank, &pursuit)?,
    };
    list.save(&args.edges)?;
    write_sidecar(cfg, &args.edges)?;
    let curve = sparselets_core::pursuit::energy_curve(&list, pursuit.alpha);
    println!(
        "{} edges in {} steps; residual energy {:.4}",
        list.edges.len(),
        list.steps.len(),
        curve.last().copied().unwrap_or(1.0)
    );
    Ok(())
}

fn cmd_reconstruct(
    cfg: &RunConfig,
    args: &ReconstructArgs,
) -> Result<(), Box<dyn std::error::Error>> {
    let list = EdgeList::load(&args.edges)?;
    let bank = LogGaborBank::build(list.bank_params.clone(), list.image_size)?;
    let img = reconstruct(&list, &bank)?;
    let peak = save_pgm16(&img, &args.out)?;
    write_sidecar(cfg, &args.out)?;
    println!(
        "reconstructed {}x{} image (peak magnitude {peak:.4})",
        img.size(),
        img.size()
    );
    Ok(())
}

fn cmd_learn(cfg: &RunConfig, args: &LearnArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut shl = cfg.shl;
    if let Some(v) = args.steps {
        shl.n_steps = v;
    }
    if let Some(v) = args.atoms {
        shl.n_atoms = v;
    }
    if let Some(name) = &args.homeo {
        shl.homeo_mode = parse_homeo_mode(name)?;
    }
    let corpus = load_corpus(&args.corpus, args.size)?;
    let whitened: Vec<Image> = corpus
        .iter()
        .map(|(_, img)| whiten(img, &cfg.whitening.for_size(img.size())))
        .collect::<Result<_, _>>()?;
    let mut source = ImagePatchSampler::new(whitened, shl.patch_side, shl.seed)?;
    let (dict, log) = learn(&mut source, &shl)?;
    dict.save(&args.out)?;
    write_sidecar(cfg, &args.out)?;
    if let Some(log_path) = &args.log {
        std::fs::write(log_path, log.to_csv())?;
        write_sidecar(cfg, log_path)?;
    }
    println!(
        "learned {} atoms over {} patches of {}x{}",
        dict.n_atoms(),
        shl.n_steps * shl.batch_size,
        shl.patch_side,
        shl.patch_side
    );
    Ok(())
}

fn cmd_stats(cfg: &RunConfig, args: &StatsArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.edges_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with(".meta.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no edge lists found in {}", args.edges_dir.display()).into());
    }
    let lists: Vec<EdgeList> = paths.iter().map(EdgeList::load).collect::<Result<_, _>>()?;
    if let Some(out) = &args.chevron {
        let hist = chevron_stats(&lists, &ChevronBinning::default(), true)?;
        hist.save(out)?;
        write_sidecar(cfg, out)?;
        println!(
            "chevron histogram over {} pairs -> {}",
            hist.n_pairs,
            out.display()
        );
    }
    if let Some(out) = &args.orient {
        let hist = orientation_stats(&lists, args.bins, true)?;
        hist.save(out)?;
        write_sidecar(cfg, out)?;
        println!(
            "orientation histogram ({} bins) -> {}",
            args.bins,
            out.display()
        );
    }
    Ok(())
}

fn cmd_equalize(cfg: &RunConfig, args: &EqualizeArgs) -> Result<(), Box<dyn std::error::Error>> {
    let hist = OrientationHistogram::load(&args.hist)?;
    let thetas = equalize_orientations(&hist, args.n)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&thetas)?)?;
    write_sidecar(cfg, &args.out)?;
    println!(
        "{} equalized orientations -> {}",
        thetas.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(cfg: &RunConfig, args: &BenchArgs) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(&args.out)?;
    let corpus_raw = load_corpus(&args.corpus, args.size)?;
    let corpus: Vec<(String, Image)> = corpus_raw
        .iter()
        .map(|(id, img)| preprocess(cfg, img).map(|v| (id.clone(), v)))
        .collect::<Result<_, _>>()?;
    let bank = bank_for(cfg, args.size)?;
    let grid = bench::log_grid(cfg.pursuit.max_edges);

    match args.experiment.as_str() {
        "efficiency" => {
            let records = bench::efficiency_experiment(&corpus, &bank, &cfg.pursuit, &grid)?;
            let path = args.out.join("efficiency.csv");
            std::fs::write(&path, bench::records_to_csv(&records))?;
            write_sidecar(cfg, &path)?;
            println!("{} rows -> {}", records.len(), path.display());
        }
        "sweep" => {
            let variable = match args.variable.as_deref() {
                Some("b_f") => bench::SweepVariable::BF,
                Some("b_theta") => bench::SweepVariable::BTheta,
                Some("n_orientations") => bench::SweepVariable::NOrientations,
                Some("n_scales") => bench::SweepVariable::NScales,
                Some("scale_ratio") => bench::SweepVariable::ScaleRatio,
                other => return Err(format!("unknown or missing sweep variable {other:?}").into()),
            };
            let values: Vec<f64> = args
                .values
                .as_deref()
                .ok_or("sweep requires --values")?
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()?;
            let spec = bench::SweepSpec::new(variable, values, bank.params().clone());
            let rows = bench::parameter_sweep(&corpus, &spec, &cfg.pursuit)?;
            for row in &rows {
                if let Err(e) = &row.result {
                    eprintln!("sweep value {} failed: {e}", row.value);
                }
            }
            let path = args.out.join("sweep.csv");
            std::fs::write(&path, bench::sweep_to_csv(variable, &rows))?;
            write_sidecar(cfg, &path)?;
            println!("{} sweep rows -> {}", rows.len(), path.display());
        }
        "noise" => {
            let report = bench::noise_robustness(
                &corpus_raw,
                &bank,
                &cfg.pursuit,
                &cfg.whitening.for_size(args.size),
                &grid,
                true,
                cfg.seed,
            )?;
            let clean_path = args.out.join("efficiency_clean.csv");
            let noisy_path = args.out.join("efficiency_noisy.csv");
            std::fs::write(&clean_path, bench::records_to_csv(&report.clean))?;
            std::fs::write(&noisy_path, bench::records_to_csv(&report.noisy))?;
            write_sidecar(cfg, &clean_path)?;
            write_sidecar(cfg, &noisy_path)?;
            println!("paired tables -> {}", args.out.display());
        }
        other => return Err(format!("unknown bench experiment '{other}'").into()),
    }
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> Result<(), Box<dyn std::error::Error>> {
    let bank = bank_for(cfg, args.size)?;
    let n_scales = bank.params().n_scales;
    let spec = SyntheticStimulusSpec {
        radius: args.radius,
        n_clutter: args.clutter,
        clutter_scale_range: (1, (n_scales - 1).min(3)),
        seed: args.seed,
    };
    let img = make_circle_in_noise(&spec, &bank)?;
    save_pgm16(&img, &args.out)?;
    let mut cfg = cfg.clone();
    cfg.seed = args.seed;
    write_sidecar(&cfg, &args.out)?;
    println!("stimulus -> {}", args.out.display());
    Ok(())
}
