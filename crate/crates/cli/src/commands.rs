use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use densecrf::bench::bench_filter;
use densecrf::eval::{evaluate, LabelMap};
use densecrf::io::{
    load_compatibility, load_grid, load_image, load_labelmap, load_manifest_images, load_unary,
    save_compatibility, save_labelmap, CompatSource, Palette, RunConfig,
};
use densecrf::learning::{
    fit_compatibility, grid_search_kernel_params, FitConfig, SearchConfig, TrainingExample,
};
use densecrf::learning::lbfgs::LbfgsConfig;
use densecrf::{map_labeling, Backend, CompatibilityMatrix, DenseCrf, KernelParams, Normalization};

#[derive(Debug, Parser)]
#[command(name = "densecrf", version, about = "Dense CRF inference, learning and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label an image by mean-field inference
    Infer(InferArgs),
    /// Learn a label compatibility matrix from a training manifest
    LearnCompat(LearnArgs),
    /// Pick appearance-kernel parameters on a validation manifest
    GridSearch(GridArgs),
    /// Score a predicted label map against ground truth
    Eval(EvalArgs),
    /// Time the lattice filter against the exact filter
    BenchFilter(BenchArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 10.0)]
    w1: f64,
    #[arg(long, default_value_t = 61.0)]
    theta_alpha: f64,
    #[arg(long, default_value_t = 11.0)]
    theta_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    #[arg(long, default_value_t = 1.0)]
    theta_gamma: f64,
    /// Mean-field iterations
    #[arg(long, default_value_t = 10)]
    iters: usize,
}

impl KernelArgs {
    fn params(&self) -> KernelParams {
        KernelParams {
            w1: self.w1,
            theta_alpha: self.theta_alpha,
            theta_beta: self.theta_beta,
            w2: self.w2,
            theta_gamma: self.theta_gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Pixelwise,
    None,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    unary: PathBuf,
    /// Output label map (indexed PNG); a class-name `.txt` is written alongside
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    /// `potts` or a path to a compatibility matrix file
    #[arg(long, default_value = "potts")]
    compat: String,
    #[arg(long, value_enum, default_value = "pixelwise")]
    normalization: NormArg,
    /// Write the per-iteration KL estimate as CSV
    #[arg(long)]
    kl_trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output compatibility matrix file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Starting point: `potts` or a compatibility file
    #[arg(long, default_value = "potts")]
    init: String,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// File listing candidates for w1, theta_alpha and theta_beta
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    #[arg(long, default_value_t = 1.0)]
    theta_gamma: f64,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Also write every grid point's accuracy as CSV
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Trimap band widths in pixels; repeatable
    #[arg(long = "trimap-width", num_args = 1..)]
    trimap_width: Vec<usize>,
    /// Include per-class and mean intersection-over-union
    #[arg(long)]
    voc: bool,
    /// Number of classes; defaults to the largest label present plus one
    #[arg(long)]
    labels: Option<usize>,
    /// Append `image,metric,value` rows to this CSV file (header written when the file is new)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer(args) => infer(args),
        Command::LearnCompat(args) => learn(args),
        Command::GridSearch(args) => grid_search(args),
        Command::Eval(args) => eval(args),
        Command::BenchFilter(args) => bench(args),
    }
}

fn compat_source(value: &str) -> CompatSource {
    if value == "potts" {
        CompatSource::Potts
    } else {
        CompatSource::File(PathBuf::from(value))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn infer(args: InferArgs) -> Result<()> {
    let config = RunConfig {
        params: args.kernel.params(),
        iterations: args.kernel.iters,
        compatibility: compat_source(&args.compat),
        normalization: match args.normalization {
            NormArg::Pixelwise => Normalization::Pixelwise,
            NormArg::None => Normalization::None,
        },
        seed: args.seed,
    };
    config.validate()?;
    let image = load_image(&args.image)?;
    let unary = load_unary(&args.unary)?;
    if (image.width(), image.height()) != (unary.width(), unary.height()) {
        bail!(
            "dimension mismatch: image is {}x{} but unary is {}x{}",
            image.width(),
            image.height(),
            unary.width(),
            unary.height()
        );
    }
    let labels = unary.n_labels();
    let mu = config.compatibility(labels)?;
    let model = DenseCrf::for_image(&image, unary, &config.params, Backend::Lattice)?
        .with_compatibility(mu)?
        .with_normalization(config.normalization);
    let q = if let Some(trace_path) = &args.kl_trace {
        let (q, trace) = model.inference_with_trace(config.iterations)?;
        let mut csv = String::from("iteration,kl\n");
        for (i, v) in trace.iter().enumerate() {
            let _ = writeln!(csv, "{i},{v}");
        }
        write(trace_path, &csv)?;
        q
    } else {
        model.inference(config.iterations)?
    };
    let map = LabelMap::from_labels(image.width(), image.height(), &map_labeling(&q))?;
    save_labelmap(&map, &Palette::generated(labels)?, &args.out)?;
    Ok(())
}

fn learn(args: LearnArgs) -> Result<()> {
    let params = args.kernel.params();
    let set = load_manifest_images(&args.manifest)?;
    let mut examples = set
        .iter()
        .map(|item| TrainingExample::from_labeled(item, &params, Backend::Lattice))
        .collect::<densecrf::Result<Vec<_>>>()?;
    let labels = examples[0].model.n_labels();
    let initial = match compat_source(&args.init) {
        CompatSource::Potts => CompatibilityMatrix::potts(labels),
        CompatSource::File(path) => load_compatibility(path)?,
    };
    let config = FitConfig {
        optimizer: LbfgsConfig {
            max_iterations: args.max_iters,
            ..LbfgsConfig::default()
        },
        inference_iterations: args.kernel.iters,
        ..FitConfig::default()
    };
    let outcome = fit_compatibility(&mut examples, &initial, &config)?;
    save_compatibility(&outcome.compatibility, &args.out)?;
    println!("iterations={}", outcome.iterations);
    println!("stop={:?}", outcome.stop);
    if let (Some(first), Some(last)) = (outcome.objective.first(), outcome.objective.last()) {
        println!("objective_start={first:.6}");
        println!("objective_end={last:.6}");
    }
    Ok(())
}

fn grid_search(args: GridArgs) -> Result<()> {
    let grid = load_grid(&args.grid)?;
    let set = load_manifest_images(&args.manifest)?;
    let config = SearchConfig {
        base: KernelParams {
            w2: args.w2,
            theta_gamma: args.theta_gamma,
            ..KernelParams::default()
        },
        iterations: args.iters,
        ..SearchConfig::default()
    };
    let outcome = grid_search_kernel_params(&set, &grid, &config)?;
    if let Some(path) = &args.table {
        write(path, &outcome.to_table())?;
    }
    let (w1, a, b) = outcome.best;
    println!("w1={w1}\ntheta_alpha={a}\ntheta_beta={b}\nglobal={:.4}", outcome.best_accuracy);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let pred = load_labelmap(&args.pred)?;
    let gt = load_labelmap(&args.gt)?;
    let labels = args
        .labels
        .unwrap_or_else(|| pred.label_count().max(gt.label_count()));
    let report = evaluate(&pred, &gt, labels, &args.trimap_width, args.voc)?;
    print!("{}", report.to_key_value());
    if let Some(path) = &args.csv {
        use std::io::Write;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut rows = String::new();
        if f.metadata().map(|m| m.len() == 0).unwrap_or(true) {
            rows.push_str("image,metric,value\n");
        }
        rows.push_str(&report.to_csv_rows(&args.pred.display().to_string()));
        f.write_all(rows.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let report = bench_filter(args.n, args.d, args.l, args.seed)?;
    print!("{}", report.to_key_value());
    Ok(())
}
