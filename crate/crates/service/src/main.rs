use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use swinscan::api::{self, DEFAULT_PORT, PORT_ENV};
use swinscan::pdf::validate_pdf;
use swinscan::plot::{bar_chart_svg, line_chart_svg};
use swinscan::report::{clock_from_env, ReportTask};
use swinscan::{PredictRequest, Predictor};
use swinscan_core::data::{split_train_test, synth::write_synthetic_dataset, DatasetManifest, Task};
use swinscan_core::metrics::{render_comparison, table2_detection, MetricsReport};
use swinscan_core::swin::{load_weights, save_weights, ModelWeights, SwinConfig};
use swinscan_core::trainer::{evaluate, log_epoch_metrics, parse_epoch_metrics, train_with_observer, TrainConfig};

/// Brain MRI tumor detection, classification and reporting.
#[derive(Parser)]
#[command(name = "swinscan", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a desk-scale model on a manifest's training split.
    Train(TrainArgs),
    /// Print the nine-measure report for a model on a manifest.
    Eval(EvalArgs),
    /// Run one image through detection, classification and segmentation.
    Predict(PredictArgs),
    /// Serve the JSON API.
    Serve(ServeArgs),
    /// Render a training-history or comparison chart as SVG.
    Plot(PlotArgs),
    /// Write a synthetic bright-disk dataset with its manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seeds the split, the initialization and the batch order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    /// Random flips and right-angle rotations per epoch.
    #[arg(long)]
    augment: bool,
    /// Stop once held-out accuracy reaches this fraction.
    #[arg(long)]
    stop_at_accuracy: Option<f64>,
    /// Per-epoch metrics CSV (defaults to the weights path with .csv).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Evaluate only the held-out split produced by this seed.
    #[arg(long)]
    test_split_seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    weights_detect: PathBuf,
    #[arg(long)]
    weights_classify: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    pdf: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    task: String,
    #[arg(long)]
    pixel_spacing_mm: Option<f64>,
    #[arg(long)]
    patient_ref: Option<String>,
    /// Also write the highlighted scan as a binary PPM.
    #[arg(long)]
    highlight: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long)]
    weights_detect: PathBuf,
    #[arg(long)]
    weights_classify: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["history", "comparison"]))]
struct PlotArgs {
    /// Per-epoch metrics CSV written by `train`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Accuracy bar chart of the reference algorithms and this model.
    #[arg(long)]
    comparison: bool,
    /// Metrics JSON from `eval` for the final bar; the published detection
    /// figures are used otherwise.
    #[arg(long, requires = "comparison")]
    metrics: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|_| format!("expected detect or classify, got {s:?}"))
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn train(a: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    if manifest.task()? != a.task {
        bail!("manifest holds {} rows but --task is {}", manifest.task()?, a.task);
    }
    let (train_rows, test_rows) = split_train_test(&manifest, a.seed)?;
    let train_set = manifest.load_samples(&train_rows)?;
    let test_set = manifest.load_samples(&test_rows)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        seed: a.seed,
        augment: a.augment,
        stop_at_accuracy: a.stop_at_accuracy,
        ..TrainConfig::default()
    };
    let weights = ModelWeights::init(&SwinConfig::desk(a.task.num_classes()), a.seed)?;
    eprintln!("training on {} images, evaluating on {}", train_set.len(), test_set.len());
    let (weights, history) = train_with_observer(weights, &train_set, &test_set, &config, |m| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  accuracy {:.4}  f1 {:.4}",
            m.epoch, m.mean_loss, m.accuracy, m.f1
        );
    })?;
    save_weights(&weights, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let history_path = a.history.unwrap_or_else(|| a.out.with_extension("csv"));
    log_epoch_metrics(&history, &history_path)?;
    let (_, report) = evaluate(&weights, &test_set)?;
    println!("{}", report.to_json());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let rows = match a.test_split_seed {
        Some(seed) => split_train_test(&manifest, seed)?.1,
        None => manifest.entries().to_vec(),
    };
    let weights = load_weights(&a.weights).with_context(|| format!("reading {}", a.weights.display()))?;
    let samples = manifest.load_samples(&rows)?;
    let (_, report) = evaluate(&weights, &samples)?;
    println!("{}", report.to_json());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let predictor = Predictor::load(&a.weights_detect, &a.weights_classify, clock_from_env())?;
    let bytes = std::fs::read(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let mut req = PredictRequest::new(&bytes, ReportTask::parse(&a.task)?);
    req.pixel_spacing_mm = a.pixel_spacing_mm;
    req.patient_ref = a.patient_ref;
    let out = predictor.predict(&req)?;
    if let Some(path) = &a.pdf {
        let pdf = out.pdf()?;
        validate_pdf(&pdf).context("emitted PDF failed validation")?;
        std::fs::write(path, pdf).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.highlight {
        std::fs::write(path, out.segmentation.highlighted_p6())?;
    }
    print!("{}", out.report.to_json());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let predictor = Arc::new(Predictor::load(&a.weights_detect, &a.weights_classify, clock_from_env())?);
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(api::serve(addr, predictor))
        .with_context(|| format!("serving on {addr}"))
}

fn plot(a: PlotArgs) -> Result<()> {
    let svg = if let Some(path) = &a.history {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        line_chart_svg(&parse_epoch_metrics(&text)?)?
    } else {
        let ours = match &a.metrics {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<MetricsReport>(&text).context("parsing metrics JSON")?
            }
            None => table2_detection(),
        };
        bar_chart_svg(&render_comparison(&ours))?
    };
    std::fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let manifest = write_synthetic_dataset(&a.out, a.task, a.count, a.seed)?;
    eprintln!("wrote {} images to {}", manifest.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
        Command::Plot(a) => plot(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
