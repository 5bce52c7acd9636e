//! Command-line entry point. Exit status: 0 success, 1 invalid input or
//! flags, 2 runtime failure.

mod manifest;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

pub use manifest::{file_digest, RunManifest};

use crate::corpus::{
    load_orders, stratified_split, write_orders, Normalizer, Order, DEFAULT_TRAIN_FRACTION,
};
use crate::economics::{
    annual_savings, fte_saved, savings_curve, write_economics_csv, Cents, EconomicParams, Role,
    ECONOMICS_CSV,
};
use crate::evalkit::{
    default_threshold_grid, emit_report, evaluate, read_threshold_sweep, threshold_sweep,
    write_threshold_sweep, EvalReport, ReportFormat, ReportOptions, SweepRow, SWEEP_CSV,
};
use crate::neural::{gradient_check, model_digest, save_model, Matrix, MlpModel, ModelConfig};
use crate::pipeline::{train_level, TrainOptions};
use crate::protocols::{load_hierarchy, write_hierarchy, Level, ProtocolHierarchy};
use crate::router::{DEFAULT_K, MAX_K};
use crate::service::{self, AppState, ServiceConfig};
use crate::synthgen::{default_demo_spec, generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const ORDERS_CSV: &str = "orders.csv";
pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const HIERARCHY_CSV: &str = "hierarchy.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn bad(msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

fn failed(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "protocoling",
    version,
    about = "MRI order protocoling: train, evaluate, route and serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with its hierarchy and a train/test split
    Synth(SynthArgs),
    /// Stratified train/test split of an order CSV
    Split(SplitArgs),
    /// Train a model at one hierarchy level
    Train(TrainArgs),
    /// Evaluate a model and write report tables
    Eval(EvalArgs),
    /// Threshold sweep of AP fraction and accuracy
    Sweep(SweepArgs),
    /// Annual savings and FTE for an AP fraction or a sweep
    Econ(EconArgs),
    /// Serve a model over HTTP
    Serve(ServeArgs),
    /// Verify analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `demo` or a JSON spec file
    #[arg(long, default_value = "demo")]
    pub spec: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed; also seeds the split
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Order CSV, or a directory holding orders.csv
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV, or a directory holding train.csv
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to hierarchy.csv beside the data
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    #[arg(long, default_value = "local", value_parser = parse_level)]
    pub level: Level,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_DROPOUT)]
    pub dropout: f64,
    /// Stopword file replacing the built-in English list
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test CSV, or a directory holding test.csv
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Report directory
    #[arg(long, alias = "report")]
    pub out: PathBuf,
    /// CDS list length for the sweep's hit rate
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value = "both", value_parser = parse_format)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Also print the operating point at this threshold
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EconArgs {
    #[arg(long, default_value = "technologist", value_parser = parse_role)]
    pub role: Role,
    /// Single AP fraction in [0, 1]
    #[arg(long, conflicts_with = "data")]
    pub ap_fraction: Option<f64>,
    /// threshold_sweep.csv, or a report directory holding it
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Where economics.csv goes when --data is given
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fte_hours: Option<f64>,
    /// Dollars per hour
    #[arg(long)]
    pub hourly_rate: Option<f64>,
    #[arg(long)]
    pub minutes_per_exam: Option<f64>,
    #[arg(long)]
    pub annual_volume: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub hierarchy: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Defaults to feedback.jsonl beside the model
    #[arg(long)]
    pub feedback_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
        .map_err(|e: crate::protocols::HierarchyError| e.to_string())
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse()
        .map_err(|e: crate::economics::EconomicsError| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    match s {
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        "both" => Ok(ReportFormat::Both),
        _ => Err(format!("unknown format `{s}` (csv, json, both)")),
    }
}

/// Parse `argv` (program name first), run, and return the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Econ(a) => econ(a),
        Command::Serve(a) => serve(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

/// `path` itself if it is a file, else `path/default_name`.
fn resolve(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

fn hierarchy_path(explicit: Option<&PathBuf>, data: &Path) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None if data.is_dir() => data.join(HIERARCHY_CSV),
        None => data.with_file_name(HIERARCHY_CSV),
    }
}

fn read_orders_arg(path: &Path) -> Result<Vec<Order>, CliError> {
    if !path.exists() {
        return Err(bad(format!("{} does not exist", path.display())));
    }
    load_orders(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn read_hierarchy_arg(path: &Path) -> Result<ProtocolHierarchy, CliError> {
    if !path.exists() {
        return Err(bad(format!("hierarchy {} does not exist", path.display())));
    }
    load_hierarchy(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn read_model_arg(path: &Path) -> Result<(MlpModel, String), CliError> {
    let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let model =
        MlpModel::from_bytes(&bytes).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    Ok((model, model_digest(&bytes)))
}

fn write_orders_file(path: &Path, orders: &[Order]) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    write_orders(&mut w, orders).map_err(failed)?;
    w.flush().map_err(failed)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))
}

fn finish(
    manifest: &mut RunManifest,
    outputs: &[PathBuf],
    manifest_path: &Path,
) -> Result<(), CliError> {
    for p in outputs {
        manifest.output(p).map_err(failed)?;
    }
    manifest.write(manifest_path).map_err(failed)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("synth", None);
    let mut spec = if a.spec == "demo" {
        default_demo_spec()
    } else {
        let path = PathBuf::from(&a.spec);
        let spec = SynthSpec::from_json_file(&path)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        manifest.input(&path).map_err(failed)?;
        spec
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    manifest.seed = Some(spec.seed);
    let corpus = generate(&spec).map_err(bad)?;
    let split = stratified_split(&corpus.orders, a.train_fraction, spec.seed).map_err(bad)?;

    create_dir(&a.out)?;
    let paths: Vec<PathBuf> = [ORDERS_CSV, HIERARCHY_CSV, TRAIN_CSV, TEST_CSV]
        .iter()
        .map(|n| a.out.join(n))
        .collect();
    write_orders_file(&paths[0], &corpus.orders)?;
    let h = File::create(&paths[1]).map_err(failed)?;
    write_hierarchy(h, &corpus.hierarchy).map_err(failed)?;
    write_orders_file(&paths[2], &split.train)?;
    write_orders_file(&paths[3], &split.test)?;

    manifest
        .param("spec", &a.spec)
        .param("train_fraction", a.train_fraction)
        .param("order_count", spec.order_count);
    finish(&mut manifest, &paths, &a.out.join(MANIFEST_JSON))?;
    println!(
        "wrote {} orders ({} train, {} test) and {} protocols to {}",
        corpus.orders.len(),
        split.train.len(),
        split.test.len(),
        corpus.hierarchy.labels(Level::Local).len(),
        a.out.display()
    );
    Ok(())
}

fn split(a: SplitArgs) -> Result<(), CliError> {
    let data = resolve(&a.data, ORDERS_CSV);
    let orders = read_orders_arg(&data)?;
    let split = stratified_split(&orders, a.train_fraction, a.seed).map_err(bad)?;
    create_dir(&a.out)?;
    let paths = vec![a.out.join(TRAIN_CSV), a.out.join(TEST_CSV)];
    write_orders_file(&paths[0], &split.train)?;
    write_orders_file(&paths[1], &split.test)?;
    let mut manifest = RunManifest::new("split", Some(a.seed));
    manifest.input(&data).map_err(failed)?;
    manifest.param("train_fraction", a.train_fraction);
    finish(&mut manifest, &paths, &a.out.join(MANIFEST_JSON))?;
    println!("train {} / test {}", split.train.len(), split.test.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let data = resolve(&a.data, TRAIN_CSV);
    let hpath = hierarchy_path(a.hierarchy.as_ref(), &a.data);
    let orders = read_orders_arg(&data)?;
    let hierarchy = read_hierarchy_arg(&hpath)?;
    let normalizer = match &a.stopwords {
        Some(p) => {
            Normalizer::from_stopword_file(p).map_err(|e| bad(format!("{}: {e}", p.display())))?
        }
        None => Normalizer::default(),
    };
    let options = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        dropout_rate: a.dropout,
        seed: a.seed,
    };
    options.config(1, 1).validate().map_err(bad)?;
    let (model, history) = train_level(&orders, &hierarchy, a.level, &normalizer, &options)
        .map_err(|e| match e {
            crate::pipeline::PipelineError::Neural(n) => failed(n),
            other => bad(other),
        })?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_model(&model, &a.out).map_err(failed)?;

    let mut manifest = RunManifest::new("train", Some(a.seed));
    manifest
        .input(&data)
        .map_err(failed)?
        .input(&hpath)
        .map_err(failed)?;
    if let Some(p) = &a.stopwords {
        manifest.input(p).map_err(failed)?;
    }
    manifest
        .param("level", a.level)
        .param("epochs", a.epochs)
        .param("batch_size", a.batch_size)
        .param("lr", a.lr)
        .param("dropout", a.dropout);
    finish(&mut manifest, std::slice::from_ref(&a.out), &sidecar(&a.out))?;
    let bytes = fs::read(&a.out).map_err(failed)?;
    println!(
        "trained {} model: {} labels, {} features, final loss {:.4}, digest {}",
        a.level,
        model.labels.len(),
        model.vocabulary.dim(),
        history.epoch_losses.last().copied().unwrap_or(f64::NAN),
        model_digest(&bytes)
    );
    Ok(())
}

/// `model.prtm` → `model.prtm.manifest.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

struct Evaluated {
    records: Vec<crate::evalkit::EvalRecord>,
    inputs: [PathBuf; 3],
}

fn load_and_evaluate(
    model_path: &Path,
    data: &Path,
    hierarchy: Option<&PathBuf>,
) -> Result<Evaluated, CliError> {
    let test = resolve(data, TEST_CSV);
    let hpath = hierarchy_path(hierarchy, data);
    let (model, _) = read_model_arg(model_path)?;
    let orders = read_orders_arg(&test)?;
    let h = read_hierarchy_arg(&hpath)?;
    let records = evaluate(&model, &orders, &h, model.level).map_err(bad)?;
    Ok(Evaluated {
        records,
        inputs: [model_path.to_path_buf(), test, hpath],
    })
}

fn add_inputs(manifest: &mut RunManifest, inputs: &[PathBuf]) -> Result<(), CliError> {
    for p in inputs {
        manifest.input(p).map_err(failed)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let ev = load_and_evaluate(&a.model, &a.data, a.hierarchy.as_ref())?;
    let n = ev.records.first().map_or(a.k, |r| r.n_classes());
    if a.k == 0 || a.k > n {
        return Err(bad(format!("--k {} outside [1, {n}]", a.k)));
    }
    let options = ReportOptions {
        k: a.k,
        ..ReportOptions::default()
    };
    let report = EvalReport::build(&ev.records, &options).map_err(bad)?;
    create_dir(&a.out)?;
    let written = emit_report(&report, &a.out, a.format).map_err(failed)?;
    let mut manifest = RunManifest::new("eval", None);
    add_inputs(&mut manifest, &ev.inputs)?;
    manifest.param("k", a.k);
    let outputs: Vec<PathBuf> = written.iter().map(|f| a.out.join(f)).collect();
    finish(&mut manifest, &outputs, &a.out.join(MANIFEST_JSON))?;
    for k in [1, 5, 10] {
        if let Some(acc) = report.accuracy_at(k) {
            println!("top-{k} accuracy {acc:.4}");
        }
    }
    println!(
        "{} records; report in {}",
        report.record_count,
        a.out.display()
    );
    Ok(())
}

fn print_operating_point(rows: &[SweepRow], threshold: f64) {
    let row = rows.iter().min_by(|a, b| {
        (a.threshold - threshold)
            .abs()
            .total_cmp(&(b.threshold - threshold).abs())
    });
    if let Some(r) = row {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        println!(
            "threshold {} : AP fraction {:.4}, AP accuracy {}, CDS hit rate {}",
            r.threshold,
            r.ap_fraction,
            show(r.ap_accuracy),
            show(r.cds_hit_rate)
        );
    }
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let ev = load_and_evaluate(&a.model, &a.data, a.hierarchy.as_ref())?;
    let mut grid = default_threshold_grid();
    if let Some(t) = a.threshold {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(bad("--threshold must be a non-negative number"));
        }
        grid.push(t);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    let rows = threshold_sweep(&ev.records, &grid, a.k).map_err(bad)?;
    create_dir(&a.out)?;
    write_threshold_sweep(&rows, a.out.join(SWEEP_CSV)).map_err(failed)?;

    let mut manifest = RunManifest::new("sweep", None);
    add_inputs(&mut manifest, &ev.inputs)?;
    manifest.param("k", a.k).param("threshold", a.threshold);
    finish(
        &mut manifest,
        &[a.out.join(SWEEP_CSV)],
        &a.out.join(MANIFEST_JSON),
    )?;
    if let Some(t) = a.threshold {
        print_operating_point(&rows, t);
    }
    println!(
        "{} thresholds written to {}",
        rows.len(),
        a.out.join(SWEEP_CSV).display()
    );
    Ok(())
}

fn econ(a: EconArgs) -> Result<(), CliError> {
    let mut params = EconomicParams::preset(a.role);
    if let Some(h) = a.fte_hours {
        params.fte_hours_per_year = h;
    }
    if let Some(r) = a.hourly_rate {
        params.hourly_rate = Cents::from_dollars(r);
    }
    if let Some(m) = a.minutes_per_exam {
        params.minutes_per_exam = m;
    }
    if let Some(v) = a.annual_volume {
        params.annual_volume = v;
    }
    params.validate().map_err(bad)?;

    match (a.ap_fraction, &a.data) {
        (Some(f), None) => {
            let savings = annual_savings(f, &params).map_err(bad)?;
            let fte = fte_saved(f, &params).map_err(bad)?;
            println!("{savings}");
            println!("fte {fte:.4}");
            Ok(())
        }
        (None, Some(data)) => {
            let path = resolve(data, SWEEP_CSV);
            if !path.exists() {
                return Err(bad(format!("{} does not exist", path.display())));
            }
            let rows = read_threshold_sweep(&path).map_err(bad)?;
            let curve = savings_curve(&rows, &params).map_err(bad)?;
            let out_dir = a
                .out
                .clone()
                .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            create_dir(&out_dir)?;
            let out = out_dir.join(ECONOMICS_CSV);
            write_economics_csv(&curve, &out).map_err(failed)?;
            let mut manifest = RunManifest::new("econ", None);
            manifest.input(&path).map_err(failed)?;
            manifest.param("role", a.role).param("params", &params);
            finish(
                &mut manifest,
                std::slice::from_ref(&out),
                &out_dir.join("econ.manifest.json"),
            )?;
            if let Some(best) = curve.first() {
                println!("{} at threshold {}", best.savings, best.threshold);
            }
            println!("{} rows written to {}", curve.len(), out.display());
            Ok(())
        }
        _ => Err(bad("give exactly one of --ap-fraction or --data")),
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    if a.k == 0 || a.k > MAX_K {
        return Err(bad(format!("--k {} outside [1, {MAX_K}]", a.k)));
    }
    let config = ServiceConfig {
        feedback_log: a
            .feedback_log
            .clone()
            .unwrap_or_else(|| service::default_feedback_log(&a.model)),
        model_path: a.model,
        hierarchy_path: a.hierarchy,
        default_threshold: a.threshold,
        default_k: a.k,
    };
    let state = AppState::load(&config).map_err(|e| match e {
        service::ServiceError::Feedback(_) => failed(e),
        other => bad(other),
    })?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(failed)?;
    runtime.block_on(async move {
        let listener = service::bind(&a.bind).await.map_err(failed)?;
        let addr = listener.local_addr().map_err(failed)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        service::serve_with_shutdown(Arc::new(state), listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(failed)
    })
}

fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    use rand::{Rng, SeedableRng};
    let config = ModelConfig {
        seed: a.seed,
        dropout_rate: 0.0,
        ..ModelConfig::new(a.input_dim, a.classes)
    };
    config.validate().map_err(bad)?;
    if a.batch_size < 2 {
        return Err(bad("--batch-size must be at least 2"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let x: Vec<f64> = (0..a.batch_size * a.input_dim)
        .map(|_| f64::from(u8::from(rng.random_bool(0.3))))
        .collect();
    let labels: Vec<usize> = (0..a.batch_size)
        .map(|_| rng.random_range(0..a.classes))
        .collect();
    let batch = Matrix::from_vec(a.batch_size, a.input_dim, x);
    let started = std::time::Instant::now();
    let report = gradient_check(&config, &batch, &labels, a.tolerance).map_err(failed)?;
    for t in &report.tensors {
        println!(
            "{:<20} {:>7} params  max rel err {:.3e}  {}",
            t.name,
            t.len,
            t.max_relative_error,
            if t.passed { "ok" } else { "FAIL" }
        );
    }
    println!(
        "max relative error {:.3e} (tolerance {:e}) in {:.2}s",
        report.max_relative_error(),
        a.tolerance,
        started.elapsed().as_secs_f64()
    );
    if report.passed {
        Ok(())
    } else {
        Err(failed("gradient check failed"))
    }
}
