//! `cqnn`: train, apply and check quadratic convolutional networks from the
//! command line. Results are written as plain CSV for external plotting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cqnn::dataio::{
    load_csv, multichannel_window, narx_window, split, synth_gps, synth_narx, SplitSpec,
    TimeSeries,
};
use cqnn::pipeline::{evaluate_mse, predict_all};
use cqnn::verify::run_all;
use cqnn::{fit, ActivationParams, ConvSpec, Dataset, Error, QuadraticModel};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "cqnn", version, about = "Least-squares training of quadratic convolutional networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model (one per ridge weight) and report train/test error.
    Train(TrainArgs),
    /// Apply a saved model to a data set.
    Predict(PredictArgs),
    /// Input gradients of a saved model at given points.
    Sensitivity(SensitivityArgs),
    /// Run the randomized self-checks.
    Verify(VerifyArgs),
    /// Compare banded and full-width fits on the same data.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Lagged input/output regressors `[u(t-1..t-d), y(t-1..t-d)]` -> `y(t)`.
    Narx,
    /// Non-overlapping blocks of `r` samples over the selected channels.
    Window,
    /// Each CSV row is one sample; the `--label` column is the target.
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Part {
    All,
    Train,
    Test,
}

#[derive(Args)]
struct DataArgs {
    /// Headered CSV input.
    #[arg(long, conflicts_with = "synth_len")]
    data: Option<PathBuf>,
    /// Use a generated series of this length instead of `--data`
    /// (NARX system for `narx`, IMU/position channels for `window`).
    #[arg(long)]
    synth_len: Option<usize>,
    /// Seed for generated data.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Narx)]
    mode: Mode,
    /// NARX lag depth.
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Window block length.
    #[arg(long, default_value_t = 10)]
    r: usize,
    /// NARX input column.
    #[arg(long, default_value = "u")]
    input: String,
    /// NARX output column.
    #[arg(long, default_value = "y")]
    output: String,
    /// Window input channels (default: every column except the label).
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    /// Target column for `window` and `table` modes.
    #[arg(long)]
    label: Option<String>,
    /// Fraction of samples (taken from the start) used for training.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
}

#[derive(Args)]
struct ActivationArgs {
    #[arg(long, default_value_t = ActivationParams::RELU_LIKE.a(), allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = ActivationParams::RELU_LIKE.b(), allow_negative_numbers = true)]
    b: f64,
    #[arg(long, default_value_t = ActivationParams::RELU_LIKE.c(), allow_negative_numbers = true)]
    c: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    act: ActivationArgs,
    /// Filter length.
    #[arg(long, default_value_t = 3)]
    f: usize,
    /// Ridge weights, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_negative_numbers = true)]
    beta: Vec<f64>,
    /// Model file. With several ridge weights each file gets a `_beta<β>` suffix.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Optional metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Which portion of the windowed data to predict.
    #[arg(long, value_enum, default_value_t = Part::All)]
    part: Part,
    /// Predictions CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Headered CSV, one evaluation point per row.
    #[arg(long)]
    x0: PathBuf,
    /// Gradients CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-feature maximum absolute gradient over all rows.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per suite.
    #[arg(long, default_value_t = 200)]
    instances: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    act: ActivationArgs,
    /// Filter lengths for the banded fit.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    f_list: Vec<usize>,
    /// Timed repetitions per fit; the median is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Table CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidActivation(_) | Error::InvalidSpec(_) | Error::NegativeRegularizer(_) => {
                USAGE
            }
            _ => DATA,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow!(msg.into()),
    }
}

fn io_failure(e: anyhow::Error) -> Failure {
    Failure { code: DATA, error: e }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

impl ActivationArgs {
    fn params(&self) -> Result<ActivationParams, Failure> {
        Ok(ActivationParams::new(self.a, self.b, self.c)?)
    }
}

impl DataArgs {
    fn series(&self) -> Result<TimeSeries, Failure> {
        match (&self.data, self.synth_len) {
            (Some(path), None) => Ok(load_csv(path, &[])?),
            (None, Some(len)) => match self.mode {
                Mode::Narx => Ok(synth_narx(len, self.seed)?),
                Mode::Window => Ok(synth_gps(len, self.seed)?),
                Mode::Table => Err(usage("--synth-len is not available in table mode")),
            },
            _ => Err(usage("one of --data or --synth-len is required")),
        }
    }

    fn dataset(&self) -> Result<Dataset, Failure> {
        let ts = self.series()?;
        match self.mode {
            Mode::Narx => {
                if self.d == 0 {
                    return Err(usage("--d must be >= 1"));
                }
                Ok(narx_window(&ts, &self.input, &self.output, self.d)?)
            }
            Mode::Window => {
                let label = self
                    .label
                    .as_deref()
                    .ok_or_else(|| usage("window mode needs --label"))?;
                let channels = self.feature_columns(&ts, label);
                let channels: Vec<&str> = channels.iter().map(String::as_str).collect();
                Ok(multichannel_window(&ts, &channels, self.r, label)?)
            }
            Mode::Table => {
                let label = self
                    .label
                    .as_deref()
                    .ok_or_else(|| usage("table mode needs --label"))?;
                let features = self.feature_columns(&ts, label);
                table_dataset(&ts, &features, Some(label))
            }
        }
    }

    fn feature_columns(&self, ts: &TimeSeries, label: &str) -> Vec<String> {
        if self.channels.is_empty() {
            ts.names().iter().filter(|c| *c != label).cloned().collect()
        } else {
            self.channels.clone()
        }
    }

    fn split(&self, data: &Dataset) -> Result<(Dataset, Dataset), Failure> {
        let spec = SplitSpec::new(self.split).map_err(|e| usage(e.to_string()))?;
        Ok(split(data, &spec)?)
    }
}

fn table_dataset(
    ts: &TimeSeries,
    features: &[String],
    label: Option<&str>,
) -> Result<Dataset, Failure> {
    if features.is_empty() {
        return Err(usage("no feature columns selected"));
    }
    let cols = features
        .iter()
        .map(|c| ts.channel(c))
        .collect::<cqnn::Result<Vec<_>>>()?;
    let mut inputs = Vec::with_capacity(ts.len() * cols.len());
    for t in 0..ts.len() {
        inputs.extend(cols.iter().map(|c| c[t]));
    }
    let labels = match label {
        Some(l) => ts.channel(l)?.to_vec(),
        None => vec![0.0; ts.len()],
    };
    Ok(Dataset::new(inputs, labels, cols.len())?)
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io_failure),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_model(path: &Path) -> Result<QuadraticModel, Failure> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()).into());
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_failure)?;
    Ok(QuadraticModel::deserialize(&text)?)
}

fn model_path(base: &Path, beta: f64, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map_or("model".into(), |s| s.to_string_lossy());
    let name = match base.extension() {
        Some(ext) => format!("{stem}_beta{beta}.{}", ext.to_string_lossy()),
        None => format!("{stem}_beta{beta}"),
    };
    base.with_file_name(name)
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let params = args.act.params()?;
    if args.f == 0 {
        return Err(usage("--f must be >= 1"));
    }
    if let Some(b) = args.beta.iter().find(|b| b.is_nan() || **b < 0.0) {
        return Err(usage(format!("ridge weight must be >= 0, got {b}")));
    }
    let data = args.data.dataset()?;
    let spec = ConvSpec::new(data.n_features(), args.f)?;
    let (train, test) = args.data.split(&data)?;

    let several = args.beta.len() > 1;
    let mut metrics = String::from(
        "beta,train_mse,test_mse,train_time_s,theta_norm,strategy,rank_deficient,model\n",
    );
    for &beta in &args.beta {
        let fitted = fit(&train, &spec, params, beta)?;
        let train_mse = evaluate_mse(&fitted.model, &train)?;
        let test_mse = evaluate_mse(&fitted.model, &test)?;
        let path = model_path(&args.out, beta, several);
        emit(Some(&path), &fitted.model.serialize())?;
        let secs = fitted.train_time.as_secs_f64();
        let norm = fitted.report.theta.norm();
        let strategy = fitted.report.strategy.as_str();
        let rd = fitted.report.rank_deficient;
        println!(
            "beta={beta} n={} f={} train_mse={train_mse:.6e} test_mse={test_mse:.6e} \
             train_time={secs:.6}s theta_norm={norm:.6e} solver={strategy}{} -> {}",
            spec.n(),
            spec.f(),
            if rd { " (rank deficient)" } else { "" },
            path.display()
        );
        let _ = writeln!(
            metrics,
            "{beta},{train_mse:e},{test_mse:e},{secs},{norm:e},{strategy},{rd},{}",
            path.display()
        );
    }
    if let Some(path) = &args.metrics {
        emit(Some(path), &metrics)?;
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CmdResult {
    let model = read_model(&args.model)?;
    let (data, has_truth) = match args.data.mode {
        Mode::Table => {
            let ts = args.data.series()?;
            let label = args.data.label.as_deref();
            let features = match label {
                Some(l) => args.data.feature_columns(&ts, l),
                None if args.data.channels.is_empty() => ts.names().to_vec(),
                None => args.data.channels.clone(),
            };
            (table_dataset(&ts, &features, label)?, label.is_some())
        }
        _ => (args.data.dataset()?, true),
    };
    let data = match args.part {
        Part::All => data,
        Part::Train => args.data.split(&data)?.0,
        Part::Test => args.data.split(&data)?.1,
    };
    let pred = predict_all(&model, &data)?;

    let mut csv = String::from(if has_truth { "index,y_true,y_pred\n" } else { "index,y_pred\n" });
    for (i, (p, y)) in pred.iter().zip(data.labels()).enumerate() {
        let _ = if has_truth {
            writeln!(csv, "{i},{y:e},{p:e}")
        } else {
            writeln!(csv, "{i},{p:e}")
        };
    }
    emit(args.out.as_deref(), &csv)?;
    if has_truth {
        eprintln!("samples={} mse={:.6e}", pred.len(), cqnn::dataio::mse(&pred, data.labels()));
    }
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> CmdResult {
    let model = read_model(&args.model)?;
    let ts = load_csv(&args.x0, &[])?;
    let n = model.spec().n();
    if ts.names().len() != n {
        return Err(Error::DimensionMismatch {
            context: "x0 columns",
            expected: n,
            found: ts.names().len(),
        }
        .into());
    }
    let mut csv = String::from("index");
    for j in 0..n {
        let _ = write!(csv, ",g{j}");
    }
    csv.push('\n');
    let mut peak = vec![0.0f64; n];
    for t in 0..ts.len() {
        let g = model.sensitivity(&ts.sample(t))?;
        let _ = write!(csv, "{t}");
        for (j, v) in g.iter().enumerate() {
            let _ = write!(csv, ",{v:e}");
            peak[j] = peak[j].max(v.abs());
        }
        csv.push('\n');
    }
    emit(args.out.as_deref(), &csv)?;
    if let Some(path) = &args.summary {
        let mut s = String::from("feature,name,max_abs_gradient\n");
        for (j, (v, name)) in peak.iter().zip(ts.names()).enumerate() {
            let _ = writeln!(s, "{j},{name},{v:e}");
        }
        emit(Some(path), &s)?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    if args.instances == 0 {
        eprintln!("warning: --instances 0 checks nothing; reporting a vacuous pass");
    }
    let reports = run_all(args.seed, args.instances)?;
    let mut failed = 0;
    for r in &reports {
        println!(
            "{:<4} {:<22} instances={:<5} max_error={:.3e} tolerance={:.0e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.max_error,
            r.tolerance
        );
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(Failure {
            code: VERIFY,
            error: anyhow!("{failed} suite(s) failed"),
        });
    }
    Ok(())
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let params = args.act.params()?;
    if args.repeats == 0 {
        return Err(usage("--repeats must be >= 1"));
    }
    let data = args.data.dataset()?;
    let n = data.n_features();
    if let Some(f) = args.f_list.iter().find(|f| **f == 0 || **f > n) {
        return Err(usage(format!("filter length {f} must lie in 1..={n}")));
    }
    let (train, test) = args.data.split(&data)?;

    let mut runs: Vec<(&str, ConvSpec)> = args
        .f_list
        .iter()
        .map(|&f| ConvSpec::new(n, f).map(|s| ("ls-cqnn", s)))
        .collect::<cqnn::Result<_>>()?;
    runs.push(("ls-qnn", ConvSpec::dense(n)?));

    let mut csv = String::from("method,n,f,weights,train_mse,test_mse,train_time_s\n");
    for (method, spec) in runs {
        let mut times = Vec::with_capacity(args.repeats);
        let mut last = None;
        for _ in 0..args.repeats {
            let fitted = fit(&train, &spec, params, 0.0)?;
            times.push(fitted.train_time);
            last = Some(fitted);
        }
        let model = last.expect("repeats >= 1").model;
        let _ = writeln!(
            csv,
            "{method},{n},{},{},{:e},{:e},{}",
            spec.f(),
            spec.weight_len(),
            evaluate_mse(&model, &train)?,
            evaluate_mse(&model, &test)?,
            median(times).as_secs_f64()
        );
    }
    emit(args.out.as_deref(), &csv)
}
