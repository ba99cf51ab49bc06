//! `erconf` command-line frontend.
//!
//! Exit codes: 0 on success (and for `--help`), 2 for invalid flags or
//! configuration, 1 for runtime failures (I/O, malformed files, shape
//! mismatches). Every command prints its resolved configuration to stderr as
//! a single line of `key=value` pairs before doing any work.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::conformal::{calibrate, predict_set, validate_alpha};
use crate::data::{
    generate_synthetic, load_logits, save_logits, save_prediction_sets, save_report, save_sweep,
    train_softmax_classifier, LogitFormat, LogitRow, LogitTable, SynthSpec, TrainConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{run_trials, summarize, Method, TrialConfig};
use crate::scores::{ScoreSpec, RAPS_DEFAULT_K_REG, RAPS_DEFAULT_LAMBDA, SAPS_DEFAULT_LAMBDA};
use crate::temperature::{run_pipeline, sweep_temperatures, PipelineConfig, TemperatureGrid};
use crate::types::{random_partition, stream, LabeledExample, LogitVector, RandomSource};

#[derive(Debug, Parser)]
#[command(name = "erconf", version, about = "Conformal prediction sets with entropy-reweighted scores")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Output does not depend on it.
    #[arg(long, global = true, value_parser = positive_usize)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic train/cal/test logit files with known posteriors.
    Synth(SynthArgs),
    /// Repeated random-split evaluation of one or more scores over an alpha grid.
    Evaluate(EvaluateArgs),
    /// Temperature sweep on a (D2, D3) pair; prints the selected temperature.
    Sweep(SweepArgs),
    /// Calibrate on labeled logits and write prediction sets for unlabeled logits.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    /// Logits are the scaled Bayes log-posteriors.
    Bayes,
    /// Logits come from a softmax regression trained on the train split.
    Logreg,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = class_count)]
    k: usize,
    #[arg(long, value_parser = positive_usize)]
    n: usize,
    /// Feature dimension (default: K).
    #[arg(long, value_parser = positive_usize)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 2.0, value_parser = positive_f64)]
    separation: f64,
    /// Multiplier applied to the logits; 1 = calibrated.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    overconfidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train/cal/test fractions.
    #[arg(long, default_value = "0.5,0.25,0.25", value_parser = fractions3)]
    fractions: (f64, f64, f64),
    #[arg(long, value_enum, default_value_t = ModelKind::Bayes)]
    model: ModelKind,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5, value_parser = positive_f64)]
    lr: f64,
    #[arg(long, default_value = "synth")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    /// Explicit temperature list, e.g. `0.5,1,2`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["t_min", "t_max", "t_count"])]
    t_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    t_min: f64,
    #[arg(long, default_value_t = 20.0)]
    t_max: f64,
    #[arg(long, default_value_t = 41)]
    t_count: usize,
}

impl GridArgs {
    fn resolve(&self) -> Result<TemperatureGrid> {
        match &self.t_grid {
            Some(v) => TemperatureGrid::new(v.clone()),
            None => TemperatureGrid::log_spaced(self.t_min, self.t_max, self.t_count),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ScoreParams {
    #[arg(long, default_value_t = RAPS_DEFAULT_LAMBDA)]
    raps_lambda: f64,
    #[arg(long, default_value_t = RAPS_DEFAULT_K_REG)]
    raps_kreg: usize,
    #[arg(long, default_value_t = SAPS_DEFAULT_LAMBDA)]
    saps_lambda: f64,
    /// Replace the per-example uniform with 1 (non-randomized scores).
    #[arg(long)]
    deterministic: bool,
}

impl ScoreParams {
    fn spec(&self, name: &str) -> Result<ScoreSpec> {
        let spec = match name {
            "thr" => ScoreSpec::thr(),
            "aps" => ScoreSpec::aps(),
            "raps" => ScoreSpec::raps(self.raps_lambda, self.raps_kreg),
            "saps" => ScoreSpec::saps(self.saps_lambda),
            "rank" => ScoreSpec::rank(),
            other => {
                return Err(Error::Config(format!(
                    "unknown score `{other}` (expected one of er, thr, aps, raps, saps, rank)"
                )))
            }
        };
        let spec = if self.deterministic {
            spec.deterministic()
        } else {
            spec
        };
        spec.validate()?;
        Ok(spec)
    }

    fn method(&self, name: &str) -> Result<Method> {
        match name {
            "er" => Ok(Method::EntropyReweighted {
                base: self.spec("aps")?,
            }),
            other => self.spec(other).map(Method::Baseline),
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Labeled logit files; rows are pooled before splitting.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Dataset name for the report (default: stem of the first input).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "er,aps,raps,saps")]
    scores: Vec<String>,
    /// Miscoverage levels, e.g. `0.01,0.05,0.10`.
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha_range")]
    alphas: Option<Vec<f64>>,
    /// Miscoverage grid `start:stop:step`, e.g. `0.01:0.10:0.01`.
    #[arg(long)]
    alpha_range: Option<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test/D2/D3 fractions of the pooled rows.
    #[arg(long, default_value = "0.5,0.25,0.25", value_parser = fractions3)]
    split: (f64, f64, f64),
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    params: ScoreParams,
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Where per-trial sweep tables go when `er` is evaluated (default: `<out>_sweeps/`).
    #[arg(long)]
    sweep_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    d2: PathBuf,
    #[arg(long)]
    d3: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Base score applied to the reweighted probabilities.
    #[arg(long, default_value = "aps")]
    base: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    params: ScoreParams,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Labeled calibration logit files.
    #[arg(long, required = true, num_args = 1..)]
    cal: Vec<PathBuf>,
    #[arg(long)]
    unlabeled: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value = "er")]
    score: String,
    /// D2/D3 ratio of the calibration rows for `er`.
    #[arg(long, default_value = "0.5,0.5", value_parser = fractions2)]
    split: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    params: ScoreParams,
    #[arg(long, default_value = "sets.csv")]
    out: PathBuf,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {s}"))
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("must be a positive integer, got {s}")),
    }
}

fn class_count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("must be an integer >= 2, got {s}")),
    }
}

fn parse_fractions(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|_| format!("`{s}` is not a comma-separated list of numbers"))?;
    if v.len() != n {
        return Err(format!("expected {n} fractions, got {}", v.len()));
    }
    if v.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(format!("fractions must be > 0: {s}"));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("fractions must sum to 1, got {total}"));
    }
    Ok(v)
}

fn fractions3(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    parse_fractions(s, 3).map(|v| (v[0], v[1], v[2]))
}

fn fractions2(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_fractions(s, 2).map(|v| (v[0], v[1]))
}

/// Parses `start:stop:step` into an inclusive grid of miscoverage levels.
pub fn parse_alpha_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("--alpha-range must be start:stop:step, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && start <= stop) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // rounded to 10 decimals so that e.g. 0.01 + 2 * 0.01 prints as 0.03
    Ok((0..count)
        .map(|i| ((start + step * i as f64) * 1e10).round() / 1e10)
        .collect())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn path_list(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

fn echo(pairs: &[(&str, String)]) {
    let mut line = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{k}={v}");
    }
    eprintln!("{line}");
}

fn load_pool(paths: &[PathBuf]) -> Result<LogitTable> {
    let mut iter = paths.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Config("no input files".into()))?;
    let mut table = load_logits(first, LogitFormat::from_path(first))?;
    for p in iter {
        table.extend(load_logits(p, LogitFormat::from_path(p))?)?;
    }
    Ok(table)
}

/// Labeled rows of `table` with one uniform each from `rng`, in file order.
fn labeled_examples(table: &LogitTable, rng: &RandomSource) -> Result<Vec<LabeledExample>> {
    let mut r = rng.rng();
    table
        .labeled()
        .into_iter()
        .map(|(z, y)| LabeledExample::new(z, y, r.random::<f64>()))
        .collect()
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        num_classes: a.k,
        dim: a.dim.unwrap_or(a.k),
        n: a.n,
        class_separation: a.separation,
        overconfidence: a.overconfidence,
        seed: a.seed,
    };
    spec.validate()?;
    echo(&[
        ("command", "synth".into()),
        ("k", a.k.to_string()),
        ("n", a.n.to_string()),
        ("dim", spec.dim.to_string()),
        ("separation", a.separation.to_string()),
        ("overconfidence", a.overconfidence.to_string()),
        ("seed", a.seed.to_string()),
        ("fractions", format!("{},{},{}", a.fractions.0, a.fractions.1, a.fractions.2)),
        ("model", format!("{:?}", a.model).to_lowercase()),
        ("epochs", a.epochs.to_string()),
        ("lr", a.lr.to_string()),
        ("out_dir", a.out_dir.display().to_string()),
    ]);

    let data = generate_synthetic(&spec)?;
    let fr = [a.fractions.0, a.fractions.1, a.fractions.2];
    let parts = random_partition(spec.n, &fr, &RandomSource::new(a.seed).derive(stream::SPLIT, 0))?;
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::Config(format!(
            "--n {} is too small for --fractions {fr:?}",
            spec.n
        )));
    }

    let rows: Vec<LogitRow> = match a.model {
        ModelKind::Bayes => data.table.rows().to_vec(),
        ModelKind::Logreg => {
            let (x, y): (Vec<Vec<f64>>, Vec<usize>) = parts[0]
                .iter()
                .map(|&i| (data.features[i].clone(), data.labels[i]))
                .unzip();
            let cfg = TrainConfig {
                epochs: a.epochs,
                learning_rate: a.lr,
            };
            let model = train_softmax_classifier(&x, &y, spec.num_classes, &cfg)?;
            eprintln!(
                "trained softmax regression: loss {:.4} -> {:.4}, train accuracy {:.4}",
                model.loss_history.first().copied().unwrap_or(f64::NAN),
                model.loss_history.last().copied().unwrap_or(f64::NAN),
                model.accuracy(&x, &y)
            );
            data.features
                .iter()
                .zip(&data.labels)
                .map(|(x, &y)| {
                    let z = model.logits(x)?;
                    let scaled = z.as_slice().iter().map(|v| v * a.overconfidence).collect();
                    Ok(LogitRow {
                        label: Some(y),
                        logits: LogitVector::new(scaled)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let names = ["train", "cal", "test"];
    for (name, idx) in names.iter().zip(&parts) {
        let mut t = LogitTable::new(spec.num_classes)?;
        for &i in idx {
            t.push(rows[i].clone())?;
        }
        save_logits(&t, a.out_dir.join(format!("{name}.csv")), LogitFormat::Csv)?;
    }
    write_posteriors(&a.out_dir.join("posteriors.csv"), &names, &parts, &data.posteriors)?;
    println!(
        "wrote {}/{{train,cal,test,posteriors}}.csv ({} / {} / {} rows)",
        a.out_dir.display(),
        parts[0].len(),
        parts[1].len(),
        parts[2].len()
    );
    Ok(())
}

fn write_posteriors(
    path: &Path,
    names: &[&str],
    parts: &[Vec<usize>],
    posteriors: &[crate::types::ProbVector],
) -> Result<()> {
    use std::io::Write;
    let k = posteriors.first().map_or(0, |p| p.num_classes());
    let mut out = String::from("split,row");
    for c in 0..k {
        let _ = write!(out, ",p_{c}");
    }
    out.push('\n');
    for (name, idx) in names.iter().zip(parts) {
        for (row, &i) in idx.iter().enumerate() {
            let _ = write!(out, "{name},{row}");
            for v in posteriors[i].as_slice() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let alphas = match (&a.alphas, &a.alpha_range) {
        (Some(v), _) => v.clone(),
        (None, Some(r)) => parse_alpha_range(r)?,
        (None, None) => vec![0.01, 0.05, 0.10],
    };
    for &al in &alphas {
        validate_alpha(al).map_err(|_| Error::Config(format!("--alphas: {al} is not in (0, 1)")))?;
    }
    let methods = a
        .scores
        .iter()
        .map(|s| a.params.method(s.trim()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Config(format!("--scores: {e}")))?;
    let grid = a
        .grid
        .resolve()
        .map_err(|e| Error::Config(format!("temperature grid flags: {e}")))?;
    let dataset = match &a.dataset {
        Some(d) => d.clone(),
        None => a.input[0]
            .file_stem()
            .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned()),
    };
    if dataset.contains([',', '"', '\n']) {
        return Err(Error::Config("--dataset must not contain commas or quotes".into()));
    }
    let cfg = TrialConfig {
        dataset,
        trials: a.trials,
        alphas,
        methods,
        fractions: a.split,
        grid,
        seed: a.seed,
    };
    cfg.validate()?;
    let has_er = cfg.methods.iter().any(|m| matches!(m, Method::EntropyReweighted { .. }));
    let sweep_dir = a.sweep_dir.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
        a.out.with_file_name(format!("{stem}_sweeps"))
    });
    echo(&[
        ("command", "evaluate".into()),
        ("input", path_list(&a.input)),
        ("dataset", cfg.dataset.clone()),
        ("scores", cfg.methods.iter().map(Method::name).collect::<Vec<_>>().join(",")),
        ("alphas", join(&cfg.alphas)),
        ("trials", cfg.trials.to_string()),
        ("seed", cfg.seed.to_string()),
        ("split", format!("{},{},{}", a.split.0, a.split.1, a.split.2)),
        ("t_grid", join(cfg.grid.values())),
        ("raps_lambda", a.params.raps_lambda.to_string()),
        ("raps_kreg", a.params.raps_kreg.to_string()),
        ("saps_lambda", a.params.saps_lambda.to_string()),
        ("deterministic", a.params.deterministic.to_string()),
        ("out", a.out.display().to_string()),
        ("sweep_dir", if has_er { sweep_dir.display().to_string() } else { "-".into() }),
    ]);

    let pool = load_pool(&a.input)?.labeled();
    let out = run_trials(&pool, &cfg)?;
    save_report(&out.rows, &a.out)?;
    for rec in &out.sweeps {
        let name = format!("trial{}_alpha{:.4}.csv", rec.trial, rec.alpha);
        save_sweep(&rec.sweep, sweep_dir.join(name))?;
    }

    println!("{:<8} {:>6} {:>18} {:>18}", "score", "alpha", "coverage", "size");
    for s in summarize(&out.rows) {
        println!(
            "{:<8} {:>6.3} {:>9.4} ± {:<6.4} {:>9.4} ± {:<6.4}",
            s.score, s.alpha, s.coverage_mean, s.coverage_sd, s.size_mean, s.size_sd
        );
    }
    println!("wrote {} rows to {}", out.rows.len(), a.out.display());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    validate_alpha(a.alpha).map_err(|_| Error::Config(format!("--alpha: {} is not in (0, 1)", a.alpha)))?;
    let base = a.params.spec(&a.base).map_err(|e| Error::Config(format!("--base: {e}")))?;
    let grid = a
        .grid
        .resolve()
        .map_err(|e| Error::Config(format!("temperature grid flags: {e}")))?;
    echo(&[
        ("command", "sweep".into()),
        ("d2", a.d2.display().to_string()),
        ("d3", a.d3.display().to_string()),
        ("alpha", a.alpha.to_string()),
        ("base", base.to_string()),
        ("seed", a.seed.to_string()),
        ("t_grid", join(grid.values())),
        ("out", a.out.display().to_string()),
    ]);
    let rng = RandomSource::new(a.seed);
    let d2 = labeled_examples(&load_logits(&a.d2, LogitFormat::from_path(&a.d2))?, &rng.derive(stream::RANDOMIZER, 0))?;
    let d3 = labeled_examples(&load_logits(&a.d3, LogitFormat::from_path(&a.d3))?, &rng.derive(stream::RANDOMIZER, 1))?;
    let sweep = sweep_temperatures(&d2, &d3, a.alpha, &grid, base)?;
    save_sweep(&sweep, &a.out)?;
    let best = sweep.point(sweep.t_star).map_or(f64::NAN, |p| p.avg_size);
    println!("t_star={} avg_size_d3={:.6} threshold={}", sweep.t_star, best, sweep.final_calibration.threshold);
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    validate_alpha(a.alpha).map_err(|_| Error::Config(format!("--alpha: {} is not in (0, 1)", a.alpha)))?;
    let method = a.params.method(&a.score).map_err(|e| Error::Config(format!("--score: {e}")))?;
    let grid = a
        .grid
        .resolve()
        .map_err(|e| Error::Config(format!("temperature grid flags: {e}")))?;
    echo(&[
        ("command", "predict".into()),
        ("cal", path_list(&a.cal)),
        ("unlabeled", a.unlabeled.display().to_string()),
        ("alpha", a.alpha.to_string()),
        ("score", method.name().into()),
        ("split", format!("{},{}", a.split.0, a.split.1)),
        ("seed", a.seed.to_string()),
        ("t_grid", join(grid.values())),
        ("out", a.out.display().to_string()),
    ]);
    let rng = RandomSource::new(a.seed);
    let cal_table = load_pool(&a.cal)?;
    let unlabeled = load_logits(&a.unlabeled, LogitFormat::from_path(&a.unlabeled))?;
    if unlabeled.num_classes() != cal_table.num_classes() {
        return Err(Error::Shape {
            expected: cal_table.num_classes(),
            got: unlabeled.num_classes(),
        });
    }
    let labeled = labeled_examples(&cal_table, &rng.derive(stream::RANDOMIZER, 0))?;
    let test = unlabeled.logits();

    let sets = match method {
        Method::EntropyReweighted { base } => {
            let cfg = PipelineConfig {
                alpha: a.alpha,
                grid,
                base,
                fractions: (0.0, a.split.0, a.split.1),
            };
            let out = run_pipeline(&labeled, &test, &cfg, &rng)?;
            println!("t_star={} threshold={}", out.sweep.t_star, out.sweep.final_calibration.threshold);
            out.sets
        }
        Method::Baseline(spec) => {
            let cal = calibrate(&labeled, spec.into(), a.alpha)?;
            println!("threshold={}", cal.threshold);
            let mut r = rng.derive(stream::RANDOMIZER, 1).rng();
            test.iter()
                .map(|z| predict_set(z, r.random::<f64>(), &cal))
                .collect::<Result<Vec<_>>>()?
        }
    };
    save_prediction_sets(&sets, &a.out)?;
    println!("wrote {} prediction sets to {}", sets.len(), a.out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j);
    }
    let result = match pool.build() {
        Ok(p) => p.install(|| dispatch(&cli)),
        Err(e) => Err(Error::Config(format!("--jobs: {e}"))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_range_parsing() {
        let v = parse_alpha_range("0.01:0.10:0.01").unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[2], 0.03);
        assert_eq!(v[9], 0.1);
        assert!(parse_alpha_range("0.1:0.01:0.01").is_err());
        assert!(parse_alpha_range("0.1:0.2").is_err());
        assert!(parse_alpha_range("a:b:c").is_err());
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(fractions3("0.5,0.25,0.25").unwrap(), (0.5, 0.25, 0.25));
        assert!(fractions3("0.5,0.5").is_err());
        assert!(fractions3("0.5,0.6,0.1").is_err());
        assert!(fractions2("1,0").is_err());
    }

    #[test]
    fn score_names() {
        let p = ScoreParams {
            raps_lambda: 0.01,
            raps_kreg: 1,
            saps_lambda: 0.2,
            deterministic: false,
        };
        assert_eq!(p.method("er").unwrap().name(), "er");
        assert_eq!(p.method("raps").unwrap().name(), "raps");
        assert!(matches!(p.method("bogus"), Err(Error::Config(_))));
    }

    #[test]
    fn help_and_bad_flags_exit_codes() {
        assert_eq!(run(["erconf", "--help"]), 0);
        assert_eq!(run(["erconf", "synth", "--k", "3", "--n", "10", "--overconfidence", "0"]), 2);
        assert_eq!(run(["erconf", "frobnicate"]), 2);
    }
}
