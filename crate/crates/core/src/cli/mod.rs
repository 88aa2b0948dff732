//! Command-line front end.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable, NumericCsv};
use crate::ledger::{EvaluationLedger, EvaluationTag};
use crate::param_space::SamplingScheme;
use crate::pce::{fit_pce, fit_reduced_pce, total_sobol_full, SparseSurrogate};
use crate::pipeline::artifacts::{self, mark_failed, write_json, FAILED_MARKER};
use crate::pipeline::{
    enrichment_candidate, evaluate_points, output_distribution, run_adaptive, validation_report, RssTraining,
};
use crate::screening::{run_screening, ScreeningReport};

use config::{load_config, Resolved};

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "RSS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "rss",
    version,
    about = "DGSM parameter screening and sparse polynomial chaos surrogates in reduced parameter spaces"
)]
pub struct Cli {
    /// Worker threads for model evaluations and batch predictions (default: all cores)
    #[arg(long, global = true, env = THREADS_ENV, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw input samples and optionally evaluate the model at them
    Sample(SampleArgs),
    /// Run iterative DGSM screening and write the screening report
    Screen(ConfigArgs),
    /// Fit a sparse polynomial chaos surrogate
    Fit(FitArgs),
    /// Recompute the validation report of a finished run
    Validate(RunDirArgs),
    /// Total Sobol' indices of a surrogate
    Sobol(SobolArgs),
    /// Output density of a surrogate under the input distribution
    Pdf(PdfArgs),
    /// Evaluate a surrogate at parameter vectors read from CSV
    Predict(PredictArgs),
    /// Run the full adaptive screening and surrogate pipeline
    Run(ConfigArgs),
    /// Add the strongest inactive input to a run's reduced surrogate and refit
    Enrich(RunDirArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Run configuration (JSON)
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: PathBuf,
    /// Override the configured random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a configuration field, e.g. screening.tau=0.05 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override the output directory
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Number of samples
    #[arg(long, short = 'n', default_value_t = 100)]
    pub count: usize,
    /// Sampling scheme: lhs or mc
    #[arg(long, default_value = "lhs", value_parser = parse_scheme)]
    pub scheme: SamplingScheme,
    /// Append a column of model values
    #[arg(long)]
    pub evaluate: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Training data: CSV with one column per input label and a `value` column.
    /// Without it a fresh Latin hypercube of --count points is evaluated
    #[arg(long, value_name = "FILE")]
    pub training: Option<PathBuf>,
    /// Training points drawn when no --training file is given
    #[arg(long, short = 'n', default_value_t = 100)]
    pub count: usize,
    /// Comma-separated active input labels; fits a reduced surrogate with the
    /// other inputs frozen at their nominal values
    #[arg(long, value_delimiter = ',', value_name = "LABELS")]
    pub active: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunDirArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Directory of a finished run (default: the configured out_dir)
    #[arg(long, value_name = "DIR")]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SobolArgs {
    /// Surrogate file written by fit or run
    #[arg(long, short = 's', value_name = "FILE")]
    pub surrogate: PathBuf,
    /// Output CSV (default: stdout)
    #[arg(long, short = 'o', value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Surrogate file written by fit or run
    #[arg(long, short = 's', value_name = "FILE")]
    pub surrogate: PathBuf,
    /// Monte Carlo samples propagated through the surrogate
    #[arg(long, short = 'n', default_value_t = 100_000)]
    pub samples: usize,
    /// Output CSV (default: <out_dir>/pdf.csv)
    #[arg(long, short = 'o', value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Surrogate file written by fit or run
    #[arg(long, short = 's', value_name = "FILE")]
    pub surrogate: PathBuf,
    /// CSV with one column per input label
    #[arg(long, short = 'i', value_name = "FILE")]
    pub input: PathBuf,
    /// Output CSV (default: stdout)
    #[arg(long, short = 'o', value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<SamplingScheme, String> {
    match s {
        "lhs" | "latin_hypercube" => Ok(SamplingScheme::LatinHypercube),
        "mc" | "monte_carlo" => Ok(SamplingScheme::MonteCarlo),
        _ => Err(format!("unknown scheme `{s}` (expected lhs or mc)")),
    }
}

/// Failure with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
    pub out_dir: Option<PathBuf>,
}

fn config_failure(error: Error) -> Failure {
    Failure {
        code: 2,
        error,
        out_dir: None,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownModel(_) | Error::Json(_) | Error::InvalidDistribution { .. } => 2,
        _ => 1,
    }
}

fn in_dir(dir: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |error| Failure {
        code: exit_code(&error),
        error,
        out_dir: Some(dir.to_path_buf()),
    }
}

fn resolve(args: &ConfigArgs) -> std::result::Result<Resolved, Failure> {
    let mut cfg = load_config(&args.config, &args.set).map_err(config_failure)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.resolve().map_err(config_failure)
}

/// Create the output directory, clear a stale failure marker and echo the
/// effective configuration.
fn prepare(r: &Resolved) -> std::result::Result<PathBuf, Failure> {
    let dir = r.config.out_dir.clone();
    let fail = in_dir(&r.config.out_dir);
    fs::create_dir_all(&dir).map_err(|e| fail(e.into()))?;
    let marker = dir.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| fail(e.into()))?;
    }
    fs::write(dir.join("config.json"), r.config.to_json()).map_err(|e| fail(e.into()))?;
    Ok(dir)
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn read_training(path: &Path, labels: &[String]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let csv = NumericCsv::read(path)?;
    let col = |name: &str| {
        csv.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let idx = labels.iter().map(|l| col(l)).collect::<Result<Vec<_>>>()?;
    let vcol = col("value")?;
    let thetas = csv.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
    let values = csv.rows.iter().map(|r| r[vcol]).collect();
    Ok((thetas, values))
}

fn read_points(path: &Path, labels: &[String]) -> Result<Vec<Vec<f64>>> {
    let csv = NumericCsv::read(path)?;
    let idx = labels
        .iter()
        .map(|l| {
            csv.header
                .iter()
                .position(|h| h == l)
                .ok_or_else(|| Error::Config(format!("{}: missing column `{l}`", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(csv.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect())
}

fn cmd_sample(a: &SampleArgs) -> std::result::Result<(), Failure> {
    let r = resolve(&a.common)?;
    let dir = prepare(&r)?;
    let fail = in_dir(&dir);
    let batch = r.space.sample(a.count, a.scheme, r.config.seed);
    let mut header = r.space.labels();
    let values = if a.evaluate {
        header.push("value".into());
        Some(evaluate_points(r.model.as_ref(), &batch.points).map_err(&fail)?)
    } else {
        None
    };
    let mut t = CsvTable::new(header);
    for (k, p) in batch.points.iter().enumerate() {
        let mut row = p.clone();
        if let Some(v) = &values {
            row.push(v[k]);
        }
        t.push_numbers(&row);
    }
    t.write(&dir.join("samples.csv")).map_err(&fail)
}

fn write_screening(dir: &Path, ledger: &EvaluationLedger, report: &ScreeningReport) -> Result<()> {
    artifacts::ledger_csv(ledger, &report.labels).write(&dir.join("ledger.csv"))?;
    artifacts::gradients_csv(ledger, &report.labels).write(&dir.join("gradients.csv"))?;
    write_json(&dir.join("screening.json"), report)?;
    report.to_csv().write(&dir.join("screening.csv"))
}

fn cmd_screen(a: &ConfigArgs) -> std::result::Result<(), Failure> {
    let r = resolve(a)?;
    let dir = prepare(&r)?;
    let fail = in_dir(&dir);
    let mut ledger = EvaluationLedger::new();
    let report = run_screening(r.model.as_ref(), &r.space, &r.config.screening, &mut ledger, r.config.seed)
        .map_err(&fail)?;
    write_screening(&dir, &ledger, &report).map_err(&fail)?;
    println!(
        "screening {} after s = {}, N_total = {}; active: {} (alpha = {})",
        if report.converged { "converged" } else { "stopped" },
        report.last().s,
        report.n_total(),
        report.active_labels().join(", "),
        fmt_f64(report.alpha)
    );
    Ok(())
}

fn label_indices(labels: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    let mut idx = wanted
        .iter()
        .map(|w| {
            labels
                .iter()
                .position(|l| l == w)
                .ok_or_else(|| Error::Config(format!("unknown input label `{w}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

fn cmd_fit(a: &FitArgs) -> std::result::Result<(), Failure> {
    let r = resolve(&a.common)?;
    let labels = r.space.labels();
    let active = label_indices(&labels, &a.active).map_err(config_failure)?;
    let dir = prepare(&r)?;
    let fail = in_dir(&dir);
    let (thetas, values) = match &a.training {
        Some(p) => read_training(p, &labels).map_err(&fail)?,
        None => {
            let pts = r.space.sample(a.count, SamplingScheme::LatinHypercube, r.config.seed).points;
            let v = evaluate_points(r.model.as_ref(), &pts).map_err(&fail)?;
            (pts, v)
        }
    };
    let (s, name) = if active.is_empty() {
        (fit_pce(&r.space, &thetas, &values, &r.config.pce), "fss.json")
    } else {
        (
            fit_reduced_pce(&r.space, &active, &r.space.nominal(), &thetas, &values, &r.config.pce),
            "rss.json",
        )
    };
    let s = s.map_err(&fail)?;
    write_json(&dir.join(name), &s).map_err(&fail)?;
    println!(
        "{name}: degree {}, {} terms, LOO {} from {} points",
        s.diagnostics.degree,
        s.diagnostics.term_count,
        fmt_f64(s.diagnostics.loo),
        s.diagnostics.training_count
    );
    Ok(())
}

fn run_dir(a: &RunDirArgs, r: &Resolved) -> PathBuf {
    a.run_dir.clone().unwrap_or_else(|| r.config.out_dir.clone())
}

fn load_run(dir: &Path) -> Result<(EvaluationLedger, SparseSurrogate, Option<SparseSurrogate>, Option<ScreeningReport>)> {
    let mut ledger = EvaluationLedger::new();
    for rec in artifacts::read_ledger_csv(&dir.join("ledger.csv"))? {
        ledger.push(rec.theta, rec.value, rec.tag, rec.batch_id, rec.seed);
    }
    let fss = SparseSurrogate::read(&dir.join("fss.json"))?;
    let rss_path = dir.join("rss.json");
    let rss = if rss_path.exists() { Some(SparseSurrogate::read(&rss_path)?) } else { None };
    let scr_path = dir.join("screening.json");
    let screening = if scr_path.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&scr_path)?)?)
    } else {
        None
    };
    Ok((ledger, fss, rss, screening))
}

fn cmd_validate(a: &RunDirArgs) -> std::result::Result<(), Failure> {
    let r = resolve(&a.common)?;
    let dir = run_dir(a, &r);
    let fail = in_dir(&dir);
    let (ledger, fss, rss, screening) = load_run(&dir).map_err(&fail)?;
    let suite = crate::pipeline::validation_suite(&ledger);
    let pc = &r.config.pipeline;
    let report = validation_report(
        &fss,
        rss.as_ref(),
        screening.as_ref().map_or(1.0, |s| s.alpha),
        (&suite.0, &suite.1),
        &crate::pipeline::histogram_values(&ledger),
        &r.space,
        pc,
        !pc.strict_holdout,
        r.config.seed,
    )
    .map_err(&fail)?;
    write_json(&dir.join("validation.json"), &report).map_err(&fail)?;
    println!("l2 = {} (fss {})", fmt_f64(report.l2), fmt_f64(report.l2_fss));
    Ok(())
}

fn cmd_sobol(a: &SobolArgs) -> std::result::Result<(), Failure> {
    let fail = |e: Error| Failure {
        code: exit_code(&e),
        error: e,
        out_dir: None,
    };
    let s = SparseSurrogate::read(&a.surrogate).map_err(fail)?;
    let t = total_sobol_full(&s).map_err(fail)?;
    let mut table = CsvTable::new(["label", "total_sobol"]);
    for (l, v) in s.input_labels().into_iter().zip(t) {
        table.push(vec![l, fmt_f64(v)]);
    }
    emit(&table, a.out.as_deref()).map_err(fail)
}

fn cmd_pdf(a: &PdfArgs) -> std::result::Result<(), Failure> {
    let r = resolve(&a.common)?;
    let dir = prepare(&r)?;
    let fail = in_dir(&dir);
    let s = SparseSurrogate::read(&a.surrogate).map_err(&fail)?;
    let p = output_distribution(&s, &r.space, a.samples, r.config.seed).map_err(&fail)?;
    let out = a.out.clone().unwrap_or_else(|| dir.join("pdf.csv"));
    p.to_csv().write(&out).map_err(&fail)
}

fn cmd_predict(a: &PredictArgs) -> std::result::Result<(), Failure> {
    let fail = |e: Error| Failure {
        code: exit_code(&e),
        error: e,
        out_dir: None,
    };
    let s = SparseSurrogate::read(&a.surrogate).map_err(fail)?;
    let pts = read_points(&a.input, &s.input_labels()).map_err(fail)?;
    let preds = s.predict_batch(&pts).map_err(fail)?;
    let mut table = CsvTable::new(["prediction"]);
    for p in preds {
        table.push_numbers(&[p]);
    }
    emit(&table, a.out.as_deref()).map_err(fail)
}

fn cmd_run(a: &ConfigArgs) -> std::result::Result<(), Failure> {
    let r = resolve(a)?;
    let dir = prepare(&r)?;
    let fail = in_dir(&dir);
    let labels = r.space.labels();
    let result = run_adaptive(r.model.as_ref(), &r.space, &r.config.adaptive(), r.config.seed).map_err(&fail)?;
    artifacts::write_run(&dir, &result, &labels, r.config.seed).map_err(&fail)?;
    let v = &result.validation;
    match &result.rss {
        Some(s) => {
            let active: Vec<&str> = s.reduced_map.as_ref().unwrap().active.iter().map(|&i| labels[i].as_str()).collect();
            println!(
                "RSS over [{}] (alpha = {}): l2 = {}, LOO = {}; FSS l2 = {}",
                active.join(", "),
                fmt_f64(v.alpha),
                fmt_f64(v.l2),
                fmt_f64(s.diagnostics.loo),
                fmt_f64(v.l2_fss)
            );
        }
        None => println!("{:?}: FSS l2 = {}", result.outcome, fmt_f64(v.l2_fss)),
    }
    println!("{} model evaluations written to {}", result.ledger.len(), dir.display());
    Ok(())
}

fn cmd_enrich(a: &RunDirArgs) -> std::result::Result<(), Failure> {
    let r = resolve(&a.common)?;
    let dir = run_dir(a, &r);
    let fail = in_dir(&dir);
    let (ledger, _, _, screening) = load_run(&dir).map_err(&fail)?;
    let report = screening.ok_or_else(|| fail(Error::Config("run has no screening report".into())))?;
    let extra = enrichment_candidate(&report)
        .ok_or_else(|| fail(Error::Config("every input is already active".into())))?;
    let mut active = report.active.clone();
    active.push(extra);
    active.sort_unstable();
    let pc = &r.config.pipeline;
    let (thetas, values) = if pc.rss_training == RssTraining::Fresh {
        ledger
            .with_tag(EvaluationTag::RssTraining)
            .map(|x| (x.theta.clone(), x.value))
            .unzip()
    } else {
        crate::pipeline::training_set(&ledger, pc.strict_holdout)
    };
    let s = fit_reduced_pce(&r.space, &active, &r.space.nominal(), &thetas, &values, &r.config.pce).map_err(&fail)?;
    let suite = crate::pipeline::validation_suite(&ledger);
    let l2 = s
        .predict_batch(&suite.0)
        .and_then(|p| crate::pipeline::l2_error(&suite.1, &p))
        .map_err(&fail)?;
    write_json(&dir.join("rss_enriched.json"), &s).map_err(&fail)?;
    println!(
        "added {}; RSS over {} inputs: l2 = {}, LOO = {}",
        report.labels[extra],
        active.len(),
        fmt_f64(l2),
        fmt_f64(s.diagnostics.loo)
    );
    Ok(())
}

pub fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_failure(Error::Config("--threads must be at least 1".into())));
        }
        // Only the first global pool configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Screen(a) => cmd_screen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sobol(a) => cmd_sobol(a),
        Command::Pdf(a) => cmd_pdf(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Run(a) => cmd_run(a),
        Command::Enrich(a) => cmd_enrich(a),
    }
}

/// Entry point of the `rss` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = if f.code == 2 { "configuration error" } else { "error" };
            eprintln!("rss: {kind}: {}", f.error);
            if let Some(dir) = &f.out_dir {
                if dir.exists() {
                    let _ = mark_failed(dir, &f.error.to_string());
                }
            }
            ExitCode::from(f.code)
        }
    }
}
