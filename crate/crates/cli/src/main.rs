use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liqnet::experiment::{
    evaluate_all, generate_dataset, read_dataset, save_trained, sha256_hex, train_kind, write_dataset, ExperimentConfig, Manifest,
};
use liqnet::io::{read_to_string, write_atomic};
use liqnet::metrics::MetricsReport;
use liqnet::training::gradient_check;
use liqnet::{CellKind, Error};

/// Mean per-neuron |corr| with its spread, measured on real roads.
const REFERENCE_LRC_SA_WINTER: (f64, f64) = (0.766, 0.243);
const REFERENCE_CTRNN: (f64, f64) = (0.315, 0.243);

#[derive(Parser, Debug)]
#[command(name = "liqnet", version, about = "Train and evaluate liquid recurrent cells on a synthetic lane-keeping task")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `training.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for internal parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key.path=value` override, applied before validation. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate roads, expert rollouts and the windowed dataset.
    Generate,
    /// Train every configured cell kind on the generated dataset.
    Train,
    /// Closed-loop evaluation, correlation tables, SSIM and saliency images.
    Eval,
    /// Compare BPTT gradients against finite differences.
    Gradcheck {
        /// Cell kind, or `all`.
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Added to every analytic gradient entry; for testing the check itself.
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_error: f64,
    },
    /// Summarize report.json and the training histories.
    Report,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::InfeasibleRoad(_) | Error::Empty(_) => 2,
            Error::Io { .. } | Error::Format(_) | Error::Json(_) | Error::Csv(_) => 4,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| fail(2, "--config is required for this command"))?;
    let text = read_to_string(path)?;
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("training.seed={seed}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("output_dir={}", serde_json::Value::String(out.display().to_string())));
    }
    Ok(ExperimentConfig::from_json_with_overrides(&text, &overrides)?)
}

fn dataset_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("dataset")
}

fn cmd_generate(cfg: &ExperimentConfig) -> CmdResult {
    let ds = generate_dataset(cfg)?;
    let man = write_dataset(&dataset_dir(cfg), cfg, &ds)?;
    println!("dataset written to {}", dataset_dir(cfg).display());
    for (k, v) in &man.counts {
        println!("  {k}: {v}");
    }
    Ok(())
}

fn cmd_train(cfg: &ExperimentConfig) -> CmdResult {
    let ds = read_dataset(&dataset_dir(cfg))?;
    let mut diverged = Vec::new();
    for &kind in &cfg.kinds {
        log::info!("training {kind}");
        let t = train_kind(cfg, &ds, kind, |r| {
            log::info!("{kind} epoch {} train {:.5} val {:.5} weighted {:.5}", r.epoch, r.train_mse, r.val_mse, r.val_weighted)
        })?;
        save_trained(&cfg.output_dir, cfg, &t)?;
        let s = &t.summary;
        println!(
            "{kind}: best epoch {} val {:.6} weighted {:.6} (baseline {:.6})",
            s.best_epoch, s.val_mse, s.val_weighted, s.baseline_mse
        );
        if let Some(epoch) = s.diverged {
            diverged.push(format!("{kind} at epoch {epoch}"));
        }
    }
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(fail(3, format!("training diverged: {}", diverged.join(", "))))
    }
}

fn cmd_eval(cfg: &ExperimentConfig) -> CmdResult {
    let report = evaluate_all(cfg, &cfg.output_dir)?;
    report.save(&cfg.output_dir)?;
    let mut man = Manifest::new("eval", cfg)?;
    for file in ["report.json", "ssim.csv"] {
        let path = cfg.output_dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        man.files.insert(file.to_string(), sha256_hex(&bytes));
    }
    man.counts.insert("models".into(), report.models.len());
    man.save(&cfg.output_dir)?;
    print!("{}", summarize(&report));
    Ok(())
}

fn parse_kinds(text: &str) -> std::result::Result<Vec<CellKind>, Failure> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(CellKind::ALL.to_vec());
    }
    text.split(',')
        .map(|k| k.trim().parse::<CellKind>().map_err(|e| fail(2, format!("unknown cell kind `{k}`: {e}"))))
        .collect()
}

fn cmd_gradcheck(kinds: &[CellKind], instances: usize, seed: u64, inject: f64) -> CmdResult {
    if instances == 0 {
        return Err(fail(2, "--instances must be positive"));
    }
    let mut failed = Vec::new();
    for &kind in kinds {
        let r = gradient_check(kind, instances, seed, inject)?;
        println!("{kind}: {} (worst relative error {:.3e})", if r.passed { "PASS" } else { "FAIL" }, r.worst_relative());
        for a in &r.arrays {
            println!(
                "  {:<24} rel {:.3e}  abs {:.3e}  {}",
                a.array,
                a.max_relative,
                a.max_absolute,
                if a.passed { "ok" } else { "FAIL" }
            );
        }
        if !r.passed {
            failed.push(kind.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(fail(3, format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn summarize(report: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>10} {:>12} {:>12} {:>12}", "model", "best epoch", "val loss", "weighted", "baseline");
    for m in &report.models {
        match &m.validation {
            Some(v) => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>10} {:>12.6} {:>12.6} {:>12.6}",
                    m.model, v.best_epoch, v.val_mse, v.val_weighted, v.baseline_mse
                );
            }
            None => {
                let _ = writeln!(s, "{:<8} {:>10}", m.model, "-");
            }
        }
    }
    let _ = writeln!(s, "\n|corr| against {:?}, completion and median SSIM per noise variance", report.metadata.reference);
    for m in &report.models {
        for season in &m.seasons {
            let done = season.completion.iter().sum::<f64>() / season.completion.len().max(1) as f64;
            let ssim: Vec<String> =
                season.ssim.iter().map(|x| format!("{}:{:.3}", x.variance, x.summary.median)).collect();
            let _ = writeln!(
                s,
                "{:<8} {:<7} |corr| {:.3} +- {:.3}  completion {:.1}%  ssim {}",
                m.model,
                season.season.name(),
                season.correlation.mean,
                season.correlation.std,
                100.0 * done,
                ssim.join(" ")
            );
        }
    }
    let _ = writeln!(
        s,
        "\nreal-road reference |corr|: LRC_SA winter {:.3} +- {:.3}, CTRNN {:.3} +- {:.3}",
        REFERENCE_LRC_SA_WINTER.0, REFERENCE_LRC_SA_WINTER.1, REFERENCE_CTRNN.0, REFERENCE_CTRNN.1
    );
    s
}

fn cmd_report(cfg: &ExperimentConfig) -> CmdResult {
    let report = MetricsReport::from_json(&read_to_string(&cfg.output_dir.join("report.json"))?)?;
    let text = summarize(&report);
    write_atomic(&cfg.output_dir.join("summary.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| fail(2, format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Gradcheck {
            kind,
            instances,
            inject_error,
        } => cmd_gradcheck(&parse_kinds(kind)?, *instances, cli.seed.unwrap_or(0), *inject_error),
        cmd => {
            let cfg = load_config(cli)?;
            ensure_dir(&cfg.output_dir)?;
            match cmd {
                Command::Generate => cmd_generate(&cfg),
                Command::Train => cmd_train(&cfg),
                Command::Eval => cmd_eval(&cfg),
                Command::Report => cmd_report(&cfg),
                Command::Gradcheck { .. } => unreachable!(),
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
