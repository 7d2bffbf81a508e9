use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hadaflow::harness::{self, ExperimentConfig, Sampling};
use hadaflow::metrics::Metric;
use hadaflow::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_PROBE: u8 = 3;

#[derive(Parser)]
#[command(name = "hadaflow", version, about = "Cross-entropy UFM dynamics under Hadamard initialization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured arm and seed, writing runs.csv, summary.json and plots.
    Run(ExperimentArgs),
    /// Integrate the K = 8 trajectory on which M rises.
    Fig1 {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate the fixed non-monotonicity probes.
    Counterexamples {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Search random states for growing distances.
    Scan(ScanArgs),
    /// Compare full descent with the reduced ODE.
    Compare(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    log_points: Option<usize>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value = "M")]
    metric: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = ["uniform", "biased"], default_value = "biased")]
    sampling: String,
    #[arg(long, default_value_t = 0.1)]
    norm_min: f64,
    #[arg(long, default_value_t = 31.622776601683793)]
    norm_max: f64,
    /// Also write the violating points to <out>/scan.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> hadaflow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seeds = vec![v];
        }
        if let Some(v) = self.k {
            cfg.k = v;
            if self.d.is_none() && cfg.d < v {
                cfg.d = v;
            }
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if let Some(v) = self.log_points {
            cfg.log_points = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(path: &Path, contents: &str) -> hadaflow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn run(cmd: Command) -> hadaflow::Result<u8> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.config()?;
            let out = harness::run_experiment(&cfg)?;
            for (arm, s) in &out.summary.arms {
                println!("{arm:<14} {:<8} seeds={}", s.status, s.seeds.len());
                for f in &s.failures {
                    eprintln!("  seed {} failed: {}", f.seed, f.error);
                }
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(if out.summary.failed_arms().is_empty() { 0 } else { EXIT_NUMERIC })
        }
        Command::Fig1 { out } => {
            let rows = harness::reproduce_fig1(&out)?;
            let m0 = rows[0].m;
            let m_max = rows.iter().map(|r| r.m).fold(f64::MIN, f64::max);
            println!("M(0) = {m0:.6}, max M = {m_max:.6}, rows = {}", rows.len());
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Counterexamples { out } => {
            let report = harness::check_counterexamples()?;
            let text = report.to_string();
            println!("{text}");
            write(&out.join("counterexamples.txt"), &format!("{text}\n"))?;
            write(&out.join("counterexamples.json"), &serde_json::to_string_pretty(&report)?)?;
            Ok(if report.all_pass { 0 } else { EXIT_PROBE })
        }
        Command::Scan(args) => {
            let metric: Metric = args.metric.parse()?;
            let sampling = if args.sampling == "uniform" {
                Sampling::Uniform
            } else {
                Sampling::Biased
            };
            let hits = harness::scan_monotonicity(
                args.k,
                metric,
                args.samples,
                args.seed,
                (args.norm_min, args.norm_max),
                sampling,
            )?;
            println!(
                "K={} metric={} samples={} violations={}",
                args.k,
                metric.name(),
                args.samples,
                hits.len()
            );
            for v in hits.iter().take(5) {
                println!("  rate={:.3e} a={:?}", v.rate, v.a);
            }
            if let Some(out) = args.out {
                write(&out.join("scan.json"), &serde_json::to_string_pretty(&hits)?)?;
            }
            Ok(0)
        }
        Command::Compare(args) => {
            let cfg = args.config()?;
            let report = harness::compare_full_reduced(&cfg)?;
            println!(
                "K={} n={} lr={} iterations={} max relative deviation = {:.3e}",
                report.k, report.n, report.lr, report.iterations, report.max_relative_deviation
            );
            if args.out.is_some() {
                write(&cfg.output_dir.join("compare.json"), &serde_json::to_string_pretty(&report)?)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC })
        }
    }
}
