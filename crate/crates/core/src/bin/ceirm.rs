//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or runtime error, 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ceirm::env::Family;
use ceirm::harness::{emit_report, grid_run, model_select, read_reports, render_csv, render_json, train, Format, RunConfig, Selection};
use ceirm::lemma::{read_sweep_csv, sweep_mixture_entropy, verdict_text, verify_lemma1, write_sweep_csv};
use ceirm::Error;

#[derive(Parser)]
#[command(name = "ceirm", version, about = "Conditional-entropy IRM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train every (alpha, beta) pair and report both selection modes.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        betas: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Conditional entropy of a·Z_i + b·Z_s along the quarter circle.
    LemmaSweep {
        #[arg(long, default_value = "uniform")]
        dist_i: String,
        #[arg(long, default_value = "gaussian")]
        dist_s: String,
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sweep CSV; the verdict goes next to it with a `.verdict.txt` suffix.
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Check a sweep CSV against the lower bounds.
    Verify {
        #[arg(long)]
        sweep: PathBuf,
    },
    /// Collect every report JSON in a directory into one table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<RunConfig, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.output_dir = d;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|source| Failure::Data(Error::Io { path: dir.to_path_buf(), source }))
}

fn family(name: &str) -> Result<Family, Failure> {
    Family::parse(name).ok_or_else(|| Failure::Usage(format!("unknown distribution {name:?} (uniform, gaussian, laplace)")))
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Train { config, alpha, beta, seed, out_dir } => {
            let mut cfg = load_config(&config, seed, out_dir)?;
            if let Some(a) = alpha {
                cfg.objective.alpha = a;
            }
            if let Some(b) = beta {
                cfg.objective.beta = b;
            }
            cfg.validate()?;
            let report = train(&cfg)?;
            create_dir(&cfg.output_dir)?;
            let stem = format!("train_a{}_b{}_s{}", cfg.objective.alpha, cfg.objective.beta, cfg.seed);
            let reports = [report];
            emit_report(&reports, cfg.output_dir.join(format!("{stem}.csv")), Format::Csv)?;
            emit_report(&reports, cfg.output_dir.join(format!("{stem}.json")), Format::Json)?;
            let r = &reports[0];
            println!(
                "{} alpha={} beta={} seed={} test_accuracy={:.4} val_accuracy={:.4} -> {}",
                r.method,
                cfg.objective.alpha,
                cfg.objective.beta,
                cfg.seed,
                r.final_test_accuracy,
                r.val_accuracy,
                cfg.output_dir.join(format!("{stem}.csv")).display()
            );
            Ok(())
        }
        Command::Grid { config, alphas, betas, seed, out_dir } => {
            let cfg = load_config(&config, seed, out_dir)?;
            let result = grid_run(&cfg, &alphas, &betas)?;
            create_dir(&cfg.output_dir)?;
            emit_report(&result.reports, cfg.output_dir.join("grid.csv"), Format::Csv)?;
            emit_report(&result.reports, cfg.output_dir.join("grid.json"), Format::Json)?;
            for f in &result.failures {
                eprintln!("run alpha={} beta={} failed: {}", f.alpha, f.beta, f.error);
            }
            if !result.reports.is_empty() {
                for mode in [Selection::TrainDomain, Selection::TestDomain] {
                    let best = model_select(&result.reports, mode)?;
                    println!(
                        "{}: {} alpha={} beta={} test_accuracy={:.4} val_accuracy={:.4}",
                        mode.name(),
                        best.method,
                        best.alpha(),
                        best.beta(),
                        best.final_test_accuracy,
                        best.val_accuracy
                    );
                }
            }
            println!("{} runs, {} failed -> {}", result.reports.len() + result.failures.len(), result.failures.len(), cfg.output_dir.join("grid.csv").display());
            Ok(())
        }
        Command::LemmaSweep { dist_i, dist_s, points, n, k, seed, out } => {
            let rows = sweep_mixture_entropy(family(&dist_i)?, family(&dist_s)?, points, n, k, seed)?;
            write_sweep_csv(&rows, &out)?;
            let report = verify_lemma1(&rows);
            let text = verdict_text(&rows, &report);
            let verdict = verdict_path(&out);
            std::fs::write(&verdict, &text).map_err(|source| Failure::Data(Error::Io { path: verdict.clone(), source }))?;
            print!("{text}");
            if report.pass { Ok(()) } else { Err(Failure::Verification(format!("{} violations", report.violations.len()))) }
        }
        Command::Verify { sweep } => {
            let rows = read_sweep_csv(&sweep)?;
            let report = verify_lemma1(&rows);
            print!("{}", verdict_text(&rows, &report));
            if report.pass { Ok(()) } else { Err(Failure::Verification(format!("{} violations", report.violations.len()))) }
        }
        Command::Report { input, format, out } => {
            let format = Format::parse(&format).ok_or_else(|| Failure::Usage(format!("unknown format {format:?} (csv, json)")))?;
            if !input.is_dir() {
                return Err(Failure::Data(Error::MissingData { path: input }));
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(&input)
                .map_err(|source| Failure::Data(Error::Io { path: input.clone(), source }))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            let mut reports = Vec::new();
            for f in &files {
                reports.extend(read_reports(f)?);
            }
            match out {
                Some(path) => emit_report(&reports, path, format)?,
                None => match format {
                    Format::Csv => print!("{}", render_csv(&reports)?),
                    Format::Json => println!("{}", render_json(&reports)?),
                },
            }
            Ok(())
        }
    }
}

fn verdict_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".verdict.txt");
    PathBuf::from(s)
}
