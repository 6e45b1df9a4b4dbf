use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyvar::harness::{
    draw_path, draw_scheme, run_experiment, run_replication, run_scheme_diagnostics, target_limit,
    ExperimentConfig,
};
use hyvar::model::Component;
use hyvar::scheme_stats::{g_cross, g_kmp, g_onedim, h_stat, overlap_power_sum};
use hyvar::Error;

/// Hayashi-Yoshida type functionals of asynchronously observed bivariate processes.
#[derive(Parser)]
#[command(name = "hyvar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the observation times of one replication.
    Scheme(Draw),
    /// Print the sampled path `t x1 x2` at the observation times of one replication.
    Simulate(Draw),
    /// Evaluate the configured functional on one replication.
    Eval(Draw),
    /// Compute the configured limit target for one replication.
    Limit(Draw),
    /// Print a scheme statistic as a step function `t value` per line.
    Stats(StatsArgs),
    /// Run the convergence experiment over the whole ladder.
    Converge(ConvergeArgs),
    /// Scheme diagnostics over the ladder.
    Diagnostics(ConvergeArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Draw {
    #[command(flatten)]
    common: Common,
    /// Scheme parameter.
    #[arg(long)]
    n: u64,
    /// Replication index.
    #[arg(long, default_value_t = 0)]
    replication: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    draw: Draw,
    /// One of `g1:p`, `g2:p`, `cross:p1,p2`, `h:k,m,p`, `gkmp:k,m,p`, `overlap:p1,p2`.
    #[arg(long)]
    stat: StatKind,
    /// Normalization rate; defaults to the configured rate at `n`, else `n`.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Rows,
}

#[derive(Clone, Copy, Debug)]
enum StatKind {
    Onedim(Component, f64),
    Cross(f64, f64),
    H(u32, u32, f64),
    Gkmp(u32, u32, f64),
    Overlap(f64, f64),
}

impl FromStr for StatKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, args) = s.split_once(':').ok_or("expected <name>:<arguments>")?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("{a}: {e}")))
            .collect::<Result<_, _>>()?;
        let index = |x: f64| -> Result<u32, String> {
            if x >= 0.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX) {
                Ok(x as u32)
            } else {
                Err(format!("{x} is not a nonnegative integer"))
            }
        };
        match (name, nums.as_slice()) {
            ("g1", &[p]) => Ok(Self::Onedim(Component::One, p)),
            ("g2", &[p]) => Ok(Self::Onedim(Component::Two, p)),
            ("cross", &[a, b]) => Ok(Self::Cross(a, b)),
            ("h", &[k, m, p]) => Ok(Self::H(index(k)?, index(m)?, p)),
            ("gkmp", &[k, m, p]) => Ok(Self::Gkmp(index(k)?, index(m)?, p)),
            ("overlap", &[a, b]) => Ok(Self::Overlap(a, b)),
            _ => Err(format!("unknown statistic {s}")),
        }
    }
}

enum Failure {
    Error(Error),
    Verdict,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scheme(d) => {
            let config = load(&d.common)?;
            let scheme = draw_scheme(&config, d.n, d.replication)?;
            emit(d.common.out.as_deref(), &scheme.to_text())?;
        }
        Command::Simulate(d) => {
            let config = load(&d.common)?;
            let scheme = draw_scheme(&config, d.n, d.replication)?;
            let path = draw_path(&config, &scheme, d.n, d.replication)?;
            let mut text = String::new();
            for (t, x) in path.times.iter().zip(&path.values) {
                writeln!(text, "{t} {} {}", x[0], x[1]).expect("writing to a String");
            }
            emit(d.common.out.as_deref(), &text)?;
        }
        Command::Eval(d) => {
            let config = load(&d.common)?;
            let sample = run_replication(&config, d.n, d.replication)?;
            emit(d.common.out.as_deref(), &format!("{}\n", sample.value))?;
        }
        Command::Limit(d) => {
            let config = load(&d.common)?;
            let scheme = draw_scheme(&config, d.n, d.replication)?;
            let jumps = draw_path(&config, &scheme, d.n, d.replication)?.jumps;
            let limit = target_limit(&config, &scheme, &jumps, d.n)?;
            emit(d.common.out.as_deref(), &format!("{limit}\n"))?;
        }
        Command::Stats(s) => {
            let d = &s.draw;
            let config = load(&d.common)?;
            let scheme = draw_scheme(&config, d.n, d.replication)?;
            let rate = s
                .rate
                .unwrap_or_else(|| config.normalization.map_or(d.n as f64, |nm| nm.rate(d.n)));
            let step = match s.stat {
                StatKind::Onedim(l, p) => g_onedim(&scheme, l, p, rate)?,
                StatKind::Cross(p1, p2) => g_cross(&scheme, p1, p2, rate)?,
                StatKind::H(k, m, p) => h_stat(&scheme, k, m, p, rate)?,
                StatKind::Gkmp(k, m, p) => g_kmp(&scheme, k, m, p, rate)?,
                StatKind::Overlap(p1, p2) => {
                    let v = overlap_power_sum(&scheme, p1, p2)?;
                    return Ok(emit(d.common.out.as_deref(), &format!("{v}\n"))?);
                }
            };
            emit(d.common.out.as_deref(), &step.to_text())?;
        }
        Command::Converge(c) => {
            let mut config = load(&c.common)?;
            if c.common.out.is_some() {
                config.output = c.common.out.clone();
            }
            let report = run_experiment(&config, c.jobs)?;
            let text = match c.format {
                Format::Csv => report.to_csv(),
                Format::Rows => report.to_rows(),
            };
            emit(config.output.as_deref(), &text)?;
            if !report.passed() {
                return Err(Failure::Verdict);
            }
        }
        Command::Diagnostics(c) => {
            let config = load(&c.common)?;
            let report = run_scheme_diagnostics(&config, c.jobs)?;
            emit(c.common.out.as_deref(), &report.to_csv())?;
            if report.divergent {
                eprintln!("warning: overlap condition grows along the ladder");
            }
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => {
            eprintln!("verdict: FAIL");
            ExitCode::from(2)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
