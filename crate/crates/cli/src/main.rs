//! `paraverify` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use paraverify_core::corpus::{self, CORPUS};
use paraverify_core::{emit_report, parse_protocol, run_pipeline, PipelineConfig, ReportFormat, Strategy};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "paraverify", version, about = "Infer and check parameterized invariants of symmetric protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer invariants for a protocol file or bundled protocol and verify them.
    Check(CheckArgs),
    /// List the bundled protocols.
    Corpus,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Inc,
    Dec,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Path to a `.pv` file, or the name of a bundled protocol.
    input: String,
    #[arg(long, value_enum, default_value = "dec")]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "on")]
    heuristic: Switch,
    #[arg(long, value_enum, default_value = "on")]
    symmetry: Switch,
    /// Uniform instance sizes for the final inductiveness check.
    #[arg(long, value_delimiter = ',')]
    final_sizes: Option<Vec<u8>>,
    /// Largest instance size used for bounded implication while merging.
    #[arg(long)]
    impl_bound: Option<u8>,
    /// Maximum number of reachable states per instance.
    #[arg(long)]
    state_limit: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<u64>,
    /// Fuse existential invariants with shared witnesses while merging.
    #[arg(long)]
    strengthen: bool,
    #[arg(long, value_enum, default_value = "text")]
    report: FormatArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_INPUT: u8 = 3;

fn load(input: &str) -> anyhow::Result<(String, String)> {
    let path = Path::new(input);
    if path.exists() {
        let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| input.into());
        return Ok((name, src));
    }
    match corpus::lookup(input) {
        Some(e) => Ok((e.name.to_string(), e.source.to_string())),
        None => anyhow::bail!("{input}: no such file or bundled protocol"),
    }
}

fn check(args: CheckArgs) -> ExitCode {
    let (name, src) = match load(&args.input) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let spec = match parse_protocol(&src) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("{}:{e}", args.input);
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Some(sizes) = &args.final_sizes {
        if sizes.iter().any(|s| *s == 0) {
            eprintln!("error: final-check sizes must be positive");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let mut cfg = PipelineConfig {
        strategy: match args.strategy {
            StrategyArg::Inc => Strategy::Increasing,
            StrategyArg::Dec => Strategy::Decreasing,
        },
        heuristic: args.heuristic.on(),
        symmetry: args.symmetry.on(),
        final_sizes: args.final_sizes.clone(),
        impl_bound: args.impl_bound,
        strengthen: args.strengthen,
        time_limit: args.time_limit.map(std::time::Duration::from_secs),
        ..PipelineConfig::default()
    };
    if let Some(l) = args.state_limit {
        cfg.state_limit = l;
    }
    let run = run_pipeline(&name, spec, &cfg);
    let format = match args.report {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
    };
    let text = emit_report(&run.report, format);
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_INPUT);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(run.report.outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Check(args) => check(args),
        Command::Corpus => {
            for e in CORPUS {
                println!("{:<20} {}", e.name, e.summary);
            }
            ExitCode::SUCCESS
        }
    }
}
