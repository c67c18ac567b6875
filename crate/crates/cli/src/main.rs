use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use circular_ipw::io::{emit_report, emit_vectors, parse_config, run_analysis, ReportFormat, SchemeSelection};
use circular_ipw::simulation::{run_study, write_summary_csv, Scenario, ScenarioSpec};
use circular_ipw::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "circipw", about = "Causal effects on circular outcomes by inverse probability weighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an analysis described by a TOML config file.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Override the input CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Override the report path; `-` writes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_parser = ["text", "csv", "json"])]
        format: Option<String>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, value_parser = ["ht", "hajek", "both"])]
        scheme: Option<String>,
        /// Per-arm resultant vectors CSV.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Per-unit weights CSV; defaults to `<vectors>_units.csv`.
        #[arg(long)]
        units: Option<PathBuf>,
    },
    /// Monte Carlo study of one scenario, written as CSV.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        scenario: u8,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn create(path: &Path) -> Result<Box<dyn Write>, Error> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Box::new(BufWriter::new(f)))
}

fn units_path(vectors: &Path) -> PathBuf {
    let stem = vectors.file_stem().and_then(|s| s.to_str()).unwrap_or("vectors");
    vectors.with_file_name(format!("{stem}_units.csv"))
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    config: &Path,
    input: Option<PathBuf>,
    report: Option<PathBuf>,
    format: Option<String>,
    level: Option<f64>,
    scheme: Option<String>,
    vectors: Option<PathBuf>,
    units: Option<PathBuf>,
) -> Result<(), (u8, Error)> {
    let config_err = |e: Error| (2, e);
    let mut cfg = parse_config(config).map_err(config_err)?;
    if let Some(p) = input {
        cfg.input = p;
    }
    if let Some(p) = report {
        cfg.output.report = Some(p);
    }
    if let Some(f) = format {
        cfg.output.format = f.parse::<ReportFormat>().map_err(config_err)?;
    }
    if let Some(l) = level {
        cfg.level = l;
    }
    if let Some(s) = scheme {
        cfg.scheme = match s.as_str() {
            "ht" => SchemeSelection::Ht,
            "hajek" => SchemeSelection::Hajek,
            _ => SchemeSelection::Both,
        };
    }
    if let Some(p) = vectors {
        cfg.output.vectors = Some(p);
    }
    if let Some(p) = units {
        cfg.output.units = Some(p);
    }
    cfg.validate().map_err(config_err)?;

    let with_kind = |e: Error| (exit_code(e.kind()), e);
    log::info!("analyzing {}", cfg.input.display());
    let report = run_analysis(&cfg).map_err(with_kind)?;

    let out = cfg.output.report.clone().unwrap_or_else(|| "-".into());
    let mut w = create(&out).map_err(with_kind)?;
    emit_report(&report, cfg.output.format, &mut w).map_err(with_kind)?;
    w.flush().map_err(|e| with_kind(Error::Io { path: out, source: e }))?;

    if let Some(vpath) = &cfg.output.vectors {
        let upath = cfg.output.units.clone().unwrap_or_else(|| units_path(vpath));
        let v = create(vpath).map_err(with_kind)?;
        let u = create(&upath).map_err(with_kind)?;
        emit_vectors(&report, v, u).map_err(with_kind)?;
        log::info!("wrote {} and {}", vpath.display(), upath.display());
    }
    Ok(())
}

fn simulate(scenario: u8, n: usize, reps: usize, seed: u64, output: Option<PathBuf>) -> Result<(), Error> {
    let spec = ScenarioSpec::new(Scenario::from_id(scenario)?, n, reps, seed)?;
    let summary = run_study(&spec)?;
    if summary.flagged {
        log::warn!(
            "summary flagged: {} of {reps} replications failed, {} had no interval",
            summary.n_failed,
            summary.n_variance_failed
        );
    }
    let out = output.unwrap_or_else(|| "-".into());
    let mut w = create(&out)?;
    write_summary_csv(&[summary], &mut w)?;
    w.flush().map_err(|source| Error::Io { path: out, source })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            config,
            input,
            report,
            format,
            level,
            scheme,
            vectors,
            units,
        } => analyze(&config, input, report, format, level, scheme, vectors, units),
        Command::Simulate {
            scenario,
            n,
            reps,
            seed,
            output,
        } => simulate(scenario, n, reps, seed, output).map_err(|e| (exit_code(e.kind()), e)),
        Command::Version => {
            println!("circipw {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
