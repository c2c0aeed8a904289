use std::error::Error;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use streamreg::datagen::{enumerate_suite, write_csv, DatasetSpec};
use streamreg::{LearnerConfig, ObservedPair};
use streamreg_sim::aggregate::to_csv;
use streamreg_sim::{aggregate, ingest_measurements, run_matrix, run_session, GroupBy, IngestSchema, SessionReport};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "streamreg", version, about = "Simulate online regression learners on data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one synthetic dataset, or the whole suite, as CSV.
    Gen {
        /// Dataset name such as SYNTH_ND_CD_2000_2_10_1_11.
        #[arg(long, conflicts_with = "suite", required_unless_present = "suite")]
        dataset: Option<String>,
        /// Emit all 576 suite datasets into the output directory.
        #[arg(long)]
        suite: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (single dataset, stdout if omitted) or directory (suite).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one learner over one stream and print its report as JSON.
    Run {
        #[arg(long)]
        learner: String,
        /// CSV path or synthetic dataset name.
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include per-item traces in the report.
        #[arg(long)]
        trace: bool,
        /// Ingest flags for CSV input, e.g. dims=2,signed=true.
        #[arg(long, default_value = "")]
        schema: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every learner in a roster file against a set of datasets.
    Matrix {
        /// One codename per line; blank lines and lines starting with # are skipped.
        #[arg(long)]
        learners: PathBuf,
        /// Use the 576-dataset suite.
        #[arg(long)]
        suite: bool,
        /// Comma separated dataset names, used when --suite is absent.
        #[arg(long, value_delimiter = ',')]
        datasets: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the stream length of every dataset.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        trace: bool,
        /// Directory receiving reports.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a measurement CSV into a plain feature/target stream CSV.
    Ingest {
        path: PathBuf,
        #[arg(long, default_value = "")]
        schema: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average report metrics per group and print a CSV table.
    Aggregate {
        /// JSON files holding one report or an array of reports.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "family")]
        group_by: Vec<GroupBy>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_stream(dataset: &str, seed: u64, schema: &str) -> CliResult<(String, Vec<ObservedPair>)> {
    let path = Path::new(dataset);
    if path.is_file() {
        let schema = IngestSchema::parse(schema)?;
        let name = path.file_stem().map_or(dataset.to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, ingest_measurements(path, schema)?));
    }
    let spec: DatasetSpec = dataset.parse()?;
    Ok((spec.name(), spec.with_seed(seed).generate()?))
}

fn read_roster(path: &Path) -> CliResult<Vec<LearnerConfig>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        out.push(line.parse().map_err(|e| format!("{line}: {e}"))?);
    }
    Ok(out)
}

fn read_reports(path: &Path) -> CliResult<Vec<SessionReport>> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(if value.is_array() { serde_json::from_value(value)? } else { vec![serde_json::from_value(value)?] })
}

fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen { dataset, suite, seed, out } => {
            if suite {
                let dir = out.ok_or("--suite needs --out <dir>")?;
                fs::create_dir_all(&dir)?;
                for spec in enumerate_suite(seed) {
                    let file = BufWriter::new(File::create(dir.join(format!("{}.csv", spec.name())))?);
                    write_csv(file, &spec.generate()?)?;
                }
            } else {
                let spec: DatasetSpec = dataset.unwrap_or_default().parse()?;
                let mut w = output(out.as_deref())?;
                write_csv(&mut w, &spec.with_seed(seed).generate()?)?;
                w.flush()?;
            }
        }
        Command::Run { learner, dataset, seed, trace, schema, out } => {
            let config: LearnerConfig = learner.parse()?;
            let (name, stream) = load_stream(&dataset, seed, &schema)?;
            let report = run_session(&config.with_seed(seed), &name, &stream, trace);
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            if let Some(err) = &report.error {
                return Err(format!("session failed: {err}").into());
            }
        }
        Command::Matrix { learners, suite, datasets, seed, size, parallel, trace, out } => {
            let configs = read_roster(&learners)?;
            let mut specs = if suite {
                enumerate_suite(seed)
            } else {
                datasets.iter().map(|n| n.parse::<DatasetSpec>().map(|s| s.with_seed(seed))).collect::<Result<_, _>>()?
            };
            if specs.is_empty() {
                return Err("no datasets: pass --suite or --datasets".into());
            }
            if let Some(n) = size {
                specs.iter_mut().for_each(|s| s.size = n);
            }
            let reports = run_matrix(&configs, &specs, parallel.max(1), trace);
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(File::create(out.join("reports.json"))?);
            serde_json::to_writer(&mut w, &reports)?;
            w.flush()?;
            let failed = reports.iter().filter(|r| !r.is_ok()).count();
            eprintln!("{} sessions, {failed} failed", reports.len());
        }
        Command::Ingest { path, schema, out } => {
            let pairs = ingest_measurements(&path, IngestSchema::parse(&schema)?)?;
            let mut w = output(out.as_deref())?;
            write_csv(&mut w, &pairs)?;
            w.flush()?;
            eprintln!("{} rows", pairs.len());
        }
        Command::Aggregate { reports, group_by, out } => {
            let mut all = Vec::new();
            for p in &reports {
                all.extend(read_reports(p).map_err(|e| format!("{}: {e}", p.display()))?);
            }
            let mut w = output(out.as_deref())?;
            w.write_all(to_csv(&aggregate(&all, &group_by)).as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
