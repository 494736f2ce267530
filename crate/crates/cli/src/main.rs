use asep_cli::config::{parse_configs, Payload, RunConfig};
use asep_cli::record::{records_csv, table_csv, ResultRecord, TableRow};
use asep_cli::run::{execute, with_threads, RunSettings};
use asep_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exact transition probabilities for multi-species exclusion processes.
#[derive(Parser, Debug)]
#[command(name = "asep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transition probabilities (two-species TASEP, rainbow ASEP, window tables).
    Green(Common),
    /// Block and total crossing probabilities.
    Crossing(Common),
    /// Cumulative crossing probabilities through a window.
    Wall(Common),
    /// Monte Carlo estimates from the continuous-time simulator.
    Simulate(Common),
    /// Numerical identity checks.
    Verify(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON-lines configuration file; every line must name this command.
    #[arg(long, conflicts_with = "query")]
    config: Option<PathBuf>,
    /// Inline JSON query for this command.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Cap on quadrature node evaluations and Monte Carlo samples.
    #[arg(long)]
    budget: Option<u64>,
    /// Absolute quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Append result records to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a CSV table (or one row per scalar record) to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit wall-clock timing so records are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", p.display()))
}

fn load(name: &str, c: &Common) -> Result<Vec<RunConfig>> {
    let cfgs = match (&c.config, &c.query) {
        (Some(path), _) => parse_configs(&std::fs::read_to_string(path).map_err(|e| io_err(path, e))?)?,
        (None, Some(q)) => {
            let line = format!("{{\"command\":{},\"query\":{q}}}", serde_json::Value::String(name.into()));
            parse_configs(&line)?
        }
        (None, None) if name == "verify" => vec![RunConfig::new(Payload::Verify(Default::default()))],
        (None, None) => return Err(Error::InvalidInput("either --config or --query is required".into())),
    };
    if let Some(bad) = cfgs.iter().find(|c| c.payload.command() != name) {
        return Err(Error::InvalidInput(format!("configuration for {:?} passed to {name:?}", bad.payload.command())));
    }
    Ok(cfgs)
}

fn append(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn run(name: &str, c: &Common) -> Result<bool> {
    let cfgs = load(name, c)?;
    let settings = RunSettings { seed: c.seed, budget: c.budget, tol: c.tol, timing: !c.no_timing };
    let mut records: Vec<ResultRecord> = Vec::new();
    let mut tables: Vec<TableRow> = Vec::new();
    let mut ok = true;
    let stdout = std::io::stdout();
    for cfg in &cfgs {
        let out = with_threads(c.threads, || execute(cfg, &settings))??;
        let line = out.record.to_line()?;
        writeln!(stdout.lock(), "{line}").map_err(|e| Error::InvalidInput(format!("stdout: {e}")))?;
        for p in [c.out.as_ref(), cfg.out.as_ref()].into_iter().flatten() {
            append(p, std::slice::from_ref(&line))?;
        }
        if out.verified == Some(false) {
            ok = false;
        }
        if let Some(t) = out.table {
            tables.extend(t);
        }
        records.push(out.record);
    }
    if let Some(p) = &c.csv {
        let text = if tables.is_empty() { records_csv(&records) } else { table_csv(&tables) };
        std::fs::write(p, text).map_err(|e| io_err(p, e))?;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Green(c) => ("green", c),
        Command::Crossing(c) => ("crossing", c),
        Command::Wall(c) => ("wall", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Verify(c) => ("verify", c),
    };
    match run(name, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("asep: verification failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("asep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
