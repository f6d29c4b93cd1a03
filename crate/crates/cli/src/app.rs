use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use forcepinch_core::{ForceStrategy, Shape, TaskKind, Technique};

use crate::commands::{self, emit};
use crate::config::{ResolvedRun, RunConfig};
use crate::error::CliResult;
use crate::serve::Server;

#[derive(Debug, Parser)]
#[command(
    name = "forcepinch",
    version,
    about = "Force-responsive tracking-speed engine and study harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded synthetic trials and write logs plus a metrics CSV.
    Simulate(SimulateArgs),
    /// Write the synthetic input stream of one trial as JSON Lines.
    GenStream(RunArgs),
    /// Detect force anchors in a recording and write a calibration profile.
    Calibrate {
        /// Force samples, `.csv` with `t,raw` columns or JSON Lines.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Compute metrics for trial logs.
    Analyze {
        logs: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        histograms: Option<PathBuf>,
    },
    /// Serve interactive sessions over newline-delimited JSON on TCP.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Tabulate all four speed mappings.
    PlotMappings {
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write task definitions as JSON (all trace shapes by default).
    GenTraces {
        #[arg(long)]
        task: Option<TaskKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    technique: Option<Technique>,
    #[arg(long)]
    task: Option<TaskKind>,
    #[arg(long)]
    shape: Option<Shape>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Hand tremor std-dev per tick, meters.
    #[arg(long)]
    tremor: Option<f64>,
    #[arg(long)]
    strategy: Option<ForceStrategy>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    rollback: Option<bool>,
    #[arg(long)]
    min_engage_force: Option<f64>,
    /// Output file (gen-stream) or CSV path (simulate); stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Directory for one JSON Lines log per trial.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// Replay this input stream instead of the synthetic user.
    #[arg(long)]
    stream: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, extra: RunConfig) -> CliResult<ResolvedRun> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            technique: self.technique,
            task: self.task,
            shape: self.shape,
            c: self.c,
            seed: self.seed,
            trials: self.trials,
            tremor: self.tremor,
            strategy: self.strategy,
            profile: self.profile.clone(),
            rollback: self.rollback,
            min_engage_force: self.min_engage_force,
            csv: self.out.clone(),
            ..extra
        };
        base.overlay(flags).resolve()
    }
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => {
            let run = a.run.resolve(RunConfig {
                out_dir: a.out_dir.clone(),
                histograms: a.histograms.clone(),
                ..Default::default()
            })?;
            let stream = match &a.stream {
                Some(p) => {
                    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                    Some(
                        commands::read_stream(BufReader::new(f))
                            .with_context(|| format!("{}", p.display()))?,
                    )
                }
                None => None,
            };
            let (_, report) = commands::simulate(&run, stream.as_deref())?;
            report.write(run.csv.as_deref(), run.histograms.as_deref())?;
        }
        Command::GenStream(a) => {
            let run = a.resolve(RunConfig::default())?;
            let samples = commands::gen_stream(&run)?;
            emit(run.csv.as_deref(), &commands::stream_jsonl(&samples))?;
        }
        Command::Calibrate { input, output, c } => {
            let profile = commands::calibrate(&input, c)?;
            emit(output.as_deref(), &commands::profile_json(&profile))?;
        }
        Command::Analyze {
            logs,
            csv,
            histograms,
        } => {
            let report = commands::analyze(&logs)?;
            report.write(csv.as_deref(), histograms.as_deref())?;
        }
        Command::Serve { port, host } => {
            let server = Server::bind((host.as_str(), port))
                .with_context(|| format!("binding {host}:{port}"))?;
            eprintln!("listening on {}", server.local_addr());
            server.wait();
        }
        Command::PlotMappings { c, rows, out } => {
            let table = commands::mapping_table(c, rows)?;
            emit(out.as_deref(), &commands::mapping_csv(&table))?;
        }
        Command::GenTraces {
            task,
            seed,
            trials,
            out,
        } => {
            let seeds: Vec<u64> = (0..trials as u64).map(|i| seed + i).collect();
            let tasks = commands::gen_traces(task, &seeds);
            let mut text = serde_json::to_string_pretty(&tasks).context("encoding tasks")?;
            text.push('\n');
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the subcommand and maps failures to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
