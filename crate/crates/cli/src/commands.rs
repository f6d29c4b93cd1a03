use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use forcepinch_core::calibration::{build_force_mapping, cluster_force_levels, ForceSample};
use forcepinch_core::mapping::{
    eval_constant, eval_forcepinch, eval_gogo, eval_prism, TechniqueConfig,
};
use forcepinch_core::metrics::{trial_metrics, Histogram, TrialMetrics};
use forcepinch_core::synthuser::{
    gen_input_stream, plan_trial, simulate_trial, NoiseModel, PolicyParams,
};
use forcepinch_core::tasks::make_trace_path;
use forcepinch_core::{
    start_session, CalibrationProfile, EngineError, InputSample, Shape, Task, TaskKind, Technique,
    TrialLog,
};
use serde::{Deserialize, Serialize};

use crate::config::ResolvedRun;
use crate::error::{CliError, CliResult};

/// Column order of the per-trial CSV.
pub const CSV_COLUMNS: [&str; 11] = [
    "technique",
    "task",
    "seed",
    "c",
    "error_distance",
    "error_path_mean",
    "operation_time",
    "num_operations",
    "hand_travel",
    "object_travel",
    "overshoot_count",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub technique: Technique,
    pub task: String,
    pub seed: u64,
    pub c: f64,
    pub error_distance: Option<f64>,
    pub error_path_mean: Option<f64>,
    pub operation_time: Option<f64>,
    pub num_operations: usize,
    pub hand_travel: f64,
    pub object_travel: f64,
    pub overshoot_count: Option<usize>,
}

fn task_label(task: &Task) -> String {
    match task {
        Task::Trace(p) => format!("trace:{}", p.shape),
        other => other.kind().to_string(),
    }
}

impl MetricsRow {
    pub fn new(log: &TrialLog, m: &TrialMetrics) -> Self {
        let h = &log.header;
        Self {
            technique: h.technique.technique,
            task: task_label(&h.task),
            seed: h.seed,
            c: h.technique.base_gain_c,
            error_distance: m.error_distance,
            error_path_mean: m.error_path_mean,
            operation_time: m.operation_time,
            num_operations: m.num_operations,
            hand_travel: m.hand_travel,
            object_travel: m.object_travel,
            overshoot_count: m.overshoot_count,
        }
    }
}

/// Histograms of one trial, keyed like its CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub technique: Technique,
    pub task: String,
    pub seed: u64,
    pub speed_histogram: Histogram,
    pub position_histogram: Option<Histogram>,
}

impl HistogramEntry {
    pub fn new(row: &MetricsRow, m: &TrialMetrics) -> Self {
        Self {
            technique: row.technique,
            task: row.task.clone(),
            seed: row.seed,
            speed_histogram: m.speed_histogram.clone(),
            position_histogram: m.position_histogram.clone(),
        }
    }
}

/// Writes the header even when there are no rows.
pub fn write_csv<W: Write>(rows: &[MetricsRow], w: W) -> anyhow::Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[MetricsRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes `text` to `path`, or stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // a closed downstream pipe is not a failure of ours
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

pub fn load_profile(path: &Path) -> CliResult<CalibrationProfile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
    let p = serde_json::from_str(&text)
        .with_context(|| format!("parsing profile {}", path.display()))?;
    Ok(p)
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::MissingProfile => CliError::usage(format!("{e}; pass --profile")),
        other => CliError::Data(other.into()),
    }
}

fn synth_error(e: forcepinch_core::synthuser::SynthError) -> CliError {
    match e {
        forcepinch_core::synthuser::SynthError::Engine(inner) => engine_error(inner),
        other => CliError::Data(other.into()),
    }
}

/// Reads InputSample JSON Lines; blank lines are skipped.
pub fn read_stream<R: BufRead>(r: R) -> anyhow::Result<Vec<InputSample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| anyhow!("line {}: {e}", i + 1))?;
        out.push(s);
    }
    Ok(out)
}

pub fn stream_jsonl(samples: &[InputSample]) -> String {
    let mut s = String::new();
    for x in samples {
        s.push_str(&serde_json::to_string(x).expect("samples serialize"));
        s.push('\n');
    }
    s
}

fn log_name(log: &TrialLog) -> String {
    let h = &log.header;
    format!(
        "{}-{}-{:06}.jsonl",
        h.technique.technique,
        task_label(&h.task).replace(':', "-"),
        h.seed
    )
}

/// Output of a simulate or analyze run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<MetricsRow>,
    pub histograms: Vec<HistogramEntry>,
}

impl Report {
    fn push(&mut self, log: &TrialLog) -> anyhow::Result<()> {
        let m = trial_metrics(log).map_err(|e| anyhow!("seed {}: {e}", log.header.seed))?;
        let row = MetricsRow::new(log, &m);
        self.histograms.push(HistogramEntry::new(&row, &m));
        self.rows.push(row);
        Ok(())
    }

    pub fn write(&self, csv: Option<&Path>, histograms: Option<&Path>) -> anyhow::Result<()> {
        emit(csv, &csv_string(&self.rows))?;
        if let Some(p) = histograms {
            let mut text = serde_json::to_string_pretty(&self.histograms)?;
            text.push('\n');
            emit(Some(p), &text)?;
        }
        Ok(())
    }
}

/// Runs every seed of `run`. With `stream`, the given samples replace the
/// synthetic user for each trial.
pub fn simulate(
    run: &ResolvedRun,
    stream: Option<&[InputSample]>,
) -> CliResult<(Vec<TrialLog>, Report)> {
    let profile = run.profile.as_deref().map(load_profile).transpose()?;
    let cfg = TechniqueConfig::new(run.technique, run.c);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mut logs = Vec::with_capacity(run.seeds.len());
    let mut report = Report::default();
    for &seed in &run.seeds {
        let task = run.task.make_trial(seed, run.shape);
        let log = match stream {
            Some(samples) => {
                let mut s = start_session(task, &cfg, profile.as_ref(), seed, run.options)
                    .map_err(engine_error)?;
                s.run(samples).map_err(engine_error)?;
                s.into_trial_log()
            }
            None => simulate_trial(
                &task,
                &cfg,
                profile.as_ref(),
                run.strategy,
                &PolicyParams::for_task(run.task),
                run.tremor,
                seed,
                run.options,
            )
            .map_err(synth_error)?,
        };
        report.push(&log)?;
        logs.push(log);
    }
    if let Some(dir) = &run.out_dir {
        for log in &logs {
            let mut w = create(&dir.join(log_name(log)))?;
            log.write_jsonl(&mut w).context("writing trial log")?;
            w.flush().context("writing trial log")?;
        }
    }
    Ok((logs, report))
}

/// Synthetic input stream of the first seed in `run`.
pub fn gen_stream(run: &ResolvedRun) -> CliResult<Vec<InputSample>> {
    let profile = run.profile.as_deref().map(load_profile).transpose()?;
    let cfg = TechniqueConfig::new(run.technique, run.c);
    let seed = run.seeds[0];
    let task = run.task.make_trial(seed, run.shape);
    let params = PolicyParams::for_task(run.task);
    let plan = plan_trial(
        &task,
        &cfg,
        profile.as_ref(),
        run.strategy,
        &params,
        run.options,
    )
    .map_err(synth_error)?;
    let noise = NoiseModel {
        tremor_amplitude: run.tremor,
        seed,
    };
    gen_input_stream(&plan, &noise, profile.as_ref()).map_err(synth_error)
}

/// Force samples from CSV (`t,raw` with header) or JSON Lines.
pub fn read_force_samples(path: &Path) -> anyhow::Result<Vec<ForceSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut rd = csv::Reader::from_reader(file);
        rd.deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| anyhow!("row {}: {e}", i + 1)))
            .collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| anyhow!("line {}: {e}", i + 1))?);
        }
        Ok(out)
    }
}

pub fn calibrate(input: &Path, c: f64) -> CliResult<CalibrationProfile> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CliError::usage(format!("c must be positive, got {c}")));
    }
    let samples = read_force_samples(input)?;
    let anchors = cluster_force_levels(&samples)
        .with_context(|| format!("calibrating from {}", input.display()))?;
    Ok(build_force_mapping(anchors, c).map_err(anyhow::Error::from)?)
}

pub fn profile_json(p: &CalibrationProfile) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("profile serializes");
    s.push('\n');
    s
}

pub fn read_log(path: &Path) -> anyhow::Result<TrialLog> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TrialLog::read_jsonl(BufReader::new(f)).with_context(|| format!("{}", path.display()))
}

pub fn analyze(paths: &[PathBuf]) -> CliResult<Report> {
    let mut report = Report::default();
    for p in paths {
        let log = read_log(p)?;
        report
            .push(&log)
            .with_context(|| format!("{}", p.display()))?;
    }
    Ok(report)
}

/// Input ranges sampled for each technique's curve.
pub const GOGO_PLOT_RANGE: (f64, f64) = (0.0, 0.7);
pub const PRISM_PLOT_RANGE: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub f_norm: f64,
    pub constant: f64,
    pub gogo_d: f64,
    pub gogo: f64,
    pub prism_v: f64,
    pub prism: f64,
    pub forcepinch: f64,
}

pub fn mapping_table(c: f64, rows: usize) -> CliResult<Vec<MappingRow>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CliError::usage(format!("c must be positive, got {c}")));
    }
    if rows < 2 {
        return Err(CliError::usage("need at least 2 rows"));
    }
    let cfg = |t| TechniqueConfig::new(t, c);
    let (constant, gogo, prism, fp) = (
        cfg(Technique::Constant),
        cfg(Technique::GoGo),
        cfg(Technique::Prism),
        cfg(Technique::ForcePinch),
    );
    let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (rows - 1) as f64;
    let out = (0..rows)
        .map(|i| {
            let f = at((0.0, 1.0), i);
            let d = at(GOGO_PLOT_RANGE, i);
            let v = at(PRISM_PLOT_RANGE, i);
            MappingRow {
                f_norm: f,
                constant: eval_constant(&constant).0,
                gogo_d: d,
                gogo: eval_gogo(d, &gogo).expect("d >= 0").0,
                prism_v: v,
                prism: eval_prism(v, &prism).expect("v >= 0").0,
                forcepinch: eval_forcepinch(f, &fp).0,
            }
        })
        .collect();
    Ok(out)
}

pub fn mapping_csv(rows: &[MappingRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

/// Task definitions: trials of `kind` for each seed, or every trace shape.
pub fn gen_traces(kind: Option<TaskKind>, seeds: &[u64]) -> Vec<Task> {
    match kind {
        Some(k) if !seeds.is_empty() => seeds.iter().map(|&s| k.make_trial(s, None)).collect(),
        _ => Shape::ALL
            .iter()
            .map(|&s| Task::Trace(make_trace_path(s)))
            .collect(),
    }
}
