use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use qflow::grid::{write_complex, WaveFunction};
use qflow::pipeline::{steer as run_steer, SteerOptions};
use qflow::spectral_sim::ControlSchedule;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{rng, Config, ConfigError, ExperimentKind, Stream};
use crate::experiment::{run_cell, run_metadata, Cell, RunError};
use crate::{versions, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE};

#[derive(Debug)]
pub enum CliError {
    Run(RunError),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(RunError::Config(_)) => EXIT_CONFIG,
            CliError::Run(RunError::Numeric(_)) | CliError::Io(..) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl<E: Into<RunError>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn artifact(out: &Path, cfg: &Config, suffix: &str) -> PathBuf {
    out.join(format!("{}_{suffix}", cfg.output.prefix))
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    io(path, fs::write(path, text + "\n"))
}

fn write_state(path: &Path, psi: &WaveFunction) -> CliResult<String> {
    let mut buf = Vec::new();
    write_complex(&mut buf, psi.grid(), psi.values()).map_err(RunError::Numeric)?;
    io(path, fs::write(path, &buf))?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

/// Schedule JSON with the config hash and versions folded into its provenance.
fn write_schedule(path: &Path, cfg: &Config, schedule: &ControlSchedule) -> CliResult<()> {
    let mut s = schedule.clone();
    s.provenance = Some(json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "versions": versions(),
        "synthesis": schedule.provenance,
    }));
    let text = s.to_json().map_err(RunError::Numeric)?;
    io(path, fs::write(path, text + "\n"))
}

fn prepare(config: &Path, out: &Path) -> CliResult<Config> {
    let cfg = Config::load(config)?;
    io(out, fs::create_dir_all(out))?;
    Ok(cfg)
}

pub fn simulate(config: &Path, out: &Path) -> CliResult<u8> {
    let cfg = prepare(config, out)?;
    if cfg.experiment.kind == ExperimentKind::Steer {
        return Err(ConfigError("experiment kind `steer` runs through `qflow steer`".into()).into());
    }
    let base = Cell::base(&cfg);
    let taus = cfg.experiment.tau.as_ref().map(|t| t.values()).unwrap_or_default();
    let mut last = None;
    if taus.len() > 1 {
        let path = artifact(out, &cfg, "errors.csv");
        let mut w = csv_writer(&path)?;
        io(&path, w.write_record(["tau", "distance", "norm_drift", "total_time", "config_hash"]).map_err(Into::into))?;
        for tau in taus {
            let cell = Cell { tau: Some(tau), ..base };
            let run = run_cell(&cfg, &cell)?;
            let row = [fmt_f64(tau), fmt_f64(run.distance), fmt_f64(run.norm_drift()), fmt_f64(run.schedule.total_time()), cfg.hash()];
            io(&path, w.write_record(&row).map_err(Into::into))?;
            last = Some((cell, run));
        }
        io(&path, w.flush())?;
    }
    let (cell, run) = match last {
        Some(v) => v,
        None => (base, run_cell(&cfg, &base)?),
    };

    let norm_path = artifact(out, &cfg, "norm.csv");
    let mut w = csv_writer(&norm_path)?;
    io(&norm_path, w.write_record(["time", "norm", "drift", "config_hash"]).map_err(Into::into))?;
    for (t, n) in &run.norm_log {
        io(&norm_path, w.write_record([fmt_f64(*t), fmt_f64(*n), fmt_f64(n - 1.0), cfg.hash()]).map_err(Into::into))?;
    }
    io(&norm_path, w.flush())?;

    let state_hash = write_state(&artifact(out, &cfg, "state.qfg"), &run.final_state)?;
    write_schedule(&artifact(out, &cfg, "schedule.json"), &cfg, &run.schedule)?;
    let mut meta = run_metadata(&cfg, &run, &cell);
    meta["state_sha256"] = json!(state_hash);
    write_json(&artifact(out, &cfg, "meta.json"), &meta)?;
    println!("distance {:e} (oracle {}), norm drift {:e}", run.distance, run.oracle, run.norm_drift());
    Ok(0)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let f = io(path, File::create(path))?;
    Ok(csv::Writer::from_writer(f))
}

/// Shortest round-trip decimal form.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

const SWEEP_HEADER: &[&str] =
    &["cell", "tau", "n", "points", "substeps", "distance", "norm_drift", "total_time", "config_hash"];
const TIMING_HEADER: &[&str] = &["cell", "wall_time_s"];

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SweepRow {
    cell: usize,
    tau: Option<f64>,
    n: Option<usize>,
    points: usize,
    substeps: usize,
    distance: f64,
    norm_drift: f64,
    total_time: f64,
    config_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TimingRow {
    cell: usize,
    wall_time_s: f64,
}

fn sweep_cells(cfg: &Config) -> Vec<Cell> {
    let base = Cell::base(cfg);
    let sw = cfg.experiment.sweep.clone().unwrap_or_default();
    let or_base = |v: Vec<Option<f64>>| if v.is_empty() { vec![base.tau] } else { v };
    let taus = or_base(sw.tau.iter().map(|&t| Some(t)).collect());
    let ns: Vec<Option<usize>> = if sw.n.is_empty() { vec![base.n] } else { sw.n.iter().map(|&n| Some(n)).collect() };
    let points = if sw.points.is_empty() { vec![base.points] } else { sw.points.clone() };
    let substeps = if sw.substeps.is_empty() { vec![base.substeps] } else { sw.substeps.clone() };
    let mut cells = Vec::new();
    for &tau in &taus {
        for &n in &ns {
            for &p in &points {
                for &s in &substeps {
                    cells.push(Cell { tau, n, points: p, substeps: s });
                }
            }
        }
    }
    cells
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = io(path, csv::Reader::from_path(path).map_err(Into::into))?;
    let rows: Result<Vec<T>, csv::Error> = r.deserialize().collect();
    io(path, rows.map_err(Into::into))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> CliResult<()> {
    let f = io(path, File::create(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    io(path, w.write_record(header).map_err(Into::into))?;
    for row in rows {
        io(path, w.serialize(row).map_err(Into::into))?;
    }
    io(path, w.flush())
}

pub fn sweep(config: &Path, out: &Path, threads: usize, resume: bool) -> CliResult<u8> {
    let cfg = prepare(config, out)?;
    if cfg.experiment.kind == ExperimentKind::Steer {
        return Err(ConfigError("experiment kind `steer` cannot be swept".into()).into());
    }
    let cells = sweep_cells(&cfg);
    for c in &cells {
        cfg.grid_with_points(c.points)?;
    }
    let hash = cfg.hash();
    let csv_path = artifact(out, &cfg, "sweep.csv");
    let timing_path = artifact(out, &cfg, "timing.csv");
    let mut done: BTreeMap<usize, SweepRow> = BTreeMap::new();
    let mut timing: BTreeMap<usize, TimingRow> = BTreeMap::new();
    if resume {
        for row in read_rows::<SweepRow>(&csv_path)? {
            if row.config_hash == hash && row.cell < cells.len() {
                done.insert(row.cell, row);
            }
        }
        for row in read_rows::<TimingRow>(&timing_path)? {
            if done.contains_key(&row.cell) {
                timing.insert(row.cell, row);
            }
        }
    }
    write_rows(&csv_path, SWEEP_HEADER, &done.values().cloned().collect::<Vec<_>>())?;
    write_rows(&timing_path, TIMING_HEADER, &timing.values().cloned().collect::<Vec<_>>())?;
    let todo: Vec<usize> = (0..cells.len()).filter(|i| !done.contains_key(i)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ConfigError(format!("cannot build worker pool: {e}")))?;
    // Rows are appended as cells finish so an interrupted sweep can resume;
    // the files are rewritten in cell order at the end.
    let sink = Mutex::new((done, timing, Vec::<(usize, RunError)>::new()));
    pool.install(|| {
        todo.par_iter().for_each(|&i| {
            let start = Instant::now();
            let result = run_cell(&cfg, &cells[i]);
            let wall = start.elapsed().as_secs_f64();
            let mut guard = sink.lock().expect("sweep sink poisoned");
            match result {
                Ok(run) => {
                    let c = cells[i];
                    let row = SweepRow {
                        cell: i,
                        tau: c.tau,
                        n: c.n,
                        points: c.points,
                        substeps: c.substeps,
                        distance: run.distance,
                        norm_drift: run.norm_drift(),
                        total_time: run.schedule.total_time(),
                        config_hash: hash.clone(),
                    };
                    let _ = append_row(&csv_path, &row);
                    let t = TimingRow { cell: i, wall_time_s: wall };
                    let _ = append_row(&timing_path, &t);
                    guard.0.insert(i, row);
                    guard.1.insert(i, t);
                }
                Err(e) => guard.2.push((i, e)),
            }
        });
    });
    let (done, timing, mut failures) = sink.into_inner().expect("sweep sink poisoned");
    write_rows(&csv_path, SWEEP_HEADER, &done.values().cloned().collect::<Vec<_>>())?;
    write_rows(&timing_path, TIMING_HEADER, &timing.values().cloned().collect::<Vec<_>>())?;
    write_json(
        &artifact(out, &cfg, "sweep_meta.json"),
        &json!({
            "config_hash": hash,
            "seed": cfg.seed,
            "versions": versions(),
            "experiment": cfg.experiment.kind,
            "cells": cells.len(),
            "completed": done.len(),
        }),
    )?;
    failures.sort_by_key(|(i, _)| *i);
    if let Some((i, e)) = failures.into_iter().next() {
        eprintln!("qflow: cell {i} failed");
        return Err(CliError::Run(e));
    }
    println!("{} cells written to {}", done.len(), csv_path.display());
    Ok(0)
}

fn append_row<T: Serialize>(path: &Path, row: &T) -> CliResult<()> {
    let f = io(path, OpenOptions::new().append(true).open(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f));
    io(path, w.serialize(row).map_err(Into::into))?;
    io(path, w.flush())
}

pub fn steer(config: &Path, out: &Path) -> CliResult<u8> {
    let cfg = prepare(config, out)?;
    let e = &cfg.experiment;
    if e.kind != ExperimentKind::Steer {
        return Err(ConfigError("`qflow steer` needs `experiment.kind = \"steer\"`".into()).into());
    }
    let grid = cfg.grid_spec()?;
    let model = cfg.model(grid)?;
    let state = e.state.as_ref().ok_or_else(|| ConfigError("missing key `experiment.state`".into()))?;
    let target = e.target.as_ref().ok_or_else(|| ConfigError("missing key `experiment.target`".into()))?;
    let budget = e.budget.ok_or_else(|| ConfigError("missing key `experiment.budget`".into()))?;
    let psi0 = state.build(grid, &mut rng(cfg.seed, Stream::State), "experiment.state")?;
    let psi1 = target.build(grid, &mut rng(cfg.seed, Stream::Target), "experiment.target")?;
    let mut opts: SteerOptions = e.steer.clone().unwrap_or_default();
    if e.tolerance.is_some() {
        opts.tolerance = e.tolerance;
    }
    let outcome = run_steer(&model, &psi0, &psi1, budget, e.refinement.unwrap_or(1), &opts)?;
    let report = &outcome.report;

    let (final_state, _) = crate::experiment::evolve_logged(&model, &psi0, &outcome.schedule, opts.substeps)?;
    let state_hash = write_state(&artifact(out, &cfg, "state.qfg"), &final_state)?;
    write_schedule(&artifact(out, &cfg, "schedule.json"), &cfg, &outcome.schedule)?;
    let mut doc = report.to_json();
    doc["config_hash"] = json!(cfg.hash());
    doc["seed"] = json!(cfg.seed);
    doc["versions"] = versions();
    doc["state_sha256"] = json!(state_hash);
    write_json(&artifact(out, &cfg, "report.json"), &doc)?;
    println!(
        "achieved {:e} in control time {:e} (budget {budget:e}, error bound {:e})",
        report.achieved, report.total_time, report.error_bound
    );
    if report.budget_limited || report.tolerance_met == Some(false) {
        eprintln!("qflow: tolerance not met within the budget; best-effort artifacts written");
        return Ok(EXIT_TOLERANCE);
    }
    Ok(0)
}
