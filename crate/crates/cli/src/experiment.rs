//! Turning an experiment section into a schedule, an initial state and an
//! exact reference for the final state.

use num_complex::Complex64;
use qflow::grid::{
    distance_mod_phase, fft_inplace, spectral_gradient, GridSpec, Interpolant, Manifold, WaveFunction,
};
use qflow::spectral_sim::{evolve, step, substeps_for, ControlSchedule, ModelSpec, Segment};
use qflow::synthesis::{
    basic_expr, compile_expr, synthesize_basic_phase, synthesize_bracket_flow,
    synthesize_grad_square, synthesize_gradient_flow, synthesize_translation, PhaseExpr, PhaseMode, SynthesisOptions,
    TrotterParams,
};
use qflow::transport::{apply_transport, integrate_flow, lie_bracket};
use rand::Rng;
use serde_json::{json, Value};

use crate::config::{rng, Config, ConfigError, ExperimentKind, Stream};

/// Failure of a run: a configuration problem (exit 2) or a numeric one (exit 3).
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric(qflow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numeric(e) => write!(f, "numeric failure: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<qflow::Error> for RunError {
    fn from(e: qflow::Error) -> Self {
        RunError::Numeric(e)
    }
}

fn missing(key: &str) -> RunError {
    RunError::Config(ConfigError(format!("missing key `experiment.{key}`")))
}

/// Parameters a sweep may override.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub tau: Option<f64>,
    pub n: Option<usize>,
    pub points: usize,
    pub substeps: usize,
}

impl Cell {
    pub fn base(cfg: &Config) -> Self {
        let e = &cfg.experiment;
        Cell {
            tau: e.tau.as_ref().and_then(|t| t.values().first().copied()),
            n: e.n,
            points: cfg.grid.points,
            substeps: e.substeps.unwrap_or(1000),
        }
    }
}

pub struct RunOutput {
    pub schedule: ControlSchedule,
    pub final_state: WaveFunction,
    /// `(time, norm)` at chunk boundaries, starting at 0.
    pub norm_log: Vec<(f64, f64)>,
    pub distance: f64,
    pub oracle: &'static str,
}

impl RunOutput {
    pub fn norm_drift(&self) -> f64 {
        self.norm_log.iter().map(|(_, n)| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

const NORM_LOG_CHUNKS: usize = 64;

fn synthesis_options(cfg: &Config) -> SynthesisOptions {
    SynthesisOptions { mode: cfg.experiment.mode.unwrap_or(PhaseMode::Synthesized), ..SynthesisOptions::default() }
}

fn phase_expr(cfg: &Config, grid: &GridSpec, second: bool) -> Result<PhaseExpr, RunError> {
    let (spec, key, stream) = if second {
        (cfg.experiment.phase_g.as_ref(), "phase_g", Stream::PhaseG)
    } else {
        (cfg.experiment.phase.as_ref(), "phase", Stream::Phase)
    };
    let spec = spec.ok_or_else(|| missing(key))?;
    Ok(spec.expr(grid, &mut rng(cfg.seed, stream), &format!("experiment.{key}"))?)
}

pub fn initial_state(cfg: &Config, grid: GridSpec) -> Result<WaveFunction, RunError> {
    let spec = cfg.experiment.state.as_ref().ok_or_else(|| missing("state"))?;
    Ok(spec.build(grid, &mut rng(cfg.seed, Stream::State), "experiment.state")?)
}

fn compile_any_depth(model: &ModelSpec, expr: &PhaseExpr) -> Result<qflow::synthesis::PhaseProgram, RunError> {
    let mut last = None;
    for depth in 0..=SynthesisOptions::default().max_depth {
        match compile_expr(model, expr, depth) {
            Ok(p) => return Ok(p),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one depth tried").into())
}

/// Run one cell of the configured experiment.
pub fn run_cell(cfg: &Config, cell: &Cell) -> Result<RunOutput, RunError> {
    let e = &cfg.experiment;
    let grid = cfg.grid_with_points(cell.points)?;
    let model = cfg.model(grid)?;
    let psi = initial_state(cfg, grid)?;
    let tau = || cell.tau.ok_or_else(|| missing("tau"));
    let opts = synthesis_options(cfg);

    let (schedule, exact, oracle): (ControlSchedule, Option<WaveFunction>, &'static str) = match e.kind {
        ExperimentKind::Free => {
            let t = e.time.ok_or_else(|| missing("time"))?;
            let s = ControlSchedule::single(t, vec![0.0; model.control_count()])?;
            if model.has_potential() {
                (s, None, "self_convergence")
            } else {
                (s, Some(free_evolution(&psi, t)), "free_propagator")
            }
        }
        ExperimentKind::Schedule => (explicit_schedule(cfg, &model)?, None, "self_convergence"),
        ExperimentKind::BasicPhase => {
            let alpha = e.alpha.as_ref().ok_or_else(|| missing("alpha"))?;
            let s = synthesize_basic_phase(&model, alpha, tau()?)?;
            let target = psi.multiply_phase(&basic_expr(&model, alpha).sample(&grid))?;
            (s, Some(target), "pointwise_phase")
        }
        ExperimentKind::GradSquare => {
            let expr = phase_expr(cfg, &grid, false)?;
            let inner = compile_any_depth(&model, &expr)?;
            let s = synthesize_grad_square(&model, &inner, tau()?, &opts)?;
            let g2 = expr.grad_square()?.sample(&grid).scaled(-1.0);
            (s, Some(psi.multiply_phase(&g2)?), "pointwise_phase")
        }
        ExperimentKind::Translation => {
            let axis = e.axis.unwrap_or(0);
            let u = e.shift.ok_or_else(|| missing("shift"))?;
            let s = synthesize_translation(&model, axis, u, tau()?, &opts)?;
            (s, Some(shifted(&psi, axis, u)?), "shifted_state")
        }
        ExperimentKind::GradientFlow => {
            let phi = phase_expr(cfg, &grid, false)?.sample(&grid);
            let n = cell.n.ok_or_else(|| missing("n"))?;
            let params = TrotterParams::new(tau()?, n, cell.substeps)?;
            let s = synthesize_gradient_flow(&model, &phi, &params, &opts)?;
            let f = spectral_gradient(&phi).scaled(2.0);
            let exact = apply_transport(&integrate_flow(&f, 1.0, None)?, &psi)?;
            (s, Some(exact), "characteristics")
        }
        ExperimentKind::BracketFlow => {
            let phi_f = phase_expr(cfg, &grid, false)?.sample(&grid);
            let phi_g = phase_expr(cfg, &grid, true)?.sample(&grid);
            let t = e.t.ok_or_else(|| missing("t"))?;
            let n = cell.n.ok_or_else(|| missing("n"))?;
            let inner_n = e.inner_n.ok_or_else(|| missing("inner_n"))?;
            let params = TrotterParams::new(tau()?, inner_n, cell.substeps)?;
            let s = synthesize_bracket_flow(&model, &phi_f, &phi_g, t, n, &params, &opts)?;
            let f = spectral_gradient(&phi_f).scaled(2.0);
            let g = spectral_gradient(&phi_g).scaled(2.0);
            let bracket = lie_bracket(&f, &g)?;
            let exact = apply_transport(&integrate_flow(&bracket, 1.0, None)?, &psi)?;
            (s, Some(exact), "characteristics")
        }
        ExperimentKind::Steer => {
            return Err(ConfigError("experiment kind `steer` runs through `qflow steer`".into()).into());
        }
    };

    let (final_state, norm_log) = evolve_logged(&model, &psi, &schedule, cell.substeps)?;
    let distance = match exact {
        Some(target) => distance_mod_phase(&final_state, &target)?,
        None => {
            let fine = evolve(&model, &psi, &schedule, 2 * cell.substeps)?;
            distance_mod_phase(&final_state, &fine)?
        }
    };
    if !distance.is_finite() {
        return Err(qflow::Error::NonFinite("distance").into());
    }
    Ok(RunOutput { schedule, final_state, norm_log, distance, oracle })
}

fn explicit_schedule(cfg: &Config, model: &ModelSpec) -> Result<ControlSchedule, RunError> {
    let e = &cfg.experiment;
    let m = model.control_count();
    let mut s = ControlSchedule::new();
    match (&e.segments, e.random_segments) {
        (Some(rows), None) => {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != m + 1 {
                    return Err(ConfigError(format!(
                        "experiment.segments[{i}] needs τ followed by {m} controls, got {} numbers",
                        row.len()
                    ))
                    .into());
                }
                s.push_control(row[0], row[1..].to_vec())?;
            }
        }
        (None, Some(count)) => {
            let mut r = rng(cfg.seed, Stream::Schedule);
            for _ in 0..count {
                let tau = r.gen_range(0.01..0.1);
                s.push_control(tau, (0..m).map(|_| r.gen_range(-2.0..2.0)).collect())?;
            }
        }
        _ => {
            return Err(ConfigError("experiment needs exactly one of `segments` and `random_segments`".into()).into());
        }
    }
    s.provenance = Some(json!({ "construction": "explicit" }));
    Ok(s)
}

/// `e^{itΔ}ψ` applied mode by mode.
fn free_evolution(psi: &WaveFunction, t: f64) -> WaveFunction {
    let grid = *psi.grid();
    let ks = grid.wavenumbers();
    let mut data = psi.values().to_vec();
    fft_inplace(&grid, &mut data, false);
    for (idx, v) in data.iter_mut().enumerate() {
        let m = grid.multi_index(idx);
        let k2: f64 = (0..grid.dim).map(|a| ks[m[a]] * ks[m[a]]).sum();
        *v *= Complex64::from_polar(1.0 / grid.len() as f64, -k2 * t);
    }
    fft_inplace(&grid, &mut data, true);
    WaveFunction::normalized(grid, data).expect("unitary image of a unit state")
}

/// `ψ(x + u eₐ)` by spectral interpolation.
fn shifted(psi: &WaveFunction, axis: usize, u: f64) -> Result<WaveFunction, RunError> {
    let grid = *psi.grid();
    if grid.manifold != Manifold::Line || axis >= grid.dim {
        return Err(ConfigError("translations need a line grid and a valid `experiment.axis`".into()).into());
    }
    let interp = Interpolant::new(&grid, psi.values());
    Ok(WaveFunction::from_fn(grid, |p| {
        let mut q = *p;
        q[axis] += u;
        interp.eval(&q)
    })?)
}

/// Evolve chunk by chunk, recording the norm at chunk boundaries.
pub fn evolve_logged(
    model: &ModelSpec,
    psi: &WaveFunction,
    schedule: &ControlSchedule,
    substeps: usize,
) -> Result<(WaveFunction, Vec<(f64, f64)>), RunError> {
    let segs = schedule.segments();
    let mut state = psi.clone();
    let mut time = 0.0;
    let mut log = vec![(0.0, state.norm())];
    if segs.len() >= NORM_LOG_CHUNKS {
        let chunk = segs.len().div_ceil(NORM_LOG_CHUNKS);
        for part in segs.chunks(chunk) {
            let mut s = ControlSchedule::new();
            for seg in part {
                match seg {
                    Segment::Control { tau, u } => s.push_control(*tau, u.clone())?,
                    Segment::Phase { phase } => s.push_phase(phase.to_vec())?,
                }
            }
            time += s.total_time();
            state = evolve(model, &state, &s, substeps)?;
            log.push((time, state.norm()));
        }
    } else {
        // Short schedules: split each segment's Strang steps into whole-step
        // pieces, which leaves the discretization unchanged.
        let per_seg = NORM_LOG_CHUNKS.div_ceil(segs.len().max(1));
        for seg in segs {
            match seg {
                Segment::Control { tau, u } => {
                    let steps = substeps_for(*tau, substeps);
                    let pieces = per_seg.min(steps);
                    let h = tau / steps as f64;
                    for p in 0..pieces {
                        let k = steps * (p + 1) / pieces - steps * p / pieces;
                        state = step(model, &state, u, h * k as f64, k)?;
                        time += h * k as f64;
                        log.push((time, state.norm()));
                    }
                }
                Segment::Phase { phase } => {
                    let mut s = ControlSchedule::new();
                    s.push_phase(phase.to_vec())?;
                    state = evolve(model, &state, &s, substeps)?;
                    log.push((time, state.norm()));
                }
            }
        }
    }
    let last = log.last().expect("log starts with the initial norm").1;
    let state = state.with_global_phase(schedule.global_phase());
    debug_assert!((state.norm() - last).abs() < 1e-12);
    Ok((state, log))
}

pub fn run_metadata(cfg: &Config, out: &RunOutput, cell: &Cell) -> Value {
    json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "versions": crate::versions(),
        "experiment": cfg.experiment.kind,
        "cell": { "tau": cell.tau, "n": cell.n, "points": cell.points, "substeps": cell.substeps },
        "oracle": out.oracle,
        "distance": out.distance,
        "norm_drift": out.norm_drift(),
        "total_time": out.schedule.total_time(),
        "segments": out.schedule.len(),
        "schedule_provenance": out.schedule.provenance,
    })
}
