//! Control schedules that approximately realize phase multipliers,
//! translations, transport flows and bracket flows.
//!
//! Every construction is a product of factors that converge only in a limit
//! (short kicks, short drifts, many Trotter blocks). The realization knobs
//! live in [`SynthesisOptions`]; [`PhaseMode::Idealized`] swaps every phase
//! factor for an exact pointwise multiplication so the remaining error is the
//! product-formula error alone.

mod expr;
mod generators;
mod program;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use expr::{Exponent, GaussPoly, PhaseExpr, TrigPoly, Wavevector};
pub use generators::{generator_basis, hermite_chain, Derivation, GeneratorField};
pub use program::{
    basic_expr, compile_expr, fit_phase, torus_wavevectors, Instruction, PhaseProgram, REPRESENTABLE_TOL,
};

use crate::error::{Error, Result};
use crate::grid::{spectral_gradient, Manifold, PhaseField};
use crate::spectral_sim::{ControlSchedule, ModelKind, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// Phase factors become exact zero-time multiplications.
    Idealized,
    /// Phase factors are realized by controls.
    Synthesized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub mode: PhaseMode,
    /// Cap on `τ_kick · sup|∇φ_kick|²`, the kinetic phase picked up while a
    /// kick is applied.
    pub kick_tol: f64,
    /// Ratio between an outer time scale and the one used for the phases
    /// nested inside it.
    pub nest_ratio: f64,
    /// Deepest phase family searched by the compiler.
    pub max_depth: usize,
    /// Upper bound on total control time.
    pub budget: Option<f64>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { mode: PhaseMode::Synthesized, kick_tol: 1e-5, nest_ratio: 100.0, max_depth: 3, budget: None }
    }
}

impl SynthesisOptions {
    pub fn idealized() -> Self {
        Self { mode: PhaseMode::Idealized, ..Self::default() }
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = Some(budget);
        self
    }

    fn check_budget(&self, s: &ControlSchedule) -> Result<()> {
        match self.budget {
            Some(b) if s.total_time() > b => Err(Error::BudgetExceeded { attempted: s.total_time(), budget: b }),
            _ => Ok(()),
        }
    }
}

/// Outer time step `τ`, repetition count `n` and simulator substeps per unit
/// time for one Trotter product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterParams {
    pub tau: f64,
    pub n: usize,
    pub substeps: usize,
}

impl TrotterParams {
    pub fn new(tau: f64, n: usize, substeps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || n == 0 || substeps == 0 {
            return Err(Error::InvalidArgument(format!("invalid Trotter parameters τ={tau}, n={n}, substeps={substeps}")));
        }
        Ok(Self { tau, n, substeps })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {tau}")));
    }
    Ok(())
}

fn drift(model: &ModelSpec, tau: f64) -> Result<ControlSchedule> {
    ControlSchedule::single(tau, vec![0.0; model.control_count()])
}

/// `e^{iΣαⱼWⱼ}` by one segment `u = −α/τ`.
pub fn synthesize_basic_phase(model: &ModelSpec, alpha: &[f64], tau: f64) -> Result<ControlSchedule> {
    check_tau(tau)?;
    model.check_controls(alpha)?;
    let mut s = ControlSchedule::single(tau, alpha.iter().map(|a| -a / tau).collect())?;
    s.provenance = Some(json!({ "construction": "basic_phase", "alpha": alpha, "tau": tau }));
    Ok(s)
}

/// Basic kick whose duration is capped so that `τ·sup|∇φ|² ≤ kick_tol`.
fn kick(model: &ModelSpec, alpha: &[f64], tau_max: f64, opts: &SynthesisOptions) -> Result<ControlSchedule> {
    if opts.mode == PhaseMode::Idealized {
        let mut s = ControlSchedule::new();
        s.push_phase(basic_expr(model, alpha).sample(model.grid()).values)?;
        return Ok(s);
    }
    let g2 = basic_expr(model, alpha).grad_sup_sq(model.grid());
    let tau = if g2 > 0.0 { tau_max.min(opts.kick_tol / g2) } else { tau_max };
    ControlSchedule::single(tau, alpha.iter().map(|a| -a / tau).collect())
}

/// Schedule for a compiled program. `tau` is the time scale of its outermost
/// drifts and the longest kick.
pub fn realize(model: &ModelSpec, program: &PhaseProgram, tau: f64, opts: &SynthesisOptions) -> Result<ControlSchedule> {
    check_tau(tau)?;
    let mut out = ControlSchedule::new();
    if opts.mode == PhaseMode::Idealized {
        out.push_phase(program.target_field(model.grid()).values)?;
        return Ok(out);
    }
    for ins in &program.instructions {
        let part = match ins {
            Instruction::BasicPhase { alpha } => kick(model, alpha, tau, opts)?,
            Instruction::NegGradSquare { inner } => grad_square_schedule(model, inner.target(), inner.depth, tau, opts)?,
            Instruction::ConjugatedStep { inner, axis } => {
                conjugated_step_schedule(model, inner.target(), inner.depth, *axis, tau, opts)?
            }
        };
        out.append(part);
    }
    out.add_global_phase(program.constant);
    Ok(out)
}

/// `e^{iφ/√τ} e^{iτΔ} e^{−iφ/√τ} → e^{−i|∇φ|²}`.
fn grad_square_schedule(
    model: &ModelSpec,
    phi: &PhaseExpr,
    depth: usize,
    tau: f64,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    let lam = tau.sqrt().recip();
    let inner_tau = tau / opts.nest_ratio;
    let minus = compile_expr(model, &phi.scaled(-lam), depth)?;
    let plus = compile_expr(model, &phi.scaled(lam), depth)?;
    Ok(realize(model, &minus, inner_tau, opts)?.then(drift(model, tau)?).then(realize(model, &plus, inner_tau, opts)?))
}

/// `e^{iφ/s} e^{s∂ₐ} e^{−iφ/s} → e^{−i∂ₐφ}` with the translation realized over
/// time `s³`, short enough that the drift sees momenta of order `1/s` only
/// through an `O(s)` phase.
fn conjugated_step_schedule(
    model: &ModelSpec,
    phi: &PhaseExpr,
    depth: usize,
    axis: usize,
    s: f64,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    let inner_tau = s / opts.nest_ratio;
    let minus = compile_expr(model, &phi.scaled(-1.0 / s), depth)?;
    let plus = compile_expr(model, &phi.scaled(1.0 / s), depth)?;
    let shift = translation_schedule(model, axis, s, s.powi(3), opts)?;
    Ok(realize(model, &minus, inner_tau, opts)?.then(shift).then(realize(model, &plus, inner_tau, opts)?))
}

/// `e^{−iφ/√τ}`, drift `τ`, `e^{iφ/√τ}`: tends to `e^{−i|∇φ|²}` where `φ` is
/// the denotation of `inner`.
pub fn synthesize_grad_square(
    model: &ModelSpec,
    inner: &PhaseProgram,
    tau: f64,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    check_tau(tau)?;
    let mut s = grad_square_schedule(model, inner.target(), inner.depth, tau, opts)?;
    opts.check_budget(&s)?;
    s.provenance = Some(json!({ "construction": "grad_square", "tau": tau, "inner_depth": inner.depth, "mode": opts.mode }));
    Ok(s)
}

/// A compiled phase with its schedule.
#[derive(Clone, Debug)]
pub struct CompiledPhase {
    pub program: PhaseProgram,
    pub schedule: ControlSchedule,
    /// Sup-norm gap between the requested samples and the program's denotation.
    pub residual: f64,
}

/// Fit `target` into the phase families, compile at depth at most `depth`,
/// and realize it on time scale `tau`.
pub fn compile_phase(
    model: &ModelSpec,
    target: &PhaseField,
    depth: usize,
    tau: f64,
    opts: &SynthesisOptions,
) -> Result<CompiledPhase> {
    check_tau(tau)?;
    let (expr, fit_residual) = fit_phase(model.grid(), target, depth)?;
    if fit_residual > REPRESENTABLE_TOL * target.max_abs().max(1.0) {
        return Err(Error::NotRepresentable { depth, residual: fit_residual });
    }
    let program = compile_expr(model, &expr, depth)?;
    let residual = program.denotation(model).max_abs_diff(target)?;
    let mut schedule = realize(model, &program, tau, opts)?;
    opts.check_budget(&schedule)?;
    schedule.provenance =
        Some(json!({ "construction": "compiled_phase", "depth": program.depth, "tau": tau, "mode": opts.mode, "residual": residual }));
    Ok(CompiledPhase { program, schedule, residual })
}

/// Global phase that turns `e^{iax}e^{iτΔ}e^{−iax}`, `a = u/(2τ)`, into the
/// drift times the pure shift: completing the square gives `−iu²/(4τ)`.
pub fn translation_phase(u: f64, tau: f64) -> f64 {
    u * u / (4.0 * tau)
}

fn translation_schedule(model: &ModelSpec, axis: usize, u: f64, tau: f64, opts: &SynthesisOptions) -> Result<ControlSchedule> {
    let d = model.grid().dim;
    if model.kind() != ModelKind::LineDipoleGauss || axis >= d {
        return Err(Error::InvalidArgument("translations need a line model and a valid axis".into()));
    }
    if u == 0.0 {
        return drift(model, tau);
    }
    let a = u / (2.0 * tau);
    let mut alpha = vec![0.0; model.control_count()];
    alpha[axis] = -a;
    let first = kick(model, &alpha, tau, opts)?;
    alpha[axis] = a;
    let last = kick(model, &alpha, tau, opts)?;
    let mut s = first.then(drift(model, tau)?).then(last);
    s.add_global_phase(translation_phase(u, tau));
    Ok(s)
}

/// `ψ ↦ ψ(· + u eₐ)` up to `O(τ)`: kick `e^{−iux/(2τ)}`, drift `τ`, kick back,
/// then the global phase [`translation_phase`].
pub fn synthesize_translation(
    model: &ModelSpec,
    axis: usize,
    u: f64,
    tau: f64,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    check_tau(tau)?;
    let grid = model.grid();
    if grid.manifold != Manifold::Line {
        return Err(Error::InvalidArgument("translations are synthesized on the line only".into()));
    }
    if u.abs() >= 0.5 * grid.box_half_width {
        return Err(Error::SupportViolation(format!(
            "shift {u} exceeds half of the inner region of a box of half-width {}",
            grid.box_half_width
        )));
    }
    let mut s = translation_schedule(model, axis, u, tau, opts)?;
    opts.check_budget(&s)?;
    s.provenance = Some(json!({ "construction": "translation", "axis": axis, "u": u, "tau": tau, "mode": opts.mode }));
    Ok(s)
}

/// `(e^{i|∇φ|²/(nτ)} e^{iφ/τ} e^{i(τ/n)Δ} e^{−iφ/τ})ⁿ → e^{T_f}`, `f = 2∇φ`.
pub fn synthesize_gradient_flow(
    model: &ModelSpec,
    phi: &PhaseField,
    params: &TrotterParams,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    let block = gradient_flow_block(model, phi, None, params, opts)?;
    let mut s = ControlSchedule::new();
    for _ in 0..params.n {
        s.append(block.clone());
    }
    opts.check_budget(&s)?;
    s.provenance = Some(json!({
        "construction": "gradient_flow",
        "tau": params.tau,
        "n": params.n,
        "mode": opts.mode,
    }));
    Ok(s)
}

/// One Trotter block. `grad_sq` overrides the spectral `|∇φ|²` in idealized
/// mode, for phases that are not periodic on the computational box.
pub(crate) fn gradient_flow_block(
    model: &ModelSpec,
    phi: &PhaseField,
    grad_sq: Option<&[f64]>,
    params: &TrotterParams,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    model.grid().check_same(&phi.grid)?;
    let (tau, n) = (params.tau, params.n as f64);
    let mut block = ControlSchedule::new();
    match opts.mode {
        PhaseMode::Idealized => {
            let g2: Vec<f64> = match grad_sq {
                Some(g) => g.iter().map(|v| v / (n * tau)).collect(),
                None => {
                    let grad = spectral_gradient(phi);
                    (0..phi.grid.len())
                        .map(|i| grad.components.iter().map(|c| c[i] * c[i]).sum::<f64>() / (n * tau))
                        .collect()
                }
            };
            block.push_phase(phi.values.iter().map(|v| -v / tau).collect())?;
            block.append(drift(model, tau / n)?);
            block.push_phase(phi.values.iter().map(|v| v / tau).collect())?;
            block.push_phase(g2)?;
        }
        PhaseMode::Synthesized => {
            let (expr, fit_residual) = fit_phase(model.grid(), phi, opts.max_depth)?;
            if fit_residual > REPRESENTABLE_TOL * phi.max_abs().max(1.0) {
                return Err(Error::NotRepresentable { depth: opts.max_depth, residual: fit_residual });
            }
            let g2 = expr.grad_square()?.scaled(1.0 / (n * tau));
            let inner_tau = tau / (opts.nest_ratio * n);
            let minus = compile_expr(model, &expr.scaled(-1.0 / tau), opts.max_depth)?;
            let plus = compile_expr(model, &expr.scaled(1.0 / tau), opts.max_depth)?;
            let sq = compile_expr(model, &g2, opts.max_depth)?;
            block.append(realize(model, &minus, inner_tau, opts)?);
            block.append(drift(model, tau / n)?);
            block.append(realize(model, &plus, inner_tau, opts)?);
            block.append(realize(model, &sq, inner_tau, opts)?);
        }
    }
    Ok(block)
}

/// `(e^{−T_f/(tn)} e^{−tT_g} e^{T_f/(tn)} e^{tT_g})ⁿ → e^{T_{[f,g]}}` with
/// `f = 2∇φ_f`, `g = 2∇φ_g`; each factor is a gradient flow of the scaled
/// phase synthesized with `params`.
pub fn synthesize_bracket_flow(
    model: &ModelSpec,
    phi_f: &PhaseField,
    phi_g: &PhaseField,
    t: f64,
    n: usize,
    params: &TrotterParams,
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    if t == 0.0 || !t.is_finite() || n == 0 {
        return Err(Error::InvalidArgument("bracket needs finite t ≠ 0 and n ≥ 1".into()));
    }
    let s = 1.0 / (t * n as f64);
    let mut factors = Vec::with_capacity(4);
    for (phi, c) in [(phi_g, t), (phi_f, s), (phi_g, -t), (phi_f, -s)] {
        let mut flow = ControlSchedule::new();
        let block = gradient_flow_block(model, &phi.scaled(c), None, params, opts)?;
        for _ in 0..params.n {
            flow.append(block.clone());
        }
        factors.push(flow);
    }
    let mut out = ControlSchedule::new();
    for _ in 0..n {
        for f in &factors {
            out.append(f.clone());
        }
    }
    opts.check_budget(&out)?;
    out.provenance = Some(json!({
        "construction": "bracket_flow",
        "t": t,
        "n": n,
        "inner_tau": params.tau,
        "inner_n": params.n,
        "mode": opts.mode,
    }));
    Ok(out)
}
