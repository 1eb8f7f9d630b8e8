//! Strang split-step propagation of `i∂ₜψ = (−Δ + V + Σ uⱼWⱼ)ψ` under
//! piecewise-constant controls.
//!
//! Control directions:
//! - torus: `W_{2j} = sin⟨bⱼ,x⟩`, `W_{2j+1} = cos⟨bⱼ,x⟩` (0-based), with
//!   `bⱼ = e_{j+1}` for `j < d−1` and `b_{d−1} = (1,…,1)`; `m = 2d`.
//! - line: `Wⱼ = xⱼ` for `j < d`, `W_d = e^{−|x|²/2}`; `m = d+1`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_inplace, GridSpec, Manifold, Point, ScalarField, WaveFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    TorusTrig,
    LineDipoleGauss,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    grid: GridSpec,
    kind: ModelKind,
    potential: Vec<f64>,
    controls: Vec<Vec<f64>>,
}

/// Value of the `j`-th control direction at `p`.
pub fn control_direction(kind: ModelKind, dim: usize, j: usize, p: &Point) -> f64 {
    match kind {
        ModelKind::TorusTrig => {
            let b = j / 2;
            let arg = if b + 1 == dim { p[..dim].iter().sum::<f64>() } else { p[b] };
            if j % 2 == 0 {
                arg.sin()
            } else {
                arg.cos()
            }
        }
        ModelKind::LineDipoleGauss => {
            if j < dim {
                p[j]
            } else {
                (-0.5 * p[..dim].iter().map(|x| x * x).sum::<f64>()).exp()
            }
        }
    }
}

impl ModelSpec {
    /// Torus model. `potential` defaults to zero and must be finite.
    pub fn torus_trig(grid: GridSpec, potential: Option<ScalarField>) -> Result<Self> {
        if grid.manifold != Manifold::Torus {
            return Err(Error::InvalidArgument("TorusTrig requires a torus grid".into()));
        }
        Self::build(grid, ModelKind::TorusTrig, potential, None)
    }

    /// Line model. The potential must satisfy `V(x) ≥ −a|x|² − b` on the grid.
    pub fn line_dipole_gauss(grid: GridSpec, potential: Option<ScalarField>, a: f64, b: f64) -> Result<Self> {
        if grid.manifold != Manifold::Line {
            return Err(Error::InvalidArgument("LineDipoleGauss requires a line grid".into()));
        }
        Self::build(grid, ModelKind::LineDipoleGauss, potential, Some((a, b)))
    }

    pub fn new(grid: GridSpec, kind: ModelKind, potential: Option<ScalarField>, bound: (f64, f64)) -> Result<Self> {
        match kind {
            ModelKind::TorusTrig => Self::torus_trig(grid, potential),
            ModelKind::LineDipoleGauss => Self::line_dipole_gauss(grid, potential, bound.0, bound.1),
        }
    }

    fn build(grid: GridSpec, kind: ModelKind, potential: Option<ScalarField>, bound: Option<(f64, f64)>) -> Result<Self> {
        grid.validate()?;
        let potential = match potential {
            Some(v) => {
                grid.check_same(&v.grid)?;
                v.values
            }
            None => vec![0.0; grid.len()],
        };
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        if let Some((a, b)) = bound {
            for (idx, v) in potential.iter().enumerate() {
                let p = grid.point(idx);
                let r2: f64 = p[..grid.dim].iter().map(|x| x * x).sum();
                if *v < -a * r2 - b - 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "potential violates V >= -a|x|^2 - b at node {idx}"
                    )));
                }
            }
        }
        let m = match kind {
            ModelKind::TorusTrig => 2 * grid.dim,
            ModelKind::LineDipoleGauss => grid.dim + 1,
        };
        let controls =
            (0..m).map(|j| grid.points().map(|p| control_direction(kind, grid.dim, j, &p)).collect()).collect();
        Ok(Self { grid, kind, potential, controls })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn has_potential(&self) -> bool {
        self.potential.iter().any(|&v| v != 0.0)
    }

    /// Nodal samples of the control direction `W_j`.
    pub fn direction(&self, j: usize) -> &[f64] {
        &self.controls[j]
    }

    pub fn check_controls(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.control_count() {
            return Err(Error::ControlLength { expected: self.control_count(), got: u.len() });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control vector"));
        }
        Ok(())
    }

    /// `Σ uⱼWⱼ` on the grid.
    pub fn control_potential(&self, u: &[f64]) -> Result<ScalarField> {
        self.check_controls(u)?;
        let mut out = vec![0.0; self.grid.len()];
        for (uj, w) in u.iter().zip(&self.controls) {
            if *uj == 0.0 {
                continue;
            }
            for (o, wv) in out.iter_mut().zip(w) {
                *o += uj * wv;
            }
        }
        Ok(ScalarField { grid: self.grid, values: out })
    }

    fn squared_wavenumbers(&self) -> Vec<f64> {
        let ks = self.grid.wavenumbers();
        (0..self.grid.len())
            .map(|idx| {
                let m = self.grid.multi_index(idx);
                (0..self.grid.dim).map(|a| ks[m[a]] * ks[m[a]]).sum()
            })
            .collect()
    }
}

/// One piece of a schedule.
///
/// `Phase` is an exact pointwise multiplication by `e^{iφ}` taking zero time;
/// it only appears in idealized schedules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segment {
    Control { tau: f64, u: Vec<f64> },
    Phase { phase: Arc<[f64]> },
}

pub const SCHEDULE_FORMAT_VERSION: u32 = 1;

const PHASE_CACHE: usize = 8;

/// Piecewise-constant controls followed by a global phase `e^{iθ}`.
///
/// JSON form: `{"version":1,"segments":[{"tau":…,"u":[…]},…],"global_phase":θ,"provenance":…}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    #[serde(default = "default_version")]
    pub version: u32,
    segments: Vec<Segment>,
    global_phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn default_version() -> u32 {
    SCHEDULE_FORMAT_VERSION
}

impl Default for ControlSchedule {
    fn default() -> Self {
        Self::new()
    }
}

impl ControlSchedule {
    pub fn new() -> Self {
        Self { version: SCHEDULE_FORMAT_VERSION, segments: Vec::new(), global_phase: 0.0, provenance: None }
    }

    pub fn single(tau: f64, u: Vec<f64>) -> Result<Self> {
        let mut s = Self::new();
        s.push_control(tau, u)?;
        Ok(s)
    }

    pub fn push_control(&mut self, tau: f64, u: Vec<f64>) -> Result<()> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("segment duration must be positive, got {tau}")));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control vector"));
        }
        self.segments.push(Segment::Control { tau, u });
        Ok(())
    }

    /// Append an exact phase, merging it into a directly preceding one.
    pub fn push_phase(&mut self, phase: Vec<f64>) -> Result<()> {
        if phase.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ideal phase"));
        }
        if let Some(Segment::Phase { phase: last }) = self.segments.last_mut() {
            if last.len() == phase.len() {
                let merged: Vec<f64> = last.iter().zip(&phase).map(|(a, b)| a + b).collect();
                *last = merged.into();
                return Ok(());
            }
        }
        self.segments.push(Segment::Phase { phase: phase.into() });
        Ok(())
    }

    /// Append `other` after `self`. Global phases commute with everything and
    /// add. Phase storage is shared, not copied.
    pub fn append(&mut self, other: ControlSchedule) {
        self.segments.extend(other.segments);
        self.add_global_phase(other.global_phase);
    }

    pub fn then(mut self, other: ControlSchedule) -> Self {
        self.append(other);
        self
    }

    pub fn add_global_phase(&mut self, theta: f64) {
        self.global_phase = (self.global_phase + theta).rem_euclid(TAU);
    }

    pub fn set_global_phase(&mut self, theta: f64) {
        self.global_phase = theta.rem_euclid(TAU);
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Control { tau, .. } => *tau,
                Segment::Phase { .. } => 0.0,
            })
            .fold(0.0, |a, b| a + b)
    }

    /// Whether the schedule contains exact phase segments.
    pub fn is_idealized(&self) -> bool {
        self.segments.iter().any(|s| matches!(s, Segment::Phase { .. }))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut s: Self = serde_json::from_str(text)?;
        if s.version != SCHEDULE_FORMAT_VERSION {
            return Err(Error::Unsupported(format!("schedule format version {}", s.version)));
        }
        for seg in &s.segments {
            if let Segment::Control { tau, .. } = seg {
                if !(*tau > 0.0) {
                    return Err(Error::InvalidArgument(format!("segment duration must be positive, got {tau}")));
                }
            }
        }
        s.global_phase = s.global_phase.rem_euclid(TAU);
        Ok(s)
    }
}

/// Reusable propagation state: FFT work buffer and cached kinetic factor.
struct Propagator<'a> {
    model: &'a ModelSpec,
    k2: Vec<f64>,
    cached_h: f64,
    kinetic: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        Self { model, k2: model.squared_wavenumbers(), cached_h: f64::NAN, kinetic: Vec::new() }
    }

    fn kinetic_factor(&mut self, h: f64) -> &[Complex64] {
        if self.cached_h != h {
            self.kinetic = self.k2.iter().map(|k2| Complex64::from_polar(1.0, -h * k2)).collect();
            self.cached_h = h;
        }
        &self.kinetic
    }

    fn step(&mut self, psi: &mut [Complex64], u: &[f64], tau: f64, substeps: usize) -> Result<()> {
        let grid = *self.model.grid();
        let pot = self.model.control_potential(u)?;
        let total: Vec<f64> = pot.values.iter().zip(&self.model.potential).map(|(a, b)| a + b).collect();
        let h = tau / substeps as f64;
        let has_pot = total.iter().any(|&v| v != 0.0);
        let half: Vec<Complex64> = if has_pot {
            total.iter().map(|v| Complex64::from_polar(1.0, -0.5 * h * v)).collect()
        } else {
            Vec::new()
        };
        let full: Vec<Complex64> = half.iter().map(|z| z * z).collect();
        if has_pot {
            psi.iter_mut().zip(&half).for_each(|(p, z)| *p *= z);
        }
        for s in 0..substeps {
            fft_inplace(&grid, psi, false);
            let kin = self.kinetic_factor(h);
            psi.iter_mut().zip(kin).for_each(|(p, z)| *p *= z);
            fft_inplace(&grid, psi, true);
            if has_pot {
                // Adjacent half potential steps merge into one full step.
                let f = if s + 1 == substeps { &half } else { &full };
                psi.iter_mut().zip(f).for_each(|(p, z)| *p *= z);
            }
        }
        if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("propagated state"));
        }
        Ok(())
    }
}

fn check_state(model: &ModelSpec, psi: &WaveFunction) -> Result<()> {
    model.grid().check_same(psi.grid())?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Approximate `e^{−iτ(−Δ + V + Σuⱼ Wⱼ)}ψ` by `substeps` Strang steps.
pub fn step(model: &ModelSpec, psi: &WaveFunction, u: &[f64], tau: f64, substeps: usize) -> Result<WaveFunction> {
    check_state(model, psi)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("step duration must be positive, got {tau}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let mut values = psi.values().to_vec();
    Propagator::new(model).step(&mut values, u, tau, substeps)?;
    Ok(WaveFunction::from_raw(*model.grid(), values))
}

/// Substeps used for a segment of duration `tau`.
pub fn substeps_for(tau: f64, substeps_per_unit_time: usize) -> usize {
    // Products like 0.15·20 land a few ulps above the integer.
    let x = tau * substeps_per_unit_time as f64;
    ((x * (1.0 - 1e-12)).ceil() as usize).max(1)
}

/// Run every segment of `schedule` from `psi0`, then apply the global phase.
pub fn evolve(
    model: &ModelSpec,
    psi0: &WaveFunction,
    schedule: &ControlSchedule,
    substeps_per_unit_time: usize,
) -> Result<WaveFunction> {
    check_state(model, psi0)?;
    let mut prop = Propagator::new(model);
    let mut values = psi0.values().to_vec();
    // Trotter products cycle through a few shared phase buffers.
    let mut cache: Vec<(*const f64, Vec<Complex64>)> = Vec::new();
    for seg in schedule.segments() {
        match seg {
            Segment::Control { tau, u } => {
                prop.step(&mut values, u, *tau, substeps_for(*tau, substeps_per_unit_time))?;
            }
            Segment::Phase { phase } => {
                if phase.len() != values.len() {
                    return Err(Error::GridMismatch);
                }
                let key = phase.as_ptr();
                let pos = match cache.iter().position(|(k, _)| *k == key) {
                    Some(p) => p,
                    None => {
                        if cache.len() == PHASE_CACHE {
                            cache.remove(0);
                        }
                        cache.push((key, phase.iter().map(|p| Complex64::from_polar(1.0, *p)).collect()));
                        cache.len() - 1
                    }
                };
                values.iter_mut().zip(&cache[pos].1).for_each(|(v, z)| *v *= z);
            }
        }
    }
    let z = Complex64::from_polar(1.0, schedule.global_phase());
    values.iter_mut().for_each(|v| *v *= z);
    Ok(WaveFunction::from_raw(*model.grid(), values))
}
