//! Run configuration: one TOML file with sections `grid`, `model`,
//! `experiment` and `output`, plus a top-level `version` and `seed`.

use std::path::Path;

use num_complex::Complex64;
use qflow::grid::{GridSpec, ScalarField, WaveFunction};
use qflow::pipeline::SteerOptions;
use qflow::spectral_sim::ModelSpec;
use qflow::synthesis::{GaussPoly, PhaseExpr, PhaseMode, TrigPoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_VERSION: u32 = 1;

/// Default half-width of the computational box for line grids.
pub const DEFAULT_HALF_WIDTH: f64 = 12.0;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldConfig {
    Torus,
    Line,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub manifold: ManifoldConfig,
    pub dim: usize,
    pub points: usize,
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// `(a, b)` in `V ≥ −a|x|² − b`, checked on line grids.
    #[serde(default)]
    pub bound: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// `amplitude · cos⟨k, x⟩`.
    Cos { amplitude: f64, k: Vec<i32> },
    /// `ω²|x|²`.
    Harmonic { omega: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Free,
    Schedule,
    BasicPhase,
    GradSquare,
    Translation,
    GradientFlow,
    BracketFlow,
    Steer,
}

/// Parameters of every experiment kind; each kind reads the keys it needs
/// and reports the first missing one.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub mode: Option<PhaseMode>,
    pub state: Option<StateSpec>,
    pub target: Option<StateSpec>,
    pub time: Option<f64>,
    pub tau: Option<OneOrMany>,
    pub n: Option<usize>,
    /// Simulator substeps per unit time.
    pub substeps: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub phase: Option<PhaseSpec>,
    pub phase_g: Option<PhaseSpec>,
    pub axis: Option<usize>,
    pub shift: Option<f64>,
    pub t: Option<f64>,
    pub inner_n: Option<usize>,
    pub segments: Option<Vec<Vec<f64>>>,
    pub random_segments: Option<usize>,
    pub budget: Option<f64>,
    pub refinement: Option<u32>,
    pub tolerance: Option<f64>,
    pub steer: Option<SteerOptions>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Cartesian parameter grid; empty lists keep the experiment's value.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub tau: Vec<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub points: Vec<usize>,
    #[serde(default)]
    pub substeps: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { prefix: default_prefix() }
    }
}

fn default_prefix() -> String {
    "run".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussTerm {
    pub n: Vec<u32>,
    pub coef: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    /// `c + Σ (a cos⟨k,x⟩ + b sin⟨k,x⟩)` on the torus.
    Trig {
        #[serde(default)]
        constant: f64,
        terms: Vec<TrigTerm>,
    },
    /// `c + ⟨l, x⟩ + Σ c_n ∂ⁿG` on the line.
    Gauss {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        linear: Vec<f64>,
        #[serde(default)]
        terms: Vec<GaussTerm>,
    },
    /// Random trig polynomial with wavevectors in `[−modes, modes]^d`.
    Random { modes: i32, amplitude: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub k: Vec<i32>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Uniform,
    PlaneWave { k: Vec<i32> },
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "one")]
        width: f64,
    },
    /// `Σ c_k e^{i⟨k,x⟩}` on the torus.
    Modes { terms: Vec<ModeTerm> },
    /// `1 + Σ c_k e^{i⟨k,x⟩}` with random `|c_k| ≤ 0.2`, `|k|_∞ ≤ modes`.
    Random { modes: i32 },
    /// `ρe^{iφ}` with `ρ² ∝ 1 + Σ trig terms`.
    DensityPhase { density: Vec<TrigTerm>, phase: PhaseSpec },
}

fn one() -> f64 {
    1.0
}

/// Purposes for which random draws are made; each gets its own stream.
#[derive(Clone, Copy)]
pub enum Stream {
    State = 1,
    Target = 2,
    Phase = 3,
    PhaseG = 4,
    Schedule = 5,
}

pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {}", e.message())))?;
        if cfg.version != CONFIG_VERSION {
            return err(format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version));
        }
        cfg.grid_spec()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, independent of TOML layout.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        self.grid_with_points(self.grid.points)
    }

    pub fn grid_with_points(&self, points: usize) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        let spec = match g.manifold {
            ManifoldConfig::Torus => {
                if g.half_width.is_some() {
                    return err("grid.half_width applies to line grids only");
                }
                GridSpec::torus(g.dim, points)
            }
            ManifoldConfig::Line => GridSpec::line(g.dim, points, g.half_width.unwrap_or(DEFAULT_HALF_WIDTH)),
        };
        spec.map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn model(&self, grid: GridSpec) -> Result<ModelSpec, ConfigError> {
        let potential = match &self.model.potential {
            None | Some(PotentialSpec::Zero) => None,
            Some(PotentialSpec::Cos { amplitude, k }) => {
                let k = wavevector(k, grid.dim, "model.potential.k")?;
                Some(ScalarField::from_fn(grid, |p| amplitude * (0..grid.dim).map(|a| k[a] as f64 * p[a]).sum::<f64>().cos()))
            }
            Some(PotentialSpec::Harmonic { omega }) => {
                Some(ScalarField::from_fn(grid, |p| omega * omega * p[..grid.dim].iter().map(|x| x * x).sum::<f64>()))
            }
        };
        let model = match self.grid.manifold {
            ManifoldConfig::Torus => ModelSpec::torus_trig(grid, potential),
            ManifoldConfig::Line => {
                let [a, b] = self.model.bound.unwrap_or([0.0, 0.0]);
                ModelSpec::line_dipole_gauss(grid, potential, a, b)
            }
        };
        model.map_err(|e| ConfigError(format!("model: {e}")))
    }
}

fn wavevector(k: &[i32], dim: usize, key: &str) -> Result<[i32; 3], ConfigError> {
    if k.len() != dim {
        return err(format!("{key} must have {dim} entries, got {}", k.len()));
    }
    let mut out = [0; 3];
    out[..dim].copy_from_slice(k);
    Ok(out)
}

impl PhaseSpec {
    pub fn expr(&self, grid: &GridSpec, rng: &mut ChaCha8Rng, key: &str) -> Result<PhaseExpr, ConfigError> {
        let d = grid.dim;
        match self {
            PhaseSpec::Trig { constant, terms } => {
                if grid.manifold != qflow::grid::Manifold::Torus {
                    return err(format!("{key}: trig phases need a torus grid"));
                }
                let mut p = TrigPoly::constant(d, *constant);
                for t in terms {
                    p.add_mode(wavevector(&t.k, d, &format!("{key}.terms.k"))?, t.cos, t.sin);
                }
                Ok(PhaseExpr::Trig(p))
            }
            PhaseSpec::Gauss { constant, linear, terms } => {
                if grid.manifold != qflow::grid::Manifold::Line {
                    return err(format!("{key}: gauss phases need a line grid"));
                }
                if !linear.is_empty() && linear.len() != d {
                    return err(format!("{key}.linear must have {d} entries"));
                }
                let mut p = GaussPoly::zero(d);
                p.constant = *constant;
                for (a, c) in linear.iter().enumerate() {
                    p = p.add(&GaussPoly::linear(d, a, *c));
                }
                for t in terms {
                    if t.n.len() != d {
                        return err(format!("{key}.terms.n must have {d} entries"));
                    }
                    let mut n = [0u32; 3];
                    n[..d].copy_from_slice(&t.n);
                    p = p.add(&GaussPoly::hermite(d, n).scaled(t.coef));
                }
                Ok(PhaseExpr::Gauss(p))
            }
            PhaseSpec::Random { modes, amplitude } => {
                if grid.manifold != qflow::grid::Manifold::Torus {
                    return err(format!("{key}: random phases need a torus grid"));
                }
                let mut p = TrigPoly::zero(d);
                for k in lattice(d, *modes) {
                    let (c, s) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    p.add_mode(k, amplitude * c, amplitude * s);
                }
                Ok(PhaseExpr::Trig(p))
            }
        }
    }
}

/// Nonzero wavevectors in `[−m, m]^d` with first nonzero entry positive.
fn lattice(d: usize, m: i32) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    let side = (2 * m + 1) as usize;
    for idx in 0..side.pow(d as u32) {
        let mut k = [0i32; 3];
        let mut r = idx;
        for a in (0..d).rev() {
            k[a] = (r % side) as i32 - m;
            r /= side;
        }
        if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
            out.push(k);
        }
    }
    out
}

impl StateSpec {
    pub fn build(&self, grid: GridSpec, rng: &mut ChaCha8Rng, key: &str) -> Result<WaveFunction, ConfigError> {
        let d = grid.dim;
        let torus_only = |name: &str| -> Result<(), ConfigError> {
            if grid.manifold != qflow::grid::Manifold::Torus {
                return err(format!("{key}: {name} states need a torus grid"));
            }
            Ok(())
        };
        let dot = |k: &[i32; 3], p: &[f64; 3]| (0..d).map(|a| k[a] as f64 * p[a]).sum::<f64>();
        let psi = match self {
            StateSpec::Uniform => WaveFunction::from_fn(grid, |_| Complex64::new(1.0, 0.0)),
            StateSpec::PlaneWave { k } => {
                torus_only("plane_wave")?;
                let k = wavevector(k, d, &format!("{key}.k"))?;
                WaveFunction::from_fn(grid, |p| Complex64::from_polar(1.0, dot(&k, p)))
            }
            StateSpec::Gaussian { center, width } => {
                if !center.is_empty() && center.len() != d {
                    return err(format!("{key}.center must have {d} entries"));
                }
                let c: Vec<f64> = if center.is_empty() { vec![0.0; d] } else { center.clone() };
                WaveFunction::from_fn(grid, |p| {
                    let r2: f64 = (0..d).map(|a| (p[a] - c[a]).powi(2)).sum();
                    Complex64::new((-0.5 * r2 / (width * width)).exp(), 0.0)
                })
            }
            StateSpec::Modes { terms } => {
                torus_only("modes")?;
                let ks = terms
                    .iter()
                    .map(|t| Ok((wavevector(&t.k, d, &format!("{key}.terms.k"))?, Complex64::new(t.re, t.im))))
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                WaveFunction::from_fn(grid, |p| ks.iter().map(|(k, c)| c * Complex64::from_polar(1.0, dot(k, p))).sum())
            }
            StateSpec::Random { modes } => {
                torus_only("random")?;
                let ks: Vec<([i32; 3], Complex64)> = lattice(d, *modes)
                    .into_iter()
                    .flat_map(|k| {
                        let neg = [-k[0], -k[1], -k[2]];
                        [k, neg]
                    })
                    .map(|k| (k, Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1))))
                    .collect();
                WaveFunction::from_fn(grid, |p| {
                    Complex64::new(1.0, 0.0) + ks.iter().map(|(k, c)| c * Complex64::from_polar(1.0, dot(k, p))).sum::<Complex64>()
                })
            }
            StateSpec::DensityPhase { density, phase } => {
                torus_only("density_phase")?;
                let mut mass = TrigPoly::constant(d, 1.0);
                for t in density {
                    mass.add_mode(wavevector(&t.k, d, &format!("{key}.density.k"))?, t.cos, t.sin);
                }
                let phi = phase.expr(&grid, rng, &format!("{key}.phase"))?;
                for p in grid.points() {
                    if !(mass.eval(&p) > 0.0) {
                        return err(format!("{key}.density must be positive"));
                    }
                }
                WaveFunction::from_fn(grid, |p| Complex64::from_polar(mass.eval(p).sqrt(), phi.eval(p)))
            }
        };
        psi.map_err(|e| ConfigError(format!("{key}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
[grid]
manifold = "torus"
dim = 1
points = 32
[experiment]
kind = "free"
time = 0.5
state = { kind = "plane_wave", k = [2] }
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = Config::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid_spec().unwrap().n(), 32);
        assert_eq!(cfg.output.prefix, "run");
    }

    #[test]
    fn missing_grid_names_the_key() {
        let text = MINIMAL.replace("[grid]\nmanifold = \"torus\"\ndim = 1\npoints = 32\n", "");
        let e = Config::parse(&text).unwrap_err();
        assert!(e.0.contains("grid"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("time = 0.5", "time = 0.5\ntyme = 1");
        assert!(Config::parse(&text).is_err());
    }

    #[test]
    fn hash_ignores_layout() {
        let a = Config::parse(MINIMAL).unwrap();
        let b = Config::parse(&MINIMAL.replace("time = 0.5", "time   =   0.50")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::parse(&MINIMAL.replace("time = 0.5", "time = 0.6")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn lattice_is_half_of_the_cube() {
        assert_eq!(lattice(1, 3).len(), 3);
        assert_eq!(lattice(2, 1).len(), 4);
    }
}
