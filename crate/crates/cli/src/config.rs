//! Run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use graph_nls::io::{read_json, GraphFile, InitialStateFile, InteractionFile, PotentialsFile};
use graph_nls::{Density, Graph, Interaction, IntegratorConfig, Method, PotentialSpec, Torus, WeightMode};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    GroundState,
    Stability,
    Dispersion,
    Verify,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub graph: Option<GraphSource>,
    #[serde(default)]
    pub potentials: Option<PotentialSource>,
    #[serde(default)]
    pub initial: Option<InitialSource>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub dispersion: Option<DispersionSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    File { path: PathBuf },
    Inline(GraphFile),
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    /// Equally spaced nodes on `[x_min, x_max]` including both endpoints.
    Lattice {
        n: usize,
        x_min: f64,
        x_max: f64,
        #[serde(default)]
        weight: Option<f64>,
    },
    Torus {
        dims: Vec<usize>,
        delta_x: f64,
        #[serde(default)]
        weight: Option<f64>,
    },
}

fn weight_mode(weight: Option<f64>) -> WeightMode {
    weight.map_or(WeightMode::Continuum, WeightMode::Constant)
}

impl GraphSource {
    pub fn build(&self, base: &Path) -> Result<Graph, CliError> {
        Ok(match self {
            GraphSource::File { path } => read_json::<GraphFile>(&base.join(path))?.to_graph()?,
            GraphSource::Inline(file) => file.to_graph()?,
            GraphSource::Path { n } => Graph::path(*n)?,
            GraphSource::Cycle { n } => Graph::cycle(*n)?,
            GraphSource::Complete { n } => Graph::complete(*n)?,
            GraphSource::Lattice {
                n,
                x_min,
                x_max,
                weight,
            } => Graph::path_lattice(*n, *x_min, *x_max, weight_mode(*weight))?,
            GraphSource::Torus { dims, delta_x, weight } => {
                Torus::new(dims, *delta_x, weight_mode(*weight))?.graph().clone()
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSource {
    File {
        path: PathBuf,
    },
    Inline(PotentialsFile),
    /// `V = 0`, `W = alpha I`.
    Gpe {
        alpha: f64,
        h: f64,
    },
    /// `V_j = c` at every node.
    Constant {
        value: f64,
        h: f64,
        #[serde(rename = "W", default)]
        w: Option<InteractionFile>,
    },
    /// `V_j = strength |x_j|^2 / 2` from the graph coordinates.
    Harmonic {
        h: f64,
        #[serde(default = "one")]
        strength: f64,
        #[serde(rename = "W", default)]
        w: Option<InteractionFile>,
    },
}

fn one() -> f64 {
    1.0
}

impl PotentialSource {
    pub fn build(&self, g: &Graph, base: &Path) -> Result<PotentialSpec, CliError> {
        let n = g.n();
        let interaction = |w: &Option<InteractionFile>| -> Result<Interaction, CliError> {
            Ok(match w {
                Some(w) => w.to_interaction()?,
                None => Interaction::Zero,
            })
        };
        let spec = match self {
            PotentialSource::File { path } => read_json::<PotentialsFile>(&base.join(path))?.to_spec()?,
            PotentialSource::Inline(file) => file.to_spec()?,
            PotentialSource::Gpe { alpha, h } => PotentialSpec::new(vec![0.0; n], Interaction::Diagonal(*alpha), *h)?,
            PotentialSource::Constant { value, h, w } => PotentialSpec::new(vec![*value; n], interaction(w)?, *h)?,
            PotentialSource::Harmonic { h, strength, w } => {
                let coords = g
                    .coords()
                    .ok_or_else(|| CliError::Config("harmonic potential needs node coordinates".into()))?;
                let v = coords
                    .iter()
                    .map(|x| 0.5 * strength * x.iter().map(|c| c * c).sum::<f64>())
                    .collect();
                PotentialSpec::new(v, interaction(w)?, *h)?
            }
        };
        spec.check(g)?;
        Ok(spec)
    }

    /// `Some(alpha)` when the potentials are of pure GPE form.
    pub fn gpe_alpha(spec: &PotentialSpec) -> Option<f64> {
        if spec.v.iter().any(|&v| v != 0.0) {
            return None;
        }
        match spec.w {
            Interaction::Zero => Some(0.0),
            Interaction::Diagonal(alpha) => Some(alpha),
            Interaction::Dense(_) => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSource {
    File {
        path: PathBuf,
    },
    Madelung {
        rho: Vec<f64>,
        #[serde(rename = "S")]
        s: Vec<f64>,
    },
    Wave {
        psi_re: Vec<f64>,
        psi_im: Vec<f64>,
    },
    /// Uniform density with zero phase.
    Uniform,
}

impl InitialSource {
    pub fn build(&self, g: &Graph, h: f64, base: &Path) -> Result<(Density, Vec<f64>), CliError> {
        let (rho, s) = match self {
            InitialSource::File { path } => read_json::<InitialStateFile>(&base.join(path))?.to_state(h)?,
            InitialSource::Madelung { rho, s } => InitialStateFile::Madelung {
                rho: rho.clone(),
                s: s.clone(),
            }
            .to_state(h)?,
            InitialSource::Wave { psi_re, psi_im } => InitialStateFile::Wave {
                psi_re: psi_re.clone(),
                psi_im: psi_im.clone(),
            }
            .to_state(h)?,
            InitialSource::Uniform => (Density::uniform(g.n()), vec![0.0; g.n()]),
        };
        if rho.len() != g.n() {
            return Err(graph_nls::Error::LengthMismatch {
                expected: g.n(),
                got: rho.len(),
            }
            .into());
        }
        Ok((rho, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    ImplicitMidpoint,
    Rk4,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_method")]
    pub method: MethodName,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: u32,
}

fn default_method() -> MethodName {
    MethodName::ImplicitMidpoint
}
fn default_dt() -> f64 {
    IntegratorConfig::default().dt
}
fn default_horizon() -> f64 {
    IntegratorConfig::default().horizon
}
fn default_newton_tol() -> f64 {
    IntegratorConfig::default().newton_tol
}
fn default_newton_max_iter() -> usize {
    IntegratorConfig::default().newton_max_iter
}
fn default_output_every() -> usize {
    IntegratorConfig::default().output_every
}
fn default_max_halvings() -> u32 {
    IntegratorConfig::default().max_halvings
}

impl Default for IntegratorSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl IntegratorSection {
    pub fn to_config(&self) -> Result<IntegratorConfig, CliError> {
        let cfg = IntegratorConfig {
            method: match self.method {
                MethodName::ImplicitMidpoint => Method::ImplicitMidpoint,
                MethodName::Rk4 => Method::Rk4,
            },
            dt: self.dt,
            horizon: self.horizon,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            output_every: self.output_every,
            max_halvings: self.max_halvings,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSection {
    #[serde(default = "default_gs_tol")]
    pub tol: f64,
    #[serde(default = "default_gs_max_iter")]
    pub max_iter: usize,
    /// Sweep over Planck constants; overrides `h` of the potentials.
    #[serde(default)]
    pub h_values: Option<Vec<f64>>,
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

fn default_gs_tol() -> f64 {
    graph_nls::GroundStateOptions::default().tol
}
fn default_gs_max_iter() -> usize {
    graph_nls::GroundStateOptions::default().max_iter
}

impl Default for GroundStateSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default = "default_stable")]
    pub stable_tol: f64,
    #[serde(default = "default_unstable")]
    pub unstable_tol: f64,
}

fn default_stable() -> f64 {
    graph_nls::Thresholds::default().stable
}
fn default_unstable() -> f64 {
    graph_nls::Thresholds::default().unstable
}

impl Default for StabilitySection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub dims: Vec<usize>,
    #[serde(default = "one")]
    pub delta_x: f64,
    /// Wave vectors to check; all commensurate ones when absent.
    #[serde(default)]
    pub k: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTolerances {
    #[serde(default = "tol_mass")]
    pub mass: f64,
    #[serde(default = "tol_energy")]
    pub energy_drift: f64,
    #[serde(default = "tol_reversal")]
    pub reversal: f64,
    #[serde(default = "tol_gauge")]
    pub gauge: f64,
    #[serde(default = "tol_normalization")]
    pub normalization: f64,
    #[serde(default = "tol_wave")]
    pub wave_equivalence: f64,
    #[serde(default = "tol_hodge")]
    pub hodge: f64,
    #[serde(default = "tol_gradient")]
    pub gradient: f64,
    #[serde(default = "tol_hessian")]
    pub hessian: f64,
    #[serde(default = "tol_euler")]
    pub euler: f64,
}

fn tol_mass() -> f64 {
    1e-10
}
fn tol_energy() -> f64 {
    1e-8
}
fn tol_reversal() -> f64 {
    1e-6
}
fn tol_gauge() -> f64 {
    1e-8
}
fn tol_normalization() -> f64 {
    1e-5
}
fn tol_wave() -> f64 {
    1e-8
}
fn tol_hodge() -> f64 {
    1e-10
}
fn tol_gradient() -> f64 {
    1e-6
}
fn tol_hessian() -> f64 {
    1e-5
}
fn tol_euler() -> f64 {
    1e-10
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Graphs to run on; two-node, 4-cycle and path-20 when absent.
    #[serde(default)]
    pub graphs: Option<Vec<GraphSource>>,
    #[serde(default = "default_states")]
    pub states_per_graph: usize,
    #[serde(default = "default_verify_horizon", rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_gauge_shift")]
    pub gauge_shift: f64,
    #[serde(default = "default_hodge_cases")]
    pub hodge_cases: usize,
    #[serde(default)]
    pub tolerances: VerifyTolerances,
}

fn default_states() -> usize {
    3
}
fn default_verify_horizon() -> f64 {
    10.0
}
fn default_gauge_shift() -> f64 {
    0.37
}
fn default_hodge_cases() -> usize {
    200
}

impl Default for VerifySection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn graph(&self, base: &Path) -> Result<Graph, CliError> {
        self.graph
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"graph\" section".into()))?
            .build(base)
    }

    pub fn potentials(&self, g: &Graph, base: &Path) -> Result<PotentialSpec, CliError> {
        self.potentials
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"potentials\" section".into()))?
            .build(g, base)
    }
}
