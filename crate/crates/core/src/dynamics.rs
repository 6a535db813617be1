//! Hamiltonian dynamics of `(rho, S)` and its time integration.
//!
//! The flow is `d/dt (rho, S) = J grad H` with `J = [[0, I], [-I, 0]]`:
//!
//! ```text
//! drho_j/dt = sum_l w_jl (S_j - S_l) g_jl(rho)                  = dH/dS_j
//! dS_j/dt   = -1/4 sum_l w_jl (S_j - S_l)^2 - h^2/8 dI/drho_j
//!             - V_j - (W rho)_j                                   = -dH/drho_j
//! ```

use nalgebra::{DMatrix, DVector};

use crate::energy::{
    check_interior, fisher_gradient, fisher_hessian, fisher_information, hamiltonian,
    interaction_energy, kinetic_energy, potential_energy, Density, PotentialSpec,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::transport::{weighted_laplacian_apply, weighted_laplacian_matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub rho: Vec<f64>,
    pub s: Vec<f64>,
    pub t: f64,
}

impl SystemState {
    pub fn new(rho: Density, s: Vec<f64>, t: f64) -> Result<Self> {
        if rho.len() != s.len() {
            return Err(Error::LengthMismatch {
                expected: rho.len(),
                got: s.len(),
            });
        }
        Ok(SystemState {
            rho: rho.into_inner(),
            s,
            t,
        })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `sum_j S_j rho_j`
    pub fn phase_moment(&self) -> f64 {
        self.rho.iter().zip(&self.s).map(|(r, s)| r * s).sum()
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.n(), self.rho.iter().chain(&self.s).copied())
    }

    fn from_vector(z: &DVector<f64>, t: f64) -> Self {
        let n = z.len() / 2;
        SystemState {
            rho: z.rows(0, n).iter().copied().collect(),
            s: z.rows(n, n).iter().copied().collect(),
            t,
        }
    }
}

/// `dH/drho`.
pub fn energy_gradient_rho(
    g: &Graph,
    spec: &PotentialSpec,
    rho: &[f64],
    s: &[f64],
) -> Result<Vec<f64>> {
    let fisher = fisher_gradient(g, rho)?;
    let w_rho = spec.w.apply(rho);
    let c = spec.h * spec.h / 8.0;
    Ok((0..g.n())
        .map(|j| {
            let kinetic: f64 = g
                .neighbors(j)
                .map(|(l, e)| 0.25 * e.weight * (s[j] - s[l]).powi(2))
                .sum();
            kinetic + c * fisher[j] + spec.v[j] + w_rho[j]
        })
        .collect())
}

/// Right-hand side `(drho/dt, dS/dt)`.
pub fn rhs(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    g.check_len(rho.len())?;
    g.check_len(s.len())?;
    spec.check(g)?;
    check_interior(rho)?;
    let drho = weighted_laplacian_apply(g, rho, s);
    let ds = energy_gradient_rho(g, spec, rho, s)?
        .into_iter()
        .map(|x| -x)
        .collect();
    Ok((drho, ds))
}

/// Hessian of `H` in the variable order `(rho, S)`.
pub fn hamiltonian_hessian(
    g: &Graph,
    spec: &PotentialSpec,
    rho: &[f64],
    s: &[f64],
) -> Result<DMatrix<f64>> {
    let n = g.n();
    let mut hess = DMatrix::zeros(2 * n, 2 * n);
    let rr = fisher_hessian(g, rho)? * (spec.h * spec.h / 8.0) + spec.w.matrix(n);
    hess.view_mut((0, 0), (n, n)).copy_from(&rr);
    hess.view_mut((n, n), (n, n))
        .copy_from(&weighted_laplacian_matrix(g, rho)?);
    // d^2 H / dS_j drho_k = d (L(rho) S)_j / drho_k
    for e in g.edges() {
        let half = 0.5 * e.weight * (s[e.a] - s[e.b]);
        for (j, k, val) in [
            (e.a, e.a, half),
            (e.a, e.b, half),
            (e.b, e.a, -half),
            (e.b, e.b, -half),
        ] {
            hess[(n + j, k)] += val;
            hess[(k, n + j)] += val;
        }
    }
    Ok(hess)
}

/// Jacobian of the right-hand side, `J Hess H`.
pub fn rhs_jacobian(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.n();
    let hess = hamiltonian_hessian(g, spec, rho, s)?;
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    jac.view_mut((0, 0), (n, 2 * n))
        .copy_from(&hess.view((n, 0), (n, 2 * n)));
    jac.view_mut((n, 0), (n, 2 * n))
        .copy_from(&(-hess.view((0, 0), (n, 2 * n))));
    Ok(jac)
}

/// `1/2 (grad S, grad S)_rho - h^2/8 I - V - 2W`: the rate of change of
/// `sum_j S_j rho_j` along the flow.
pub fn phase_moment_rate(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<f64> {
    Ok(kinetic_energy(g, rho, s)?
        - spec.h * spec.h / 8.0 * fisher_information(g, rho)?
        - potential_energy(spec, rho)?
        - 2.0 * interaction_energy(spec, rho)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    ImplicitMidpoint,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub horizon: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Record a snapshot every this many steps.
    pub output_every: usize,
    /// Number of times a failing step may be halved before giving up.
    pub max_halvings: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::ImplicitMidpoint,
            dt: 1e-3,
            horizon: 10.0,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            output_every: 100,
            max_halvings: 5,
        }
    }
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, horizon: f64) -> Self {
        IntegratorConfig {
            method,
            dt,
            horizon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.dt) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !positive(self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !positive(self.newton_tol) {
            return Err(Error::InvalidConfig("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 || self.output_every == 0 {
            return Err(Error::InvalidConfig(
                "newton_max_iter and output_every must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of macro steps covering the horizon.
    pub fn num_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

struct Flow<'a> {
    g: &'a Graph,
    spec: &'a PotentialSpec,
}

impl Flow<'_> {
    fn eval(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.g.n();
        let (rho, s) = z.as_slice().split_at(n);
        let (dr, ds) = rhs(self.g, self.spec, rho, s)?;
        Ok(DVector::from_iterator(2 * n, dr.into_iter().chain(ds)))
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.g.n();
        let (rho, s) = z.as_slice().split_at(n);
        rhs_jacobian(self.g, self.spec, rho, s)
    }

    fn phase_rate(&self, z: &DVector<f64>) -> Result<f64> {
        let n = self.g.n();
        let (rho, s) = z.as_slice().split_at(n);
        phase_moment_rate(self.g, self.spec, rho, s)
    }

    fn interior(&self, z: &DVector<f64>) -> bool {
        z.rows(0, self.g.n()).iter().all(|&r| r >= crate::energy::INTERIOR_FLOOR && r.is_finite())
    }

    /// One step; also returns the midpoint-rule increment of the phase-moment integral.
    fn step(&self, z0: &DVector<f64>, t: f64, dt: f64, cfg: &IntegratorConfig) -> Result<(DVector<f64>, f64)> {
        let leave = |_| Error::StepLeftSimplex(t);
        let z1 = match cfg.method {
            Method::ImplicitMidpoint => self.midpoint(z0, t, dt, cfg)?,
            Method::Rk4 => {
                let k1 = self.eval(z0).map_err(leave)?;
                let k2 = self.eval(&(z0 + &k1 * (0.5 * dt))).map_err(leave)?;
                let k3 = self.eval(&(z0 + &k2 * (0.5 * dt))).map_err(leave)?;
                let k4 = self.eval(&(z0 + &k3 * dt)).map_err(leave)?;
                z0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            }
        };
        if !self.interior(&z1) {
            return Err(Error::StepLeftSimplex(t));
        }
        let mid = (z0 + &z1) * 0.5;
        let increment = dt * self.phase_rate(&mid)?;
        Ok((z1, increment))
    }

    fn midpoint(&self, z0: &DVector<f64>, t: f64, dt: f64, cfg: &IntegratorConfig) -> Result<DVector<f64>> {
        let dim = z0.len();
        // explicit Euler predictor
        let mut z = z0 + self.eval(z0).map_err(|_| Error::StepLeftSimplex(t))? * dt;
        let mut residual = f64::INFINITY;
        for _ in 0..cfg.newton_max_iter {
            let mid = (z0 + &z) * 0.5;
            if !self.interior(&mid) {
                return Err(Error::StepLeftSimplex(t));
            }
            let r = &z - z0 - self.eval(&mid)? * dt;
            residual = r.amax();
            if !residual.is_finite() {
                break;
            }
            if residual <= cfg.newton_tol {
                return Ok(z);
            }
            let jac = DMatrix::identity(dim, dim) - self.jacobian(&mid)? * (0.5 * dt);
            match jac.lu().solve(&r) {
                Some(delta) => z -= delta,
                None => break,
            }
        }
        Err(Error::NewtonDivergence {
            residual,
            iterations: cfg.newton_max_iter,
        })
    }
}

/// Advances `state` by one step of `cfg.dt`, without retries.
pub fn step(g: &Graph, spec: &PotentialSpec, state: &SystemState, cfg: &IntegratorConfig) -> Result<SystemState> {
    cfg.validate()?;
    let flow = Flow { g, spec };
    let (z1, _) = flow.step(&state.to_vector(), state.t, cfg.dt, cfg)?;
    Ok(SystemState::from_vector(&z1, state.t + cfg.dt))
}

/// Per-snapshot diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub mass: f64,
    pub energy: f64,
    pub min_rho: f64,
    /// Deviation of `sum S rho` from its value predicted by integrating
    /// [`phase_moment_rate`]; zero iff the phase carries no extra gauge drift.
    pub norm_resid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: SystemState,
    pub diagnostics: Diagnostics,
}

/// Record of a step that had to be subdivided.
#[derive(Debug, Clone, PartialEq)]
pub struct Halving {
    pub t: f64,
    pub dt: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub halvings: Vec<Halving>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&SystemState> {
        self.snapshots.last().map(|s| &s.state)
    }

    pub fn max_mass_error(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| (s.diagnostics.mass - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t |H(t) - H(0)| / |H(0)|` (absolute drift when `H(0) = 0`).
    pub fn max_energy_drift(&self) -> f64 {
        let Some(first) = self.snapshots.first() else {
            return 0.0;
        };
        let e0 = first.diagnostics.energy;
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.snapshots
            .iter()
            .map(|s| (s.diagnostics.energy - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn min_rho(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.diagnostics.min_rho)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_norm_resid(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.diagnostics.norm_resid)
            .fold(0.0, f64::max)
    }
}

/// A simulation that stopped early; `partial` holds everything computed before the failure.
#[derive(Debug)]
pub struct SimulationFailure {
    pub partial: Trajectory,
    pub error: Error,
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.partial.last().map_or(0.0, |s| s.t);
        write!(f, "simulation stopped after t = {t}: {}", self.error)
    }
}

impl std::error::Error for SimulationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn diagnostics(
    g: &Graph,
    spec: &PotentialSpec,
    state: &SystemState,
    moment0: f64,
    integral: f64,
) -> Result<Diagnostics> {
    Ok(Diagnostics {
        mass: state.mass(),
        energy: hamiltonian(g, spec, &state.rho, &state.s)?,
        min_rho: state.min_rho(),
        norm_resid: (state.phase_moment() - moment0 - integral).abs(),
    })
}

/// Integrates from `initial` over `cfg.horizon`. Failing steps are retried with
/// halved step size up to `cfg.max_halvings` times.
pub fn simulate(
    g: &Graph,
    spec: &PotentialSpec,
    initial: &SystemState,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, SimulationFailure> {
    let fail = |partial: Trajectory, error| SimulationFailure { partial, error };
    let mut traj = Trajectory::default();
    if let Err(e) = cfg
        .validate()
        .and_then(|_| spec.check(g))
        .and_then(|_| g.check_len(initial.n()))
        .and_then(|_| Density::new(initial.rho.clone()).map(|_| ()))
    {
        return Err(fail(traj, e));
    }
    let flow = Flow { g, spec };
    let moment0 = initial.phase_moment();
    let mut integral = 0.0;
    match diagnostics(g, spec, initial, moment0, integral) {
        Ok(d) => traj.snapshots.push(Snapshot {
            state: initial.clone(),
            diagnostics: d,
        }),
        Err(e) => return Err(fail(traj, e)),
    }

    let steps = cfg.num_steps();
    let t0 = initial.t;
    let mut z = initial.to_vector();
    for k in 1..=steps {
        let t = t0 + (k - 1) as f64 * cfg.dt;
        match advance(&flow, &z, t, cfg.dt, cfg, 0, &mut traj.halvings) {
            Ok((z1, inc)) => {
                z = z1;
                integral += inc;
            }
            Err(e) => {
                log::warn!("integration failed at t = {t}: {e}");
                return Err(fail(traj, e));
            }
        }
        if k % cfg.output_every == 0 || k == steps {
            let state = SystemState::from_vector(&z, t0 + k as f64 * cfg.dt);
            match diagnostics(g, spec, &state, moment0, integral) {
                Ok(d) => traj.snapshots.push(Snapshot {
                    state,
                    diagnostics: d,
                }),
                Err(e) => return Err(fail(traj, e)),
            }
        }
    }
    Ok(traj)
}

fn advance(
    flow: &Flow,
    z: &DVector<f64>,
    t: f64,
    dt: f64,
    cfg: &IntegratorConfig,
    depth: u32,
    log: &mut Vec<Halving>,
) -> Result<(DVector<f64>, f64)> {
    match flow.step(z, t, dt, cfg) {
        Ok(out) => Ok(out),
        Err(e @ (Error::StepLeftSimplex(_) | Error::NewtonDivergence { .. })) if depth < cfg.max_halvings => {
            log.push(Halving {
                t,
                dt: dt / 2.0,
                reason: e.to_string(),
            });
            let (z_half, inc1) = advance(flow, z, t, dt / 2.0, cfg, depth + 1, log)?;
            let (z1, inc2) = advance(flow, &z_half, t + dt / 2.0, dt / 2.0, cfg, depth + 1, log)?;
            Ok((z1, inc1 + inc2))
        }
        Err(e) => Err(e),
    }
}
