//! Ground states: minimizers of `E(rho) = h^2/8 I(rho) + V(rho) + W(rho)` on the simplex.

use nalgebra::{DMatrix, DVector};

use crate::energy::{
    check_interior, fisher_gradient, fisher_hessian_scaled, fisher_information, interaction_energy,
    potential_energy, Density, PotentialSpec,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::wave::madelung_laplacian;

/// Sufficient-decrease constant of the backtracking line search.
const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-300;
/// Largest fraction of any entry a Newton step may remove.
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const NEWTON_BACKTRACKS: usize = 40;

pub fn ground_energy(g: &Graph, spec: &PotentialSpec, rho: &[f64]) -> Result<f64> {
    spec.check(g)?;
    Ok(spec.h * spec.h / 8.0 * fisher_information(g, rho)?
        + potential_energy(spec, rho)?
        + interaction_energy(spec, rho)?)
}

pub fn ground_gradient(g: &Graph, spec: &PotentialSpec, rho: &[f64]) -> Result<Vec<f64>> {
    spec.check(g)?;
    let c = spec.h * spec.h / 8.0;
    let w_rho = spec.w.apply(rho);
    Ok(fisher_gradient(g, rho)?
        .into_iter()
        .zip(&spec.v)
        .zip(&w_rho)
        .map(|((f, v), w)| c * f + v + w)
        .collect())
}

#[derive(Debug, Clone)]
pub struct GroundStateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub init: Option<Density>,
    /// Try a Newton step on the KKT system before each mirror step.
    pub newton: bool,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tol: 1e-10,
            max_iter: 1_000_000,
            init: None,
            newton: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub rho: Vec<f64>,
    /// Lagrange multiplier `sum_j (dE/drho_j) rho_j`.
    pub nu: f64,
    /// `max_j |dE/drho_j - nu|`
    pub kkt_residual: f64,
    pub iterations: usize,
    pub energy: f64,
    /// Energy after each accepted step, starting from the initial density.
    pub energy_trace: Vec<f64>,
    /// `E(rho) + E_int(rho)`, which equals `nu` at a critical point.
    pub nu_from_energy: f64,
    /// False when `W` has a negative eigenvalue: the result is then only a
    /// critical point, not a certified unique minimizer.
    pub certified_minimum: bool,
}

fn multiplier(grad: &[f64], rho: &[f64]) -> (f64, f64) {
    let nu: f64 = grad.iter().zip(rho).map(|(g, r)| g * r).sum();
    let kkt = grad.iter().map(|g| (g - nu).abs()).fold(0.0, f64::max);
    (nu, kkt)
}

/// Newton direction as a relative change `du = drho / rho`:
/// `[[D H D, rho], [rho^T, 0]] [du; -dnu] = [-D (grad - nu); 0]` with
/// `D = diag(rho)`. Returns `None` when the system is singular or the
/// direction does not descend.
fn newton_direction(g: &Graph, spec: &PotentialSpec, rho: &[f64], grad: &[f64], nu: f64) -> Option<Vec<f64>> {
    let n = rho.len();
    let mut scaled = fisher_hessian_scaled(g, rho).ok()? * (spec.h * spec.h / 8.0);
    let w = spec.w.matrix(n);
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    for j in 0..n {
        for l in 0..n {
            scaled[(j, l)] += rho[j] * w[(j, l)] * rho[l];
        }
    }
    kkt.view_mut((0, 0), (n, n)).copy_from(&scaled);
    for j in 0..n {
        kkt[(j, n)] = rho[j];
        kkt[(n, j)] = rho[j];
    }
    // symmetric equilibration keeps rows of tiny nodes from drowning in roundoff
    let mut scale = DVector::from_fn(n + 1, |j, _| if j < n { 1.0 / kkt[(j, j)].abs().max(f64::MIN_POSITIVE).sqrt() } else { 1.0 });
    scale[n] = 1.0 / (0..n).map(|j| rho[j] * scale[j]).fold(0.0, f64::max);
    let equilibrated = DMatrix::from_fn(n + 1, n + 1, |i, j| scale[i] * kkt[(i, j)] * scale[j]);
    let rhs = DVector::from_fn(n + 1, |j, _| if j < n { -rho[j] * (grad[j] - nu) * scale[j] } else { 0.0 });
    let sol = equilibrated.lu().solve(&rhs)?;
    let du: Vec<f64> = (0..n).map(|j| sol[j] * scale[j]).collect();
    if du.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let slope: f64 = (0..n).map(|j| (grad[j] - nu) * rho[j] * du[j]).sum();
    (slope < 0.0).then_some(du)
}

/// `rho exp(t step) / Z` written into `out`.
fn exp_update(rho: &[f64], step: impl Fn(usize) -> f64, out: &mut [f64]) {
    let shift = (0..rho.len()).map(&step).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = rho[j] * (step(j) - shift).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

struct Objective<'a> {
    g: &'a Graph,
    spec: &'a PotentialSpec,
}

impl Objective<'_> {
    /// Armijo test for moving from `rho` (energy `energy`, gradient `grad`)
    /// to `candidate`; returns the new energy on acceptance.
    fn accept(&self, rho: &[f64], energy: f64, grad: &[f64], candidate: &[f64]) -> Option<f64> {
        check_interior(candidate).ok()?;
        let e_new = ground_energy(self.g, self.spec, candidate).ok()?;
        let slope: f64 = grad.iter().zip(candidate.iter().zip(rho)).map(|(gj, (c, r))| gj * (c - r)).sum();
        // energy differences below roundoff cannot certify decrease
        let noise = 8.0 * f64::EPSILON * energy.abs().max(1.0);
        (e_new <= energy + ARMIJO_SLOPE * slope + noise).then_some(e_new)
    }
}

/// Entropic mirror descent `rho <- rho exp(-eta grad E) / Z` with Armijo
/// backtracking on `eta`, accelerated by damped Newton steps on the KKT
/// system when those descend. Iterates stay in the simplex interior.
pub fn solve_ground_state(
    g: &Graph,
    spec: &PotentialSpec,
    opts: &GroundStateOptions,
) -> Result<GroundStateResult> {
    spec.check(g)?;
    let n = g.n();
    let certified_minimum = spec.w.is_positive_semidefinite();
    if !certified_minimum {
        log::warn!("interaction matrix is indefinite; the ground-state solve returns a critical point only");
    }
    let mut rho = match &opts.init {
        Some(d) => {
            g.check_len(d.len())?;
            d.to_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let objective = Objective { g, spec };
    let mut energy = ground_energy(g, spec, &rho)?;
    let mut grad = ground_gradient(g, spec, &rho)?;
    let mut eta = 1.0 / (1.0 + grad.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let mut iterations = 0;
    let mut candidate = vec![0.0; n];
    let mut energy_trace = vec![energy];

    loop {
        let (nu, kkt) = multiplier(&grad, &rho);
        if kkt <= opts.tol {
            let rho_density = Density::normalized(rho)?.into_inner();
            return Ok(GroundStateResult {
                nu_from_energy: energy + interaction_energy(spec, &rho_density)?,
                rho: rho_density,
                nu,
                kkt_residual: kkt,
                iterations,
                energy,
                energy_trace,
                certified_minimum,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterations {
                iterations,
                residual: kkt,
            });
        }
        iterations += 1;

        let mut accepted = None;
        if opts.newton {
            if let Some(du) = newton_direction(g, spec, &rho, &grad, nu) {
                // du is the relative change of each entry; the energy is convex
                // along the straight segment, unlike along the exponential curve
                let shrink = du.iter().fold(0.0f64, |m, x| m.max(-x));
                let mut t = (FRACTION_TO_BOUNDARY / shrink).min(1.0);
                for _ in 0..NEWTON_BACKTRACKS {
                    for (c, (r, d)) in candidate.iter_mut().zip(rho.iter().zip(&du)) {
                        *c = r * (1.0 + t * d);
                    }
                    accepted = objective.accept(&rho, energy, &grad, &candidate);
                    if accepted.is_some() {
                        break;
                    }
                    t *= ARMIJO_SHRINK;
                }
            }
        }
        while accepted.is_none() {
            exp_update(&rho, |j| -eta * (grad[j] - nu), &mut candidate);
            accepted = objective.accept(&rho, energy, &grad, &candidate);
            if accepted.is_some() {
                eta /= ARMIJO_SHRINK;
                break;
            }
            eta *= ARMIJO_SHRINK;
            if eta < MIN_STEP {
                return Err(Error::MaxIterations {
                    iterations,
                    residual: kkt,
                });
            }
        }
        energy = accepted.expect("loop exits on acceptance");
        energy_trace.push(energy);
        std::mem::swap(&mut rho, &mut candidate);
        grad = ground_gradient(g, spec, &rho)?;
    }
}

/// Sup-norm residual of `nu psi = -h^2/2 Lap psi + V psi + psi (W |psi|^2)` at
/// `psi = sqrt(rho_g)`.
pub fn eigen_residual(g: &Graph, spec: &PotentialSpec, result: &GroundStateResult) -> Result<f64> {
    spec.check(g)?;
    let rho = &result.rho;
    let zero = vec![0.0; g.n()];
    let lap = madelung_laplacian(g, rho, &zero, spec.h)?;
    let w_rho = spec.w.apply(rho);
    let c = 0.5 * spec.h * spec.h;
    Ok((0..g.n())
        .map(|j| {
            let psi = rho[j].sqrt();
            (result.nu * psi + c * lap[j].re - (spec.v[j] + w_rho[j]) * psi).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn energy_examples() {
        let g = Graph::cycle(4).unwrap();
        let spec = PotentialSpec::free(4, 1.0);
        assert_eq!(ground_energy(&g, &spec, &[0.25; 4]).unwrap(), 0.0);
        assert!(ground_gradient(&g, &spec, &[0.25; 4])
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-15));
        let g = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        let spec = PotentialSpec::new(vec![1.7, 1.7], crate::energy::Interaction::Zero, 1.0).unwrap();
        assert_relative_eq!(ground_energy(&g, &spec, &[0.5, 0.5]).unwrap(), 1.7);
    }

    #[test]
    fn two_node_constant_potential() {
        let g = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        let spec = PotentialSpec::new(vec![1.7, 1.7], crate::energy::Interaction::Zero, 1.0).unwrap();
        let init = Density::new(vec![0.8, 0.2]).unwrap();
        let res = solve_ground_state(
            &g,
            &spec,
            &GroundStateOptions {
                init: Some(init),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.rho[0] - 0.5).abs() < 1e-10);
        assert_relative_eq!(res.nu, 1.7, epsilon = 1e-9);
        assert!(eigen_residual(&g, &spec, &res).unwrap() <= 1e-9);
    }

    #[test]
    fn indefinite_interaction_is_flagged() {
        let g = Graph::cycle(3).unwrap();
        let spec = PotentialSpec::gpe(3, -0.1, 1.0);
        let res = solve_ground_state(&g, &spec, &GroundStateOptions::default()).unwrap();
        assert!(!res.certified_minimum);
    }

    #[test]
    fn max_iterations_error() {
        let g = Graph::path(5).unwrap();
        let spec = PotentialSpec::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], crate::energy::Interaction::Zero, 1.0).unwrap();
        let err = solve_ground_state(
            &g,
            &spec,
            &GroundStateOptions {
                max_iter: 2,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 2, .. }));
    }
}
