//! Energies on the density simplex: discrete Fisher information with its
//! derivatives, linear and interaction potentials, and the total energy.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{grad, inner_product, Graph};

/// Densities below this are treated as lying on the simplex boundary.
pub const INTERIOR_FLOOR: f64 = 1e-300;

/// Tolerance on `sum rho = 1` when constructing a [`Density`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Checks that every entry is a finite number above [`INTERIOR_FLOOR`].
pub fn check_interior(rho: &[f64]) -> Result<()> {
    match rho
        .iter()
        .enumerate()
        .find(|(_, &r)| !(r >= INTERIOR_FLOOR) || !r.is_finite())
    {
        Some((node, &value)) => Err(Error::NonInteriorDensity { node, value }),
        None => Ok(()),
    }
}

/// A point in the interior of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        check_interior(&rho)?;
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Density(rho))
    }

    pub fn uniform(n: usize) -> Self {
        Density(vec![1.0 / n as f64; n])
    }

    /// Rescales a positive vector onto the simplex.
    pub fn normalized(mut rho: Vec<f64>) -> Result<Self> {
        check_interior(&rho)?;
        let sum: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|r| *r /= sum);
        Density::new(rho)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Density {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Arithmetic-mean density on edge `(j, l)`.
#[inline]
pub fn edge_density(rho: &[f64], j: usize, l: usize) -> f64 {
    0.5 * (rho[j] + rho[l])
}

fn check_positive_on(g: &Graph, rho: &[f64]) -> Result<()> {
    g.check_len(rho.len())?;
    check_interior(rho)
}

/// Discrete Fisher information `sum_{edges} w (log rho_j - log rho_l)^2 g_jl`.
///
/// Defined for any positive vector, where it is homogeneous of degree one.
pub fn fisher_information(g: &Graph, rho: &[f64]) -> Result<f64> {
    check_positive_on(g, rho)?;
    Ok(g.edges()
        .iter()
        .map(|e| {
            let d = rho[e.a].ln() - rho[e.b].ln();
            e.weight * d * d * edge_density(rho, e.a, e.b)
        })
        .sum())
}

pub fn fisher_gradient(g: &Graph, rho: &[f64]) -> Result<Vec<f64>> {
    check_positive_on(g, rho)?;
    let logs: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    Ok((0..g.n())
        .map(|j| {
            g.neighbors(j)
                .map(|(l, e)| {
                    let d = logs[j] - logs[l];
                    e.weight * (0.5 * d * d + 2.0 * d * edge_density(rho, j, l) / rho[j])
                })
                .sum()
        })
        .collect())
}

fn fisher_hessian_with(g: &Graph, rho: &[f64], scale: impl Fn(usize) -> f64) -> Result<DMatrix<f64>> {
    check_positive_on(g, rho)?;
    let mut hess = DMatrix::zeros(g.n(), g.n());
    for e in g.edges() {
        let (j, l) = (e.a, e.b);
        let t = (rho[l] - rho[j]) * (rho[l].ln() - rho[j].ln()) + rho[l] + rho[j];
        let wt = e.weight * t;
        let (sj, sl) = (scale(j), scale(l));
        hess[(j, j)] += wt * sj * sj;
        hess[(l, l)] += wt * sl * sl;
        hess[(j, l)] -= wt * sj * sl;
        hess[(l, j)] -= wt * sj * sl;
    }
    Ok(hess)
}

/// Hessian of the Fisher information. Positive semidefinite, and positive
/// definite on mean-zero directions.
pub fn fisher_hessian(g: &Graph, rho: &[f64]) -> Result<DMatrix<f64>> {
    fisher_hessian_with(g, rho, |j| 1.0 / rho[j])
}

/// `diag(rho) Hess I diag(rho)`, the Hessian in log coordinates without the
/// gradient term. Stays bounded when `rho` spans many orders of magnitude.
pub fn fisher_hessian_scaled(g: &Graph, rho: &[f64]) -> Result<DMatrix<f64>> {
    fisher_hessian_with(g, rho, |_| 1.0)
}

/// Symmetric interaction kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    Zero,
    /// `alpha * I`
    Diagonal(f64),
    Dense(DMatrix<f64>),
}

impl Interaction {
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        match self {
            Interaction::Zero => vec![0.0; rho.len()],
            Interaction::Diagonal(alpha) => rho.iter().map(|r| alpha * r).collect(),
            Interaction::Dense(w) => (0..rho.len())
                .map(|j| (0..rho.len()).map(|l| w[(j, l)] * rho[l]).sum())
                .collect(),
        }
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            Interaction::Zero => DMatrix::zeros(n, n),
            Interaction::Diagonal(alpha) => DMatrix::identity(n, n) * *alpha,
            Interaction::Dense(w) => w.clone(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Interaction::Zero => 0.0,
            Interaction::Diagonal(alpha) => *alpha,
            Interaction::Dense(w) => w.clone().symmetric_eigen().eigenvalues.min(),
        }
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue() >= -1e-12
    }
}

/// Linear potential, interaction kernel and Planck-like constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub v: Vec<f64>,
    pub w: Interaction,
    pub h: f64,
}

impl PotentialSpec {
    pub fn new(v: Vec<f64>, w: Interaction, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::NonPositivePlanck(h));
        }
        if let Interaction::Dense(m) = &w {
            if m.nrows() != v.len() || m.ncols() != v.len() {
                return Err(Error::LengthMismatch {
                    expected: v.len(),
                    got: m.nrows().max(m.ncols()),
                });
            }
            let scale = m.amax().max(1.0);
            if (m - m.transpose()).amax() > 1e-12 * scale {
                return Err(Error::AsymmetricInteraction);
            }
        }
        Ok(PotentialSpec { v, w, h })
    }

    /// No potentials, only the Planck constant.
    pub fn free(n: usize, h: f64) -> Self {
        PotentialSpec {
            v: vec![0.0; n],
            w: Interaction::Zero,
            h,
        }
    }

    /// Discrete Gross-Pitaevskii setting: `V = 0`, `W = alpha I`.
    pub fn gpe(n: usize, alpha: f64, h: f64) -> Self {
        PotentialSpec {
            v: vec![0.0; n],
            w: Interaction::Diagonal(alpha),
            h,
        }
    }

    pub fn with_shift(&self, alpha: f64) -> Self {
        PotentialSpec {
            v: self.v.iter().map(|v| v + alpha).collect(),
            ..self.clone()
        }
    }

    pub fn check(&self, g: &Graph) -> Result<()> {
        g.check_len(self.v.len())?;
        if let Interaction::Dense(m) = &self.w {
            g.check_len(m.nrows())?;
        }
        Ok(())
    }

    /// Lower bound for `V(rho) + W(rho)` over the simplex.
    pub fn potential_floor(&self) -> f64 {
        let vmin = self.v.iter().cloned().fold(f64::INFINITY, f64::min);
        vmin + 0.5 * self.w.min_eigenvalue().min(0.0)
    }
}

pub fn potential_energy(spec: &PotentialSpec, rho: &[f64]) -> Result<f64> {
    if spec.v.len() != rho.len() {
        return Err(Error::LengthMismatch {
            expected: spec.v.len(),
            got: rho.len(),
        });
    }
    Ok(spec.v.iter().zip(rho).map(|(v, r)| v * r).sum())
}

pub fn interaction_energy(spec: &PotentialSpec, rho: &[f64]) -> Result<f64> {
    if spec.v.len() != rho.len() {
        return Err(Error::LengthMismatch {
            expected: spec.v.len(),
            got: rho.len(),
        });
    }
    let w_rho = spec.w.apply(rho);
    Ok(0.5 * rho.iter().zip(&w_rho).map(|(r, wr)| r * wr).sum::<f64>())
}

/// Kinetic part `1/2 (grad S, grad S)_rho`.
pub fn kinetic_energy(g: &Graph, rho: &[f64], s: &[f64]) -> Result<f64> {
    let v = grad(g, s)?;
    Ok(0.5 * inner_product(g, rho, &v, &v)?)
}

/// Total energy `1/2 (grad S, grad S)_rho + h^2/8 I(rho) + V(rho) + W(rho)`.
pub fn hamiltonian(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<f64> {
    spec.check(g)?;
    Ok(kinetic_energy(g, rho, s)?
        + spec.h * spec.h / 8.0 * fisher_information(g, rho)?
        + potential_energy(spec, rho)?
        + interaction_energy(spec, rho)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveEnergy {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    /// `h^2 kinetic + potential + interaction`
    pub total: f64,
}

/// Energy decomposition of a wave function.
///
/// The log-differences are taken in Madelung form: real part
/// `(log rho_j - log rho_l) / 2`, imaginary part the principal phase
/// difference `arg(psi_j conj(psi_l))`.
pub fn wave_energy_components(
    g: &Graph,
    spec: &PotentialSpec,
    psi: &[Complex64],
) -> Result<WaveEnergy> {
    g.check_len(psi.len())?;
    spec.check(g)?;
    if let Some(node) = psi.iter().position(|p| !(p.norm() > 0.0)) {
        return Err(Error::ZeroModulus(node));
    }
    let rho: Vec<f64> = psi.iter().map(|p| p.norm_sqr()).collect();
    check_interior(&rho)?;
    let kinetic = g
        .edges()
        .iter()
        .map(|e| {
            let re = 0.5 * (rho[e.a].ln() - rho[e.b].ln());
            let im = (psi[e.a] * psi[e.b].conj()).arg();
            // both orientations, times the 1/4 prefactor
            0.5 * e.weight * (re * re + im * im) * edge_density(&rho, e.a, e.b)
        })
        .sum::<f64>();
    let potential = potential_energy(spec, &rho)?;
    let interaction = interaction_energy(spec, &rho)?;
    Ok(WaveEnergy {
        kinetic,
        potential,
        interaction,
        total: spec.h * spec.h * kinetic + potential + interaction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_node() -> Graph {
        Graph::new(2, [(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn edge_density_is_mean() {
        assert_eq!(edge_density(&[0.5, 0.5], 0, 1), 0.5);
        assert_eq!(edge_density(&[0.75, 0.25], 0, 1), 0.5);
        assert_relative_eq!(edge_density(&[0.9, 0.1], 0, 1), 0.5);
    }

    #[test]
    fn fisher_two_node_values() {
        let g = two_node();
        assert_eq!(fisher_information(&g, &[0.5, 0.5]).unwrap(), 0.0);
        let expected = 3f64.ln().powi(2) / 2.0;
        assert_relative_eq!(
            fisher_information(&g, &[0.75, 0.25]).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 0.60347, epsilon = 1e-5);
    }

    #[test]
    fn fisher_rejects_boundary() {
        let g = two_node();
        assert!(matches!(
            fisher_information(&g, &[1.0, 0.0]),
            Err(Error::NonInteriorDensity { node: 1, .. })
        ));
        assert!(fisher_gradient(&g, &[f64::NAN, 0.5]).is_err());
        assert!(fisher_hessian(&g, &[0.5, -0.5]).is_err());
    }

    #[test]
    fn fisher_gradient_vanishes_at_uniform() {
        let g = Graph::cycle(6).unwrap();
        let grad = fisher_gradient(&g, &[1.0 / 6.0; 6]).unwrap();
        assert!(grad.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn fisher_hessian_two_node_uniform() {
        let h = fisher_hessian(&two_node(), &[0.5, 0.5]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[4.0, -4.0, -4.0, 4.0]));
    }

    #[test]
    fn potentials() {
        let spec = PotentialSpec::new(vec![2.5; 3], Interaction::Zero, 1.0).unwrap();
        assert_relative_eq!(potential_energy(&spec, &[0.2, 0.3, 0.5]).unwrap(), 2.5);
        assert_eq!(interaction_energy(&spec, &[0.2, 0.3, 0.5]).unwrap(), 0.0);
        let spec = PotentialSpec::gpe(4, 3.0, 1.0);
        assert_relative_eq!(interaction_energy(&spec, &[0.25; 4]).unwrap(), 3.0 / 8.0);
        let dense = PotentialSpec::new(
            vec![0.0; 4],
            Interaction::Dense(DMatrix::identity(4, 4) * 3.0),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(interaction_energy(&dense, &[0.25; 4]).unwrap(), 3.0 / 8.0);
        assert!(potential_energy(&spec, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            PotentialSpec::new(vec![0.0], Interaction::Zero, 0.0),
            Err(Error::NonPositivePlanck(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            PotentialSpec::new(vec![0.0; 2], Interaction::Dense(asym), 1.0),
            Err(Error::AsymmetricInteraction)
        ));
    }

    #[test]
    fn hamiltonian_examples() {
        let g = two_node();
        let spec = PotentialSpec::free(2, 1.0);
        assert_relative_eq!(
            hamiltonian(&g, &spec, &[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            0.25
        );
        assert_eq!(hamiltonian(&g, &spec, &[0.5, 0.5], &[0.7, 0.7]).unwrap(), 0.0);
        let a = hamiltonian(&g, &spec, &[0.3, 0.7], &[1.0, -0.4]).unwrap();
        let b = hamiltonian(&g, &spec, &[0.3, 0.7], &[6.0, 4.6]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn wave_energy_uniform_is_zero() {
        let g = Graph::cycle(4).unwrap();
        let psi = vec![Complex64::new(0.5, 0.0); 4];
        let e = wave_energy_components(&g, &PotentialSpec::free(4, 1.0), &psi).unwrap();
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.total, 0.0);
        let e = wave_energy_components(&g, &PotentialSpec::gpe(4, 2.0, 1.0), &psi).unwrap();
        assert_relative_eq!(e.interaction, 2.0 / 8.0);
        let mut bad = psi.clone();
        bad[2] = Complex64::new(0.0, 0.0);
        assert!(matches!(
            wave_energy_components(&g, &PotentialSpec::free(4, 1.0), &bad),
            Err(Error::ZeroModulus(2))
        ));
    }

    #[test]
    fn density_validation() {
        assert!(Density::new(vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            Density::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(Density::new(vec![1.0, 0.0]).is_err());
        let d = Density::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(d.as_slice(), &[0.25, 0.75]);
    }
}
