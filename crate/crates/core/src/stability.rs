//! Linear stability of stationary states.
//!
//! At a stationary state with constant phase the linearized flow is
//!
//! ```text
//! H2 = [[ 0,                      L(rho_g) ],
//!       [ -(W + h^2/8 Hess I),    0        ]]
//! ```
//!
//! Its eigenvalues solve `mu^2 = -kappa` for the eigenvalues `kappa` of
//! `L(rho_g) (W + h^2/8 Hess I)`. Because `L(rho_g)` is positive semidefinite
//! these are the eigenvalues of the symmetric matrix `L^{1/2} B L^{1/2}`
//! restricted to the range of `L`; each kernel direction of `L` contributes a
//! double zero. Working with the symmetric reduction keeps the double zero
//! exact where a general eigensolver would smear the Jordan block by
//! `sqrt(eps)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{fisher_hessian, PotentialSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::transport::weighted_laplacian_matrix;

/// Eigenvalues of `L` below this fraction of the largest count as kernel.
const KERNEL_RELATIVE: f64 = 1e-12;
/// Tolerance for flagging `alpha = -(n/4) lambda_k h^2`.
pub const BIFURCATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    /// Top-right block, `L(rho_g)`.
    pub transport: DMatrix<f64>,
    /// Negated bottom-left block, `W + h^2/8 Hess I(rho_g)`.
    pub curvature: DMatrix<f64>,
}

impl HamiltonianMatrix {
    pub fn n(&self) -> usize {
        self.transport.nrows()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, n), (n, n)).copy_from(&self.transport);
        m.view_mut((n, 0), (n, n)).copy_from(&(-&self.curvature));
        m
    }
}

/// Linearization `J Hess H` at `(rho_g, constant S)`.
pub fn hamiltonian_matrix(g: &Graph, spec: &PotentialSpec, rho_g: &[f64]) -> Result<HamiltonianMatrix> {
    spec.check(g)?;
    let transport = weighted_laplacian_matrix(g, rho_g)?;
    let curvature = fisher_hessian(g, rho_g)? * (spec.h * spec.h / 8.0) + spec.w.matrix(g.n());
    Ok(HamiltonianMatrix {
        transport,
        curvature,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    SpectrallyStable,
    Unstable,
    Marginal,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::SpectrallyStable => "spectrally_stable",
            Classification::Unstable => "unstable",
            Classification::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// All `|Re mu|` at most this: spectrally stable.
    pub stable: f64,
    /// Any `Re mu` above this: unstable.
    pub unstable: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            stable: 1e-10,
            unstable: 1e-8,
        }
    }
}

impl Thresholds {
    pub fn classify(&self, eigenvalues: &[Complex64]) -> Classification {
        if eigenvalues.iter().any(|z| z.re > self.unstable) {
            Classification::Unstable
        } else if eigenvalues.iter().all(|z| z.re.abs() <= self.stable) {
            Classification::SpectrallyStable
        } else {
            Classification::Marginal
        }
    }
}

/// One `+-` eigenvalue pair together with the scalar that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// `kappa` for numeric spectra, `lambda_k` of the plain Laplacian for the closed form.
    pub lambda: f64,
    pub plus: Complex64,
    pub minus: Complex64,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
    pub modes: Vec<Mode>,
    /// 1-based mode indices `k` with `alpha = -(n/4) lambda_k h^2`.
    pub bifurcation_modes: Vec<usize>,
}

/// `+-sqrt(-kappa)`: imaginary pair for `kappa >= 0`, real pair otherwise.
fn pair(kappa: f64) -> (Complex64, Complex64) {
    if kappa >= 0.0 {
        let r = kappa.sqrt();
        (Complex64::new(0.0, r), Complex64::new(0.0, -r))
    } else {
        let r = (-kappa).sqrt();
        (Complex64::new(r, 0.0), Complex64::new(-r, 0.0))
    }
}

fn report(modes: Vec<Mode>, bifurcation_modes: Vec<usize>, thresholds: &Thresholds) -> SpectrumReport {
    let eigenvalues: Vec<Complex64> = modes.iter().flat_map(|m| [m.plus, m.minus]).collect();
    SpectrumReport {
        classification: thresholds.classify(&eigenvalues),
        eigenvalues,
        modes,
        bifurcation_modes,
    }
}

/// Spectrum of `H2` through the symmetric reduction described in the module docs.
pub fn spectrum(h2: &HamiltonianMatrix, thresholds: &Thresholds) -> Result<SpectrumReport> {
    let n = h2.n();
    if h2.curvature.nrows() != n || h2.curvature.ncols() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: h2.curvature.nrows(),
        });
    }
    let eig = h2.transport.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue of the transport block".into()));
    }
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = KERNEL_RELATIVE * lmax.max(f64::MIN_POSITIVE);
    let range: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
    let kernel_dim = n - range.len();

    // columns U_k sqrt(lambda_k) spanning the range of L
    let half = DMatrix::from_fn(n, range.len(), |r, c| {
        let k = range[c];
        eig.eigenvectors[(r, k)] * eig.eigenvalues[k].sqrt()
    });
    let reduced = half.transpose() * &h2.curvature * &half;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let kappas = reduced.symmetric_eigen().eigenvalues;
    if kappas.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue of the reduced problem".into()));
    }

    let mut modes: Vec<Mode> = (0..kernel_dim)
        .map(|_| Mode {
            lambda: 0.0,
            plus: Complex64::new(0.0, 0.0),
            minus: Complex64::new(0.0, 0.0),
        })
        .collect();
    let mut sorted: Vec<f64> = kappas.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    modes.extend(sorted.into_iter().map(|kappa| {
        let (plus, minus) = pair(kappa);
        Mode {
            lambda: kappa,
            plus,
            minus,
        }
    }));
    Ok(report(modes, Vec::new(), thresholds))
}

/// Eigenvalues of the dense `2n x 2n` matrix from a general nonsymmetric solver.
pub fn spectrum_dense(h2: &HamiltonianMatrix) -> Result<Vec<Complex64>> {
    let ev = h2.to_dense().complex_eigenvalues();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("Schur iteration did not converge".into()));
    }
    Ok(ev.iter().copied().collect())
}

/// Closed-form spectrum for `V = 0`, `W = alpha I` at the uniform ground state:
/// `+-i sqrt(lambda_k^2 h^2 / 4 + alpha lambda_k / n)` over the eigenvalues
/// `lambda_k` of the plain graph Laplacian.
pub fn gpe_spectrum_closed_form(g: &Graph, alpha: f64, h: f64, thresholds: &Thresholds) -> SpectrumReport {
    let n = g.n() as f64;
    let mut lambdas: Vec<f64> = g.laplacian().symmetric_eigen().eigenvalues.iter().copied().collect();
    lambdas.sort_by(f64::total_cmp);
    let lmax = lambdas.last().copied().unwrap_or(0.0);
    let mut bifurcation_modes = Vec::new();
    let modes = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            if lambda <= KERNEL_RELATIVE * lmax {
                return Mode {
                    lambda: 0.0,
                    plus: Complex64::new(0.0, 0.0),
                    minus: Complex64::new(0.0, 0.0),
                };
            }
            let threshold = -n / 4.0 * lambda * h * h;
            if (alpha - threshold).abs() <= BIFURCATION_TOL * threshold.abs().max(1.0) {
                bifurcation_modes.push(k + 1);
            }
            let (plus, minus) = pair(lambda * lambda * h * h / 4.0 + alpha * lambda / n);
            Mode { lambda, plus, minus }
        })
        .collect();
    report(modes, bifurcation_modes, thresholds)
}

/// Largest distance under a greedy nearest-neighbour matching of two multisets.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (best, dist) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[best] = true;
        worst = worst.max(dist);
    }
    worst
}
