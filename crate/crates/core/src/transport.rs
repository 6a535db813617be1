//! Optimal-transport geometry on the density simplex.
//!
//! `L(rho) = D^T Theta(rho) D` is the density-weighted graph Laplacian; its
//! pseudo-inverse is the metric tensor of the graph Wasserstein geometry.

use nalgebra::{DMatrix, DVector};

use crate::energy::{
    check_interior, edge_density, fisher_information, interaction_energy, potential_energy,
    PotentialSpec,
};
use crate::error::{Error, Result};
use crate::graph::{divergence, grad, inner_product, EdgeField, Graph};

/// Relative threshold below which eigenvalues count as part of the kernel.
const NULL_RELATIVE: f64 = 1e-12;
/// Absolute floor on the second eigenvalue before the operator is declared singular.
const SINGULAR_FLOOR: f64 = 1e-13;
/// Tolerance on the sum of a right-hand side that must be mean-zero.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-10;

/// `L(rho)` with its cached spectrum (eigenvalues ascending).
#[derive(Debug, Clone)]
pub struct WeightedLaplacian {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl WeightedLaplacian {
    pub fn new(g: &Graph, rho: &[f64]) -> Result<Self> {
        let matrix = weighted_laplacian_matrix(g, rho)?;
        let eig = matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..g.n()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = DVector::from_iterator(g.n(), order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(g.n(), g.n(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(WeightedLaplacian {
            matrix,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Smallest nonzero eigenvalue (the kernel is one-dimensional for connected graphs).
    pub fn lambda_sec(&self) -> f64 {
        if self.eigenvalues.len() < 2 {
            return f64::INFINITY;
        }
        self.eigenvalues[1]
    }

    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(s))
            .iter()
            .copied()
            .collect()
    }

    /// Minimum-norm solution of `L(rho) S = b` for mean-zero `b`; the result is mean-zero.
    pub fn pseudo_inverse_apply(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.eigenvalues.len();
        if b.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let sum: f64 = b.iter().sum();
        let scale = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if sum.abs() > MEAN_ZERO_TOLERANCE * scale {
            return Err(Error::NonZeroMean(sum));
        }
        if n < 2 {
            return Ok(vec![0.0; n]);
        }
        if self.lambda_sec() < SINGULAR_FLOOR {
            return Err(Error::NearSingular(self.lambda_sec()));
        }
        let cutoff = NULL_RELATIVE * self.lambda_max();
        let b = DVector::from_column_slice(b);
        let mut s = DVector::zeros(n);
        for k in 0..n {
            let lambda = self.eigenvalues[k];
            if lambda <= cutoff {
                continue;
            }
            let u = self.eigenvectors.column(k);
            s += u * (u.dot(&b) / lambda);
        }
        let mean = s.mean();
        Ok(s.iter().map(|x| x - mean).collect())
    }
}

/// Dense `L(rho)`: `(L S)_j = sum_l w_jl (S_j - S_l) g_jl(rho)`.
pub fn weighted_laplacian_matrix(g: &Graph, rho: &[f64]) -> Result<DMatrix<f64>> {
    g.check_len(rho.len())?;
    check_interior(rho)?;
    let mut lap = DMatrix::zeros(g.n(), g.n());
    for e in g.edges() {
        let c = e.weight * edge_density(rho, e.a, e.b);
        lap[(e.a, e.a)] += c;
        lap[(e.b, e.b)] += c;
        lap[(e.a, e.b)] -= c;
        lap[(e.b, e.a)] -= c;
    }
    Ok(lap)
}

/// Matrix-free `L(rho) S`.
pub fn weighted_laplacian_apply(g: &Graph, rho: &[f64], s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n()];
    for e in g.edges() {
        let flux = e.weight * (s[e.a] - s[e.b]) * edge_density(rho, e.a, e.b);
        out[e.a] += flux;
        out[e.b] -= flux;
    }
    out
}

/// Splitting `v = grad S + u` with `div(rho u) = 0`.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    /// Mean-zero potential.
    pub potential: Vec<f64>,
    /// Divergence-free remainder.
    pub remainder: EdgeField,
}

pub fn hodge_decompose(g: &Graph, rho: &[f64], v: &EdgeField) -> Result<HodgeDecomposition> {
    let lap = WeightedLaplacian::new(g, rho)?;
    let div = divergence(g, rho, v)?;
    let potential = lap.pseudo_inverse_apply(&div)?;
    let remainder = v - &grad(g, &potential)?;
    Ok(HodgeDecomposition {
        potential,
        remainder,
    })
}

/// Squared metric length `rho_dot^T L(rho)^+ rho_dot` of a tangent vector.
pub fn metric_tangent_norm(g: &Graph, rho: &[f64], rho_dot: &[f64]) -> Result<f64> {
    g.check_len(rho_dot.len())?;
    let lap = WeightedLaplacian::new(g, rho)?;
    let s = lap.pseudo_inverse_apply(rho_dot)?;
    Ok(rho_dot.iter().zip(&s).map(|(a, b)| a * b).sum())
}

/// Time samples `(t, rho, S)` of a path on the density simplex.
#[derive(Debug, Clone)]
pub struct PathSample {
    samples: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl PathSample {
    pub fn new(samples: Vec<(f64, Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::PathTooShort(samples.len()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::NonIncreasingTimes);
        }
        for (_, rho, _) in &samples {
            check_interior(rho)?;
        }
        Ok(PathSample { samples })
    }

    pub fn samples(&self) -> &[(f64, Vec<f64>, Vec<f64>)] {
        &self.samples
    }
}

/// Lagrangian `1/2 (v, v)_rho - h^2/8 I - V - W` at one sample, with `v = grad S`.
pub fn nelson_lagrangian(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<f64> {
    spec.check(g)?;
    let v = grad(g, s)?;
    Ok(0.5 * inner_product(g, rho, &v, &v)?
        - spec.h * spec.h / 8.0 * fisher_information(g, rho)?
        - potential_energy(spec, rho)?
        - interaction_energy(spec, rho)?)
}

/// Action of a sampled path, trapezoidal rule over the sample times.
pub fn nelson_action(g: &Graph, spec: &PotentialSpec, path: &PathSample) -> Result<f64> {
    let values = path
        .samples
        .iter()
        .map(|(_, rho, s)| nelson_lagrangian(g, spec, rho, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(path
        .samples
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1].0 - t[0].0) * (f[0] + f[1]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_node() -> Graph {
        Graph::new(2, [(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn two_node_laplacian() {
        let l = weighted_laplacian_matrix(&two_node(), &[0.5, 0.5]).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn uniform_density_scales_plain_laplacian() {
        let g = Graph::new(4, [(0, 1, 2.0), (1, 2, 1.0), (2, 3, 0.5), (0, 2, 1.5)]).unwrap();
        let l = weighted_laplacian_matrix(&g, &[0.25; 4]).unwrap();
        assert!((l - g.laplacian() / 4.0).amax() < 1e-15);
    }

    #[test]
    fn spectrum_is_sorted_with_simple_kernel() {
        let g = Graph::cycle(5).unwrap();
        let lap = WeightedLaplacian::new(&g, &[0.1, 0.3, 0.2, 0.15, 0.25]).unwrap();
        let ev = lap.eigenvalues();
        assert!(ev[0].abs() < 1e-14);
        assert!(ev[1] > 1e-3);
        assert!(ev.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let k = lap.eigenvectors().column(0);
        let c = k[0];
        assert!(k.iter().all(|x| (x - c).abs() < 1e-12));
    }

    #[test]
    fn pseudo_inverse_examples() {
        let lap = WeightedLaplacian::new(&two_node(), &[0.5, 0.5]).unwrap();
        assert_eq!(lap.pseudo_inverse_apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let s = lap.pseudo_inverse_apply(&[0.5, -0.5]).unwrap();
        assert_relative_eq!(s[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(s[1], -0.5, max_relative = 1e-14);
        assert!(matches!(
            lap.pseudo_inverse_apply(&[1.0, 0.0]),
            Err(Error::NonZeroMean(_))
        ));
    }

    #[test]
    fn metric_norm_examples() {
        let g = two_node();
        assert_eq!(metric_tangent_norm(&g, &[0.5, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(
            metric_tangent_norm(&g, &[0.5, 0.5], &[1.0, -1.0]).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert!(metric_tangent_norm(&g, &[0.5, 0.5], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn hodge_of_gradient_is_gradient() {
        let g = Graph::complete(4).unwrap();
        let rho = [0.1, 0.2, 0.3, 0.4];
        let s0 = [1.0, -2.0, 0.5, 3.0];
        let h = hodge_decompose(&g, &rho, &grad(&g, &s0).unwrap()).unwrap();
        let mean = s0.iter().sum::<f64>() / 4.0;
        for j in 0..4 {
            assert_relative_eq!(h.potential[j], s0[j] - mean, epsilon = 1e-12);
        }
        assert!(h.remainder.values().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn hodge_rotational_field_on_triangle() {
        let g = Graph::cycle(3).unwrap();
        // edges (0,1), (1,2), (0,2): circulate 0 -> 1 -> 2 -> 0
        let mut v = EdgeField::zeros(&g);
        for (idx, e) in g.edges().iter().enumerate() {
            v.0[idx] = if (e.a, e.b) == (0, 2) { -1.0 } else { 1.0 };
        }
        let h = hodge_decompose(&g, &[1.0 / 3.0; 3], &v).unwrap();
        assert!(h.potential.iter().all(|x| x.abs() < 1e-14));
        assert_eq!(h.remainder, v);
    }

    #[test]
    fn constant_path_action() {
        let g = Graph::cycle(4).unwrap();
        let spec = PotentialSpec::free(4, 0.7);
        let rho = vec![0.1, 0.2, 0.3, 0.4];
        let s = vec![0.3; 4];
        let path = PathSample::new(vec![
            (0.0, rho.clone(), s.clone()),
            (0.5, rho.clone(), s.clone()),
            (1.0, rho.clone(), s.clone()),
        ])
        .unwrap();
        let expected = -0.49 / 8.0 * fisher_information(&g, &rho).unwrap();
        assert_relative_eq!(nelson_action(&g, &spec, &path).unwrap(), expected, max_relative = 1e-14);

        let uniform = vec![0.25; 4];
        let path = PathSample::new(vec![(0.0, uniform.clone(), s.clone()), (1.0, uniform, s.clone())]).unwrap();
        assert_eq!(nelson_action(&g, &spec, &path).unwrap(), 0.0);
    }

    #[test]
    fn path_validation() {
        let r = vec![0.5, 0.5];
        assert!(matches!(
            PathSample::new(vec![(0.0, r.clone(), r.clone())]),
            Err(Error::PathTooShort(1))
        ));
        assert!(matches!(
            PathSample::new(vec![(0.0, r.clone(), r.clone()), (0.0, r.clone(), r.clone())]),
            Err(Error::NonIncreasingTimes)
        ));
    }
}
