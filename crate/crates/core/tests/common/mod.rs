#![allow(dead_code)]

use graph_nls::{Density, Graph, Interaction, PotentialSpec, SystemState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive vector normalized to unit mass, entries drawn from `[0.5, 1.5]` before scaling.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    Density::normalized(raw).unwrap().into_inner()
}

pub fn random_phase(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    let rho = random_density(rng, n);
    let s = random_phase(rng, n);
    SystemState::new(Density::new(rho).unwrap(), s, 0.0).unwrap()
}

/// Symmetric positive semidefinite matrix `B^T B / n`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    b.transpose() * b / n as f64
}

/// Random external potential, PSD dense interaction, `h = 1`.
pub fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> PotentialSpec {
    let v = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    PotentialSpec::new(v, Interaction::Dense(random_psd(rng, n)), 1.0).unwrap()
}

/// Connected graph on `n` nodes: a random spanning tree plus extra edges, weights in `[0.5, 2]`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for j in 1..n {
        let l = rng.random_range(0..j);
        edges.push((l, j, rng.random_range(0.5..2.0)));
        present.insert((l, j));
    }
    for _ in 0..n {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            edges.push((key.0, key.1, rng.random_range(0.5..2.0)));
        }
    }
    Graph::new(n, edges).unwrap()
}

/// The three graphs of the conservation suite.
pub fn suite_graphs() -> Vec<(&'static str, Graph)> {
    vec![
        ("two-node", Graph::path(2).unwrap()),
        ("4-cycle", Graph::cycle(4).unwrap()),
        ("path-20", Graph::path(20).unwrap()),
    ]
}

/// Uniformly random unit vector orthogonal to the all-ones vector.
pub fn tangent_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.iter_mut().for_each(|x| *x /= norm);
    d
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
