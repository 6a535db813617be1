//! Weighted graphs and the discrete calculus on them.
//!
//! Edges are stored once, in canonical orientation `a < b`. Edge fields are
//! skew-symmetric, so the value for the reverse orientation is the negated
//! stored value.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;

use crate::energy::{check_interior, edge_density};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl Edge {
    /// Endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }

    /// +1 when `from` is the canonical tail `a`, -1 otherwise.
    pub fn orientation(&self, from: usize) -> f64 {
        if from == self.a {
            1.0
        } else {
            -1.0
        }
    }
}

/// How lattice builders set edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightMode {
    /// `1 / dx^2`, the scaling under which plane waves obey `mu = |k|^2 / 2`.
    #[default]
    Continuum,
    Constant(f64),
}

impl WeightMode {
    fn weight(self, dx: f64) -> f64 {
        match self {
            WeightMode::Continuum => 1.0 / (dx * dx),
            WeightMode::Constant(w) => w,
        }
    }
}

/// Undirected, connected, simple graph with positive symmetric weights.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    // (neighbor, edge index) per node
    adjacency: Vec<Vec<(usize, usize)>>,
    coords: Option<Vec<Vec<f64>>>,
}

impl Graph {
    /// Builds a graph from 0-based weighted edges, validating simplicity,
    /// positivity of weights and connectivity.
    pub fn new<I>(n: usize, weighted_edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for (j, l, weight) in weighted_edges {
            for index in [j, l] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if j == l {
                return Err(Error::SelfLoop(j));
            }
            let (a, b) = if j < l { (j, l) } else { (l, j) };
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonPositiveWeight { a, b, weight });
            }
            if !seen.insert((a, b)) {
                return Err(Error::DuplicateEdge { a, b });
            }
            let idx = edges.len();
            edges.push(Edge { a, b, weight });
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        let graph = Graph {
            n,
            edges,
            adjacency,
            coords: None,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<()> {
        let mut visited = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        while let Some(j) = queue.pop_front() {
            for &(l, _) in &self.adjacency[j] {
                if !visited[l] {
                    visited[l] = true;
                    queue.push_back(l);
                }
            }
        }
        match visited.iter().position(|v| !v) {
            Some(node) => Err(Error::DisconnectedGraph(node)),
            None => Ok(()),
        }
    }

    /// Attaches node coordinates (one point per node, all of equal dimension).
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: coords.len(),
            });
        }
        if let Some(first) = coords.first() {
            let dim = first.len();
            if let Some(bad) = coords.iter().find(|c| c.len() != dim) {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: bad.len(),
                });
            }
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Path graph with `n` equally spaced nodes on `[x_min, x_max]`, endpoints included.
    pub fn path_lattice(n: usize, x_min: f64, x_max: f64, mode: WeightMode) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidRange(format!("path lattice needs n >= 2, got {n}")));
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidRange(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        let w = mode.weight(dx);
        let coords = (0..n)
            .map(|j| {
                if j == n - 1 {
                    vec![x_max]
                } else {
                    vec![x_min + j as f64 * dx]
                }
            })
            .collect();
        Graph::new(n, (0..n - 1).map(|j| (j, j + 1, w)))?.with_coords(coords)
    }

    /// Path with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (0..n.saturating_sub(1)).map(|j| (j, j + 1, 1.0)))
    }

    /// Cycle with unit weights.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TorusTooSmall(n));
        }
        Graph::new(n, (0..n).map(|j| (j, (j + 1) % n, 1.0)))
    }

    /// Complete graph with unit weights.
    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n).flat_map(|j| (j + 1..n).map(move |l| (j, l, 1.0)));
        Graph::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors of `j` as `(neighbor, edge)` pairs.
    pub fn neighbors(&self, j: usize) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.adjacency[j].iter().map(move |&(l, e)| (l, &self.edges[e]))
    }

    pub fn degree(&self, j: usize) -> usize {
        self.adjacency[j].len()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Plain weighted graph Laplacian: weighted degree on the diagonal, `-w` off it.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            lap[(e.a, e.a)] += e.weight;
            lap[(e.b, e.b)] += e.weight;
            lap[(e.a, e.b)] -= e.weight;
            lap[(e.b, e.a)] -= e.weight;
        }
        lap
    }

    /// Relabels nodes so that old node `j` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        self.check_len(perm.len())?;
        let graph = Graph::new(
            self.n,
            self.edges.iter().map(|e| (perm[e.a], perm[e.b], e.weight)),
        )?;
        match &self.coords {
            Some(c) => {
                let mut coords = vec![Vec::new(); self.n];
                for (j, x) in c.iter().enumerate() {
                    coords[perm[j]] = x.clone();
                }
                graph.with_coords(coords)
            }
            None => Ok(graph),
        }
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }
}

/// Periodic lattice together with the minimum-image displacement of every edge.
#[derive(Debug, Clone)]
pub struct Torus {
    graph: Graph,
    dims: Vec<usize>,
    delta_x: f64,
    // displacement x_b - x_a for each canonical edge, per dimension
    displacements: Vec<Vec<f64>>,
}

impl Torus {
    pub fn new(dims: &[usize], delta_x: f64, mode: WeightMode) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyGraph);
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 3) {
            return Err(Error::TorusTooSmall(d));
        }
        if !(delta_x > 0.0) {
            return Err(Error::InvalidRange(format!("delta_x must be positive, got {delta_x}")));
        }
        let n: usize = dims.iter().product();
        let w = mode.weight(delta_x);
        let index_of = |multi: &[usize]| {
            multi
                .iter()
                .zip(dims)
                .rev()
                .fold(0, |acc, (&m, &d)| acc * d + m)
        };
        let multi_of = |mut j: usize| {
            dims.iter()
                .map(|&d| {
                    let m = j % d;
                    j /= d;
                    m
                })
                .collect::<Vec<_>>()
        };
        let mut edges = Vec::new();
        let mut disp = Vec::new();
        for j in 0..n {
            let multi = multi_of(j);
            for (axis, &d) in dims.iter().enumerate() {
                let mut next = multi.clone();
                next[axis] = (multi[axis] + 1) % d;
                let l = index_of(&next);
                edges.push((j, l, w));
                let mut step = vec![0.0; dims.len()];
                step[axis] = delta_x;
                disp.push((j, l, step));
            }
        }
        let coords = (0..n)
            .map(|j| multi_of(j).iter().map(|&m| m as f64 * delta_x).collect())
            .collect();
        let graph = Graph::new(n, edges)?.with_coords(coords)?;
        // Graph::new keeps insertion order, so edge i corresponds to disp[i];
        // flip the displacement when the canonical orientation was swapped.
        let displacements = graph
            .edges()
            .iter()
            .zip(disp)
            .map(|(e, (j, _, step))| {
                if e.a == j {
                    step
                } else {
                    step.iter().map(|s| -s).collect()
                }
            })
            .collect();
        Ok(Torus {
            graph,
            dims: dims.to_vec(),
            delta_x,
            displacements,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    /// Minimum-image displacement `x_b - x_a` of canonical edge `edge`.
    pub fn displacement(&self, edge: usize) -> &[f64] {
        &self.displacements[edge]
    }
}

/// Skew-symmetric field on edges, one value per canonical edge (`a -> b`).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField(pub Vec<f64>);

impl EdgeField {
    pub fn zeros(g: &Graph) -> Self {
        EdgeField(vec![0.0; g.num_edges()])
    }

    /// Value on edge `edge` oriented from `from` to its other endpoint.
    pub fn oriented(&self, g: &Graph, edge: usize, from: usize) -> f64 {
        g.edges()[edge].orientation(from) * self.0[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    fn check(&self, g: &Graph) -> Result<()> {
        if self.0.len() != g.num_edges() {
            return Err(Error::LengthMismatch {
                expected: g.num_edges(),
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Sub for &EdgeField {
    type Output = EdgeField;
    fn sub(self, rhs: &EdgeField) -> EdgeField {
        EdgeField(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Potential field `sqrt(w_jl) (S_j - S_l)`.
pub fn grad(g: &Graph, s: &[f64]) -> Result<EdgeField> {
    g.check_len(s.len())?;
    Ok(EdgeField(
        g.edges()
            .iter()
            .map(|e| e.weight.sqrt() * (s[e.a] - s[e.b]))
            .collect(),
    ))
}

/// Divergence of the flux `rho v`: `sum_l sqrt(w_jl) v_jl g_jl(rho)` at node `j`.
///
/// With `v = grad S` this is `L(rho) S` for the positive semidefinite `L(rho)`.
pub fn divergence(g: &Graph, rho: &[f64], v: &EdgeField) -> Result<Vec<f64>> {
    g.check_len(rho.len())?;
    check_interior(rho)?;
    v.check(g)?;
    let mut out = vec![0.0; g.n()];
    for (idx, e) in g.edges().iter().enumerate() {
        let flux = e.weight.sqrt() * v.0[idx] * edge_density(rho, e.a, e.b);
        out[e.a] += flux;
        out[e.b] -= flux;
    }
    Ok(out)
}

/// Weighted inner product `(v, u)_rho`, with each undirected edge counted once
/// (equivalently one half of the sum over both orientations).
pub fn inner_product(g: &Graph, rho: &[f64], v: &EdgeField, u: &EdgeField) -> Result<f64> {
    g.check_len(rho.len())?;
    check_interior(rho)?;
    v.check(g)?;
    u.check(g)?;
    Ok(g.edges()
        .iter()
        .enumerate()
        .map(|(idx, e)| v.0[idx] * u.0[idx] * edge_density(rho, e.a, e.b))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_node(w: f64) -> Graph {
        Graph::new(2, [(0, 1, w)]).unwrap()
    }

    #[test]
    fn builds_smallest_graph() {
        let g = two_node(1.0);
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(matches!(
            Graph::new(3, [(0, 1, 1.0)]),
            Err(Error::DisconnectedGraph(2))
        ));
        assert!(matches!(Graph::new(2, [(0, 0, 1.0)]), Err(Error::SelfLoop(0))));
        assert!(matches!(
            Graph::new(2, [(0, 1, 0.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            Graph::new(2, [(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge { a: 0, b: 1 })
        ));
        assert!(matches!(
            Graph::new(2, [(0, 2, 1.0)]),
            Err(Error::NodeOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn path_lattice_spacing() {
        let g = Graph::path_lattice(20, -5.0, 5.0, WeightMode::Continuum).unwrap();
        let dx = 10.0 / 19.0;
        let coords = g.coords().unwrap();
        assert_eq!(coords[0][0], -5.0);
        assert_eq!(coords[19][0], 5.0);
        for j in 0..20 {
            assert_relative_eq!(coords[j][0], -5.0 + j as f64 * dx, epsilon = 1e-12);
        }
        assert_relative_eq!(g.edges()[0].weight, 1.0 / (dx * dx), max_relative = 1e-14);

        let g = Graph::path_lattice(2, 0.0, 1.0, WeightMode::Continuum).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0].weight, 1.0);
        let g = Graph::path_lattice(3, 0.0, 2.0, WeightMode::Continuum).unwrap();
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
        let g = Graph::path_lattice(3, 0.0, 2.0, WeightMode::Constant(0.5)).unwrap();
        assert!(g.edges().iter().all(|e| e.weight == 0.5));

        assert!(Graph::path_lattice(1, 0.0, 1.0, WeightMode::Continuum).is_err());
        assert!(Graph::path_lattice(4, 1.0, 1.0, WeightMode::Continuum).is_err());
    }

    #[test]
    fn torus_topology() {
        let t = Torus::new(&[8], 1.0, WeightMode::Continuum).unwrap();
        assert_eq!(t.graph().n(), 8);
        assert!((0..8).all(|j| t.graph().degree(j) == 2));

        let t = Torus::new(&[4, 4], 1.0, WeightMode::Continuum).unwrap();
        assert_eq!(t.graph().n(), 16);
        assert!((0..16).all(|j| t.graph().degree(j) == 4));
        for (idx, e) in t.graph().edges().iter().enumerate() {
            let d = t.displacement(idx);
            assert_eq!(d.iter().filter(|x| x.abs() == 1.0).count(), 1);
            let _ = e;
        }

        assert!(matches!(
            Torus::new(&[2], 1.0, WeightMode::Continuum),
            Err(Error::TorusTooSmall(2))
        ));
    }

    #[test]
    fn torus_displacements_are_minimum_image() {
        let t = Torus::new(&[5, 3], 0.5, WeightMode::Continuum).unwrap();
        let coords = t.graph().coords().unwrap();
        for (idx, e) in t.graph().edges().iter().enumerate() {
            let d = t.displacement(idx);
            for axis in 0..2 {
                let period = t.dims()[axis] as f64 * 0.5;
                let raw = coords[e.b][axis] - coords[e.a][axis];
                let wrapped = raw - period * (raw / period).round();
                assert_relative_eq!(wrapped, d[axis], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let v = grad(&two_node(1.0), &[1.0, 0.0]).unwrap();
        assert_eq!(v.0, vec![1.0]);
        let v = grad(&two_node(4.0), &[1.0, 0.0]).unwrap();
        assert_eq!(v.0, vec![2.0]);
        let g = Graph::cycle(5).unwrap();
        let v = grad(&g, &[3.5; 5]).unwrap();
        assert!(v.0.iter().all(|&x| x == 0.0));
        assert!(grad(&g, &[1.0; 4]).is_err());
    }

    #[test]
    fn oriented_values_are_skew() {
        let g = Graph::cycle(4).unwrap();
        let v = grad(&g, &[0.3, -1.0, 2.0, 0.5]).unwrap();
        for (idx, e) in g.edges().iter().enumerate() {
            assert_eq!(v.oriented(&g, idx, e.a), -v.oriented(&g, idx, e.b));
        }
    }

    #[test]
    fn divergence_examples() {
        let g = two_node(1.0);
        let rho = [0.5, 0.5];
        let v = grad(&g, &[1.0, 0.0]).unwrap();
        assert_eq!(divergence(&g, &rho, &v).unwrap(), vec![0.5, -0.5]);
        let zero = EdgeField::zeros(&g);
        assert_eq!(divergence(&g, &[0.9, 0.1], &zero).unwrap(), vec![0.0, 0.0]);
        assert!(divergence(&g, &[1.0, 0.0], &v).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = two_node(1.0);
        let v = grad(&g, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(inner_product(&g, &[0.5, 0.5], &v, &v).unwrap(), 0.5);
        let zero = EdgeField::zeros(&g);
        assert_eq!(inner_product(&g, &[0.5, 0.5], &v, &zero).unwrap(), 0.0);
    }

    #[test]
    fn plain_laplacian_rows_sum_to_zero() {
        let g = Graph::new(4, [(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.0), (3, 0, 3.0)]).unwrap();
        let lap = g.laplacian();
        for j in 0..4 {
            assert!(lap.row(j).sum().abs() < 1e-15);
        }
        assert_eq!(lap[(0, 0)], 5.0);
        assert_eq!(lap[(0, 3)], -3.0);
    }
}
