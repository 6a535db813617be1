//! Seeded property suite: conservation, reversibility, gauge, wave-form
//! equivalence, Hodge decomposition, derivative checks.

use graph_nls::dynamics::{rhs, Trajectory};
use graph_nls::energy::{fisher_gradient, fisher_hessian, fisher_information};
use graph_nls::graph::{divergence, EdgeField};
use graph_nls::io::write_json;
use graph_nls::transport::hodge_decompose;
use graph_nls::wave::cnls_residual;
use graph_nls::{hamiltonian, simulate, Density, Graph, IntegratorConfig, Interaction, Method, PotentialSpec, SystemState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::Context;
use crate::config::{GraphSource, VerifySection};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: String,
    pub tolerance: f64,
    pub observed: f64,
    pub pass: bool,
}

impl Property {
    fn new(name: impl Into<String>, tolerance: f64, observed: f64) -> Self {
        Property {
            name: name.into(),
            tolerance,
            pass: observed <= tolerance,
            observed,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    seed: u64,
    properties: &'a [Property],
    all_pass: bool,
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    Density::normalized(raw).expect("positive entries").into_inner()
}

fn random_phase(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> PotentialSpec {
    let v = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let w = b.transpose() * b / n as f64;
    PotentialSpec::new(v, Interaction::Dense(w), 1.0).expect("valid potentials")
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    for j in 1..n {
        let l = rng.random_range(0..j);
        edges.push((l, j, rng.random_range(0.5..2.0)));
        present.insert((l, j));
    }
    for _ in 0..n {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            edges.push((key.0, key.1, rng.random_range(0.5..2.0)));
        }
    }
    Graph::new(n, edges).expect("spanning tree keeps the graph connected")
}

fn tangent(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.iter_mut().for_each(|x| *x /= norm);
    d
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst cases over all states on one graph.
#[derive(Default, Clone, Copy)]
struct DynamicsWorst {
    mass: f64,
    energy: f64,
    normalization: f64,
    boundary: f64,
    wave: f64,
    reversal: f64,
    gauge_rho: f64,
    gauge_phase: f64,
}

fn fold_max(a: DynamicsWorst, b: DynamicsWorst) -> DynamicsWorst {
    DynamicsWorst {
        mass: a.mass.max(b.mass),
        energy: a.energy.max(b.energy),
        normalization: a.normalization.max(b.normalization),
        boundary: a.boundary.max(b.boundary),
        wave: a.wave.max(b.wave),
        reversal: a.reversal.max(b.reversal),
        gauge_rho: a.gauge_rho.max(b.gauge_rho),
        gauge_phase: a.gauge_phase.max(b.gauge_phase),
    }
}

const FAILED_RUN: DynamicsWorst = DynamicsWorst {
    mass: f64::INFINITY,
    energy: f64::INFINITY,
    normalization: f64::INFINITY,
    boundary: f64::INFINITY,
    wave: f64::INFINITY,
    reversal: f64::INFINITY,
    gauge_rho: f64::INFINITY,
    gauge_phase: f64::INFINITY,
};

fn run(g: &Graph, spec: &PotentialSpec, initial: &SystemState, cfg: &IntegratorConfig) -> Option<Trajectory> {
    match simulate(g, spec, initial, cfg) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("verify: {e}");
            None
        }
    }
}

fn dynamics_on(g: &Graph, section: &VerifySection, seed: u64) -> DynamicsWorst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = IntegratorConfig::new(Method::ImplicitMidpoint, section.dt, section.horizon);
    cfg.output_every = 1;
    let mut worst = DynamicsWorst {
        boundary: f64::NEG_INFINITY,
        ..Default::default()
    };
    for _ in 0..section.states_per_graph {
        let n = g.n();
        let spec = random_spec(&mut rng, n);
        let rho = random_density(&mut rng, n);
        let s = random_phase(&mut rng, n);
        let initial = SystemState::new(Density::new(rho).expect("normalized"), s, 0.0).expect("valid state");
        worst = fold_max(worst, dynamics_case(g, &spec, &initial, &cfg, section.gauge_shift));
    }
    worst
}

fn dynamics_case(
    g: &Graph,
    spec: &PotentialSpec,
    initial: &SystemState,
    cfg: &IntegratorConfig,
    alpha: f64,
) -> DynamicsWorst {
    let Some(forward) = run(g, spec, initial, cfg) else {
        return FAILED_RUN;
    };
    let mut w = DynamicsWorst {
        mass: forward.max_mass_error(),
        energy: forward.max_energy_drift(),
        normalization: forward.max_norm_resid(),
        ..Default::default()
    };
    let h0 = forward.snapshots[0].diagnostics.energy;
    let ceiling = h0 - spec.potential_floor();
    let c = spec.h * spec.h / 8.0;
    w.boundary = f64::NEG_INFINITY;
    for snap in &forward.snapshots {
        let st = &snap.state;
        let fisher = fisher_information(g, &st.rho).unwrap_or(f64::INFINITY);
        w.boundary = w.boundary.max(c * fisher - ceiling);
        w.wave = w.wave.max(cnls_residual(g, spec, &st.rho, &st.s).unwrap_or(f64::INFINITY));
    }

    let end = forward.last().expect("at least the initial snapshot");
    let flipped = SystemState {
        rho: end.rho.clone(),
        s: end.s.iter().map(|x| -x).collect(),
        t: 0.0,
    };
    w.reversal = match run(g, spec, &flipped, cfg) {
        Some(back) => {
            let fin = back.last().expect("non-empty");
            let s_back: Vec<f64> = fin.s.iter().map(|x| -x).collect();
            sup_diff(&fin.rho, &initial.rho).max(sup_diff(&s_back, &initial.s))
        }
        None => f64::INFINITY,
    };

    match run(g, &spec.with_shift(alpha), initial, cfg) {
        Some(shifted) => {
            for (a, b) in forward.snapshots.iter().zip(&shifted.snapshots) {
                w.gauge_rho = w.gauge_rho.max(sup_diff(&a.state.rho, &b.state.rho));
                for (sa, sb) in a.state.s.iter().zip(&b.state.s) {
                    w.gauge_phase = w.gauge_phase.max((sb - sa + alpha * a.state.t).abs());
                }
            }
        }
        None => {
            w.gauge_rho = f64::INFINITY;
            w.gauge_phase = f64::INFINITY;
        }
    }
    w
}

/// Hodge, derivative and Euler checks on random graphs.
fn static_checks(section: &VerifySection, seed: u64) -> Vec<Property> {
    let tol = &section.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hodge = 0.0f64;
    for _ in 0..section.hodge_cases {
        let n = rng.random_range(2..15);
        let g = random_graph(&mut rng, n);
        let rho = random_density(&mut rng, n);
        let v = EdgeField(random_phase(&mut rng, g.num_edges()));
        hodge = hodge.max(match hodge_decompose(&g, &rho, &v).and_then(|p| divergence(&g, &rho, &p.remainder)) {
            Ok(div) => div.iter().fold(0.0, |m, x| m.max(x.abs())),
            Err(_) => f64::INFINITY,
        });
    }

    let eps = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let step = |x: &[f64], d: &[f64], t: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + t * b).collect() };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let (mut grad_err, mut hess_err, mut rhs_err, mut euler) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..12);
        let g = random_graph(&mut rng, n);
        let rho = random_density(&mut rng, n);
        let d = tangent(&mut rng, n);
        let e = tangent(&mut rng, n);
        let fi = |r: &[f64]| fisher_information(&g, r).expect("interior");
        let fg = |r: &[f64]| fisher_gradient(&g, r).expect("interior");
        let grad = fg(&rho);
        euler = euler.max((dot(&grad, &rho) - fi(&rho)).abs());
        let fd = (fi(&step(&rho, &d, eps)) - fi(&step(&rho, &d, -eps))) / (2.0 * eps);
        grad_err = grad_err.max(rel(dot(&grad, &d), fd));
        let hess = fisher_hessian(&g, &rho).expect("interior");
        let hd: Vec<f64> = (0..n).map(|j| (0..n).map(|k| hess[(j, k)] * d[k]).sum()).collect();
        let fd_h = (dot(&fg(&step(&rho, &d, eps)), &e) - dot(&fg(&step(&rho, &d, -eps)), &e)) / (2.0 * eps);
        hess_err = hess_err.max(rel(dot(&hd, &e), fd_h));

        let spec = random_spec(&mut rng, n);
        let s = random_phase(&mut rng, n);
        let ham = |r: &[f64], s: &[f64]| hamiltonian(&g, &spec, r, s).expect("interior");
        let (drho, ds) = rhs(&g, &spec, &rho, &s).expect("interior");
        let dh_ds = (ham(&rho, &step(&s, &e, eps)) - ham(&rho, &step(&s, &e, -eps))) / (2.0 * eps);
        let dh_drho = (ham(&step(&rho, &d, eps), &s) - ham(&step(&rho, &d, -eps), &s)) / (2.0 * eps);
        let mixed = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        rhs_err = rhs_err.max(mixed(dot(&drho, &e), dh_ds)).max(mixed(-dot(&ds, &d), dh_drho));
    }
    vec![
        Property::new("hodge remainder divergence-free", tol.hodge, hodge),
        Property::new("fisher gradient vs finite differences", tol.gradient, grad_err),
        Property::new("fisher hessian vs finite differences", tol.hessian, hess_err),
        Property::new("flow vs hamiltonian finite differences", tol.gradient, rhs_err),
        Property::new("euler identity of fisher information", tol.euler, euler),
    ]
}

fn default_graphs() -> Vec<GraphSource> {
    vec![
        GraphSource::Path { n: 2 },
        GraphSource::Cycle { n: 4 },
        GraphSource::Path { n: 20 },
    ]
}

pub fn run_suite(section: &VerifySection, graphs: &[Graph], seed: u64) -> Vec<Property> {
    let tol = &section.tolerances;
    let (per_graph, static_props) = rayon::join(
        || {
            graphs
                .par_iter()
                .enumerate()
                .map(|(i, g)| dynamics_on(g, section, seed.wrapping_add(1 + i as u64)))
                .collect::<Vec<_>>()
        },
        || static_checks(section, seed),
    );
    let mut props = Vec::new();
    for (g, w) in graphs.iter().zip(&per_graph) {
        let tag = format!("n={} edges={}", g.n(), g.num_edges());
        props.extend([
            Property::new(format!("[{tag}] mass conservation"), tol.mass, w.mass),
            Property::new(format!("[{tag}] relative energy drift"), tol.energy_drift, w.energy),
            Property::new(format!("[{tag}] time reversal"), tol.reversal, w.reversal),
            Property::new(format!("[{tag}] gauge: density unchanged"), tol.gauge, w.gauge_rho),
            Property::new(format!("[{tag}] gauge: phase shift -alpha t"), tol.gauge, w.gauge_phase),
            Property::new(format!("[{tag}] phase-moment identity"), tol.normalization, w.normalization),
            Property::new(format!("[{tag}] boundary repulsion margin"), 0.0, w.boundary),
            Property::new(format!("[{tag}] wave-form residual"), tol.wave_equivalence, w.wave),
        ]);
    }
    props.extend(static_props);
    props
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let section = &ctx.cfg.verify;
    let sources = section.graphs.clone().unwrap_or_else(default_graphs);
    let graphs = sources
        .iter()
        .map(|s| s.build(&ctx.base))
        .collect::<Result<Vec<_>, _>>()?;
    if section.states_per_graph == 0 {
        return Err(CliError::Config("verify.states_per_graph must be positive".into()));
    }
    let props = run_suite(section, &graphs, ctx.seed);
    let failed = props.iter().filter(|p| !p.pass).count();
    for p in &props {
        println!(
            "{} {:<52} observed {:>10.3e}  tolerance {:.1e}",
            if p.pass { "PASS" } else { "FAIL" },
            p.name,
            p.observed,
            p.tolerance
        );
    }
    write_json(
        &ctx.output("verify_report.json")?,
        &Report {
            seed: ctx.seed,
            properties: &props,
            all_pass: failed == 0,
        },
    )?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}
