use std::fs;
use std::path::{Path, PathBuf};

use graph_nls::dynamics::Trajectory;
use graph_nls::ground_state::eigen_residual;
use graph_nls::io::{trajectory_csv, write_atomic, write_json, GroundStateFile, SpectrumFile};
use graph_nls::stability::{gpe_spectrum_closed_form, hamiltonian_matrix, multiset_distance, spectrum};
use graph_nls::wave::{check_commensurate, commensurate_wave_numbers, plane_wave_residual};
use graph_nls::{Density, GroundStateOptions, SystemState, Thresholds, Torus, WeightMode};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PotentialSource, RunConfig};
use crate::error::CliError;

pub struct Context {
    pub cfg: RunConfig,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    pub fn output(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(graph_nls::Error::from)?;
        Ok(self.out.join(name))
    }
}

#[derive(Serialize)]
struct HalvingRecord {
    t: f64,
    dt: f64,
    reason: String,
}

#[derive(Serialize)]
struct SimulationSummary {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    snapshots: usize,
    final_time: f64,
    max_energy_drift: f64,
    max_mass_error: f64,
    min_rho: f64,
    max_norm_resid: f64,
    halvings: Vec<HalvingRecord>,
}

fn summarize(traj: &Trajectory, error: Option<String>) -> SimulationSummary {
    SimulationSummary {
        status: if error.is_none() { "ok" } else { "failed" },
        error,
        snapshots: traj.snapshots.len(),
        final_time: traj.last().map_or(0.0, |s| s.t),
        max_energy_drift: traj.max_energy_drift(),
        max_mass_error: traj.max_mass_error(),
        min_rho: traj.min_rho(),
        max_norm_resid: traj.max_norm_resid(),
        halvings: traj
            .halvings
            .iter()
            .map(|h| HalvingRecord {
                t: h.t,
                dt: h.dt,
                reason: h.reason.clone(),
            })
            .collect(),
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let g = ctx.cfg.graph(&ctx.base)?;
    let spec = ctx.cfg.potentials(&g, &ctx.base)?;
    let (rho, s) = ctx
        .cfg
        .initial
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs an \"initial\" section".into()))?
        .build(&g, spec.h, &ctx.base)?;
    let initial = SystemState::new(rho, s, 0.0)?;
    let icfg = ctx.cfg.integrator.to_config()?;

    let (traj, error) = match graph_nls::simulate(&g, &spec, &initial, &icfg) {
        Ok(traj) => (traj, None),
        Err(fail) => (fail.partial, Some(fail.error)),
    };
    write_atomic(&ctx.output("trajectory.csv")?, trajectory_csv(&traj).as_bytes())?;
    let summary = summarize(&traj, error.as_ref().map(|e| e.to_string()));
    write_json(&ctx.output("summary.json")?, &summary)?;
    println!(
        "simulate: {} snapshots to t = {}, max energy drift {:.3e}, max mass error {:.3e}, min rho {:.3e}, halvings {}",
        summary.snapshots,
        summary.final_time,
        summary.max_energy_drift,
        summary.max_mass_error,
        summary.min_rho,
        summary.halvings.len()
    );
    match error {
        None => Ok(()),
        Some(e) => Err(CliError::Integrator(e.to_string())),
    }
}

fn ground_options(ctx: &Context, n: usize) -> Result<GroundStateOptions, CliError> {
    let section = &ctx.cfg.ground_state;
    let init = match &section.init {
        Some(v) => {
            if v.len() != n {
                return Err(graph_nls::Error::LengthMismatch { expected: n, got: v.len() }.into());
            }
            Some(Density::new(v.clone())?)
        }
        None => None,
    };
    Ok(GroundStateOptions {
        tol: section.tol,
        max_iter: section.max_iter,
        init,
        ..Default::default()
    })
}

pub fn ground_state(ctx: &Context) -> Result<(), CliError> {
    let g = ctx.cfg.graph(&ctx.base)?;
    let spec = ctx.cfg.potentials(&g, &ctx.base)?;
    let opts = ground_options(ctx, g.n())?;
    let sweep = ctx.cfg.ground_state.h_values.clone();
    let hs = sweep.clone().unwrap_or_else(|| vec![spec.h]);
    let specs = hs
        .iter()
        .map(|&h| graph_nls::PotentialSpec::new(spec.v.clone(), spec.w.clone(), h))
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<_> = specs
        .par_iter()
        .map(|spec| graph_nls::solve_ground_state(&g, spec, &opts))
        .collect();

    let mut profiles = Vec::new();
    let mut first_error = None;
    for (i, (res, spec)) in results.into_iter().zip(&specs).enumerate() {
        let h = spec.h;
        match res {
            Ok(res) => {
                let name = match sweep {
                    Some(_) => format!("ground_state_{i}_h{h}.json"),
                    None => "ground_state.json".to_string(),
                };
                write_json(&ctx.output(&name)?, &GroundStateFile::from(&res))?;
                if !res.certified_minimum {
                    log::warn!("h = {h}: interaction is indefinite, result is a critical point only");
                }
                println!(
                    "ground-state h = {h}: nu = {:.12}, energy = {:.12}, kkt residual {:.2e}, eigen residual {:.2e}, {} iterations -> {name}",
                    res.nu,
                    res.energy,
                    res.kkt_residual,
                    eigen_residual(&g, spec, &res)?,
                    res.iterations
                );
                profiles.push((h, res.rho));
            }
            Err(e) => {
                log::error!("h = {h}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    if sweep.is_some() && !profiles.is_empty() {
        write_atomic(&ctx.output("ground_state_profiles.csv")?, profiles_csv(&g, &profiles).as_bytes())?;
    }
    match first_error {
        None => Ok(()),
        Some(e) => Err(CliError::Solver(e.to_string())),
    }
}

fn profiles_csv(g: &graph_nls::Graph, profiles: &[(f64, Vec<f64>)]) -> String {
    let coords = g.coords().filter(|c| c.iter().all(|x| x.len() == 1));
    let mut out = String::from("node");
    if coords.is_some() {
        out.push_str(",x");
    }
    for (h, _) in profiles {
        out.push_str(&format!(",rho_h{h}"));
    }
    out.push('\n');
    for j in 0..g.n() {
        out.push_str(&(j + 1).to_string());
        if let Some(c) = coords {
            out.push_str(&format!(",{:.16e}", c[j][0]));
        }
        for (_, rho) in profiles {
            out.push_str(&format!(",{:.16e}", rho[j]));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ModeRecord {
    k: usize,
    lambda: f64,
    plus: (f64, f64),
    minus: (f64, f64),
}

#[derive(Serialize)]
struct ClosedForm {
    alpha: f64,
    eigenvalues: Vec<(f64, f64)>,
    modes: Vec<ModeRecord>,
    max_deviation: f64,
}

#[derive(Serialize)]
struct StabilityOutput {
    #[serde(flatten)]
    report: SpectrumFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<ClosedForm>,
}

pub fn stability(ctx: &Context) -> Result<(), CliError> {
    let g = ctx.cfg.graph(&ctx.base)?;
    let spec = ctx.cfg.potentials(&g, &ctx.base)?;
    let thresholds = Thresholds {
        stable: ctx.cfg.stability.stable_tol,
        unstable: ctx.cfg.stability.unstable_tol,
    };
    let ground = graph_nls::solve_ground_state(&g, &spec, &ground_options(ctx, g.n())?)?;
    let h2 = hamiltonian_matrix(&g, &spec, &ground.rho)?;
    let mut report = spectrum(&h2, &thresholds)?;

    let closed_form = PotentialSource::gpe_alpha(&spec).map(|alpha| {
        let closed = gpe_spectrum_closed_form(&g, alpha, spec.h, &thresholds);
        report.bifurcation_modes = closed.bifurcation_modes.clone();
        ClosedForm {
            alpha,
            max_deviation: multiset_distance(&report.eigenvalues, &closed.eigenvalues),
            eigenvalues: closed.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            modes: closed
                .modes
                .iter()
                .enumerate()
                .map(|(k, m)| ModeRecord {
                    k: k + 1,
                    lambda: m.lambda,
                    plus: (m.plus.re, m.plus.im),
                    minus: (m.minus.re, m.minus.im),
                })
                .collect(),
        }
    });
    let out = StabilityOutput {
        report: SpectrumFile::from(&report),
        closed_form,
    };
    write_json(&ctx.output("spectrum.json")?, &out)?;
    print!("stability: {}", report.classification.as_str());
    if let Some(cf) = &out.closed_form {
        print!(", closed-form max deviation {:.2e}", cf.max_deviation);
    }
    println!(", bifurcation modes {:?}", report.bifurcation_modes);
    Ok(())
}

pub fn dispersion(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .cfg
        .dispersion
        .as_ref()
        .ok_or_else(|| CliError::Config("dispersion needs a \"dispersion\" section".into()))?;
    let torus = Torus::new(&section.dims, section.delta_x, WeightMode::Continuum)?;
    let ks = match &section.k {
        Some(ks) => {
            for k in ks {
                check_commensurate(&torus, k)?;
            }
            ks.clone()
        }
        None => commensurate_wave_numbers(&torus),
    };
    let amplitude = 1.0 / (torus.graph().n() as f64).sqrt();
    let d = section.dims.len();
    let mut csv: Vec<String> = (1..=d).map(|i| format!("k_{i}")).collect();
    csv.extend(["mu".to_string(), "residual".to_string()]);
    let mut text = csv.join(",") + "\n";
    let mut worst = 0.0f64;
    for k in &ks {
        let residual = plane_wave_residual(&torus, k, amplitude)?;
        worst = worst.max(residual);
        let mu = 0.5 * k.iter().map(|x| x * x).sum::<f64>();
        let row: Vec<String> = k
            .iter()
            .chain([mu, residual].iter())
            .map(|x| format!("{x:.16e}"))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(&ctx.output("dispersion.csv")?, text.as_bytes())?;
    println!("dispersion: {} wave vectors, max residual {worst:.3e}", ks.len());
    Ok(())
}

pub fn resolve_base(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}
