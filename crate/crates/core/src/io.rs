//! File formats. Node indices are 1-based in files and 0-based in memory.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::energy::{Density, Interaction, PotentialSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ground_state::GroundStateResult;
use crate::stability::SpectrumReport;
use crate::wave::{from_wave, WaveState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<Graph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(j, l, w) in &self.edges {
            for idx in [j, l] {
                if idx == 0 || idx > self.n {
                    return Err(Error::NodeOutOfRange { index: idx, n: self.n });
                }
            }
            edges.push((j - 1, l - 1, w));
        }
        let g = Graph::new(self.n, edges)?;
        match &self.coords {
            Some(c) => g.with_coords(c.clone()),
            None => Ok(g),
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        GraphFile {
            n: g.n(),
            edges: g.edges().iter().map(|e| (e.a + 1, e.b + 1, e.weight)).collect(),
            coords: g.coords().map(|c| c.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionFile {
    Zero,
    Diagonal { alpha: f64 },
    Dense { matrix: Vec<Vec<f64>> },
}

impl InteractionFile {
    pub fn to_interaction(&self) -> Result<Interaction> {
        Ok(match self {
            InteractionFile::Zero => Interaction::Zero,
            InteractionFile::Diagonal { alpha } => Interaction::Diagonal(*alpha),
            InteractionFile::Dense { matrix } => {
                let n = matrix.len();
                if let Some(row) = matrix.iter().find(|r| r.len() != n) {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
                Interaction::Dense(DMatrix::from_fn(n, n, |r, c| matrix[r][c]))
            }
        })
    }

    pub fn from_interaction(w: &Interaction) -> Self {
        match w {
            Interaction::Zero => InteractionFile::Zero,
            Interaction::Diagonal(alpha) => InteractionFile::Diagonal { alpha: *alpha },
            Interaction::Dense(m) => InteractionFile::Dense {
                matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsFile {
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(rename = "W")]
    pub w: InteractionFile,
    pub h: f64,
}

impl PotentialsFile {
    pub fn to_spec(&self) -> Result<PotentialSpec> {
        PotentialSpec::new(self.v.clone(), self.w.to_interaction()?, self.h)
    }

    pub fn from_spec(spec: &PotentialSpec) -> Self {
        PotentialsFile {
            v: spec.v.clone(),
            w: InteractionFile::from_interaction(&spec.w),
            h: spec.h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialStateFile {
    Madelung {
        rho: Vec<f64>,
        #[serde(rename = "S")]
        s: Vec<f64>,
    },
    Wave { psi_re: Vec<f64>, psi_im: Vec<f64> },
}

impl InitialStateFile {
    /// Density and phase; a wave function is converted with Planck constant `h`.
    pub fn to_state(&self, h: f64) -> Result<(Density, Vec<f64>)> {
        match self {
            InitialStateFile::Madelung { rho, s } => {
                if rho.len() != s.len() {
                    return Err(Error::LengthMismatch {
                        expected: rho.len(),
                        got: s.len(),
                    });
                }
                Ok((Density::new(rho.clone())?, s.clone()))
            }
            InitialStateFile::Wave { psi_re, psi_im } => {
                if psi_re.len() != psi_im.len() {
                    return Err(Error::LengthMismatch {
                        expected: psi_re.len(),
                        got: psi_im.len(),
                    });
                }
                let psi = WaveState(
                    psi_re
                        .iter()
                        .zip(psi_im)
                        .map(|(&re, &im)| Complex64::new(re, im))
                        .collect(),
                );
                let state = from_wave(&psi, h)?;
                Ok((Density::new(state.rho)?, state.s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateFile {
    pub rho_g: Vec<f64>,
    pub nu: f64,
    pub energy: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl From<&GroundStateResult> for GroundStateFile {
    fn from(r: &GroundStateResult) -> Self {
        GroundStateFile {
            rho_g: r.rho.clone(),
            nu: r.nu,
            energy: r.energy,
            kkt_residual: r.kkt_residual,
            iterations: r.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub eigenvalues: Vec<(f64, f64)>,
    pub classification: String,
    pub bifurcation_modes: Vec<usize>,
}

impl From<&SpectrumReport> for SpectrumFile {
    fn from(r: &SpectrumReport) -> Self {
        SpectrumFile {
            eigenvalues: r.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            classification: r.classification.as_str().to_string(),
            bifurcation_modes: r.bifurcation_modes.clone(),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.snapshots.first().map_or(0, |s| s.state.n());
    let mut out = String::from("t");
    for j in 1..=n {
        out.push_str(&format!(",rho_{j}"));
    }
    for j in 1..=n {
        out.push_str(&format!(",S_{j}"));
    }
    out.push_str(",mass,energy,min_rho,norm_resid\n");
    for snap in &traj.snapshots {
        let d = &snap.diagnostics;
        let row = std::iter::once(snap.state.t)
            .chain(snap.state.rho.iter().copied())
            .chain(snap.state.s.iter().copied())
            .chain([d.mass, d.energy, d.min_rho, d.norm_resid])
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}
