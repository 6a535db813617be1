//! Complex (Madelung) form `psi_j = sqrt(rho_j) exp(i S_j / h)` and the
//! nonlinear graph Laplacian.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{rhs, SystemState};
use crate::energy::{check_interior, edge_density, PotentialSpec};
use crate::error::{Error, Result};
use crate::graph::{Graph, Torus};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState(pub Vec<Complex64>);

impl WaveState {
    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().map(|p| p.norm_sqr()).sum()
    }
}

pub fn to_wave(state: &SystemState, h: f64) -> Result<WaveState> {
    check_interior(&state.rho)?;
    Ok(WaveState(
        state
            .rho
            .iter()
            .zip(&state.s)
            .map(|(r, s)| Complex64::from_polar(r.sqrt(), s / h))
            .collect(),
    ))
}

/// Inverse of [`to_wave`] on the principal branch: `S_j = h arg(psi_j)` with
/// `arg` in `(-pi, pi]`, so `S` is recovered modulo `2 pi h`.
pub fn from_wave(psi: &WaveState, h: f64) -> Result<SystemState> {
    if let Some(node) = psi.0.iter().position(|p| !(p.norm() > 0.0)) {
        return Err(Error::ZeroModulus(node));
    }
    Ok(SystemState {
        rho: psi.0.iter().map(|p| p.norm_sqr()).collect(),
        s: psi.0.iter().map(|p| h * principal_arg(*p)).collect(),
        t: 0.0,
    })
}

fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    // atan2 returns -pi for (-x, -0.0); fold it into (-pi, pi]
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Shared kernel: `-psi_j [ (1/rho_j) sum_l w d_jl g_jl + 1/2 sum_l w |d_jl|^2 ]`
/// where `d_jl = log psi_j - log psi_l` is supplied per edge in canonical
/// orientation (`a -> b`).
fn laplacian_with<F>(g: &Graph, rho: &[f64], psi: &[Complex64], log_diff: F) -> Vec<Complex64>
where
    F: Fn(usize) -> Complex64,
{
    let mut transport = vec![Complex64::new(0.0, 0.0); g.n()];
    let mut modulus = vec![0.0; g.n()];
    for (idx, e) in g.edges().iter().enumerate() {
        let d = log_diff(idx);
        let ge = edge_density(rho, e.a, e.b);
        transport[e.a] += d * (e.weight * ge);
        transport[e.b] -= d * (e.weight * ge);
        let m = 0.5 * e.weight * d.norm_sqr();
        modulus[e.a] += m;
        modulus[e.b] += m;
    }
    (0..g.n())
        .map(|j| -psi[j] * (transport[j] / rho[j] + modulus[j]))
        .collect()
}

/// Nonlinear graph Laplacian of a wave function. Phase differences use the
/// principal branch `arg(psi_j conj(psi_l))`, so this agrees with
/// [`madelung_laplacian`] whenever neighboring phases differ by less than `pi h`.
pub fn graph_laplacian_wave(g: &Graph, psi: &WaveState) -> Result<Vec<Complex64>> {
    g.check_len(psi.0.len())?;
    if let Some(node) = psi.0.iter().position(|p| !(p.norm() > 0.0)) {
        return Err(Error::ZeroModulus(node));
    }
    let rho: Vec<f64> = psi.0.iter().map(|p| p.norm_sqr()).collect();
    check_interior(&rho)?;
    let edges = g.edges();
    Ok(laplacian_with(g, &rho, &psi.0, |idx| {
        let e = &edges[idx];
        Complex64::new(
            0.5 * (rho[e.a].ln() - rho[e.b].ln()),
            (psi.0[e.a] * psi.0[e.b].conj()).arg(),
        )
    }))
}

/// Nonlinear graph Laplacian evaluated from `(rho, S)` with unwrapped phase
/// differences `(S_j - S_l) / h`; this is the operator for which the complex
/// equation is equivalent to the `(rho, S)` flow.
pub fn madelung_laplacian(g: &Graph, rho: &[f64], s: &[f64], h: f64) -> Result<Vec<Complex64>> {
    g.check_len(rho.len())?;
    g.check_len(s.len())?;
    check_interior(rho)?;
    let psi = to_wave(
        &SystemState {
            rho: rho.to_vec(),
            s: s.to_vec(),
            t: 0.0,
        },
        h,
    )?;
    let edges = g.edges();
    Ok(laplacian_with(g, rho, &psi.0, |idx| {
        let e = &edges[idx];
        Complex64::new(0.5 * (rho[e.a].ln() - rho[e.b].ln()), (s[e.a] - s[e.b]) / h)
    }))
}

/// Sup-norm of `h i dpsi/dt + h^2/2 Lap psi - psi V - psi (W |psi|^2)` at a
/// state, with `dpsi/dt` obtained from the `(rho, S)` flow by the chain rule.
pub fn cnls_residual(g: &Graph, spec: &PotentialSpec, rho: &[f64], s: &[f64]) -> Result<f64> {
    let h = spec.h;
    let (drho, ds) = rhs(g, spec, rho, s)?;
    let lap = madelung_laplacian(g, rho, s, h)?;
    let w_rho = spec.w.apply(rho);
    let i = Complex64::i();
    Ok((0..g.n())
        .map(|j| {
            let psi = Complex64::from_polar(rho[j].sqrt(), s[j] / h);
            let dpsi = psi * Complex64::new(0.5 * drho[j] / rho[j], ds[j] / h);
            (i * h * dpsi + lap[j] * (0.5 * h * h) - psi * (spec.v[j] + w_rho[j])).norm()
        })
        .fold(0.0, f64::max))
}

/// Relative tolerance for deciding whether a wave vector fits the torus.
const COMMENSURATE_TOL: f64 = 1e-9;

/// Checks that `k_d * side_d * dx` is a multiple of `2 pi` along every axis.
pub fn check_commensurate(torus: &Torus, k: &[f64]) -> Result<()> {
    if k.len() != torus.dims().len() {
        return Err(Error::LengthMismatch {
            expected: torus.dims().len(),
            got: k.len(),
        });
    }
    let ok = k.iter().zip(torus.dims()).all(|(&kd, &d)| {
        let turns = kd * d as f64 * torus.delta_x() / (2.0 * PI);
        (turns - turns.round()).abs() <= COMMENSURATE_TOL * turns.abs().max(1.0)
    });
    if ok {
        Ok(())
    } else {
        Err(Error::IncommensurateWaveNumber(k.to_vec()))
    }
}

/// All distinct commensurate wave vectors, each component taken from the
/// centered band `2 pi m / (side dx)` with `m` in `(-side/2, side/2]`.
pub fn commensurate_wave_numbers(torus: &Torus) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &d in torus.dims() {
        let period = d as f64 * torus.delta_x();
        let lo = -((d as i64 - 1) / 2);
        let hi = d as i64 / 2;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (lo..=hi).map(move |m| {
                    let mut k = prefix.clone();
                    k.push(2.0 * PI * m as f64 / period);
                    k
                })
            })
            .collect();
    }
    out
}

/// Plane wave `A exp(i k.x_j)` on a torus at `t = 0` (with `h = 1`).
pub fn plane_wave(torus: &Torus, k: &[f64], amplitude: f64) -> Result<WaveState> {
    check_commensurate(torus, k)?;
    let coords = torus.graph().coords().expect("torus graphs carry coordinates");
    Ok(WaveState(
        coords
            .iter()
            .map(|x| {
                let phase: f64 = x.iter().zip(k).map(|(xi, ki)| xi * ki).sum();
                Complex64::from_polar(amplitude, phase)
            })
            .collect(),
    ))
}

/// Sup-norm residual of `i dpsi/dt + 1/2 Lap psi` for the plane wave with
/// frequency `mu = |k|^2 / 2`, at `t = 0`, `h = 1`.
///
/// The phase difference across each edge is taken as `k` dotted with the
/// edge's lattice displacement, i.e. the phase is lifted along the lattice
/// rather than wrapped to the principal branch.
pub fn plane_wave_residual(torus: &Torus, k: &[f64], amplitude: f64) -> Result<f64> {
    let psi = plane_wave(torus, k, amplitude)?;
    let g = torus.graph();
    let rho: Vec<f64> = psi.0.iter().map(|p| p.norm_sqr()).collect();
    check_interior(&rho)?;
    let mu = 0.5 * k.iter().map(|x| x * x).sum::<f64>();
    let lap = laplacian_with(g, &rho, &psi.0, |idx| {
        // log psi_a - log psi_b = -i k . (x_b - x_a)
        let kd: f64 = torus.displacement(idx).iter().zip(k).map(|(d, ki)| d * ki).sum();
        Complex64::new(0.0, -kd)
    });
    Ok(psi
        .0
        .iter()
        .zip(&lap)
        .map(|(p, l)| (p * mu + l * 0.5).norm())
        .fold(0.0, f64::max))
}
