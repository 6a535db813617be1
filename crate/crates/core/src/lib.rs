//! Nonlinear Schrödinger dynamics on weighted graphs, written as a Hamiltonian
//! system in density/phase variables over the probability simplex.
//!
//! The state is a pair `(rho, S)` with `rho` a strictly positive probability
//! vector on the nodes and `S` a phase. The Hamiltonian is
//!
//! ```text
//! H(rho, S) = 1/2 (grad S, grad S)_rho + h^2/8 I(rho) + V(rho) + W(rho)
//! ```
//!
//! where `I` is the discrete Fisher information, and the flow is
//! `drho/dt = L(rho) S`, `dS/dt = -dH/drho` with `L(rho)` the density-weighted
//! graph Laplacian.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod graph;
pub mod ground_state;
pub mod io;
pub mod stability;
pub mod transport;
pub mod wave;

pub use dynamics::{simulate, IntegratorConfig, Method, SystemState, Trajectory};
pub use energy::{hamiltonian, Density, Interaction, PotentialSpec};
pub use error::{Error, Result};
pub use graph::{EdgeField, Graph, Torus, WeightMode};
pub use ground_state::{solve_ground_state, GroundStateOptions, GroundStateResult};
pub use stability::{hamiltonian_matrix, spectrum, Classification, SpectrumReport, Thresholds};
pub use transport::WeightedLaplacian;
pub use wave::WaveState;
