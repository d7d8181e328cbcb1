//! Noisy QAOA simulation, quantum channel algebra and marginal noise
//! characterization.
//!
//! * [`qsim`]: state-vector and density-matrix simulation of one-layer QAOA.
//! * [`channels`]: process matrices, Kraus sets, builtin and random channels.
//! * [`dualmap`]: Heisenberg-picture duals and closed-form transformed costs.
//! * [`maten`]: per-qubit regression of the marginal noise model.
//! * [`metrics`]: distances, fidelities, correlations and lower bounds.

mod error;
pub mod channels;
pub mod dualmap;
pub mod linalg;
pub mod maten;
pub mod metrics;
pub mod qsim;
pub mod seeds;

pub use channels::{Channel, ChiMatrix, ChiVec12, CptpReport, KrausSet};
pub use dualmap::CoeffVec;
pub use error::{Error, Result};
pub use qsim::{Basis, DensityMatrix, Observable, ParamSetting, Pauli, PauliString, QuboProblem, StateVector};
