//! Photon-mediated CNOT and Toffoli gates on quantum-dot electron spins held
//! in double-sided optical microcavities.
//!
//! * [`cavity`]: reflection and transmission coefficients of a QD-cavity unit.
//! * [`state`]: joint photon-polarization / photon-path / spin states and the
//!   linear-optics and cavity elements acting on them.
//! * [`circuits`]: the gate circuits, their runner and feed-forward tables.
//! * [`metrics`]: fidelity, efficiency and parameter sweeps.

pub mod cavity;
pub mod circuits;
pub mod error;
pub mod metrics;
pub mod spin;
pub mod state;

pub use num_complex::Complex64;

pub use cavity::{coefficients, feasibility, CavityParams, FeasibilityReport, ScatteringCoefficients};
pub use circuits::{build_cnot, build_toffoli, CircuitSpec, GateKind, GateRunResult, SimulationMode};
pub use error::{Error, Result};
pub use spin::{SpinConfig, SpinState};
pub use state::{HybridState, MeasurementBasis, Polarization, Port};
pub use metrics::{
    average_fidelity, efficiency, sweep, EfficiencyResult, FidelityMethod, FidelityResult,
    SweepGrid, SweepQuantity, SweepSpec,
};
