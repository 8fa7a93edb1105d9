//! Simulation of a photon-mediated CNOT gate between two four-level qudits,
//! each encoded in a pair of cavity-coupled electron spins.
//!
//! The photon is a single excitation over labelled paths and two
//! polarizations; the four spins are carried as a 16-dimensional register.
//! Cavities reflect H light with a spin-dependent coefficient.

pub mod cavity;
pub mod circuit;
pub mod error;
pub mod metrics;
pub mod optics;
pub mod protocol;
pub mod report;
pub mod sampling;
pub mod state;

pub use cavity::{CavityParams, PhysicalParams};
pub use circuit::{builtin_paper_circuit, parse_circuit, serialize, validate, Circuit, Diagnostic};
pub use error::{Error, Result};
pub use optics::{apply_element, Element};
pub use protocol::{run_protocol, ProtocolResult};
pub use state::{
    prepare_initial, state_distance, HybridState, PathId, PhotonMode, Polarization,
    QuditAmplitudes, SpinState,
};
