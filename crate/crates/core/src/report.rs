//! JSON renderings of protocol runs and metrics.

use serde::Serialize;
use serde_json::{json, Value};

use crate::metrics::{Calibration, GateMetrics};
use crate::protocol::ProtocolResult;
use crate::state::Complex;

fn pairs(amps: &[Complex]) -> Vec<[f64; 2]> {
    amps.iter().map(|a| [a.re, a.im]).collect()
}

/// `{input, branches, loss, checkpoint_distances}`. Qudit amplitudes are
/// listed from level 3 down to level 0; spin states by configuration index.
pub fn protocol_json(r: &ProtocolResult) -> Value {
    json!({
        "input": {
            "control": pairs(&r.control.descending()),
            "target": pairs(&r.target.descending()),
        },
        "branches": r.branches.iter().map(|b| json!({
            "detector": b.detector,
            "probability": b.probability,
            "corrected_spin": pairs(&b.corrected_spin.0),
        })).collect::<Vec<_>>(),
        "loss": r.loss,
        "checkpoint_distances": r.checkpoint_distances(),
    })
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    metrics: &'a GateMetrics,
    calibration: &'a Calibration,
}

pub fn metrics_json(m: &GateMetrics, calibration: &Calibration) -> Value {
    serde_json::to_value(MetricsReport {
        metrics: m,
        calibration,
    })
    .expect("metrics serialize")
}
