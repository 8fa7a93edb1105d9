use super::{parse_circuit, Circuit};

/// Netlist of the 4×4 CNOT network with stage markers and named detectors.
pub const BUILTIN_SOURCE: &str = include_str!("../../circuits/cnot44.net");

pub fn builtin_paper_circuit() -> Circuit {
    match parse_circuit(BUILTIN_SOURCE) {
        Ok(c) => c,
        Err(diags) => panic!("built-in netlist does not parse: {diags:?}"),
    }
}
