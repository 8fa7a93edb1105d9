use thiserror::Error;

use crate::circuit::Diagnostic;
use crate::state::{PathId, PhotonMode};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} amplitudes are not normalized (squared norm {norm_sq:.12})")]
    NotNormalized { what: &'static str, norm_sq: f64 },

    #[error("path {0} is not part of the state basis")]
    UnknownPath(PathId),

    #[error("{0} is not a declared detector port")]
    NotADetector(PhotonMode),

    #[error(
        "{}`{element}`: V-polarized amplitude {amplitude:.3e} incident on the cavity at path {path}",
        index.map(|i| format!("element {i}: ")).unwrap_or_default()
    )]
    VerticalAtCavity {
        index: Option<usize>,
        element: String,
        path: PathId,
        amplitude: f64,
    },

    #[error("singular parameters: {0}")]
    Singular(String),

    #[error("state dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid circuit:\n{}", render(.0))]
    InvalidCircuit(Vec<Diagnostic>),

    #[error("fidelity undefined: zero detection probability for input {0}")]
    UndefinedFidelity(String),

    #[error("checkpoint stage {0} is unavailable: {1}")]
    Checkpoint(usize, String),
}

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
