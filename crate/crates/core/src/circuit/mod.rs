//! Hybrid photon–spin circuits and their text netlist.
//!
//! ```text
//! paths <n1> <n2> ...            declare path labels (may repeat the line)
//! spins <k>                      number of spins, 1..=4
//! input <path> <H|V>             photon input port (default: first path, H)
//! bs <up> <down>
//! pbs <inA> [<inB>] -> <outT> <outR>
//! qwp <path>
//! x <path>
//! pz <path> [literal|conventional]
//! cavity <spin> <path>
//! spinh <spin>
//! spinz <spin> [+|-]
//! detect <path> <H|V> <name>
//! stage <n>                      checkpoint marker after the preceding elements
//! ```
//!
//! One instruction per line, `#` starts a comment, keywords are
//! case-insensitive, LF and CRLF line endings are both accepted.

mod builtin;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

pub use builtin::{builtin_paper_circuit, BUILTIN_SOURCE};
pub use parse::{parse_circuit, parse_circuit_bytes};

use crate::cavity::CavityParams;
use crate::error::{Error, Result};
use crate::optics::{apply_linear, pbs_routes, Element};
use crate::state::{
    prepare_initial, AmplitudeVector, PathId, PhotonMode, Polarization, QuditAmplitudes,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            severity: Severity::Warning,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {sev}: {}", self.line, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Element(Element),
    /// Checkpoint boundary; the state is recorded after all preceding elements.
    Stage(u32),
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Element(e) => e.fmt(f),
            Instruction::Stage(n) => write!(f, "stage {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    /// Declared path labels, sorted.
    pub paths: Vec<PathId>,
    pub spins: usize,
    pub input: Option<PhotonMode>,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(paths: impl IntoIterator<Item = PathId>, spins: usize) -> Self {
        let set: BTreeSet<PathId> = paths.into_iter().collect();
        Circuit {
            paths: set.into_iter().collect(),
            spins,
            input: None,
            instructions: Vec::new(),
        }
    }

    pub fn push(&mut self, e: Element) -> &mut Self {
        self.instructions.push(Instruction::Element(e));
        self
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Element(e) => Some(e),
            Instruction::Stage(_) => None,
        })
    }

    /// Photon input port; the first declared path in H when not given.
    pub fn input_mode(&self) -> Option<PhotonMode> {
        self.input.or_else(|| {
            self.paths.first().map(|&path| PhotonMode {
                path,
                pol: Polarization::H,
            })
        })
    }

    /// Detector names and ports in declaration order.
    pub fn detectors(&self) -> Vec<(String, PhotonMode)> {
        self.elements()
            .filter_map(|e| match e {
                Element::Detect { path, pol, name } => Some((
                    name.clone(),
                    PhotonMode {
                        path: *path,
                        pol: *pol,
                    },
                )),
                _ => None,
            })
            .collect()
    }

    pub fn detector_ports(&self) -> Vec<PhotonMode> {
        self.detectors().into_iter().map(|(_, m)| m).collect()
    }

    pub fn detector(&self, name: &str) -> Option<PhotonMode> {
        self.detectors()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    /// Stage numbers in order of appearance.
    pub fn stages(&self) -> Vec<u32> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Stage(n) => Some(*n),
                _ => None,
            })
            .collect()
    }

    /// Instructions with every cavity's reflection coefficients taken from
    /// `params[spin - 1]`.
    pub fn bind(&self, params: &[CavityParams; 4]) -> Result<Vec<Instruction>> {
        let refl = params
            .iter()
            .map(|p| p.reflections())
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .instructions
            .iter()
            .map(|inst| match inst {
                Instruction::Element(Element::CavityScatter { spin, path, .. })
                    if (1..=4).contains(spin) =>
                {
                    let (r_down, r_up) = refl[spin - 1];
                    Instruction::Element(Element::CavityScatter {
                        spin: *spin,
                        path: *path,
                        r_down,
                        r_up,
                    })
                }
                other => other.clone(),
            })
            .collect())
    }

    /// Header lines that precede the instructions in the canonical form.
    fn header_lines(&self) -> usize {
        2 + usize::from(self.input.is_some())
    }

    /// Canonical line number of instruction `index`.
    pub fn canonical_line(&self, index: usize) -> usize {
        self.header_lines() + index + 1
    }
}

/// Canonical netlist text. Parsing it gives back an equal circuit.
pub fn serialize(c: &Circuit) -> String {
    let mut out = String::from("paths");
    for p in &c.paths {
        out.push(' ');
        out.push_str(&p.to_string());
    }
    out.push('\n');
    out.push_str(&format!("spins {}\n", c.spins));
    if let Some(m) = c.input {
        out.push_str(&format!("input {} {}\n", m.path, m.pol));
    }
    for inst in &c.instructions {
        out.push_str(&inst.to_string());
        out.push('\n');
    }
    out
}

/// Structural checks plus an ideal-reflection light trace.
///
/// Errors: undeclared paths or spins, degenerate beam-splitter ports,
/// duplicate detector names or ports, elements after a detector on the same
/// path, non-increasing stage markers. Warnings come from propagating a
/// generic input through the circuit with `r↓ = 1, r↑ = -1`: elements acting
/// on dark paths, V light reaching a cavity, and light that ends on no
/// detector. Line numbers refer to [`serialize`] output.
pub fn validate(c: &Circuit) -> Vec<Diagnostic> {
    check(c, &|i| c.canonical_line(i), 1, 2, 3)
}

/// Shared by [`validate`] and the parser, which supplies source line numbers.
pub(crate) fn check(
    c: &Circuit,
    line_of: &dyn Fn(usize) -> usize,
    paths_line: usize,
    spins_line: usize,
    input_line: usize,
) -> Vec<Diagnostic> {
    let mut diags = structural(c, line_of, spins_line, input_line);
    if paths_line > 0 && c.paths.is_empty() {
        diags.push(Diagnostic::warning(paths_line, "no paths declared"));
    }
    if !diags.iter().any(Diagnostic::is_error) {
        diags.extend(light_trace(c, line_of));
    }
    diags.sort_by_key(|d| (d.line, d.severity));
    diags
}

fn structural(
    c: &Circuit,
    line_of: &dyn Fn(usize) -> usize,
    spins_line: usize,
    input_line: usize,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let declared: BTreeSet<PathId> = c.paths.iter().copied().collect();
    if !(1..=4).contains(&c.spins) && c.spins != 0 {
        diags.push(Diagnostic::error(
            spins_line,
            format!("spin count {} is not in 1..=4", c.spins),
        ));
    }
    if let Some(m) = c.input {
        if !declared.contains(&m.path) {
            diags.push(Diagnostic::error(input_line, format!("undeclared path {}", m.path)));
        }
    }

    let mut detector_names: BTreeMap<&str, usize> = BTreeMap::new();
    let mut detector_ports: BTreeSet<PhotonMode> = BTreeSet::new();
    let mut terminal: BTreeMap<PathId, usize> = BTreeMap::new();
    let mut last_stage: Option<u32> = None;

    for (i, inst) in c.instructions.iter().enumerate() {
        let line = line_of(i);
        let e = match inst {
            Instruction::Stage(n) => {
                if *n == 0 {
                    diags.push(Diagnostic::error(line, "stage numbers start at 1"));
                }
                if let Some(prev) = last_stage {
                    if *n <= prev {
                        diags.push(Diagnostic::error(
                            line,
                            format!("stage {n} does not follow stage {prev}"),
                        ));
                    }
                }
                last_stage = Some(*n);
                continue;
            }
            Instruction::Element(e) => e,
        };
        for p in e.paths() {
            if !declared.contains(&p) {
                diags.push(Diagnostic::error(line, format!("undeclared path {p}")));
            }
        }
        if let Some(k) = e.spin() {
            if k == 0 || k > c.spins {
                diags.push(Diagnostic::error(
                    line,
                    format!("spin {k} out of range (circuit declares {} spins)", c.spins),
                ));
            }
        }
        if let Element::SpinZ { sign, .. } = e {
            if *sign != 1 && *sign != -1 {
                diags.push(Diagnostic::error(line, "spinz sign must be + or -"));
            }
        }
        match e {
            Element::BeamSplitter { up, down } if up == down => {
                diags.push(Diagnostic::error(line, format!("bs ports must differ (both {up})")));
            }
            Element::PolarizingBeamSplitter {
                in_a,
                in_b,
                out_t,
                out_r,
            } => {
                if let Err(err) = pbs_routes(*in_a, *in_b, *out_t, *out_r) {
                    diags.push(Diagnostic::error(line, err.to_string()));
                }
            }
            _ => {}
        }
        match e {
            Element::Detect { path, pol, name } => {
                if let Some(prev) = detector_names.insert(name, line) {
                    diags.push(Diagnostic::error(
                        line,
                        format!("detector name {name} already used on line {prev}"),
                    ));
                }
                let port = PhotonMode {
                    path: *path,
                    pol: *pol,
                };
                if !detector_ports.insert(port) {
                    diags.push(Diagnostic::error(line, format!("port {port} already has a detector")));
                }
                terminal.entry(*path).or_insert(line);
            }
            other => {
                for p in other.paths() {
                    if let Some(det_line) = terminal.get(&p) {
                        diags.push(Diagnostic::error(
                            line,
                            format!("`{other}` uses path {p} after its detector on line {det_line}"),
                        ));
                    }
                }
            }
        }
    }
    diags
}

const DARK: f64 = 1e-12;

/// Propagates a fixed generic product state with ideal cavities and reports
/// where light does or does not go.
fn light_trace(c: &Circuit, line_of: &dyn Fn(usize) -> usize) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let Some(input) = c.input_mode() else {
        return diags;
    };
    let generic = QuditAmplitudes::from_descending_real([0.1, 0.3, 0.5, 0.8])
        .normalized()
        .expect("nonzero");
    let Ok(mut state) = prepare_initial(c.paths.iter().copied(), &generic, &generic, input) else {
        return diags;
    };
    for (i, inst) in c.instructions.iter().enumerate() {
        let Instruction::Element(e) = inst else { continue };
        let line = line_of(i);
        match e {
            Element::QuarterWave { path }
            | Element::HalfWaveX { path }
            | Element::PhasePlate { path, .. }
            | Element::CavityScatter { path, .. }
            | Element::Detect { path, .. }
                if state.path_weight(*path).unwrap_or(0.0) < DARK =>
            {
                diags.push(Diagnostic::warning(
                    line,
                    format!("`{e}` acts on path {path}, which carries no light"),
                ));
            }
            _ => {}
        }
        if let Element::CavityScatter { path, .. } = e {
            let v = state
                .block(PhotonMode {
                    path: *path,
                    pol: Polarization::V,
                })
                .map(|b| b.iter().map(|a| a.norm_sqr()).sum::<f64>())
                .unwrap_or(0.0);
            if v.sqrt() >= crate::optics::CAVITY_V_TOL {
                diags.push(Diagnostic::warning(
                    line,
                    format!("V light reaches `{e}` (weight {v:.3e})"),
                ));
            }
        }
        match apply_linear(&state, e) {
            Ok(next) => state = next,
            Err(_) => return diags,
        }
    }
    let ports: BTreeSet<PhotonMode> = c.detector_ports().into_iter().collect();
    let end_line = line_of(c.instructions.len().saturating_sub(1));
    for mode in state.modes().collect::<Vec<_>>() {
        let weight: f64 = state
            .block(mode)
            .map(|b| b.iter().map(|a| a.norm_sqr()).sum())
            .unwrap_or(0.0);
        if weight >= DARK && !ports.contains(&mode) {
            diags.push(Diagnostic::warning(
                end_line,
                format!("light ends on {mode} with no detector (weight {weight:.3e})"),
            ));
        }
    }
    debug_assert!(state.norm_sq().is_finite());
    diags
}

/// Fails with every error diagnostic when the circuit is invalid.
pub fn ensure_valid(c: &Circuit) -> Result<()> {
    let errors: Vec<Diagnostic> = validate(c).into_iter().filter(Diagnostic::is_error).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidCircuit(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_circuit_is_clean() {
        let c = builtin_paper_circuit();
        assert_eq!(validate(&c), Vec::new());
        assert_eq!(c.detectors().len(), 4);
        assert_eq!(c.stages(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn element_after_detector_is_an_error() {
        let c = parse_circuit("paths 1 2\nspins 4\ndetect 1 H D\nqwp 1\n").unwrap_err();
        assert!(c.iter().any(|d| d.is_error() && d.line == 4 && d.message.contains("after its detector")));
    }

    #[test]
    fn duplicate_pbs_outputs_is_an_error() {
        let d = parse_circuit("paths 4\nspins 4\npbs 4 -> 4 4\n").unwrap_err();
        assert!(d.iter().any(|d| d.is_error() && d.line == 3));
    }

    #[test]
    fn serialize_examples() {
        let empty = Circuit::new([PathId(1), PathId(2)], 4);
        assert_eq!(serialize(&empty), "paths 1 2\nspins 4\n");
        let mut c = empty.clone();
        c.push(Element::BeamSplitter {
            up: PathId(1),
            down: PathId(2),
        });
        assert!(serialize(&c).ends_with("bs 1 2\n"));
        let b = builtin_paper_circuit();
        assert_eq!(serialize(&b), serialize(&builtin_paper_circuit()));
        assert_eq!(parse_circuit(&serialize(&b)).unwrap(), b);
    }

    #[test]
    fn dark_path_and_undetected_light_warn() {
        let c = parse_circuit("paths 1 2\nspins 4\nqwp 2\ndetect 2 H D\n").unwrap();
        let d = validate(&c);
        assert!(d.iter().all(|d| !d.is_error()));
        assert!(d.iter().any(|d| d.message.contains("carries no light")));
        assert!(d.iter().any(|d| d.message.contains("no detector")));
    }

    #[test]
    fn v_light_at_cavity_warns() {
        let c = parse_circuit("paths 1\nspins 4\ninput 1 V\ncavity 1 1\ndetect 1 V D\n").unwrap();
        assert!(validate(&c).iter().any(|d| d.message.contains("V light reaches")));
    }
}
