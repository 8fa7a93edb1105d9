use std::collections::BTreeSet;

use super::{check, Circuit, Diagnostic, Instruction};
use crate::optics::{Element, PhaseFlip};
use crate::state::{PathId, PhotonMode, Polarization};

/// Parses UTF-8 bytes; invalid encoding is reported at the offending line.
pub fn parse_circuit_bytes(bytes: &[u8]) -> Result<Circuit, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_circuit(s),
        Err(e) => {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count();
            Err(vec![Diagnostic::error(line, "input is not valid UTF-8")])
        }
    }
}

/// Parses a netlist. Returns every diagnostic (errors and warnings) when at
/// least one error is found; warnings alone do not fail the parse.
pub fn parse_circuit(source: &str) -> Result<Circuit, Vec<Diagnostic>> {
    let mut p = Parser::default();
    for (idx, raw) in source.split('\n').enumerate() {
        let line = idx + 1;
        p.last_line = line;
        let text = raw.strip_suffix('\r').unwrap_or(raw);
        let text = text.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if let Some((kw, args)) = tokens.split_first() {
            p.instruction(line, &kw.to_ascii_lowercase(), args);
        }
    }
    p.finish()
}

#[derive(Default)]
struct Parser {
    paths: BTreeSet<PathId>,
    paths_line: usize,
    spins: Option<(usize, usize)>,
    input: Option<(PhotonMode, usize)>,
    instructions: Vec<Instruction>,
    lines: Vec<usize>,
    last_line: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn error(&mut self, line: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(line, msg));
    }

    fn arity(&mut self, line: usize, kw: &str, args: &[&str], allowed: &[usize], usage: &str) -> bool {
        if allowed.contains(&args.len()) {
            true
        } else {
            self.error(
                line,
                format!("`{kw}` takes {usage}, got {} argument(s)", args.len()),
            );
            false
        }
    }

    fn path(&mut self, line: usize, tok: &str) -> Option<PathId> {
        match tok.parse::<u32>() {
            Ok(n) => {
                let id = PathId(n);
                if !self.paths.contains(&id) {
                    self.error(line, format!("undeclared path {id}"));
                    return None;
                }
                Some(id)
            }
            Err(_) => {
                self.error(line, format!("invalid path label `{tok}`"));
                None
            }
        }
    }

    fn spin(&mut self, line: usize, tok: &str) -> Option<usize> {
        match tok.parse::<usize>() {
            Ok(k) => Some(k),
            Err(_) => {
                self.error(line, format!("invalid spin index `{tok}`"));
                None
            }
        }
    }

    fn pol(&mut self, line: usize, tok: &str) -> Option<Polarization> {
        let pol = tok.parse::<Polarization>().ok();
        if pol.is_none() {
            self.error(line, format!("polarization must be H or V, got `{tok}`"));
        }
        pol
    }

    fn push(&mut self, line: usize, inst: Instruction) {
        self.instructions.push(inst);
        self.lines.push(line);
    }

    fn instruction(&mut self, line: usize, kw: &str, args: &[&str]) {
        match kw {
            "paths" => {
                if args.is_empty() {
                    self.error(line, "`paths` needs at least one label");
                }
                if self.paths_line == 0 {
                    self.paths_line = line;
                }
                for tok in args {
                    match tok.parse::<u32>() {
                        Ok(n) => {
                            if !self.paths.insert(PathId(n)) {
                                self.error(line, format!("path {n} declared twice"));
                            }
                        }
                        Err(_) => self.error(line, format!("invalid path label `{tok}`")),
                    }
                }
            }
            "spins" => {
                if !self.arity(line, kw, args, &[1], "one count") {
                    return;
                }
                if let Some((_, prev)) = self.spins {
                    self.error(line, format!("spin count already given on line {prev}"));
                    return;
                }
                match args[0].parse::<usize>() {
                    Ok(k) if k > 4 => self.error(line, format!("spin count {k} is not in 1..=4")),
                    Ok(k) => self.spins = Some((k, line)),
                    Err(_) => self.error(line, format!("invalid spin count `{}`", args[0])),
                }
            }
            "input" => {
                if !self.arity(line, kw, args, &[2], "<path> <H|V>") {
                    return;
                }
                if let Some((_, prev)) = self.input {
                    self.error(line, format!("input already given on line {prev}"));
                    return;
                }
                let (path, pol) = (self.path(line, args[0]), self.pol(line, args[1]));
                if let (Some(path), Some(pol)) = (path, pol) {
                    self.input = Some((PhotonMode { path, pol }, line));
                }
            }
            "stage" => {
                if !self.arity(line, kw, args, &[1], "one stage number") {
                    return;
                }
                match args[0].parse::<u32>() {
                    Ok(n) => self.push(line, Instruction::Stage(n)),
                    Err(_) => self.error(line, format!("invalid stage number `{}`", args[0])),
                }
            }
            _ => {
                if let Some(e) = self.element(line, kw, args) {
                    self.push(line, Instruction::Element(e));
                }
            }
        }
    }

    fn element(&mut self, line: usize, kw: &str, args: &[&str]) -> Option<Element> {
        match kw {
            "bs" => {
                if !self.arity(line, kw, args, &[2], "<up> <down>") {
                    return None;
                }
                let (up, down) = (self.path(line, args[0]), self.path(line, args[1]));
                Some(Element::BeamSplitter { up: up?, down: down? })
            }
            "pbs" => {
                let Some(arrow) = args.iter().position(|t| *t == "->") else {
                    self.error(line, "`pbs` needs `->` between inputs and outputs");
                    return None;
                };
                let (ins, outs) = (&args[..arrow], &args[arrow + 1..]);
                if !(1..=2).contains(&ins.len()) || outs.len() != 2 {
                    self.error(
                        line,
                        format!(
                            "`pbs` takes <inA> [<inB>] -> <outT> <outR>, got {} input(s) and {} output(s)",
                            ins.len(),
                            outs.len()
                        ),
                    );
                    return None;
                }
                let in_a = self.path(line, ins[0]);
                let in_b = match ins.get(1) {
                    Some(tok) => Some(self.path(line, tok)?),
                    None => None,
                };
                let (out_t, out_r) = (self.path(line, outs[0]), self.path(line, outs[1]));
                Some(Element::PolarizingBeamSplitter {
                    in_a: in_a?,
                    in_b,
                    out_t: out_t?,
                    out_r: out_r?,
                })
            }
            "qwp" | "x" => {
                if !self.arity(line, kw, args, &[1], "<path>") {
                    return None;
                }
                let path = self.path(line, args[0])?;
                Some(if kw == "qwp" {
                    Element::QuarterWave { path }
                } else {
                    Element::HalfWaveX { path }
                })
            }
            "pz" => {
                if !self.arity(line, kw, args, &[1, 2], "<path> [literal|conventional]") {
                    return None;
                }
                let path = self.path(line, args[0]);
                let kind = match args.get(1).map(|s| s.to_ascii_lowercase()).as_deref() {
                    None | Some("literal") => PhaseFlip::Literal,
                    Some("conventional") => PhaseFlip::Conventional,
                    Some(other) => {
                        self.error(line, format!("unknown pz variant `{other}`"));
                        return None;
                    }
                };
                Some(Element::PhasePlate { path: path?, kind })
            }
            "cavity" => {
                if !self.arity(line, kw, args, &[2], "<spin> <path>") {
                    return None;
                }
                let (spin, path) = (self.spin(line, args[0]), self.path(line, args[1]));
                Some(Element::cavity(spin?, path?.0))
            }
            "spinh" => {
                if !self.arity(line, kw, args, &[1], "<spin>") {
                    return None;
                }
                Some(Element::SpinHadamard {
                    spin: self.spin(line, args[0])?,
                })
            }
            "spinz" => {
                if !self.arity(line, kw, args, &[1, 2], "<spin> [+|-]") {
                    return None;
                }
                let spin = self.spin(line, args[0]);
                let sign = match args.get(1).copied() {
                    None | Some("+") => 1,
                    Some("-") => -1,
                    Some(other) => {
                        self.error(line, format!("spinz sign must be + or -, got `{other}`"));
                        return None;
                    }
                };
                Some(Element::SpinZ { spin: spin?, sign })
            }
            "detect" => {
                if !self.arity(line, kw, args, &[3], "<path> <H|V> <name>") {
                    return None;
                }
                let (path, pol) = (self.path(line, args[0]), self.pol(line, args[1]));
                Some(Element::Detect {
                    path: path?,
                    pol: pol?,
                    name: args[2].to_string(),
                })
            }
            _ => {
                self.error(line, format!("unknown keyword `{kw}`"));
                None
            }
        }
    }

    fn finish(mut self) -> Result<Circuit, Vec<Diagnostic>> {
        let circuit = Circuit {
            paths: self.paths.iter().copied().collect(),
            spins: self.spins.map(|(k, _)| k).unwrap_or(0),
            input: self.input.map(|(m, _)| m),
            instructions: self.instructions,
        };
        let lines = self.lines;
        let last_line = self.last_line;
        let spins_line = self.spins.map(|(_, l)| l).unwrap_or(1);
        let input_line = self.input.map(|(_, l)| l).unwrap_or(1);
        let paths_line = self.paths_line.max(1);
        let mut diags = std::mem::take(&mut self.diags);
        if !diags.iter().any(Diagnostic::is_error) {
            diags.extend(check(&circuit, &|i| lines.get(i).copied().unwrap_or(last_line), paths_line, spins_line, input_line));
        }
        diags.sort_by_key(|d| (d.line, d.severity));
        diags.dedup();
        if diags.iter().any(Diagnostic::is_error) {
            Err(diags)
        } else {
            Ok(circuit)
        }
    }
}
