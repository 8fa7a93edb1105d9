#![allow(dead_code)]

use qudit_cnot::circuit::{validate, Circuit, Instruction};
use qudit_cnot::optics::{Element, PhaseFlip};
use qudit_cnot::state::{PathId, Polarization};
use rand::seq::SliceRandom;
use rand::Rng;

fn pick<R: Rng>(rng: &mut R, paths: &[PathId]) -> PathId {
    *paths.choose(rng).expect("non-empty")
}

fn two<R: Rng>(rng: &mut R, paths: &[PathId]) -> (PathId, PathId) {
    let i = rng.gen_range(0..paths.len());
    let j = (i + rng.gen_range(1..paths.len())) % paths.len();
    (paths[i], paths[j])
}

fn element<R: Rng>(rng: &mut R, paths: &[PathId], spins: usize) -> Element {
    let spin = rng.gen_range(1..=spins);
    match rng.gen_range(0..9) {
        0 => {
            let (up, down) = two(rng, paths);
            Element::BeamSplitter { up, down }
        }
        1 => {
            let (a, b) = two(rng, paths);
            Element::PolarizingBeamSplitter {
                in_a: a,
                in_b: Some(b),
                out_t: a,
                out_r: b,
            }
        }
        2 => {
            let (a, b) = two(rng, paths);
            Element::PolarizingBeamSplitter {
                in_a: a,
                in_b: None,
                out_t: a,
                out_r: b,
            }
        }
        3 => Element::QuarterWave { path: pick(rng, paths) },
        4 => Element::HalfWaveX { path: pick(rng, paths) },
        5 => Element::PhasePlate {
            path: pick(rng, paths),
            kind: if rng.gen() { PhaseFlip::Literal } else { PhaseFlip::Conventional },
        },
        6 => Element::cavity(spin, pick(rng, paths).0),
        7 => Element::SpinHadamard { spin },
        _ => Element::SpinZ {
            spin,
            sign: if rng.gen() { 1 } else { -1 },
        },
    }
}

/// A structurally valid circuit: random elements, increasing stage markers
/// and detectors on distinct ports at the end.
pub fn random_circuit<R: Rng>(rng: &mut R) -> Circuit {
    loop {
        let n = rng.gen_range(2..=6);
        let mut labels: Vec<u32> = (1..40).collect();
        labels.shuffle(rng);
        let paths: Vec<PathId> = labels[..n].iter().map(|&l| PathId(l)).collect();
        let spins = rng.gen_range(1..=4);
        let mut c = Circuit::new(paths.iter().copied(), spins);
        if rng.gen() {
            c.input = Some(qudit_cnot::state::PhotonMode {
                path: pick(rng, &paths),
                pol: if rng.gen() { Polarization::H } else { Polarization::V },
            });
        }
        let mut stage = 0;
        for _ in 0..rng.gen_range(0..25) {
            if rng.gen_ratio(1, 6) {
                stage += rng.gen_range(1..3);
                c.instructions.push(Instruction::Stage(stage));
            } else {
                c.push(element(rng, &paths, spins));
            }
        }
        let mut ports: Vec<(PathId, Polarization)> = paths
            .iter()
            .flat_map(|&p| [(p, Polarization::H), (p, Polarization::V)])
            .collect();
        ports.shuffle(rng);
        for (i, (path, pol)) in ports.into_iter().take(rng.gen_range(0..4)).enumerate() {
            c.push(Element::Detect {
                path,
                pol,
                name: format!("D{i}"),
            });
        }
        if !validate(&c).iter().any(|d| d.is_error()) {
            return c;
        }
    }
}
