//! Running the gate: staged evolution, detection and feed-forward.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use crate::cavity::CavityParams;
use crate::circuit::{ensure_valid, Circuit, Instruction};
use crate::error::{Error, Result};
use crate::metrics::ideal_cnot44;
use crate::optics::apply_element;
use crate::sampling::{random_qudit, seeded};
use crate::state::{
    hybrid_distance, prepare_initial, state_distance, Complex, HybridState,
    PhotonMode, Polarization, QuditAmplitudes, SpinConfig, SpinState, SPIN_CONFIGS,
};

/// Distance below which a simulated stage counts as matching its oracle.
pub const CHECKPOINT_TOL: f64 = 1e-10;

/// The four detectors of the built-in network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Detector {
    #[serde(rename = "D_H1")]
    DH1,
    #[serde(rename = "D_V1")]
    DV1,
    #[serde(rename = "D_H2")]
    DH2,
    #[serde(rename = "D_V2")]
    DV2,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::DH1, Detector::DV1, Detector::DH2, Detector::DV2];

    pub fn name(self) -> &'static str {
        match self {
            Detector::DH1 => "D_H1",
            Detector::DV1 => "D_V1",
            Detector::DH2 => "D_H2",
            Detector::DV2 => "D_V2",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Relative sign of the control level `c` in this detector's branch.
    fn sign(self, c: usize) -> f64 {
        let minus = match self {
            Detector::DH1 => false,
            Detector::DV1 => c >= 2,
            Detector::DH2 => c % 2 == 1,
            Detector::DV2 => c == 1 || c == 2,
        };
        if minus {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown detector `{s}`")))
    }
}

/// Spin state heralded by `detector` under ideal reflections.
///
/// `D_H1` gives the CNOT output itself; the other three carry a sign on some
/// control levels.
pub fn branch_state(detector: Detector, control: &QuditAmplitudes, target: &QuditAmplitudes) -> SpinState {
    let mut s = SpinState::zero();
    for c in 0..4 {
        for t in 0..4 {
            let (_, t_out) = ideal_cnot44(c, t);
            s.0[SpinConfig::from_qudits(c, t_out).index()] +=
                detector.sign(c) * control.level(c) * target.level(t);
        }
    }
    s
}

const CORRECTIONS: [&[usize]; 4] = [&[], &[1], &[2], &[1, 2]];

fn apply_corrections(spins: &[usize], raw: &SpinState) -> SpinState {
    spins.iter().fold(*raw, |s, &k| s.apply_z(k))
}

/// Spins that receive a Z correction after `detector` fires.
///
/// Found once by trying every product of Z on spins 1 and 2 against the
/// heralded branch states for a batch of random inputs.
pub fn feed_forward_spins(detector: Detector) -> &'static [usize] {
    static TABLE: OnceLock<[usize; 4]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut rng = seeded(0x5eed_f00d);
        let inputs: Vec<_> = (0..8)
            .map(|_| (random_qudit(&mut rng), random_qudit(&mut rng)))
            .collect();
        Detector::ALL.map(|d| {
            CORRECTIONS
                .iter()
                .position(|spins| {
                    inputs.iter().all(|(a, g)| {
                        let fixed = apply_corrections(spins, &branch_state(d, a, g));
                        let want = branch_state(Detector::DH1, a, g);
                        state_distance(&fixed, &want).is_ok_and(|x| x < 1e-12)
                    })
                })
                .expect("some Z correction restores every branch")
        })
    });
    CORRECTIONS[table[detector.index()]]
}

pub fn feed_forward(detector: Detector, raw: &SpinState) -> SpinState {
    apply_corrections(feed_forward_spins(detector), raw)
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeBranch {
    /// Detector name as declared in the circuit.
    pub detector: String,
    pub probability: f64,
    /// Unnormalized conditional spin state; its squared norm is `probability`.
    pub raw_spin: SpinState,
    pub corrected_spin: SpinState,
}

#[derive(Clone, Debug)]
pub struct StageCheckpoint {
    pub stage: usize,
    pub expected: HybridState,
    pub observed: HybridState,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub control: QuditAmplitudes,
    pub target: QuditAmplitudes,
    pub branches: Vec<OutcomeBranch>,
    /// Stages 0 through 6; empty unless the circuit carries all six stage
    /// markers and every cavity is ideal.
    pub checkpoints: Vec<StageCheckpoint>,
    pub loss: f64,
}

impl ProtocolResult {
    pub fn detection_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn checkpoint_distances(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.distance).collect()
    }
}

fn is_ideal(params: &[CavityParams; 4]) -> bool {
    params.iter().all(|p| {
        p.reflections().is_ok_and(|(d, u)| {
            (d - Complex::new(1.0, 0.0)).norm() < 1e-12 && (u + Complex::new(1.0, 0.0)).norm() < 1e-12
        })
    })
}

fn has_all_stages(circuit: &Circuit) -> bool {
    circuit.stages() == [1, 2, 3, 4, 5, 6]
}

/// Runs the circuit on `control ⊗ target` and measures the photon.
pub fn run_protocol(
    circuit: &Circuit,
    params: &[CavityParams; 4],
    control: &QuditAmplitudes,
    target: &QuditAmplitudes,
) -> Result<ProtocolResult> {
    ensure_valid(circuit)?;
    run_unchecked(circuit, params, control, target)
}

fn run_unchecked(
    circuit: &Circuit,
    params: &[CavityParams; 4],
    control: &QuditAmplitudes,
    target: &QuditAmplitudes,
) -> Result<ProtocolResult> {
    let input = circuit
        .input_mode()
        .ok_or_else(|| Error::InvalidParameter("circuit declares no paths".into()))?;
    let mut state = prepare_initial(circuit.paths.iter().copied(), control, target, input)?;
    let with_checkpoints = has_all_stages(circuit) && is_ideal(params);
    let mut snapshots = Vec::new();
    if with_checkpoints {
        snapshots.push(state.clone());
    }
    let mut element_index = 0;
    for inst in circuit.bind(params)? {
        match inst {
            Instruction::Stage(_) => {
                if with_checkpoints {
                    snapshots.push(state.clone());
                }
            }
            Instruction::Element(e) => {
                state = apply_element(&state, &e).map_err(|err| match err {
                    Error::VerticalAtCavity {
                        element,
                        path,
                        amplitude,
                        ..
                    } => Error::VerticalAtCavity {
                        index: Some(element_index),
                        element,
                        path,
                        amplitude,
                    },
                    other => other,
                })?;
                element_index += 1;
            }
        }
    }

    let branches = circuit
        .detectors()
        .into_iter()
        .map(|(name, mode)| {
            let (probability, raw_spin) = state.project(mode)?;
            let corrected_spin = match name.parse::<Detector>() {
                Ok(d) => feed_forward(d, &raw_spin),
                Err(_) => raw_spin,
            };
            Ok(OutcomeBranch {
                detector: name,
                probability,
                raw_spin,
                corrected_spin,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = 1.0 - branches.iter().map(|b| b.probability).sum::<f64>();

    let mut checkpoints = Vec::new();
    for (stage, observed) in snapshots.into_iter().enumerate() {
        let expected = checkpoint_expected(stage, control, target, circuit)?;
        let distance = hybrid_distance(&expected, &observed)?;
        checkpoints.push(StageCheckpoint {
            stage,
            expected,
            observed,
            distance,
        });
    }

    Ok(ProtocolResult {
        control: *control,
        target: *target,
        branches,
        checkpoints,
        loss,
    })
}

/// Builds the analytic intermediate states on the circuit's path set.
struct Oracle<'a> {
    stage: usize,
    alpha: [Complex; 4],
    state: HybridState,
    circuit: &'a Circuit,
}

/// Target amplitudes `g` (highest level first) relabelled so that the `i`-th
/// entry lands on level `perm[i]`.
fn relabel(g: [Complex; 4], perm: [usize; 4]) -> [Complex; 4] {
    let mut v = [Complex::new(0.0, 0.0); 4];
    for (gi, &t) in g.iter().zip(&perm) {
        v[t] += gi;
    }
    v
}

/// Keeps the target levels 3 and 1 (spin 4 up).
fn odd_levels(g: [Complex; 4]) -> [Complex; 4] {
    let z = Complex::new(0.0, 0.0);
    [g[0], z, g[2], z]
}

/// Keeps the target levels 2 and 0 (spin 4 down).
fn even_levels(g: [Complex; 4]) -> [Complex; 4] {
    let z = Complex::new(0.0, 0.0);
    [z, g[1], z, g[3]]
}

const KEEP: [usize; 4] = [3, 2, 1, 0];
const FLIP_SPIN3: [usize; 4] = [2, 3, 0, 1];

impl Oracle<'_> {
    /// Adds `coef · |c⟩ ⊗ Σ_t tv[t] |t⟩` on `mode`; `c` and `tv` are indexed by
    /// level.
    fn put(&mut self, mode: PhotonMode, c: usize, coef: Complex, tv: [Complex; 4]) -> Result<()> {
        let offset = self
            .state
            .block_offset(mode)
            .map_err(|_| Error::Checkpoint(self.stage, format!("circuit has no path {}", mode.path)))?;
        let amps = self.state.amplitudes_mut();
        for (t, a) in tv.iter().enumerate() {
            amps[offset + SpinConfig::from_qudits(c, t).index()] += coef * a;
        }
        Ok(())
    }

    fn h(&mut self, path: u32, c: usize, sign: f64, tv: [Complex; 4]) -> Result<()> {
        let coef = self.alpha[3 - c] * sign;
        self.put(PhotonMode::new(path, Polarization::H), c, coef, tv)
    }

    fn v(&mut self, path: u32, c: usize, sign: f64, tv: [Complex; 4]) -> Result<()> {
        let coef = self.alpha[3 - c] * sign;
        self.put(PhotonMode::new(path, Polarization::V), c, coef, tv)
    }

    fn detector(&self, d: Detector) -> Result<PhotonMode> {
        self.circuit
            .detector(d.name())
            .ok_or_else(|| Error::Checkpoint(self.stage, format!("circuit has no detector {d}")))
    }
}

/// Analytic state after `stage` (0 = prepared input, 6 = just before
/// detection) for ideal reflections.
pub fn checkpoint_expected(
    stage: usize,
    control: &QuditAmplitudes,
    target: &QuditAmplitudes,
    circuit: &Circuit,
) -> Result<HybridState> {
    if stage > 6 {
        return Err(Error::Checkpoint(stage, "stages run from 0 to 6".into()));
    }
    if stage == 0 {
        let input = circuit
            .input_mode()
            .ok_or_else(|| Error::Checkpoint(0, "circuit declares no paths".into()))?;
        return prepare_initial(circuit.paths.iter().copied(), control, target, input);
    }
    let g = target.descending();
    let mut o = Oracle {
        stage,
        alpha: control.descending(),
        state: HybridState::zeros(circuit.paths.iter().copied()),
        circuit,
    };
    let all = relabel(g, KEEP);
    match stage {
        1 => {
            for (c, p) in [(3, 5), (2, 6), (1, 4), (0, 3)] {
                o.h(p, c, 1.0, all)?;
            }
        }
        2 => {
            let flipped = relabel(g, FLIP_SPIN3);
            o.h(5, 3, 1.0, flipped)?;
            o.h(6, 2, 1.0, all)?;
            o.h(4, 1, 1.0, flipped)?;
            o.h(3, 0, 1.0, all)?;
        }
        3 => {
            for (c, p) in [(3, 5), (1, 4)] {
                o.h(p, c, 1.0, relabel(odd_levels(g), FLIP_SPIN3))?;
                o.v(p, c, -1.0, relabel(even_levels(g), FLIP_SPIN3))?;
            }
            o.h(6, 2, 1.0, all)?;
            o.h(3, 0, 1.0, all)?;
        }
        4 => {
            o.h(5, 3, 1.0, relabel(odd_levels(g), FLIP_SPIN3))?;
            o.v(5, 3, 1.0, relabel(even_levels(g), [2, 1, 0, 3]))?;
            o.h(6, 2, 1.0, relabel(g, [1, 0, 3, 2]))?;
            o.h(4, 1, 1.0, relabel(odd_levels(g), [0, 3, 2, 1]))?;
            o.v(4, 1, -1.0, relabel(even_levels(g), FLIP_SPIN3))?;
            o.h(3, 0, 1.0, all)?;
        }
        5 => {
            o.v(8, 3, 1.0, relabel(g, [2, 1, 0, 3]))?;
            o.h(8, 2, 1.0, relabel(g, [1, 0, 3, 2]))?;
            o.v(7, 1, 1.0, relabel(g, [0, 3, 2, 1]))?;
            o.h(7, 0, 1.0, all)?;
        }
        _ => {
            for d in Detector::ALL {
                let mode = o.detector(d)?;
                for c in 0..4 {
                    let tv = relabel(g, [(c + 3) % 4, (c + 2) % 4, (c + 1) % 4, c]);
                    let coef = o.alpha[3 - c] * (0.5 * d.sign(c));
                    o.put(mode, c, coef, tv)?;
                }
            }
        }
    }
    Ok(o.state)
}

/// Outcome distribution for one computational-basis input.
#[derive(Clone, Debug, Serialize)]
pub struct BasisRun {
    pub control: usize,
    pub target: usize,
    pub branches: Vec<BranchDistribution>,
    pub loss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchDistribution {
    pub detector: String,
    pub probability: f64,
    /// Probability of each basis output (by spin-configuration index) in
    /// this branch after feed-forward; sums to `probability`.
    pub outputs: [f64; SPIN_CONFIGS],
}

impl BasisRun {
    /// Probability of each basis output summed over branches.
    pub fn output_distribution(&self) -> [f64; SPIN_CONFIGS] {
        let mut out = [0.0; SPIN_CONFIGS];
        for b in &self.branches {
            for (o, p) in out.iter_mut().zip(&b.outputs) {
                *o += p;
            }
        }
        out
    }
}

/// Runs every computational-basis input, ordered by control then target.
pub fn gate_action(circuit: &Circuit, params: &[CavityParams; 4]) -> Result<Vec<BasisRun>> {
    ensure_valid(circuit)?;
    let mut runs = Vec::with_capacity(SPIN_CONFIGS);
    for cfg in SpinConfig::all() {
        let (c, t) = (cfg.control(), cfg.target());
        let r = run_unchecked(circuit, params, &QuditAmplitudes::basis(c), &QuditAmplitudes::basis(t))?;
        runs.push(BasisRun {
            control: c,
            target: t,
            branches: r
                .branches
                .into_iter()
                .map(|b| BranchDistribution {
                    detector: b.detector,
                    probability: b.probability,
                    outputs: b.corrected_spin.probabilities(),
                })
                .collect(),
            loss: r.loss,
        });
    }
    Ok(runs)
}

/// Runs `circuit` on many inputs without re-validating it each time.
pub fn run_batch<'a>(
    circuit: &Circuit,
    params: &[CavityParams; 4],
    inputs: impl IntoIterator<Item = &'a (QuditAmplitudes, QuditAmplitudes)>,
) -> Result<Vec<ProtocolResult>> {
    ensure_valid(circuit)?;
    inputs
        .into_iter()
        .map(|(a, g)| run_unchecked(circuit, params, a, g))
        .collect()
}

/// Results of the ideal-reflection self-check.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    /// Largest distance seen at each of stages 0..=6.
    pub stage_max: Vec<f64>,
    /// Largest distance between a corrected heralded branch and the CNOT
    /// output, over all trials and detectors.
    pub feed_forward_max: f64,
    /// Largest deviation from 1 of the correct-output probability in any
    /// branch over the 16 basis inputs.
    pub truth_table_max_error: f64,
    /// Largest `|Σ p − 1|` over all trials.
    pub norm_max_error: f64,
}

impl VerifyReport {
    pub fn stages_passed(&self) -> usize {
        self.stage_max.iter().filter(|d| **d < CHECKPOINT_TOL).count()
    }

    pub fn passed(&self) -> bool {
        self.stage_max.len() == 7
            && self.stages_passed() == 7
            && self.feed_forward_max < CHECKPOINT_TOL
            && self.truth_table_max_error < CHECKPOINT_TOL
            && self.norm_max_error < 1e-12
    }
}

/// Checkpoints, feed-forward and truth table under ideal reflections for
/// `trials` random inputs plus the uniform one.
pub fn verify(circuit: &Circuit, trials: usize, seed: u64) -> Result<VerifyReport> {
    if !has_all_stages(circuit) {
        return Err(Error::Checkpoint(0, "circuit lacks stage markers 1 to 6".into()));
    }
    let params = [CavityParams::ideal(); 4];
    let mut rng = seeded(seed);
    let mut inputs: Vec<(QuditAmplitudes, QuditAmplitudes)> =
        vec![(QuditAmplitudes::uniform(), QuditAmplitudes::uniform())];
    inputs.extend((0..trials).map(|_| (random_qudit(&mut rng), random_qudit(&mut rng))));

    let mut stage_max = vec![0.0_f64; 7];
    let mut feed_forward_max = 0.0_f64;
    let mut norm_max_error = 0.0_f64;
    for r in run_batch(circuit, &params, &inputs)? {
        for cp in &r.checkpoints {
            stage_max[cp.stage] = stage_max[cp.stage].max(cp.distance);
        }
        let ideal = SpinState::product(&r.control, &r.target);
        let want = cnot_output(&ideal);
        for b in &r.branches {
            let d = b
                .corrected_spin
                .normalized()
                .map_or(f64::INFINITY, |s| state_distance(&s, &want).unwrap_or(f64::INFINITY));
            feed_forward_max = feed_forward_max.max(d);
        }
        norm_max_error = norm_max_error.max(r.loss.abs());
    }

    let mut truth_table_max_error = 0.0_f64;
    for run in gate_action(circuit, &params)? {
        let (c, t) = ideal_cnot44(run.control, run.target);
        let want = SpinConfig::from_qudits(c, t).index();
        for b in &run.branches {
            let p = if b.probability > 0.0 {
                b.outputs[want] / b.probability
            } else {
                0.0
            };
            truth_table_max_error = truth_table_max_error.max((p - 1.0).abs());
        }
    }

    Ok(VerifyReport {
        trials: inputs.len(),
        stage_max,
        feed_forward_max,
        truth_table_max_error,
        norm_max_error,
    })
}

/// Ideal gate applied to a spin register.
pub fn cnot_output(input: &SpinState) -> SpinState {
    let mut out = SpinState::zero();
    for cfg in SpinConfig::all() {
        let (c, t) = ideal_cnot44(cfg.control(), cfg.target());
        out.0[SpinConfig::from_qudits(c, t).index()] += input.get(cfg);
    }
    out
}
