//! Circuit elements as linear maps on [`HybridState`].
//!
//! Passive optics are lossless. The only lossy element is [`Element::CavityScatter`]
//! when `|r| < 1`. Only H light couples to a cavity; V amplitude reaching one
//! is rejected by [`apply_element`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::state::{AmplitudeVector, Complex, HybridState, PathId, PhotonMode, Polarization, SpinConfig, SPIN_CONFIGS};

/// Amplitude of V light on a cavity path above which scattering is refused.
pub const CAVITY_V_TOL: f64 = 1e-12;

/// Which matrix a `pz` plate applies to its path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseFlip {
    /// `-|H⟩⟨H| - |V⟩⟨V|`: a π phase on the whole path.
    Literal,
    /// `|H⟩⟨H| - |V⟩⟨V|`.
    Conventional,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    /// `N_up → (N_up + N_down)/√2`, `N_down → (N_up − N_down)/√2`.
    BeamSplitter { up: PathId, down: PathId },
    /// Transmits H and reflects V. H entering `in_a` leaves on `out_t` and V on
    /// `out_r`; the second input is mirrored. See [`pbs_routes`] for the
    /// full port permutation.
    PolarizingBeamSplitter {
        in_a: PathId,
        in_b: Option<PathId>,
        out_t: PathId,
        out_r: PathId,
    },
    /// Hadamard on polarization.
    QuarterWave { path: PathId },
    /// `|H⟩ ↔ |V⟩`.
    HalfWaveX { path: PathId },
    PhasePlate { path: PathId, kind: PhaseFlip },
    /// H light on `path` picks up `r_down` or `r_up` depending on spin `spin`.
    CavityScatter {
        spin: usize,
        path: PathId,
        r_down: Complex,
        r_up: Complex,
    },
    SpinHadamard { spin: usize },
    /// `sign · (|↓⟩⟨↓| − |↑⟩⟨↑|)` on one spin.
    SpinZ { spin: usize, sign: i8 },
    /// Terminal detector port; acts as the identity on the state.
    Detect {
        path: PathId,
        pol: Polarization,
        name: String,
    },
}

impl Element {
    pub fn cavity(spin: usize, path: u32) -> Self {
        Element::CavityScatter {
            spin,
            path: PathId(path),
            r_down: Complex::new(1.0, 0.0),
            r_up: Complex::new(-1.0, 0.0),
        }
    }

    /// Paths the element touches.
    pub fn paths(&self) -> Vec<PathId> {
        match self {
            Element::BeamSplitter { up, down } => vec![*up, *down],
            Element::PolarizingBeamSplitter {
                in_a,
                in_b,
                out_t,
                out_r,
            } => {
                let mut v = vec![*in_a];
                v.extend(in_b);
                v.extend([*out_t, *out_r]);
                v
            }
            Element::QuarterWave { path }
            | Element::HalfWaveX { path }
            | Element::PhasePlate { path, .. }
            | Element::CavityScatter { path, .. }
            | Element::Detect { path, .. } => vec![*path],
            Element::SpinHadamard { .. } | Element::SpinZ { .. } => Vec::new(),
        }
    }

    pub fn spin(&self) -> Option<usize> {
        match self {
            Element::CavityScatter { spin, .. }
            | Element::SpinHadamard { spin }
            | Element::SpinZ { spin, .. } => Some(*spin),
            _ => None,
        }
    }
}

/// Netlist form of the element (reflection coefficients are not part of it).
impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::BeamSplitter { up, down } => write!(f, "bs {up} {down}"),
            Element::PolarizingBeamSplitter {
                in_a,
                in_b,
                out_t,
                out_r,
            } => match in_b {
                Some(b) => write!(f, "pbs {in_a} {b} -> {out_t} {out_r}"),
                None => write!(f, "pbs {in_a} -> {out_t} {out_r}"),
            },
            Element::QuarterWave { path } => write!(f, "qwp {path}"),
            Element::HalfWaveX { path } => write!(f, "x {path}"),
            Element::PhasePlate { path, kind } => match kind {
                PhaseFlip::Literal => write!(f, "pz {path}"),
                PhaseFlip::Conventional => write!(f, "pz {path} conventional"),
            },
            Element::CavityScatter { spin, path, .. } => write!(f, "cavity {spin} {path}"),
            Element::SpinHadamard { spin } => write!(f, "spinh {spin}"),
            Element::SpinZ { spin, sign } => {
                write!(f, "spinz {spin} {}", if *sign < 0 { '-' } else { '+' })
            }
            Element::Detect { path, pol, name } => write!(f, "detect {path} {pol} {name}"),
        }
    }
}

/// Second input port of a PBS when the netlist leaves it implicit: the
/// reflected output if that differs from `in_a`, otherwise the transmitted one.
pub fn implicit_second_input(in_a: PathId, out_t: PathId, out_r: PathId) -> PathId {
    if out_r != in_a {
        out_r
    } else {
        out_t
    }
}

/// Full mode permutation `(source, destination)` realized by a PBS.
///
/// Inputs `{a, b}` map to outputs `{t, r}`. Output labels that are not also
/// inputs are vacated into the input labels that are not outputs, in port
/// order, so the map is a permutation of the modes on all ports involved.
pub fn pbs_routes(in_a: PathId, in_b: Option<PathId>, out_t: PathId, out_r: PathId) -> Result<Vec<(PhotonMode, PhotonMode)>> {
    use Polarization::{H, V};
    let in_b = in_b.unwrap_or_else(|| implicit_second_input(in_a, out_t, out_r));
    if in_a == in_b || out_t == out_r {
        return Err(Error::InvalidParameter(format!(
            "pbs ports must be distinct (inputs {in_a}, {in_b}; outputs {out_t}, {out_r})"
        )));
    }
    let m = |path, pol| PhotonMode { path, pol };
    let mut routes = vec![
        (m(in_a, H), m(out_t, H)),
        (m(in_a, V), m(out_r, V)),
        (m(in_b, H), m(out_r, H)),
        (m(in_b, V), m(out_t, V)),
    ];
    let fresh_out = [out_t, out_r].into_iter().filter(|o| *o != in_a && *o != in_b);
    let freed_in: Vec<PathId> = [in_a, in_b]
        .into_iter()
        .filter(|i| *i != out_t && *i != out_r)
        .collect();
    for (o, i) in fresh_out.zip(freed_in) {
        routes.push((m(o, H), m(i, H)));
        routes.push((m(o, V), m(i, V)));
    }
    Ok(routes)
}

fn require_spin(spin: usize) -> Result<()> {
    if (1..=4).contains(&spin) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("spin index {spin} is not in 1..=4")))
    }
}

/// Applies `e` to `state`, refusing V light at a cavity.
pub fn apply_element(state: &HybridState, e: &Element) -> Result<HybridState> {
    if let Element::CavityScatter { path, .. } = e {
        let v = state.block(PhotonMode {
            path: *path,
            pol: Polarization::V,
        })?;
        let amplitude = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitude >= CAVITY_V_TOL {
            return Err(Error::VerticalAtCavity {
                index: None,
                element: e.to_string(),
                path: *path,
                amplitude,
            });
        }
    }
    apply_linear(state, e)
}

/// The linear map of `e` without the cavity polarization check; V light on a
/// cavity path passes unchanged.
pub fn apply_linear(state: &HybridState, e: &Element) -> Result<HybridState> {
    let mut out = state.clone();
    let h = |path| PhotonMode { path, pol: Polarization::H };
    let v = |path| PhotonMode { path, pol: Polarization::V };
    match e {
        Element::BeamSplitter { up, down } => {
            if up == down {
                return Err(Error::InvalidParameter(format!("bs {up} {down}: paths must differ")));
            }
            for pol in [Polarization::H, Polarization::V] {
                let u = state.block(PhotonMode { path: *up, pol })?;
                let d = state.block(PhotonMode { path: *down, pol })?;
                let (sum, diff): (Vec<_>, Vec<_>) = u
                    .iter()
                    .zip(d)
                    .map(|(a, b)| ((a + b) * FRAC_1_SQRT_2, (a - b) * FRAC_1_SQRT_2))
                    .unzip();
                out.block_mut(PhotonMode { path: *up, pol })?.copy_from_slice(&sum);
                out.block_mut(PhotonMode { path: *down, pol })?.copy_from_slice(&diff);
            }
        }
        Element::PolarizingBeamSplitter {
            in_a,
            in_b,
            out_t,
            out_r,
        } => {
            let routes = pbs_routes(*in_a, *in_b, *out_t, *out_r)?;
            for (src, _) in &routes {
                out.block_mut(*src)?.fill(Complex::new(0.0, 0.0));
            }
            for (src, dst) in &routes {
                let block = state.block(*src)?.to_vec();
                out.block_mut(*dst)?.copy_from_slice(&block);
            }
        }
        Element::QuarterWave { path } => {
            let hb = state.block(h(*path))?;
            let vb = state.block(v(*path))?;
            let (nh, nv): (Vec<_>, Vec<_>) = hb
                .iter()
                .zip(vb)
                .map(|(a, b)| ((a + b) * FRAC_1_SQRT_2, (a - b) * FRAC_1_SQRT_2))
                .unzip();
            out.block_mut(h(*path))?.copy_from_slice(&nh);
            out.block_mut(v(*path))?.copy_from_slice(&nv);
        }
        Element::HalfWaveX { path } => {
            let hb = state.block(h(*path))?.to_vec();
            let vb = state.block(v(*path))?.to_vec();
            out.block_mut(h(*path))?.copy_from_slice(&vb);
            out.block_mut(v(*path))?.copy_from_slice(&hb);
        }
        Element::PhasePlate { path, kind } => {
            if *kind == PhaseFlip::Literal {
                out.block_mut(h(*path))?.iter_mut().for_each(|a| *a = -*a);
            }
            out.block_mut(v(*path))?.iter_mut().for_each(|a| *a = -*a);
        }
        Element::CavityScatter {
            spin,
            path,
            r_down,
            r_up,
        } => {
            require_spin(*spin)?;
            let mask = SpinConfig::spin_mask(*spin);
            for (i, a) in out.block_mut(h(*path))?.iter_mut().enumerate() {
                *a *= if i & mask == 0 { *r_down } else { *r_up };
            }
        }
        Element::SpinHadamard { spin } => {
            require_spin(*spin)?;
            let mask = SpinConfig::spin_mask(*spin);
            for block in out.amplitudes_mut().chunks_exact_mut(SPIN_CONFIGS) {
                for lo in (0..SPIN_CONFIGS).filter(|i| i & mask == 0) {
                    let hi = lo | mask;
                    let (a, b) = (block[lo], block[hi]);
                    block[lo] = (a + b) * FRAC_1_SQRT_2;
                    block[hi] = (a - b) * FRAC_1_SQRT_2;
                }
            }
        }
        Element::SpinZ { spin, sign } => {
            require_spin(*spin)?;
            let mask = SpinConfig::spin_mask(*spin);
            let s = if *sign < 0 { -1.0 } else { 1.0 };
            for block in out.amplitudes_mut().chunks_exact_mut(SPIN_CONFIGS) {
                for (i, a) in block.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { s } else { -s };
                }
            }
        }
        Element::Detect { path, .. } => {
            state.path_index(*path)?;
        }
    }
    Ok(out)
}

/// Dense matrix of `e` on the full basis spanned by `paths`.
///
/// Columns follow [`HybridState`] storage order. Cavities are built with
/// [`apply_linear`], so V light on a cavity path is the identity.
pub fn element_matrix(e: &Element, paths: &[PathId]) -> Result<DMatrix<Complex>> {
    let zero = HybridState::zeros(paths.iter().copied());
    let dim = zero.dim();
    let mut m = DMatrix::from_element(dim, dim, Complex::new(0.0, 0.0));
    for col in 0..dim {
        let mut unit = zero.clone();
        unit.amplitudes_mut()[col] = Complex::new(1.0, 0.0);
        let image = apply_linear(&unit, e)?;
        for (row, a) in image.amplitudes().iter().enumerate() {
            m[(row, col)] = *a;
        }
    }
    Ok(m)
}
