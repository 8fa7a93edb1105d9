//! Joint photon–spin amplitude vectors.
//!
//! A [`HybridState`] is a dense complex vector over `(path, polarization,
//! spin configuration)`. The four spins are two-level systems; spins 1 and 2
//! carry the control qudit and spins 3 and 4 the target qudit, with `↓ ↦ 0`
//! and `↑ ↦ 1`, so `c = 2·s1 + s2` and `t = 2·s3 + s4`.
//!
//! States may be sub-normalized: missing norm is photon loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

/// Number of spin configurations of the four spins.
pub const SPIN_CONFIGS: usize = 16;

/// Tolerance used when checking that user amplitudes are normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathId(pub u32);

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

impl FromStr for Polarization {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "H" | "h" => Ok(Polarization::H),
            "V" | "v" => Ok(Polarization::V),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhotonMode {
    pub path: PathId,
    pub pol: Polarization,
}

impl PhotonMode {
    pub fn new(path: u32, pol: Polarization) -> Self {
        PhotonMode {
            path: PathId(path),
            pol,
        }
    }
}

impl fmt::Display for PhotonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.path, self.pol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub fn bit(self) -> usize {
        match self {
            Spin::Down => 0,
            Spin::Up => 1,
        }
    }
}

/// One of the 16 configurations of spins 1–4, stored as `4·c + t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinConfig(u8);

impl SpinConfig {
    pub fn from_index(index: usize) -> Self {
        assert!(index < SPIN_CONFIGS, "spin configuration index {index} out of range");
        SpinConfig(index as u8)
    }

    pub fn from_qudits(control: usize, target: usize) -> Self {
        assert!(control < 4 && target < 4, "qudit levels are 0..4");
        SpinConfig((4 * control + target) as u8)
    }

    pub fn from_spins(spins: [Spin; 4]) -> Self {
        let idx = spins.iter().fold(0, |acc, s| (acc << 1) | s.bit());
        SpinConfig(idx as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn control(self) -> usize {
        self.index() >> 2
    }

    pub fn target(self) -> usize {
        self.index() & 3
    }

    /// Bit mask selecting spin `k` (1-based) inside the configuration index.
    pub fn spin_mask(k: usize) -> usize {
        debug_assert!((1..=4).contains(&k));
        1 << (4 - k)
    }

    pub fn spin(self, k: usize) -> Spin {
        if self.index() & Self::spin_mask(k) == 0 {
            Spin::Down
        } else {
            Spin::Up
        }
    }

    pub fn all() -> impl Iterator<Item = SpinConfig> {
        (0..SPIN_CONFIGS).map(SpinConfig::from_index)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}_c, {}_t⟩", self.control(), self.target())
    }
}

/// Amplitudes of a single four-level qudit.
///
/// Stored in ascending level order. The protocol literature writes qudit
/// states in descending order (`a1|3⟩ + a2|2⟩ + a3|1⟩ + a4|0⟩`); use
/// [`QuditAmplitudes::from_descending`] for that convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuditAmplitudes([Complex; 4]);

impl QuditAmplitudes {
    pub fn from_ascending(amps: [Complex; 4]) -> Self {
        QuditAmplitudes(amps)
    }

    pub fn from_descending(amps: [Complex; 4]) -> Self {
        let [a1, a2, a3, a4] = amps;
        QuditAmplitudes([a4, a3, a2, a1])
    }

    pub fn from_descending_real(amps: [f64; 4]) -> Self {
        Self::from_descending(amps.map(|a| Complex::new(a, 0.0)))
    }

    pub fn basis(level: usize) -> Self {
        let mut amps = [Complex::new(0.0, 0.0); 4];
        amps[level] = Complex::new(1.0, 0.0);
        QuditAmplitudes(amps)
    }

    pub fn uniform() -> Self {
        QuditAmplitudes([Complex::new(0.5, 0.0); 4])
    }

    /// Amplitude of `|level⟩`.
    pub fn level(&self, level: usize) -> Complex {
        self.0[level]
    }

    pub fn ascending(&self) -> [Complex; 4] {
        self.0
    }

    pub fn descending(&self) -> [Complex; 4] {
        let [a0, a1, a2, a3] = self.0;
        [a3, a2, a1, a0]
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sq().sqrt();
        (n > 0.0 && n.is_finite()).then(|| QuditAmplitudes(self.0.map(|a| a / n)))
    }

    fn check_normalized(&self, what: &'static str) -> Result<()> {
        let norm_sq = self.norm_sq();
        if (norm_sq - 1.0).abs() > NORMALIZATION_TOL || !norm_sq.is_finite() {
            return Err(Error::NotNormalized { what, norm_sq });
        }
        Ok(())
    }
}

/// Anything that exposes a flat amplitude vector.
pub trait AmplitudeVector {
    fn amplitudes(&self) -> &[Complex];

    fn norm_sq(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Joint state of the photon and the four spins.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    paths: Vec<PathId>,
    amps: Vec<Complex>,
}

impl HybridState {
    /// The zero vector over the given path set (sorted, deduplicated).
    pub fn zeros(paths: impl IntoIterator<Item = PathId>) -> Self {
        let mut paths: Vec<PathId> = paths.into_iter().collect();
        paths.sort_unstable();
        paths.dedup();
        let amps = vec![Complex::new(0.0, 0.0); paths.len() * 2 * SPIN_CONFIGS];
        HybridState { paths, amps }
    }

    pub fn paths(&self) -> &[PathId] {
        &self.paths
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn path_index(&self, path: PathId) -> Result<usize> {
        self.paths
            .binary_search(&path)
            .map_err(|_| Error::UnknownPath(path))
    }

    /// Offset of the 16-entry spin block belonging to `mode`.
    pub fn block_offset(&self, mode: PhotonMode) -> Result<usize> {
        Ok((self.path_index(mode.path)? * 2 + mode.pol.index()) * SPIN_CONFIGS)
    }

    /// All modes of the basis in storage order.
    pub fn modes(&self) -> impl Iterator<Item = PhotonMode> + '_ {
        self.paths.iter().flat_map(|&path| {
            [Polarization::H, Polarization::V]
                .into_iter()
                .map(move |pol| PhotonMode { path, pol })
        })
    }

    pub fn get(&self, mode: PhotonMode, cfg: SpinConfig) -> Result<Complex> {
        Ok(self.amps[self.block_offset(mode)? + cfg.index()])
    }

    pub fn set(&mut self, mode: PhotonMode, cfg: SpinConfig, value: Complex) -> Result<()> {
        let off = self.block_offset(mode)?;
        self.amps[off + cfg.index()] = value;
        Ok(())
    }

    pub fn add(&mut self, mode: PhotonMode, cfg: SpinConfig, value: Complex) -> Result<()> {
        let off = self.block_offset(mode)?;
        self.amps[off + cfg.index()] += value;
        Ok(())
    }

    /// Spin amplitudes carried by one photon mode.
    pub fn block(&self, mode: PhotonMode) -> Result<&[Complex]> {
        let off = self.block_offset(mode)?;
        Ok(&self.amps[off..off + SPIN_CONFIGS])
    }

    pub(crate) fn block_mut(&mut self, mode: PhotonMode) -> Result<&mut [Complex]> {
        let off = self.block_offset(mode)?;
        Ok(&mut self.amps[off..off + SPIN_CONFIGS])
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex] {
        &mut self.amps
    }

    pub fn scaled(&self, factor: Complex) -> Self {
        HybridState {
            paths: self.paths.clone(),
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// `a·x + b·y` over a shared basis.
    pub fn linear_combination(a: Complex, x: &Self, b: Complex, y: &Self) -> Result<Self> {
        if x.paths != y.paths {
            return Err(Error::DimensionMismatch(x.dim(), y.dim()));
        }
        Ok(HybridState {
            paths: x.paths.clone(),
            amps: x
                .amps
                .iter()
                .zip(&y.amps)
                .map(|(p, q)| a * p + b * q)
                .collect(),
        })
    }

    /// Probability of finding the photon in `mode`, with the conditional
    /// (unnormalized) spin state left behind.
    pub fn project(&self, mode: PhotonMode) -> Result<(f64, SpinState)> {
        let block = self.block(mode)?;
        let mut spins = [Complex::new(0.0, 0.0); SPIN_CONFIGS];
        spins.copy_from_slice(block);
        let spin = SpinState(spins);
        Ok((spin.norm_sq(), spin))
    }

    /// Total weight sitting on one path, summed over polarizations.
    pub fn path_weight(&self, path: PathId) -> Result<f64> {
        let h = self.block(PhotonMode { path, pol: Polarization::H })?;
        let v = self.block(PhotonMode { path, pol: Polarization::V })?;
        Ok(h.iter().chain(v).map(|a| a.norm_sqr()).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl AmplitudeVector for HybridState {
    fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }
}

/// `|H⟩`-type photon in `mode` times the product of the control and target
/// qudit states.
pub fn prepare_initial(
    paths: impl IntoIterator<Item = PathId>,
    control: &QuditAmplitudes,
    target: &QuditAmplitudes,
    mode: PhotonMode,
) -> Result<HybridState> {
    control.check_normalized("control")?;
    target.check_normalized("target")?;
    let mut state = HybridState::zeros(paths);
    let block = state.block_mut(mode)?;
    for cfg in SpinConfig::all() {
        block[cfg.index()] = control.level(cfg.control()) * target.level(cfg.target());
    }
    Ok(state)
}

/// Result of projecting onto a single detector port.
#[derive(Clone, Debug)]
pub struct Projection {
    pub probability: f64,
    pub conditional: SpinState,
}

impl Projection {
    pub fn renormalized(&self) -> Option<SpinState> {
        self.conditional.normalized()
    }
}

/// Projects onto `mode`, which must be one of `detector_ports`.
pub fn project_detector(
    state: &HybridState,
    mode: PhotonMode,
    detector_ports: &[PhotonMode],
) -> Result<Projection> {
    if !detector_ports.contains(&mode) {
        return Err(Error::NotADetector(mode));
    }
    let (probability, conditional) = state.project(mode)?;
    Ok(Projection {
        probability,
        conditional,
    })
}

/// Spin-only state after the photon has been measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinState(pub [Complex; SPIN_CONFIGS]);

impl SpinState {
    pub fn zero() -> Self {
        SpinState([Complex::new(0.0, 0.0); SPIN_CONFIGS])
    }

    pub fn basis(cfg: SpinConfig) -> Self {
        let mut s = Self::zero();
        s.0[cfg.index()] = Complex::new(1.0, 0.0);
        s
    }

    /// Product state of two qudits.
    pub fn product(control: &QuditAmplitudes, target: &QuditAmplitudes) -> Self {
        let mut s = Self::zero();
        for cfg in SpinConfig::all() {
            s.0[cfg.index()] = control.level(cfg.control()) * target.level(cfg.target());
        }
        s
    }

    pub fn get(&self, cfg: SpinConfig) -> Complex {
        self.0[cfg.index()]
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sq().sqrt();
        (n > 0.0 && n.is_finite()).then(|| SpinState(self.0.map(|a| a / n)))
    }

    /// `|↓⟩⟨↓| − |↑⟩⟨↑|` on spin `k`.
    pub fn apply_z(&self, k: usize) -> Self {
        let mask = SpinConfig::spin_mask(k);
        let mut out = *self;
        for (i, a) in out.0.iter_mut().enumerate() {
            if i & mask != 0 {
                *a = -*a;
            }
        }
        out
    }

    /// `|⟨self|other⟩|²` without normalization.
    pub fn overlap_sq(&self, other: &SpinState) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex>()
            .norm_sqr()
    }

    pub fn probabilities(&self) -> [f64; SPIN_CONFIGS] {
        self.0.map(|a| a.norm_sqr())
    }
}

impl AmplitudeVector for SpinState {
    fn amplitudes(&self) -> &[Complex] {
        &self.0
    }
}

/// Largest entrywise deviation between `a` and `b` once a single global phase
/// has been removed.
///
/// The phase is the one that best aligns `a` onto `b` in the least-squares
/// sense, i.e. the argument of `⟨a|b⟩`. The result is zero exactly when the
/// two vectors agree up to a global phase.
pub fn state_distance<S: AmplitudeVector + ?Sized>(a: &S, b: &S) -> Result<f64> {
    let (xa, xb) = (a.amplitudes(), b.amplitudes());
    if xa.len() != xb.len() {
        return Err(Error::DimensionMismatch(xa.len(), xb.len()));
    }
    let inner: Complex = xa.iter().zip(xb).map(|(p, q)| p.conj() * q).sum();
    let phase = if inner.norm() > 1e-300 {
        inner / inner.norm()
    } else {
        Complex::new(1.0, 0.0)
    };
    Ok(xa
        .iter()
        .zip(xb)
        .map(|(p, q)| (p * phase - q).norm())
        .fold(0.0, f64::max))
}

/// [`state_distance`] for hybrid states, which additionally requires equal
/// path sets.
pub fn hybrid_distance(a: &HybridState, b: &HybridState) -> Result<f64> {
    if a.paths() != b.paths() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    state_distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn paths(list: &[u32]) -> Vec<PathId> {
        list.iter().copied().map(PathId).collect()
    }

    #[test]
    fn config_encoding_matches_qudit_labels() {
        use Spin::*;
        assert_eq!(SpinConfig::from_spins([Down, Down, Down, Down]), SpinConfig::from_qudits(0, 0));
        assert_eq!(SpinConfig::from_spins([Down, Up, Up, Down]), SpinConfig::from_qudits(1, 2));
        assert_eq!(SpinConfig::from_spins([Up, Down, Down, Up]), SpinConfig::from_qudits(2, 1));
        assert_eq!(SpinConfig::from_spins([Up, Up, Up, Up]), SpinConfig::from_qudits(3, 3));
        let cfg = SpinConfig::from_qudits(2, 1);
        assert_eq!(cfg.spin(1), Up);
        assert_eq!(cfg.spin(2), Down);
        assert_eq!(cfg.spin(3), Down);
        assert_eq!(cfg.spin(4), Up);
    }

    #[test]
    fn prepare_basis_case() {
        let e = QuditAmplitudes::from_descending_real([0.0, 0.0, 0.0, 1.0]);
        let mode = PhotonMode::new(1, Polarization::H);
        let s = prepare_initial(paths(&[1, 2]), &e, &e, mode).unwrap();
        assert_eq!(s.get(mode, SpinConfig::from_qudits(0, 0)).unwrap(), c(1.0));
        assert!((s.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prepare_uniform_product() {
        let u = QuditAmplitudes::uniform();
        let mode = PhotonMode::new(1, Polarization::H);
        let s = prepare_initial(paths(&[1]), &u, &u, mode).unwrap();
        for cfg in SpinConfig::all() {
            assert!((s.get(mode, cfg).unwrap() - c(0.25)).norm() < 1e-15);
        }
        let v = PhotonMode::new(1, Polarization::V);
        assert!(s.block(v).unwrap().iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn prepare_descending_order() {
        let control = QuditAmplitudes::from_descending_real([0.6, 0.0, 0.8, 0.0]);
        let target = QuditAmplitudes::from_descending_real([0.0, 1.0, 0.0, 0.0]);
        let mode = PhotonMode::new(3, Polarization::H);
        let s = prepare_initial(paths(&[3]), &control, &target, mode).unwrap();
        assert!((s.get(mode, SpinConfig::from_qudits(3, 2)).unwrap() - c(0.6)).norm() < 1e-15);
        assert!((s.get(mode, SpinConfig::from_qudits(1, 2)).unwrap() - c(0.8)).norm() < 1e-15);
        let nonzero = s.amplitudes().iter().filter(|a| a.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn prepare_rejects_unnormalized() {
        let bad = QuditAmplitudes::from_descending_real([1.0, 1.0, 0.0, 0.0]);
        let ok = QuditAmplitudes::uniform();
        let err = prepare_initial(paths(&[1]), &bad, &ok, PhotonMode::new(1, Polarization::H))
            .unwrap_err();
        match err {
            Error::NotNormalized { norm_sq, .. } => assert!((norm_sq - 2.0).abs() < 1e-12),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn norm_of_zero_and_scaled() {
        let z = HybridState::zeros(paths(&[1, 2]));
        assert_eq!(z.norm_sq(), 0.0);
        let u = QuditAmplitudes::uniform();
        let s = prepare_initial(paths(&[1, 2]), &u, &u, PhotonMode::new(2, Polarization::V)).unwrap();
        assert!((s.scaled(c(0.98)).norm_sq() - 0.9604).abs() < 1e-12);
    }

    #[test]
    fn projection_on_occupied_and_empty_ports() {
        let u = QuditAmplitudes::uniform();
        let m7 = PhotonMode::new(7, Polarization::H);
        let m8 = PhotonMode::new(8, Polarization::V);
        let s = prepare_initial(paths(&[7, 8]), &u, &u, m7).unwrap().scaled(c(0.9));
        let p = project_detector(&s, m7, &[m7, m8]).unwrap();
        assert!((p.probability - s.norm_sq()).abs() < 1e-15);
        assert_eq!(p.conditional.amplitudes(), s.block(m7).unwrap());
        let q = project_detector(&s, m8, &[m7, m8]).unwrap();
        assert_eq!(q.probability, 0.0);
        assert!(q.renormalized().is_none());
        assert!(matches!(
            project_detector(&s, PhotonMode::new(7, Polarization::V), &[m7, m8]),
            Err(Error::NotADetector(_))
        ));
    }

    #[test]
    fn distance_is_phase_blind() {
        let u = QuditAmplitudes::from_descending(
            [Complex::new(0.5, 0.1), c(0.3), Complex::new(0.0, 0.6), c(0.2)],
        )
        .normalized()
        .unwrap();
        let x = SpinState::product(&u, &QuditAmplitudes::uniform());
        assert_eq!(state_distance(&x, &x).unwrap(), 0.0);
        let rotated = SpinState(x.0.map(|a| a * Complex::from_polar(1.0, 1.234)));
        assert!(state_distance(&x, &rotated).unwrap() < 1e-15);
        let e0 = SpinState::basis(SpinConfig::from_index(0));
        let e1 = SpinState::basis(SpinConfig::from_index(1));
        assert!((state_distance(&e0, &e1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_mismatched_bases() {
        let a = HybridState::zeros(paths(&[1]));
        let b = HybridState::zeros(paths(&[1, 2]));
        assert!(matches!(hybrid_distance(&a, &b), Err(Error::DimensionMismatch(32, 64))));
    }

    #[test]
    fn z_on_spin_flips_signs_of_up_components() {
        let s = SpinState::product(&QuditAmplitudes::uniform(), &QuditAmplitudes::uniform());
        let z1 = s.apply_z(1);
        for cfg in SpinConfig::all() {
            let expected = if cfg.spin(1) == Spin::Up { -0.25 } else { 0.25 };
            assert_eq!(z1.get(cfg).re, expected);
        }
        assert_eq!(z1.apply_z(1), s);
    }
}
