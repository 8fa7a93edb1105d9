//! Spin-dependent reflection off a single-sided cavity.
//!
//! The dimensionless parameters `(C, Δ↓, Δ↑, Δc)` are primary. [`PhysicalParams`]
//! maps raw rates and frequencies onto them and also feeds an independent
//! steady-state solve of the cavity/dipole equations of motion.
//!
//! Sign convention of the steady-state solve, in the frame of the input
//! photon frequency `ω`:
//!
//! ```text
//! da/dt  = -[i(ωc - ω) + κ/2] a - g σ- - √κ a_in
//! dσ-/dt = -[i(ωd - ω) + γ/2] σ- - g σz a,     ⟨σz⟩ = -1
//! a_out  = a_in + √κ a
//! ```
//!
//! With this sign pair (`-√κ` drive, `+√κ` output) the steady state reproduces
//! `r_d = 1 - 2(1 + iΔd) / (C + (1 + iΔd)(1 + iΔc))` term for term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Complex, Spin};

const SINGULAR_TOL: f64 = 1e-15;

/// Dimensionless cavity parameters for one spin–cavity unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub cooperativity: f64,
    pub delta_down: f64,
    pub delta_up: f64,
    pub delta_c: f64,
    /// Explicit `(r↓, r↑)`; supersedes the formula when present.
    pub reflection_override: Option<(Complex, Complex)>,
}

impl CavityParams {
    pub fn new(cooperativity: f64, delta_down: f64, delta_up: f64, delta_c: f64) -> Result<Self> {
        if !(cooperativity >= 0.0 && cooperativity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cooperativity must be finite and non-negative, got {cooperativity}"
            )));
        }
        for (name, v) in [("delta_down", delta_down), ("delta_up", delta_up), ("delta_c", delta_c)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(CavityParams {
            cooperativity,
            delta_down,
            delta_up,
            delta_c,
            reflection_override: None,
        })
    }

    /// Parameters that bypass the formula: `r↓` and `r↑` are used verbatim.
    pub fn with_reflections(r_down: Complex, r_up: Complex) -> Self {
        CavityParams {
            cooperativity: 0.0,
            delta_down: 0.0,
            delta_up: 0.0,
            delta_c: 0.0,
            reflection_override: Some((r_down, r_up)),
        }
    }

    /// `r↓ = r`, `r↑ = -r`, the one-parameter family used in reflectivity sweeps.
    pub fn symmetric(r: f64) -> Self {
        Self::with_reflections(Complex::new(r, 0.0), Complex::new(-r, 0.0))
    }

    pub fn ideal() -> Self {
        Self::symmetric(1.0)
    }

    /// `(r↓, r↑)`, honoring the override.
    pub fn reflections(&self) -> Result<(Complex, Complex)> {
        match self.reflection_override {
            Some(pair) => Ok(pair),
            None => Ok((
                reflection_coefficient(self, Spin::Down)?,
                reflection_coefficient(self, Spin::Up)?,
            )),
        }
    }
}

/// Reflection coefficient from the closed-form weak-excitation expression.
///
/// Fails when an override is set (the formula would be ignored) or when the
/// denominator vanishes.
pub fn reflection_coefficient(p: &CavityParams, spin: Spin) -> Result<Complex> {
    if p.reflection_override.is_some() {
        return Err(Error::InvalidParameter(
            "reflection override is set; use CavityParams::reflections".into(),
        ));
    }
    let delta_d = match spin {
        Spin::Down => p.delta_down,
        Spin::Up => p.delta_up,
    };
    let one = Complex::new(1.0, 0.0);
    let dipole = Complex::new(1.0, delta_d);
    let denom = p.cooperativity + dipole * Complex::new(1.0, p.delta_c);
    if denom.norm() < SINGULAR_TOL {
        return Err(Error::Singular(format!(
            "reflection denominator vanishes (C = {}, Δd = {delta_d}, Δc = {})",
            p.cooperativity, p.delta_c
        )));
    }
    Ok(one - 2.0 * dipole / denom)
}

/// Raw rates and frequencies. All quantities share one angular-frequency unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub omega: f64,
    pub omega_c: f64,
    pub omega_down: f64,
    pub omega_up: f64,
}

impl PhysicalParams {
    /// `ω↑ = ω↓ + zeeman`.
    pub fn new(
        g: f64,
        kappa: f64,
        gamma: f64,
        omega: f64,
        omega_c: f64,
        omega_down: f64,
        zeeman: f64,
    ) -> Result<Self> {
        let p = PhysicalParams {
            g,
            kappa,
            gamma,
            omega,
            omega_c,
            omega_down,
            omega_up: omega_down + zeeman,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParameter(format!("g must be non-negative, got {}", self.g)));
        }
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// A physical set with `κ = γ = 2` and `ω = 0` that maps back onto `p`.
    /// The reflection override is ignored.
    pub fn from_dimensionless(p: &CavityParams) -> Result<Self> {
        PhysicalParams::new(
            p.cooperativity.sqrt(),
            2.0,
            2.0,
            0.0,
            p.delta_c,
            p.delta_down,
            p.delta_up - p.delta_down,
        )
    }

    /// Dimensionless parameters equivalent to this physical set.
    pub fn to_cavity_params(&self) -> Result<CavityParams> {
        let (delta_down, delta_up, delta_c) = detunings(self);
        CavityParams::new(cooperativity(self), delta_down, delta_up, delta_c)
    }
}

/// `C = 4g² / (κγ)`.
pub fn cooperativity(p: &PhysicalParams) -> f64 {
    4.0 * p.g * p.g / (p.kappa * p.gamma)
}

/// `(Δ↓, Δ↑, Δc)` with `Δd = 2(ωd - ω)/γ` and `Δc = 2(ωc - ω)/κ`.
pub fn detunings(p: &PhysicalParams) -> (f64, f64, f64) {
    (
        2.0 * (p.omega_down - p.omega) / p.gamma,
        2.0 * (p.omega_up - p.omega) / p.gamma,
        2.0 * (p.omega_c - p.omega) / p.kappa,
    )
}

/// Reflection coefficient from the steady state of the linearized equations
/// of motion, solved as a 2×2 complex linear system in `(⟨a⟩, ⟨σ-⟩)` for unit
/// input amplitude.
pub fn reflection_steady_state_oracle(p: &PhysicalParams, spin: Spin) -> Result<Complex> {
    p.check()?;
    let omega_d = match spin {
        Spin::Down => p.omega_down,
        Spin::Up => p.omega_up,
    };
    let a_in = Complex::new(1.0, 0.0);
    let sigma_z = -1.0;
    let sqrt_kappa = p.kappa.sqrt();

    // m11 a + m12 s = √κ a_in
    // m21 a + m22 s = 0
    let m11 = -Complex::new(p.kappa / 2.0, p.omega_c - p.omega);
    let m12 = Complex::new(-p.g, 0.0);
    let m21 = Complex::new(-p.g * sigma_z, 0.0);
    let m22 = -Complex::new(p.gamma / 2.0, omega_d - p.omega);
    let rhs1 = sqrt_kappa * a_in;
    let rhs2 = Complex::new(0.0, 0.0);

    let det = m11 * m22 - m12 * m21;
    if det.norm() < SINGULAR_TOL * (p.kappa * p.gamma).max(1.0) {
        return Err(Error::Singular("steady-state system is singular".into()));
    }
    let a = (rhs1 * m22 - m12 * rhs2) / det;
    let a_out = a_in + sqrt_kappa * a;
    Ok(a_out / a_in)
}
