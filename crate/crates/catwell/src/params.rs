//! Dimensionful experiment parameters, derived optical quantities, and the
//! reduction to the dimensionless system (r = g/κ, δ = Δ/κ, λ = n/n_c).
//!
//! Convention: every frequency-like field is stored as an *angular* rate
//! (rad/s). Config files and CLI flags speak cyclic frequency (Hz), i.e. the
//! stored value divided by 2π.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{CatwellError, Result};
use crate::potential::critical_photon_number;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

pub const TWO_PI: f64 = 2.0 * PI;

/// Reference scales for the dimensionless multipliers (Ω0, Δ0, κ0, L0, m0):
/// 1 Hz, 10 kHz, 1 MHz, 0.06 m, 10 mg.
pub const REF_OMEGA_HZ: f64 = 1.0;
pub const REF_DELTA_HZ: f64 = 1.0e4;
pub const REF_KAPPA_HZ: f64 = 1.0e6;
pub const REF_LENGTH_M: f64 = 0.06;
pub const REF_MASS_KG: f64 = 1.0e-5;

/// Dimensionful parameters of the dual-cavity setup. Frequencies are angular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Mirror mass (kg).
    pub m: f64,
    /// Mechanical angular frequency (rad/s).
    pub omega: f64,
    /// Mechanical damping, angular (rad/s).
    pub gamma_m: f64,
    /// Per-cavity length (m).
    pub length: f64,
    /// Cavity net loss, angular (rad/s); always κ_e + κ_i.
    pub kappa: f64,
    /// External coupling, angular (rad/s).
    pub kappa_e: f64,
    /// Internal loss, angular (rad/s).
    pub kappa_i: f64,
    /// Laser detuning, angular (rad/s).
    pub delta: f64,
    /// Laser wavelength (m).
    pub lambda_laser: f64,
    /// Reduced Planck constant (J·s); a field so tests can probe scaling.
    pub hbar: f64,
    /// Speed of light (m/s).
    pub c: f64,
}

impl Default for PhysicalParams {
    /// The benchmark parameter point: m = 10 mg, Ω/2π = 1 Hz, γ_m/2π = 0.1 Hz,
    /// L = 0.06 m, κ/2π = 1 MHz (all external), Δ/2π = 10 kHz, λ_l = 1064 nm.
    fn default() -> Self {
        PhysicalParams {
            m: REF_MASS_KG,
            omega: TWO_PI * REF_OMEGA_HZ,
            gamma_m: TWO_PI * 0.1,
            length: REF_LENGTH_M,
            kappa: TWO_PI * REF_KAPPA_HZ,
            kappa_e: TWO_PI * REF_KAPPA_HZ,
            kappa_i: 0.0,
            delta: TWO_PI * REF_DELTA_HZ,
            lambda_laser: 1064e-9,
            hbar: HBAR,
            c: C_LIGHT,
        }
    }
}

impl PhysicalParams {
    /// Enforce positivity and the κ = κ_e + κ_i budget (1e-12 relative).
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("m", self.m),
            ("omega", self.omega),
            ("gamma_m", self.gamma_m),
            ("length", self.length),
            ("kappa", self.kappa),
            ("delta", self.delta),
            ("lambda_laser", self.lambda_laser),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CatwellError::Config(format!(
                    "{name} must be strictly positive and finite, got {value}"
                )));
            }
        }
        if self.kappa_e < 0.0 || self.kappa_i < 0.0 {
            return Err(CatwellError::Config(
                "kappa_e and kappa_i must be nonnegative".into(),
            ));
        }
        let sum = self.kappa_e + self.kappa_i;
        if (self.kappa - sum).abs() > 1e-12 * self.kappa {
            return Err(CatwellError::Config(format!(
                "kappa budget violated: kappa/2pi = {} Hz but kappa_e + kappa_i = {} Hz",
                self.kappa / TWO_PI,
                sum / TWO_PI
            )));
        }
        Ok(())
    }

    /// The slow-mirror hierarchy Ω, γ_m ≪ Δ, κ underpins the effective
    /// potential; returns human-readable warnings when the ratio creeps
    /// above 1e-2 rather than failing hard.
    pub fn hierarchy_warnings(&self) -> Vec<String> {
        let slow = self.omega.max(self.gamma_m);
        let fast = self.delta.min(self.kappa);
        let mut warnings = Vec::new();
        if slow >= 1e-2 * fast {
            warnings.push(format!(
                "frequency hierarchy is weak: max(Omega, gamma_m)/min(Delta, kappa) = {:.3e} \
                 (adiabatic elimination of the cavity assumes this is << 1)",
                slow / fast
            ));
        }
        warnings
    }
}

/// Quantities derived from the laser and cavity geometry.
#[derive(Debug, Clone, Copy)]
pub struct DerivedOptical {
    /// Cavity resonance, angular (rad/s).
    pub omega_c: f64,
    /// Frequency shift per displacement G = ω_c/L (rad/s per m).
    pub g_shift: f64,
    /// Optomechanical coupling g = G·x_zpf, angular (rad/s).
    pub g: f64,
    /// Finesse under the adopted linewidth convention FSR/(2·κ/2π).
    pub finesse: f64,
    /// Zero-point length √(ħ/(mΩ)) (m).
    pub x_zpf: f64,
}

/// The reduced triple that fully determines H/(ħΩ), plus the Ω that
/// restores seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessSystem {
    /// g/κ.
    pub r: f64,
    /// Δ/κ.
    pub delta: f64,
    /// n/n_c.
    pub lambda: f64,
    /// Mechanical angular frequency used to restore units (rad/s).
    pub omega_ref: f64,
}

impl DimensionlessSystem {
    pub fn new(r: f64, delta: f64, lambda: f64, omega_ref: f64) -> Self {
        DimensionlessSystem { r, delta, lambda, omega_ref }
    }

    /// Same (r, δ) at a different drive.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        DimensionlessSystem { lambda, ..*self }
    }
}

/// Parameter point expressed as multipliers of the reference scales
/// (Ω/2π)/(1 Hz), (Δ/2π)/(10 kHz), (κ/2π)/(1 MHz), L/(0.06 m), m/(10 mg).
#[derive(Debug, Clone, Copy)]
pub struct ScaledCoords {
    pub omega0: f64,
    pub delta0: f64,
    pub kappa0: f64,
    pub l0: f64,
    pub m0: f64,
    /// Coupling multiplier; identically Ω0^(−1/2)·L0^(−1)·m0^(−1/2).
    pub g0: f64,
    /// Laser-power accuracy multiplier (relative power control a0×10⁻³).
    pub a0: f64,
}

/// A parsed config file: the physical point plus the power-accuracy knob,
/// which is not a property of the hardware and so lives outside
/// `PhysicalParams`.
#[derive(Debug, Clone, Copy)]
pub struct LoadedConfig {
    pub params: PhysicalParams,
    pub a0: f64,
}

const CONFIG_KEYS: [&str; 10] = [
    "mass_kg",
    "omega_hz",
    "gamma_m_hz",
    "length_m",
    "kappa_hz",
    "kappa_e_hz",
    "kappa_i_hz",
    "delta_hz",
    "wavelength_m",
    "a0",
];

/// Parse a `key = value` config file. Omitted keys keep the benchmark
/// defaults; frequency keys are cyclic (Hz) and stored as angular. `#`
/// starts a comment. Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let mut p = PhysicalParams::default();
    let mut a0 = 2.0;
    let mut seen: HashSet<&'static str> = HashSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CatwellError::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let key = key.trim();
        let value: f64 = value.trim().parse().map_err(|_| {
            CatwellError::Config(format!("line {}: cannot parse `{}` as a number", lineno + 1, value.trim()))
        })?;
        let canonical = CONFIG_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| CatwellError::Config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
        if !seen.insert(canonical) {
            return Err(CatwellError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
        match *canonical {
            "mass_kg" => p.m = value,
            "omega_hz" => p.omega = TWO_PI * value,
            "gamma_m_hz" => p.gamma_m = TWO_PI * value,
            "length_m" => p.length = value,
            "kappa_hz" => p.kappa = TWO_PI * value,
            "kappa_e_hz" => p.kappa_e = TWO_PI * value,
            "kappa_i_hz" => p.kappa_i = TWO_PI * value,
            "delta_hz" => p.delta = TWO_PI * value,
            "wavelength_m" => p.lambda_laser = value,
            "a0" => a0 = value,
            _ => unreachable!(),
        }
    }

    // Loss bookkeeping: a bare net-loss override re-anchors the components
    // (all-external, matching the defaults' convention); explicit components
    // must re-balance the budget themselves.
    let kappa_set = seen.contains("kappa_hz");
    let parts_set = seen.contains("kappa_e_hz") || seen.contains("kappa_i_hz");
    if kappa_set && !parts_set {
        p.kappa_e = p.kappa;
        p.kappa_i = 0.0;
    } else if parts_set && !kappa_set {
        p.kappa = p.kappa_e + p.kappa_i;
    }

    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(CatwellError::Config(format!("a0 must be strictly positive, got {a0}")));
    }
    p.validate()?;
    Ok(LoadedConfig { params: p, a0 })
}

/// Cavity resonance, frequency shift, coupling, finesse, zero-point length.
pub fn derive_optical(p: &PhysicalParams) -> DerivedOptical {
    let omega_c = TWO_PI * p.c / p.lambda_laser;
    let g_shift = omega_c / p.length;
    let x_zpf = (p.hbar / (p.m * p.omega)).sqrt();
    let g = g_shift * x_zpf;
    // FSR/(full linewidth), reading the full linewidth as 2·κ/2π. See
    // `finesse_kappa_linewidth` for the alternative reading.
    let finesse = (p.c / (2.0 * p.length)) / (2.0 * p.kappa / TWO_PI);
    DerivedOptical { omega_c, g_shift, g, finesse, x_zpf }
}

/// Finesse under the alternative convention where κ/2π itself is the full
/// linewidth: FSR/(κ/2π) — exactly twice `DerivedOptical::finesse`.
pub fn finesse_kappa_linewidth(p: &PhysicalParams) -> f64 {
    (p.c / (2.0 * p.length)) / (p.kappa / TWO_PI)
}

/// Reduce to (r, δ, λ) at photon number n. Errors when Δ = 0 because n_c
/// diverges there.
pub fn to_dimensionless(p: &PhysicalParams, n: f64) -> Result<DimensionlessSystem> {
    if n < 0.0 {
        return Err(CatwellError::Invalid(format!("photon number must be >= 0, got {n}")));
    }
    let n_c = critical_photon_number(p)?;
    let opt = derive_optical(p);
    Ok(DimensionlessSystem {
        r: opt.g / p.kappa,
        delta: p.delta / p.kappa,
        lambda: n / n_c,
        omega_ref: p.omega,
    })
}

/// Intracavity photon number for input power P: n = F²/(Δ² + κ²/4) with
/// drive amplitude F² = κ_e·P/(ħω_l).
pub fn photon_number_from_power(p: &PhysicalParams, power_w: f64) -> f64 {
    let omega_l = TWO_PI * p.c / p.lambda_laser;
    let f_sq = p.kappa_e * power_w / (p.hbar * omega_l);
    f_sq / (p.delta * p.delta + p.kappa * p.kappa / 4.0)
}

/// Exact inverse of `photon_number_from_power`.
pub fn power_from_photon_number(p: &PhysicalParams, n: f64) -> f64 {
    let omega_l = TWO_PI * p.c / p.lambda_laser;
    n * (p.delta * p.delta + p.kappa * p.kappa / 4.0) * p.hbar * omega_l / p.kappa_e
}

/// Express a parameter point as reference-scale multipliers.
pub fn scaled_coords(p: &PhysicalParams, a0: f64) -> ScaledCoords {
    let omega0 = p.omega / (TWO_PI * REF_OMEGA_HZ);
    let l0 = p.length / REF_LENGTH_M;
    let m0 = p.m / REF_MASS_KG;
    ScaledCoords {
        omega0,
        delta0: p.delta / (TWO_PI * REF_DELTA_HZ),
        kappa0: p.kappa / (TWO_PI * REF_KAPPA_HZ),
        l0,
        m0,
        g0: omega0.powf(-0.5) / (l0 * m0.sqrt()),
        a0,
    }
}

/// Rebuild dimensionful parameters from multipliers (all-external loss,
/// benchmark γ_m and wavelength — the quantities the multipliers do not
/// address).
pub fn params_from_scaled(sc: &ScaledCoords) -> PhysicalParams {
    let kappa = TWO_PI * REF_KAPPA_HZ * sc.kappa0;
    PhysicalParams {
        m: REF_MASS_KG * sc.m0,
        omega: TWO_PI * REF_OMEGA_HZ * sc.omega0,
        length: REF_LENGTH_M * sc.l0,
        kappa,
        kappa_e: kappa,
        kappa_i: 0.0,
        delta: TWO_PI * REF_DELTA_HZ * sc.delta0,
        ..PhysicalParams::default()
    }
}
