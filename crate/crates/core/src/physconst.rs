//! Physical constants (CODATA 2018), the nuclear species registry, and the
//! handful of unit conversions used at API boundaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, input, Result};

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Avogadro constant, 1/mol (exact).
pub const AVOGADRO: f64 = 6.022_140_76e23;
/// Free-electron gyromagnetic ratio magnitude, rad·s⁻¹·T⁻¹.
pub const GAMMA_E: f64 = 1.760_859_630_23e11;
/// μ0/4π, T·m/A. Converts Gaussian dipolar couplings to SI.
pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;

/// Conventional X-band field, T.
pub const DEFAULT_FIELD_T: f64 = 0.34;

/// One meV in joules.
pub const MEV_IN_J: f64 = ELEMENTARY_CHARGE * 1e-3;
/// One wavenumber (cm⁻¹) in joules.
pub const WAVENUMBER_IN_J: f64 = PLANCK * SPEED_OF_LIGHT * 100.0;

/// Boundary conversions between conventional and SI units.
pub mod units {
    pub const CM2_PER_S_IN_M2_PER_S: f64 = 1e-4;
    pub const NM_IN_M: f64 = 1e-9;
    pub const US_IN_S: f64 = 1e-6;
    pub const PER_CM3_IN_PER_M3: f64 = 1e6;

    pub fn cm2_per_s_to_si(d: f64) -> f64 {
        d * CM2_PER_S_IN_M2_PER_S
    }
    pub fn si_to_cm2_per_s(d: f64) -> f64 {
        d / CM2_PER_S_IN_M2_PER_S
    }
    pub fn nm_to_m(x: f64) -> f64 {
        x * NM_IN_M
    }
    pub fn m_to_nm(x: f64) -> f64 {
        x / NM_IN_M
    }
    pub fn us_to_s(t: f64) -> f64 {
        t * US_IN_S
    }
    pub fn s_to_us(t: f64) -> f64 {
        t / US_IN_S
    }
    pub fn per_cm3_to_si(c: f64) -> f64 {
        c * PER_CM3_IN_PER_M3
    }
    pub fn si_to_per_cm3(c: f64) -> f64 {
        c / PER_CM3_IN_PER_M3
    }
    /// MHz/T (γ/2π) to rad·s⁻¹·T⁻¹.
    pub fn mhz_per_t_to_gamma(f: f64) -> f64 {
        f * 1e6 * std::f64::consts::TAU
    }
    pub fn gamma_to_mhz_per_t(g: f64) -> f64 {
        g / (1e6 * std::f64::consts::TAU)
    }
}

/// Energy units accepted by [`convert_energy`]. `Kelvin` means E/k_B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyUnit {
    Joule,
    MilliElectronVolt,
    Wavenumber,
    Kelvin,
}

impl EnergyUnit {
    /// Size of one unit in joules.
    pub fn in_joules(self) -> f64 {
        match self {
            EnergyUnit::Joule => 1.0,
            EnergyUnit::MilliElectronVolt => MEV_IN_J,
            EnergyUnit::Wavenumber => WAVENUMBER_IN_J,
            EnergyUnit::Kelvin => K_B,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            EnergyUnit::Joule => "J",
            EnergyUnit::MilliElectronVolt => "meV",
            EnergyUnit::Wavenumber => "cm-1",
            EnergyUnit::Kelvin => "K",
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for EnergyUnit {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "J" | "j" => Ok(EnergyUnit::Joule),
            "meV" | "mev" => Ok(EnergyUnit::MilliElectronVolt),
            "cm-1" | "cm^-1" | "cm⁻¹" | "wavenumber" => Ok(EnergyUnit::Wavenumber),
            "K" | "k" => Ok(EnergyUnit::Kelvin),
            other => Err(input(format!(
                "unknown energy unit '{other}' (expected J, meV, cm-1 or K)"
            ))),
        }
    }
}

/// Converts an energy between units.
pub fn convert_energy(value: f64, from: EnergyUnit, to: EnergyUnit) -> f64 {
    if from == to {
        return value;
    }
    value * from.in_joules() / to.in_joules()
}

/// Same as [`convert_energy`] with textual unit tokens.
pub fn convert_energy_str(value: f64, from: &str, to: &str) -> Result<f64> {
    Ok(convert_energy(value, from.parse()?, to.parse()?))
}

/// A bath nucleus.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearSpecies {
    pub label: String,
    /// Chemical element symbol; mixture stoichiometry is keyed on it.
    pub element: String,
    /// |γn|, rad·s⁻¹·T⁻¹.
    pub gamma_n: f64,
    pub spin_i: f64,
    /// Natural isotopic abundance in [0, 1].
    pub abundance: f64,
}

impl NuclearSpecies {
    pub fn new(
        label: impl Into<String>,
        element: impl Into<String>,
        gamma_n: f64,
        spin_i: f64,
        abundance: f64,
    ) -> Result<Self> {
        let species = Self {
            label: label.into(),
            element: element.into(),
            gamma_n,
            spin_i,
            abundance,
        };
        species.validate()?;
        Ok(species)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spin_i > 0.0) || !self.spin_i.is_finite() {
            return Err(input(format!("{}: spin I must be > 0", self.label)));
        }
        if (2.0 * self.spin_i).fract() != 0.0 {
            return Err(input(format!(
                "{}: spin I must be a half-integer, got {}",
                self.label, self.spin_i
            )));
        }
        if self.gamma_n == 0.0 || !self.gamma_n.is_finite() {
            return Err(input(format!("{}: gamma_n must be nonzero", self.label)));
        }
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(input(format!(
                "{}: abundance {} outside [0, 1]",
                self.label, self.abundance
            )));
        }
        Ok(())
    }

    /// I(I+1).
    pub fn spin_factor(&self) -> f64 {
        self.spin_i * (self.spin_i + 1.0)
    }

    pub fn proton() -> Self {
        Self::registry_entry("1H", "H", 2.675_221_874_4e8, 0.5, 0.999_885)
    }

    pub fn deuteron() -> Self {
        Self::registry_entry("2H", "H", 4.106_628_9e7, 1.0, 0.000_115)
    }

    pub fn chlorine35() -> Self {
        Self::registry_entry("35Cl", "Cl", 2.624_199e7, 1.5, 0.7576)
    }

    pub fn chlorine37() -> Self {
        Self::registry_entry("37Cl", "Cl", 2.184_369e7, 1.5, 0.2424)
    }

    pub fn nitrogen14() -> Self {
        Self::registry_entry("14N", "N", 1.933_780e7, 1.0, 0.996_36)
    }

    fn registry_entry(
        label: &str,
        element: &str,
        gamma_n: f64,
        spin_i: f64,
        abundance: f64,
    ) -> Self {
        Self {
            label: label.to_owned(),
            element: element.to_owned(),
            gamma_n,
            spin_i,
            abundance,
        }
    }

    /// The built-in species: ¹H, ²H, ³⁵Cl, ³⁷Cl, ¹⁴N.
    pub fn registry() -> Vec<NuclearSpecies> {
        vec![
            Self::proton(),
            Self::deuteron(),
            Self::chlorine35(),
            Self::chlorine37(),
            Self::nitrogen14(),
        ]
    }

    /// Registry lookup by label. Accepts a few spellings ("1H", "H1", "proton", ...).
    pub fn lookup(label: &str) -> Option<NuclearSpecies> {
        let key = label.trim().to_ascii_lowercase();
        let canonical = match key.as_str() {
            "1h" | "h1" | "h" | "proton" => "1H",
            "2h" | "h2" | "d" | "deuteron" | "deuterium" => "2H",
            "35cl" | "cl35" => "35Cl",
            "37cl" | "cl37" => "37Cl",
            "14n" | "n14" => "14N",
            _ => return None,
        };
        Self::registry().into_iter().find(|s| s.label == canonical)
    }
}

/// Electron and nuclear Zeeman angular frequencies (rad/s) at field `b0` (T).
pub fn zeeman_frequencies(b0: f64, species: &NuclearSpecies) -> Result<(f64, f64)> {
    if !(b0 > 0.0) || !b0.is_finite() {
        return Err(domain(format!("field B0 must be > 0 T, got {b0}")));
    }
    Ok((GAMMA_E * b0, species.gamma_n.abs() * b0))
}
