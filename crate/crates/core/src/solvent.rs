//! Temperature-dependent solvent properties: bath-spin concentration,
//! self-diffusion, viscosity, Stokes–Einstein diffusion and mixture
//! stoichiometry.
//!
//! Model evaluation returns SI values wrapped in [`Flagged`], whose
//! `out_of_range` bit is set when a model is evaluated outside its declared
//! validity window. Only genuine singularities are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{domain, input, Result};
use crate::physconst::{units, NuclearSpecies, AVOGADRO, K_B};

/// A value together with an out-of-validity-range warning bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub out_of_range: bool,
}

impl<T> Flagged<T> {
    pub fn ok(value: T) -> Self {
        Self {
            value,
            out_of_range: false,
        }
    }

    pub fn new(value: T, out_of_range: bool) -> Self {
        Self {
            value,
            out_of_range,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Flagged<U> {
        Flagged {
            value: f(self.value),
            out_of_range: self.out_of_range,
        }
    }
}

/// Perry's-handbook ¹H density of liquid toluene.
pub const PERRY_TOLUENE_PREFACTOR: f64 = 4.089e21;
pub const PERRY_TOLUENE_BASE: f64 = 0.26655;
pub const PERRY_TOLUENE_TC: f64 = 591.8;
pub const PERRY_TOLUENE_EXPONENT: f64 = 0.2878;
pub const PERRY_TOLUENE_RANGE: (f64, f64) = (150.0, 330.0);

/// Toluene self-diffusion D = D0·exp(−Ea/T)·exp(−(T0/T)^6).
pub const TOLUENE_D0_CM2_S: f64 = 6.1e-4;
pub const TOLUENE_ACTIVATION_K: f64 = 1000.0;
pub const TOLUENE_VF_T0_K: f64 = 190.0;
pub const TOLUENE_VF_EXPONENT: f64 = 6.0;
pub const TOLUENE_DIFFUSION_RANGE: (f64, f64) = (135.0, 330.0);

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("temperature must be > 0 K, got {t}")));
    }
    Ok(())
}

fn outside(t: f64, range: (f64, f64)) -> bool {
    t < range.0 || t > range.1
}

/// ¹H spin concentration of liquid toluene, spins/cm³.
pub fn proton_concentration_toluene(t: f64) -> Result<Flagged<f64>> {
    check_temperature(t)?;
    if t >= PERRY_TOLUENE_TC {
        return Err(domain(format!(
            "temperature {t} K at or above the critical constant {PERRY_TOLUENE_TC} K"
        )));
    }
    let exponent = 1.0 + (1.0 - t / PERRY_TOLUENE_TC).powf(PERRY_TOLUENE_EXPONENT);
    let c = PERRY_TOLUENE_PREFACTOR * PERRY_TOLUENE_BASE.powf(-exponent);
    Ok(Flagged::new(c, outside(t, PERRY_TOLUENE_RANGE)))
}

/// D0·exp(−Ea/T)·exp(−(T0/T)^p), in the units of `d0`.
fn activated_diffusion(t: f64, d0: f64, activation_k: f64, vf_t0: f64, exponent: f64) -> f64 {
    d0 * (-activation_k / t).exp() * (-(vf_t0 / t).powf(exponent)).exp()
}

/// Toluene self-diffusion coefficient, cm²/s.
pub fn toluene_self_diffusion(t: f64) -> Result<Flagged<f64>> {
    check_temperature(t)?;
    let d = activated_diffusion(
        t,
        TOLUENE_D0_CM2_S,
        TOLUENE_ACTIVATION_K,
        TOLUENE_VF_T0_K,
        TOLUENE_VF_EXPONENT,
    );
    Ok(Flagged::new(d, outside(t, TOLUENE_DIFFUSION_RANGE)))
}

/// Stokes–Einstein diffusion D = k_B·T/(6π·a·η), all SI.
pub fn stokes_einstein(t: f64, radius: f64, eta: f64) -> Result<f64> {
    if !(t > 0.0 && radius > 0.0 && eta > 0.0) {
        return Err(domain(format!(
            "Stokes-Einstein needs T, a, eta > 0 (got T={t}, a={radius}, eta={eta})"
        )));
    }
    Ok(K_B * t / (6.0 * PI * radius * eta))
}

/// Strictly increasing (T, value) knots with log-linear interpolation:
/// ln(value) is linear in T between knots and along the end segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearTable {
    points: Vec<(f64, f64)>,
}

impl LogLinearTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(input("table needs at least one point"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(input(format!("duplicate table temperature {}", w[0].0)));
            }
        }
        if let Some(&(t, v)) = points.iter().find(|(t, v)| !(*t > 0.0) || !(*v > 0.0)) {
            return Err(input(format!(
                "table point ({t}, {v}) must have positive temperature and value"
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn evaluate(&self, t: f64) -> Flagged<f64> {
        let pts = &self.points;
        if pts.len() == 1 {
            return Flagged::new(pts[0].1, t != pts[0].0);
        }
        let idx = pts.partition_point(|p| p.0 < t);
        if idx < pts.len() && pts[idx].0 == t {
            return Flagged::ok(pts[idx].1);
        }
        let seg = idx.clamp(1, pts.len() - 1);
        let (t0, v0) = pts[seg - 1];
        let (t1, v1) = pts[seg];
        let frac = (t - t0) / (t1 - t0);
        let value = (v0.ln() + frac * (v1.ln() - v0.ln())).exp();
        Flagged::new(value, outside(t, self.range()))
    }
}

/// Bath-spin concentration c(T); evaluates to spins/m³.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcentrationModel {
    PerryToluene,
    /// Constant concentration, stored in spins/m³.
    Constant(f64),
    /// Table values in spins/m³.
    Table(LogLinearTable),
}

impl ConcentrationModel {
    pub fn constant_per_cm3(c: f64) -> Self {
        ConcentrationModel::Constant(units::per_cm3_to_si(c))
    }

    pub fn evaluate(&self, t: f64) -> Result<Flagged<f64>> {
        check_temperature(t)?;
        let c = match self {
            ConcentrationModel::PerryToluene => {
                proton_concentration_toluene(t)?.map(units::per_cm3_to_si)
            }
            ConcentrationModel::Constant(c) => Flagged::ok(*c),
            ConcentrationModel::Table(table) => table.evaluate(t),
        };
        if !(c.value >= 0.0) || !c.value.is_finite() {
            return Err(domain(format!("concentration evaluated to {}", c.value)));
        }
        Ok(c)
    }
}

/// Solvent viscosity η(T), Pa·s.
#[derive(Debug, Clone, PartialEq)]
pub enum ViscosityModel {
    Table(LogLinearTable),
    /// η = η0·exp(B/(T − T0)).
    VogelFulcher {
        eta0: f64,
        b: f64,
        t0: f64,
    },
}

impl ViscosityModel {
    pub fn evaluate(&self, t: f64) -> Result<Flagged<f64>> {
        check_temperature(t)?;
        match self {
            ViscosityModel::Table(table) => Ok(table.evaluate(t)),
            ViscosityModel::VogelFulcher { eta0, b, t0 } => {
                if t <= *t0 {
                    return Err(domain(format!(
                        "Vogel-Fulcher viscosity diverges at T0 = {t0} K (T = {t} K)"
                    )));
                }
                Ok(Flagged::ok(eta0 * (b / (t - t0)).exp()))
            }
        }
    }
}

/// Diffusion coefficient D(T); evaluates to m²/s.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionModel {
    TolueneSelfDiffusion,
    StokesEinstein {
        /// Hydrodynamic radius, m.
        radius: f64,
        viscosity: ViscosityModel,
    },
    /// D = D0·exp(−Ea/T)·exp(−(T0/T)^exponent), D0 in m²/s.
    Parametric {
        d0: f64,
        activation_k: f64,
        vf_t0: f64,
        exponent: f64,
        validity: Option<(f64, f64)>,
    },
    /// Table values in m²/s.
    Table(LogLinearTable),
    Sum(Vec<DiffusionModel>),
}

impl DiffusionModel {
    pub fn parametric(d0: f64, activation_k: f64, vf_t0: f64, exponent: f64) -> Self {
        DiffusionModel::Parametric {
            d0,
            activation_k,
            vf_t0,
            exponent,
            validity: None,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<Flagged<f64>> {
        check_temperature(t)?;
        let d = match self {
            DiffusionModel::TolueneSelfDiffusion => {
                toluene_self_diffusion(t)?.map(units::cm2_per_s_to_si)
            }
            DiffusionModel::StokesEinstein { radius, viscosity } => {
                let eta = viscosity.evaluate(t)?;
                Flagged::new(stokes_einstein(t, *radius, eta.value)?, eta.out_of_range)
            }
            DiffusionModel::Parametric {
                d0,
                activation_k,
                vf_t0,
                exponent,
                validity,
            } => Flagged::new(
                activated_diffusion(t, *d0, *activation_k, *vf_t0, *exponent),
                validity.is_some_and(|r| outside(t, r)),
            ),
            DiffusionModel::Table(table) => table.evaluate(t),
            DiffusionModel::Sum(terms) => {
                let mut total = Flagged::ok(0.0);
                for term in terms {
                    let d = term.evaluate(t)?;
                    total.value += d.value;
                    total.out_of_range |= d.out_of_range;
                }
                total
            }
        };
        if !(d.value >= 0.0) || !d.value.is_finite() {
            return Err(domain(format!(
                "diffusion coefficient evaluated to {}",
                d.value
            )));
        }
        Ok(d)
    }
}

/// One component of a liquid mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub label: String,
    /// g/cm³.
    pub density: f64,
    /// g/mol.
    pub molar_mass: f64,
    /// Atoms per molecule keyed by element symbol ("Cl") or by isotope label
    /// ("2H"). Element keys are weighted by natural abundance; isotope keys
    /// count that isotope exactly.
    pub nuclei_per_molecule: BTreeMap<String, f64>,
    pub volume_fraction: f64,
}

impl MixtureComponent {
    /// mol/cm³ contributed to the mixture.
    fn molar_density(&self) -> f64 {
        self.volume_fraction * self.density / self.molar_mass
    }

    fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || !self.density.is_finite() {
            return Err(input(format!(
                "{}: missing or nonpositive density",
                self.label
            )));
        }
        if !(self.molar_mass > 0.0) || !self.molar_mass.is_finite() {
            return Err(input(format!(
                "{}: missing or nonpositive molar mass",
                self.label
            )));
        }
        if !(0.0..=1.0).contains(&self.volume_fraction) {
            return Err(input(format!(
                "{}: volume fraction {} outside [0, 1]",
                self.label, self.volume_fraction
            )));
        }
        Ok(())
    }

    fn nuclei_of(&self, species: &NuclearSpecies) -> f64 {
        if let Some(n) = self.nuclei_per_molecule.get(&species.label) {
            return *n;
        }
        self.nuclei_per_molecule
            .get(&species.element)
            .map_or(0.0, |n| n * species.abundance)
    }
}

fn validate_mixture(components: &[MixtureComponent]) -> Result<()> {
    if components.is_empty() {
        return Err(input("mixture has no components"));
    }
    for c in components {
        c.validate()?;
    }
    let total: f64 = components.iter().map(|c| c.volume_fraction).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(input(format!(
            "volume fractions sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Concentration of `species` in a mixture, spins/cm³.
pub fn mixture_concentration(
    components: &[MixtureComponent],
    species: &NuclearSpecies,
) -> Result<f64> {
    validate_mixture(components)?;
    Ok(components
        .iter()
        .map(|c| c.molar_density() * AVOGADRO * c.nuclei_of(species))
        .sum())
}

/// Mole fractions keyed by component label.
pub fn mole_fractions(components: &[MixtureComponent]) -> Result<BTreeMap<String, f64>> {
    validate_mixture(components)?;
    let total: f64 = components.iter().map(MixtureComponent::molar_density).sum();
    if !(total > 0.0) {
        return Err(input("mixture has zero total molar density"));
    }
    let mut out = BTreeMap::new();
    for c in components {
        *out.entry(c.label.clone()).or_insert(0.0) += c.molar_density() / total;
    }
    Ok(out)
}
