//! Closed-form relaxation rates.
//!
//! Two mechanisms are modelled:
//!
//! * **Translational diffusion** of bath nuclear spins past the electron
//!   spin (hard-sphere, force-free model). With correlation time
//!   τ_D = 2d²/D and z = √(2ωτ_D):
//!
//!   ```text
//!   1/T1 = 2κ · c/(d·D) · 10 J(ωe)
//!   1/T2 =  κ · c/(d·D) · [4 J(0) + 10 J(ωe) + 6 J(ωn)]
//!   κ    = (16π/405) γe² γn² ħ² I(I+1)          (Gaussian units)
//!   ```
//!
//!   In SI the dipolar coupling carries μ0/4π, so κ picks up (μ0/4π)².
//!
//! * **Orbach** relaxation through an excited state at Δ:
//!   1/T1 = A·exp(−Δ/k_BT), with 1/T2 = (1/T1)/r where r = T2/T1.
//!
//! Channels combine by adding rates.

use std::f64::consts::PI;

use crate::error::{domain, input, Result};
use crate::physconst::{
    convert_energy, zeeman_frequencies, EnergyUnit, NuclearSpecies, DEFAULT_FIELD_T, GAMMA_E, HBAR,
    MU0_OVER_4PI,
};
use crate::solvent::{ConcentrationModel, DiffusionModel, Flagged};

/// Hard-sphere translational-diffusion spectral density J(z).
///
/// J(0) = 1 exactly; J(z)·z⁴ → 81 as z → ∞.
pub fn spectral_density(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(domain(format!(
            "spectral density argument z must be >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    Ok(spectral_density_unchecked(z))
}

#[inline]
fn spectral_density_unchecked(z: f64) -> f64 {
    let z2 = z * z;
    let z3 = z2 * z;
    let z4 = z2 * z2;
    let num = 1.0 + 5.0 * z / 8.0 + z2 / 8.0;
    let den = 1.0 + z + z2 + z3 / 6.0 + 4.0 * z4 / 81.0 + z4 * z / 81.0 + z4 * z2 / 648.0;
    num / den
}

/// J evaluated at angular frequency `omega` (rad/s) for correlation time `tau_d` (s).
pub fn spectral_density_at(omega: f64, tau_d: f64) -> Result<f64> {
    if !(omega >= 0.0 && tau_d >= 0.0) {
        return Err(domain(format!(
            "omega and tau_D must be >= 0 (got {omega}, {tau_d})"
        )));
    }
    spectral_density((2.0 * omega * tau_d).sqrt())
}

/// τ_D = 2d²/D.
pub fn correlation_time(d: f64, diffusion: f64) -> Result<f64> {
    if !(d > 0.0) || !(diffusion > 0.0) {
        return Err(domain(format!(
            "correlation time needs d > 0 and D > 0 (got d={d}, D={diffusion})"
        )));
    }
    Ok(2.0 * d * d / diffusion)
}

/// Rate prefactor κ in SI (m⁶·s⁻²).
pub fn kappa(species: &NuclearSpecies) -> f64 {
    let coupling = MU0_OVER_4PI * GAMMA_E * species.gamma_n * HBAR;
    16.0 * PI / 405.0 * coupling * coupling * species.spin_factor()
}

/// Relaxation rates, 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateResult {
    pub r1: f64,
    pub r2: f64,
}

impl RateResult {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    /// (T1, T2) with an infinite-time sentinel for zero rates.
    pub fn times(&self) -> (f64, f64) {
        (reciprocal_time(self.r1), reciprocal_time(self.r2))
    }
}

impl std::ops::Add for RateResult {
    type Output = RateResult;

    fn add(self, rhs: RateResult) -> RateResult {
        RateResult::new(self.r1 + rhs.r1, self.r2 + rhs.r2)
    }
}

fn reciprocal_time(rate: f64) -> f64 {
    if rate == 0.0 {
        f64::INFINITY
    } else {
        1.0 / rate
    }
}

/// The diffusion mechanism at one temperature with the diffusion
/// coefficient left open. Used for forward evaluation and for inverting a
/// measured rate for D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionKernel {
    pub kappa: f64,
    /// Spins/m³.
    pub concentration: f64,
    /// Distance of closest approach, m.
    pub d: f64,
    pub omega_e: f64,
    pub omega_n: f64,
}

impl DiffusionKernel {
    pub fn new(species: &NuclearSpecies, concentration: f64, d: f64, b0: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(domain(format!(
                "distance of closest approach must be > 0, got {d}"
            )));
        }
        if !(concentration >= 0.0) {
            return Err(domain(format!(
                "concentration must be >= 0, got {concentration}"
            )));
        }
        let (omega_e, omega_n) = zeeman_frequencies(b0, species)?;
        Ok(Self {
            kappa: kappa(species),
            concentration,
            d,
            omega_e,
            omega_n,
        })
    }

    /// Rates for total diffusion coefficient `diffusion` (m²/s).
    pub fn rates(&self, diffusion: f64) -> Result<RateResult> {
        let tau = correlation_time(self.d, diffusion)?;
        let j_e = spectral_density((2.0 * self.omega_e * tau).sqrt())?;
        let j_n = spectral_density((2.0 * self.omega_n * tau).sqrt())?;
        let scale = self.kappa * self.concentration / (self.d * diffusion);
        Ok(RateResult {
            r1: 2.0 * scale * 10.0 * j_e,
            r2: scale * (4.0 + 10.0 * j_e + 6.0 * j_n),
        })
    }

    /// z = √(2ωe·τ_D) at the given D.
    pub fn electron_z(&self, diffusion: f64) -> Result<f64> {
        Ok((2.0 * self.omega_e * correlation_time(self.d, diffusion)?).sqrt())
    }
}

/// Translational-diffusion relaxation by one bath species.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMechanism {
    /// Distance of closest approach, m.
    pub d: f64,
    pub species: NuclearSpecies,
    pub concentration: ConcentrationModel,
    pub solvent_diffusion: DiffusionModel,
    pub solute_diffusion: DiffusionModel,
    /// Field, T.
    pub b0: f64,
}

impl DiffusionMechanism {
    pub fn new(
        d: f64,
        species: NuclearSpecies,
        concentration: ConcentrationModel,
        solvent_diffusion: DiffusionModel,
        solute_diffusion: DiffusionModel,
    ) -> Self {
        Self {
            d,
            species,
            concentration,
            solvent_diffusion,
            solute_diffusion,
            b0: DEFAULT_FIELD_T,
        }
    }

    pub fn with_field(mut self, b0: f64) -> Self {
        self.b0 = b0;
        self
    }

    /// Total D = D_solvent + D_solute, m²/s.
    pub fn total_diffusion(&self, t: f64) -> Result<Flagged<f64>> {
        let solvent = self.solvent_diffusion.evaluate(t)?;
        let solute = self.solute_diffusion.evaluate(t)?;
        let total = solvent.value + solute.value;
        if !(total > 0.0) {
            return Err(domain(format!(
                "total diffusion coefficient at {t} K is {total}"
            )));
        }
        Ok(Flagged::new(
            total,
            solvent.out_of_range || solute.out_of_range,
        ))
    }

    pub fn kernel(&self, t: f64) -> Result<Flagged<DiffusionKernel>> {
        let c = self.concentration.evaluate(t)?;
        let kernel = DiffusionKernel::new(&self.species, c.value, self.d, self.b0)?;
        Ok(Flagged::new(kernel, c.out_of_range))
    }
}

/// Rates from translational diffusion at temperature `t`.
pub fn diffusion_rates(mech: &DiffusionMechanism, t: f64) -> Result<Flagged<RateResult>> {
    let kernel = mech.kernel(t)?;
    let d = mech.total_diffusion(t)?;
    Ok(Flagged::new(
        kernel.value.rates(d.value)?,
        kernel.out_of_range || d.out_of_range,
    ))
}

/// Orbach parameters. `delta` is in meV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbachParams {
    /// 1/s.
    pub prefactor: f64,
    /// meV.
    pub delta: f64,
}

impl OrbachParams {
    pub fn new(prefactor: f64, delta: f64) -> Result<Self> {
        if !(prefactor > 0.0) || !prefactor.is_finite() {
            return Err(input(format!(
                "Orbach prefactor must be > 0, got {prefactor}"
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(input(format!(
                "Orbach splitting must be > 0 meV, got {delta}"
            )));
        }
        Ok(Self { prefactor, delta })
    }

    /// Δ/k_B in kelvin.
    pub fn delta_kelvin(&self) -> f64 {
        convert_energy(
            self.delta,
            EnergyUnit::MilliElectronVolt,
            EnergyUnit::Kelvin,
        )
    }
}

/// T2/T1 for a pure Orbach process.
pub const ORBACH_T2_RATIO: f64 = 2.0 / 3.0;

/// Orbach rates at temperature `t`; R2 = R1 / `t2_ratio`.
pub fn orbach_rate(p: &OrbachParams, t2_ratio: f64, t: f64) -> Result<RateResult> {
    if !(t > 0.0) {
        return Err(domain(format!("temperature must be > 0 K, got {t}")));
    }
    check_ratio(t2_ratio)?;
    let r1 = p.prefactor * (-p.delta_kelvin() / t).exp();
    Ok(RateResult::new(r1, r1 / t2_ratio))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(input(format!(
            "T2/T1 ratio must lie in (0, 1], got {ratio}"
        )));
    }
    Ok(())
}

/// One relaxation mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationChannel {
    Orbach { params: OrbachParams, t2_ratio: f64 },
    TranslationalDiffusion(DiffusionMechanism),
}

impl RelaxationChannel {
    pub fn orbach(params: OrbachParams) -> Self {
        RelaxationChannel::Orbach {
            params,
            t2_ratio: ORBACH_T2_RATIO,
        }
    }

    pub fn rates(&self, t: f64) -> Result<Flagged<RateResult>> {
        match self {
            RelaxationChannel::Orbach { params, t2_ratio } => {
                Ok(Flagged::ok(orbach_rate(params, *t2_ratio, t)?))
            }
            RelaxationChannel::TranslationalDiffusion(mech) => diffusion_rates(mech, t),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RelaxationChannel::Orbach { .. } => "orbach",
            RelaxationChannel::TranslationalDiffusion(_) => "diffusion",
        }
    }
}

/// Sum of channel rates at temperature `t`.
pub fn compose_channels(channels: &[RelaxationChannel], t: f64) -> Result<Flagged<RateResult>> {
    if channels.is_empty() {
        return Err(input("no relaxation channels to compose"));
    }
    let mut total = Flagged::ok(RateResult::default());
    for ch in channels {
        let r = ch.rates(t)?;
        total.value = total.value + r.value;
        total.out_of_range |= r.out_of_range;
    }
    Ok(total)
}

/// Predicted relaxation times at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub temperature: f64,
    /// s; infinite when the rate is zero.
    pub t1: f64,
    pub t2: f64,
    pub out_of_range: bool,
}

/// T1 = 1/R1 and T2 = 1/R2 of the composed channels at each temperature.
pub fn predict_times(
    channels: &[RelaxationChannel],
    temperatures: &[f64],
) -> Result<Vec<TimePoint>> {
    temperatures
        .iter()
        .map(|&t| {
            let r = compose_channels(channels, t)?;
            let (t1, t2) = r.value.times();
            Ok(TimePoint {
                temperature: t,
                t1,
                t2,
                out_of_range: r.out_of_range,
            })
        })
        .collect()
}
