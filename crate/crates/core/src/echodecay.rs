//! Two-pulse echo decay shapes and the frozen-solution spectral-diffusion
//! regime analysis (c·d³ criterion, crossover diffusion coefficient,
//! regime classification, T2-vs-D scaling exponent).

use serde::Serialize;

use crate::error::{domain, input, Result};
use crate::fitting::weighted_linear_fit;
use crate::physconst::{NuclearSpecies, GAMMA_E, HBAR, MU0_OVER_4PI};

/// Echo amplitude V(τ) as a function of the inter-pulse delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EchoDecayModel {
    /// A·exp(−2τ/T2).
    Mono { a: f64, t2: f64 },
    /// A·exp(−(2τ/T2)^n), 1 ≤ n ≤ 3.
    Stretched { a: f64, t2: f64, n: f64 },
    /// Inner and outer coherences, the outer one carrying an envelope
    /// modulation: A_in·exp(−2τ/T2_in) + A_out·exp(−2τ/T2_out)·cos(ωτ + φ).
    ModulatedBi {
        a_inner: f64,
        t2_inner: f64,
        a_outer: f64,
        t2_outer: f64,
        omega_mod: f64,
        phase: f64,
    },
}

fn check_amp(name: &str, a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(input(format!("{name} must be >= 0, got {a}")));
    }
    Ok(())
}

fn check_time(name: &str, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(input(format!("{name} must be > 0, got {t}")));
    }
    Ok(())
}

impl EchoDecayModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EchoDecayModel::Mono { a, t2 } => {
                check_amp("A", a)?;
                check_time("T2", t2)
            }
            EchoDecayModel::Stretched { a, t2, n } => {
                check_amp("A", a)?;
                check_time("T2", t2)?;
                if !(1.0..=3.0).contains(&n) {
                    return Err(input(format!(
                        "stretch exponent must lie in [1, 3], got {n}"
                    )));
                }
                Ok(())
            }
            EchoDecayModel::ModulatedBi {
                a_inner,
                t2_inner,
                a_outer,
                t2_outer,
                omega_mod,
                phase,
            } => {
                check_amp("A_inner", a_inner)?;
                check_amp("A_outer", a_outer)?;
                check_time("T2_inner", t2_inner)?;
                check_time("T2_outer", t2_outer)?;
                if !omega_mod.is_finite() || !phase.is_finite() {
                    return Err(input("modulation frequency and phase must be finite"));
                }
                Ok(())
            }
        }
    }
}

/// V(τ) for `model`.
pub fn evaluate_decay(model: &EchoDecayModel, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(domain(format!("tau must be >= 0, got {tau}")));
    }
    Ok(match *model {
        EchoDecayModel::Mono { a, t2 } => a * (-2.0 * tau / t2).exp(),
        EchoDecayModel::Stretched { a, t2, n } => a * (-(2.0 * tau / t2).powf(n)).exp(),
        EchoDecayModel::ModulatedBi {
            a_inner,
            t2_inner,
            a_outer,
            t2_outer,
            omega_mod,
            phase,
        } => {
            a_inner * (-2.0 * tau / t2_inner).exp()
                + a_outer * (-2.0 * tau / t2_outer).exp() * (omega_mod * tau + phase).cos()
        }
    })
}

/// Threshold on c·d³ below which the bath counts as dilute.
pub const LOW_CONCENTRATION_LIMIT: f64 = 0.1;

/// c·d³ and whether it is below 0.1. `c` in spins/m³, `d` in m.
pub fn concentration_criterion(c: f64, d: f64) -> (f64, bool) {
    let cd3 = c * d.powi(3);
    (cd3, cd3 < LOW_CONCENTRATION_LIMIT)
}

/// Diffusion coefficient (m²/s) at which the spectral-diffusion T2 is
/// shortest: D_min = 0.1·(μ0/4π)·γe·γn·ħ/d.
pub fn crossover_diffusion(species: &NuclearSpecies, d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(domain(format!("distance must be > 0, got {d}")));
    }
    Ok(0.1 * MU0_OVER_4PI * GAMMA_E * species.gamma_n.abs() * HBAR / d)
}

/// Fraction of D_min below which the bath is treated as rigid. With
/// D_min ≈ 1.4e-10 cm²/s the boundary sits near 1.4e-16 cm²/s, so
/// D = 5e-16 cm²/s still counts as slow diffusion.
pub const RIGID_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Rigid,
    SlowDiffusion,
    FastDiffusion,
}

impl Regime {
    /// Range of the dominant stretch exponent of the echo decay.
    pub fn exponent_range(self) -> (f64, f64) {
        match self {
            Regime::Rigid => (2.0, 3.0),
            Regime::SlowDiffusion => (9.0 / 8.0, 9.0 / 8.0),
            Regime::FastDiffusion => (1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Rigid => "rigid",
            Regime::SlowDiffusion => "slow_diffusion",
            Regime::FastDiffusion => "fast_diffusion",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    /// m²/s.
    pub diffusion: f64,
    /// m²/s.
    pub d_min: f64,
    pub c_d3: f64,
    pub regime: Regime,
    pub exponent_low: f64,
    pub exponent_high: f64,
    pub low_concentration: bool,
}

/// Rigid below RIGID_FRACTION·D_min, fast from D_min up (inclusive), slow between.
pub fn classify_regime(diffusion: f64, d_min: f64, c_d3: f64) -> RegimeReport {
    let regime = if diffusion >= d_min {
        Regime::FastDiffusion
    } else if diffusion >= RIGID_FRACTION * d_min {
        Regime::SlowDiffusion
    } else {
        Regime::Rigid
    };
    let (exponent_low, exponent_high) = regime.exponent_range();
    RegimeReport {
        diffusion,
        d_min,
        c_d3,
        regime,
        exponent_low,
        exponent_high,
        low_concentration: c_d3 < LOW_CONCENTRATION_LIMIT,
    }
}

/// p in T2 ∝ D^(−p), from an unweighted fit of ln T2 against ln D.
/// The standard error is `None` for two points.
pub fn scaling_exponent(t2: &[f64], diffusion: &[f64]) -> Result<(f64, Option<f64>)> {
    if t2.len() != diffusion.len() {
        return Err(input(format!(
            "T2 and D series differ in length ({} vs {})",
            t2.len(),
            diffusion.len()
        )));
    }
    if t2.len() < 2 {
        return Err(input("scaling exponent needs at least 2 points"));
    }
    if t2
        .iter()
        .chain(diffusion)
        .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return Err(input("T2 and D values must be > 0"));
    }
    let x: Vec<f64> = diffusion.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = t2.iter().map(|t| t.ln()).collect();
    let fit = weighted_linear_fit(&x, &y, &vec![1.0; x.len()])?;
    let stderr = (t2.len() > 2).then_some(fit.stderr_slope);
    Ok((-fit.slope, stderr))
}
