//! Seeded synthetic data. The same seed always produces the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::echodecay::{evaluate_decay, EchoDecayModel};
use crate::error::{input, Result};
use crate::fitting::{EchoPoint, EchoTrace, RelaxationDataset, RelaxationPoint, TimeQuantity};
use crate::mechanisms::{
    compose_channels, orbach_rate, OrbachParams, RelaxationChannel, ORBACH_T2_RATIO,
};

/// Relative σ attached to noiseless points so that weights stay defined.
pub const NOMINAL_RELATIVE_SIGMA: f64 = 0.01;

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_noise(noise: f64) -> Result<()> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(input(format!("noise level must be >= 0, got {noise}")));
    }
    Ok(())
}

/// value·(1 + noise·N(0,1)), redrawn in the rare case it is not positive.
fn multiplicative(value: f64, noise: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let g: f64 = StandardNormal.sample(rng);
        let v = value * (1.0 + noise * g);
        if v > 0.0 {
            return v;
        }
    }
}

fn noisy_series(
    quantity: TimeQuantity,
    label: &str,
    temperatures: &[f64],
    truth: impl Fn(f64) -> Result<f64>,
    noise: f64,
    seed: u64,
) -> Result<RelaxationDataset> {
    check_noise(noise)?;
    let mut rng = rng(seed);
    let rel_sigma = if noise > 0.0 {
        noise
    } else {
        NOMINAL_RELATIVE_SIGMA
    };
    let points = temperatures
        .iter()
        .map(|&t| {
            let time = truth(t)?;
            Ok(RelaxationPoint {
                temperature: t,
                time: if noise > 0.0 {
                    multiplicative(time, noise, &mut rng)
                } else {
                    time
                },
                sigma: rel_sigma * time,
                line: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RelaxationDataset::new(quantity, label, points)
}

/// T1 = 1/(A·exp(−Δ/k_BT)) with multiplicative Gaussian noise of relative
/// size `noise`; σ is `noise` times the true value.
pub fn orbach_t1_dataset(
    params: &OrbachParams,
    temperatures: &[f64],
    noise: f64,
    seed: u64,
) -> Result<RelaxationDataset> {
    noisy_series(
        TimeQuantity::T1,
        "orbach",
        temperatures,
        |t| Ok(1.0 / orbach_rate(params, ORBACH_T2_RATIO, t)?.r1),
        noise,
        seed,
    )
}

/// T2 of the composed `channels`, same noise model as [`orbach_t1_dataset`].
pub fn t2_dataset(
    channels: &[RelaxationChannel],
    temperatures: &[f64],
    noise: f64,
    seed: u64,
    label: &str,
) -> Result<RelaxationDataset> {
    noisy_series(
        TimeQuantity::T2,
        label,
        temperatures,
        |t| Ok(1.0 / compose_channels(channels, t)?.value.r2),
        noise,
        seed,
    )
}

/// Echo trace with additive Gaussian noise of absolute size `noise`.
/// σ of every point is `noise` (or 1e-3 when noiseless).
pub fn echo_trace(
    model: &EchoDecayModel,
    taus: &[f64],
    noise: f64,
    seed: u64,
) -> Result<EchoTrace> {
    check_noise(noise)?;
    model.validate()?;
    let mut rng = rng(seed);
    let sigma = if noise > 0.0 { noise } else { 1e-3 };
    let points = taus
        .iter()
        .map(|&tau| {
            let v = evaluate_decay(model, tau)?;
            let g: f64 = StandardNormal.sample(&mut rng);
            Ok(EchoPoint {
                tau,
                amplitude: v + noise * g,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EchoTrace::new(points)
}
