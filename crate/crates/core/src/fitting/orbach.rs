use super::{
    weighted_linear_fit, FitOutcome, FitParameter, LinearFit, RelaxationDataset, TimeQuantity,
};
use crate::error::{input, Result};
use crate::mechanisms::OrbachParams;
use crate::physconst::{convert_energy, EnergyUnit};

/// Orbach parameters extracted from T1(T) together with the underlying
/// Arrhenius line.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbachFit {
    /// Parameters `A` (1/s) and `delta_meV`.
    pub outcome: FitOutcome,
    pub params: OrbachParams,
    /// ln(1/T1) against 1/T.
    pub line: LinearFit,
}

/// Arrhenius fit of ln(1/T1) against 1/T: Δ = −slope·k_B, A = exp(intercept).
///
/// With `weighted` the ln-space uncertainty σ/T1 of each point is used;
/// otherwise all points carry unit weight.
pub fn fit_orbach(dataset: &RelaxationDataset, weighted: bool) -> Result<OrbachFit> {
    if dataset.quantity != TimeQuantity::T1 {
        return Err(input("Orbach fit needs a T1 dataset"));
    }
    if dataset.len() < 3 {
        return Err(input(format!(
            "Orbach fit needs at least 3 points, got {}",
            dataset.len()
        )));
    }
    let pts = dataset.points();
    let x: Vec<f64> = pts.iter().map(|p| 1.0 / p.temperature).collect();
    let y: Vec<f64> = pts.iter().map(|p| -p.time.ln()).collect();
    let sigma: Vec<f64> = if weighted {
        pts.iter().map(|p| p.sigma / p.time).collect()
    } else {
        vec![1.0; pts.len()]
    };
    let line = weighted_linear_fit(&x, &y, &sigma)?;

    let k_to_mev = convert_energy(1.0, EnergyUnit::Kelvin, EnergyUnit::MilliElectronVolt);
    let delta = -line.slope * k_to_mev;
    let prefactor = line.intercept.exp();
    let params = OrbachParams::new(prefactor, delta).map_err(|_| {
        input(format!(
            "T1 data imply a non-activated process (fitted splitting {delta} meV)"
        ))
    })?;

    let outcome = FitOutcome {
        parameters: vec![
            FitParameter {
                name: "A".into(),
                value: prefactor,
                stderr: Some(prefactor * line.stderr_intercept),
                fixed: false,
            },
            FitParameter {
                name: "delta_meV".into(),
                value: delta,
                stderr: Some(line.stderr_slope * k_to_mev),
                fixed: false,
            },
        ],
        chi2: line.chi2,
        reduced_chi2: line.reduced_chi2,
        degrees_of_freedom: pts.len() - 2,
        residuals: line.residuals.iter().map(|r| -r).collect(),
        iterations: 0,
        converged: true,
        singular: false,
    };
    Ok(OrbachFit {
        outcome,
        params,
        line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use approx::assert_relative_eq;

    fn temps() -> Vec<f64> {
        synth::linspace(160.0, 300.0, 10)
    }

    #[test]
    fn noiseless_recovery() {
        let truth = OrbachParams::new(3e6, 60.0).unwrap();
        let ds = synth::orbach_t1_dataset(&truth, &temps(), 0.0, 0).unwrap();
        let fit = fit_orbach(&ds, true).unwrap();
        assert_relative_eq!(fit.params.delta, 60.0, max_relative = 1e-10);
        assert_relative_eq!(fit.params.prefactor, 3e6, max_relative = 1e-9);
        assert!(fit.outcome.stderr("delta_meV").unwrap() < 1e-6);
    }

    #[test]
    fn noisy_recovery_60() {
        let truth = OrbachParams::new(3e6, 60.0).unwrap();
        let ds = synth::orbach_t1_dataset(&truth, &temps(), 0.03, 7).unwrap();
        let fit = fit_orbach(&ds, true).unwrap();
        assert!(
            (fit.params.delta - 60.0).abs() < 2.0,
            "{}",
            fit.params.delta
        );
    }

    #[test]
    fn noisy_recovery_33_on_average() {
        // The per-seed scatter of Δ is ~0.9 meV at 3% noise, so ±1 meV is
        // checked on the mean of 20 seeds.
        let truth = OrbachParams::new(3e6, 33.0).unwrap();
        let mean = (0..20)
            .map(|seed| {
                let ds = synth::orbach_t1_dataset(&truth, &temps(), 0.03, seed).unwrap();
                fit_orbach(&ds, true).unwrap().params.delta
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - 33.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn splitting_invariant_under_time_rescaling() {
        let truth = OrbachParams::new(3e6, 60.0).unwrap();
        let ds = synth::orbach_t1_dataset(&truth, &temps(), 0.03, 3).unwrap();
        let scaled = RelaxationDataset::from_triples(
            TimeQuantity::T1,
            "scaled",
            &ds.points()
                .iter()
                .map(|p| (p.temperature, p.time * 37.5, p.sigma * 37.5))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let a = fit_orbach(&ds, true).unwrap();
        let b = fit_orbach(&scaled, true).unwrap();
        assert_relative_eq!(a.params.delta, b.params.delta, max_relative = 1e-12);
        assert_relative_eq!(
            a.params.prefactor / 37.5,
            b.params.prefactor,
            max_relative = 1e-9
        );
    }

    #[test]
    fn input_errors() {
        let t2 = RelaxationDataset::from_triples(
            TimeQuantity::T2,
            "x",
            &[
                (200.0, 1e-5, 1e-7),
                (250.0, 1e-5, 1e-7),
                (300.0, 1e-5, 1e-7),
            ],
        )
        .unwrap();
        assert!(fit_orbach(&t2, true).is_err());
        let short = RelaxationDataset::from_triples(
            TimeQuantity::T1,
            "x",
            &[(200.0, 1e-5, 1e-7), (250.0, 1e-5, 1e-7)],
        )
        .unwrap();
        assert!(fit_orbach(&short, true).is_err());
    }
}
