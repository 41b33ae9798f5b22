//! Shared fixtures for the benchmarks.

use relaxkit::fitting::{
    DiffusionDataset, DiffusionFitMode, DiffusionFitSpec, ParamSpec, SoluteFit,
};
use relaxkit::synth::{echo_trace, linspace, orbach_t1_dataset, t2_dataset};
use relaxkit::{
    ConcentrationModel, DiffusionMechanism, DiffusionModel, EchoDecayModel, EchoTrace,
    NuclearSpecies, OrbachParams, RelaxationChannel, RelaxationDataset,
};

pub fn orbach() -> OrbachParams {
    OrbachParams::new(5e5, 60.0).expect("valid")
}

pub fn h_toluene(d: f64) -> DiffusionMechanism {
    DiffusionMechanism::new(
        d,
        NuclearSpecies::proton(),
        ConcentrationModel::PerryToluene,
        DiffusionModel::TolueneSelfDiffusion,
        DiffusionModel::parametric(2e-8, 1200.0, 160.0, 6.0),
    )
}

pub fn t1_data() -> RelaxationDataset {
    orbach_t1_dataset(&orbach(), &linspace(160.0, 300.0, 10), 0.03, 1).expect("valid")
}

/// Two-isotope T2 fit at 5% noise, d and D0 free.
pub fn diffusion_spec() -> DiffusionFitSpec {
    let temps = linspace(150.0, 300.0, 12);
    let datasets = [
        (NuclearSpecies::proton(), 1u64),
        (NuclearSpecies::deuteron(), 1001),
    ]
    .into_iter()
    .map(|(species, seed)| {
        let mut mech = h_toluene(0.35e-9);
        mech.species = species.clone();
        let channels = [
            RelaxationChannel::orbach(orbach()),
            RelaxationChannel::TranslationalDiffusion(mech),
        ];
        DiffusionDataset {
            data: t2_dataset(&channels, &temps, 0.05, seed, &species.label).expect("valid"),
            species,
            concentration: ConcentrationModel::PerryToluene,
            solvent_diffusion: DiffusionModel::TolueneSelfDiffusion,
        }
    })
    .collect();
    let mode = DiffusionFitMode::Parametric(SoluteFit {
        d0: ParamSpec::bounded("D0", 1e-7, 1e-14, 1e-2),
        activation: ParamSpec::fixed("Ea", 1200.0),
        vf_t0: ParamSpec::fixed("T0", 160.0),
        exponent: 6.0,
    });
    DiffusionFitSpec::new(
        datasets,
        ParamSpec::bounded("d", 0.45e-9, 0.1e-9, 1e-9),
        mode,
        orbach(),
    )
}

pub fn stretched_trace(noise: f64) -> EchoTrace {
    let model = EchoDecayModel::Stretched {
        a: 1.0,
        t2: 230e-6,
        n: 1.125,
    };
    echo_trace(&model, &linspace(0.0, 0.6e-3, 41), noise, 3).expect("valid")
}
