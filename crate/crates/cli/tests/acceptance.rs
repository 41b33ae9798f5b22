//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, then exits non-zero if any
//! failed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use relaxkit::echodecay::{classify_regime, crossover_diffusion, scaling_exponent};
use relaxkit::fitting::{
    compare_mono_stretched, fit_diffusion, fit_echo, fit_orbach, DiffusionDataset,
    DiffusionFitMode, DiffusionFitSpec, EchoModelKind, ParamSpec, SoluteFit,
};
use relaxkit::mechanisms::{compose_channels, kappa, spectral_density, DiffusionKernel};
use relaxkit::physconst::units::{cm2_per_s_to_si, per_cm3_to_si, si_to_cm2_per_s};
use relaxkit::solvent::{mole_fractions, proton_concentration_toluene, toluene_self_diffusion};
use relaxkit::synth::{echo_trace, linspace, orbach_t1_dataset, t2_dataset};
use relaxkit::{
    ConcentrationModel, DiffusionMechanism, DiffusionModel, EchoDecayModel, MixtureComponent,
    NuclearSpecies, OrbachParams, Regime, RelaxationChannel, ViscosityModel,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

const ORBACH_A: f64 = 5e5;
const DELTA_MEV: f64 = 60.0;
const D_CLOSEST: f64 = 0.35e-9;
const B0: f64 = 0.34;

fn orbach() -> OrbachParams {
    OrbachParams::new(ORBACH_A, DELTA_MEV).unwrap()
}

fn spectral_density_shape() -> Outcome {
    let j0 = spectral_density(0.0).unwrap();
    let grid = logspace(1e-4, 1e4, 10_000);
    let values: Vec<f64> = grid.iter().map(|&z| spectral_density(z).unwrap()).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let tail = spectral_density(100.0).unwrap() * 100f64.powi(4);
    check(
        j0 == 1.0 && decreasing && (tail / 81.0 - 1.0).abs() < 0.05,
        format!("J(0) = {j0}, strictly decreasing on 1e4 points: {decreasing}, J(100)*100^4 = {tail:.3}"),
    )
}

/// D that puts the electron argument z_e at `z` for the given kernel geometry.
fn diffusion_for_z(z: f64, omega_e: f64, d: f64) -> f64 {
    // z^2 = 2 ω τ, τ = 2 d^2 / D
    4.0 * d * d * omega_e / (z * z)
}

fn extreme_narrowing() -> Outcome {
    let species = NuclearSpecies::proton();
    let kernel = DiffusionKernel::new(&species, per_cm3_to_si(5e22), D_CLOSEST, B0).unwrap();
    let omega_e = relaxkit::physconst::GAMMA_E * B0;
    let ratio_n = (species.gamma_n / relaxkit::physconst::GAMMA_E)
        .abs()
        .sqrt();
    let mut worst = (0.0, 0.0);
    let mut companion = true;
    for z in logspace(1e-8, 0.999e-4, 200) {
        let dd = diffusion_for_z(z, omega_e, D_CLOSEST);
        let ze = kernel.electron_z(dd).unwrap();
        let r = kernel.rates(dd).unwrap();
        let gap = (r.r1 - r.r2).abs() / r.r1;
        if gap > worst.1 {
            worst = (ze, gap);
        }
        let leading = 3.0 * (ze - 0.6 * ze * ratio_n) / 16.0;
        if (gap / leading - 1.0).abs() > 1e-3 {
            companion = false;
        }
    }
    let literal = worst.1 < 1e-6;
    let detail = format!(
        "max |R1-R2|/R1 = {:.3e} at z_e = {:.3e} (limit 1e-6); leading-order 3(z_e-0.6 z_n)/16 matches every point to 1e-3: {companion}",
        worst.1, worst.0
    );
    if literal && companion {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; the gap is linear in z_e, so the 1e-6 bound only holds for z_e below about 5.5e-6"
        ))
    }
}

fn orbach_recovery() -> Outcome {
    let temps = linspace(160.0, 300.0, 10);
    let mut deltas = Vec::new();
    for seed in 0..100 {
        let ds = orbach_t1_dataset(&orbach(), &temps, 0.03, seed).unwrap();
        deltas.push(fit_orbach(&ds, true).unwrap().params.delta);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let inside = deltas
        .iter()
        .filter(|d| (*d - DELTA_MEV).abs() <= 2.0)
        .count();
    check(
        (mean - DELTA_MEV).abs() < 1.0 && inside >= 95,
        format!("mean Δ = {mean:.3} meV, {inside}/100 seeds within 60 ± 2 meV"),
    )
}

fn isotope_ratio() -> Outcome {
    let h = NuclearSpecies::proton();
    let d = NuclearSpecies::deuteron();
    let ratio = kappa(&h) / kappa(&d);
    let c = per_cm3_to_si(5e22);
    let kh = DiffusionKernel::new(&h, c, D_CLOSEST, B0).unwrap();
    let kd = DiffusionKernel::new(&d, c, D_CLOSEST, B0).unwrap();
    let omega_e = relaxkit::physconst::GAMMA_E * B0;
    let dd = diffusion_for_z(1e-8, omega_e, D_CLOSEST);
    let r2_ratio = kh.rates(dd).unwrap().r2 / kd.rates(dd).unwrap().r2;
    check(
        (ratio - 15.9).abs() <= 0.1 && (r2_ratio / ratio - 1.0).abs() < 1e-3,
        format!("κ(1H)/κ(2H) = {ratio:.4}, extreme-narrowing R2 ratio = {r2_ratio:.4}"),
    )
}

fn toluene_channels(species: NuclearSpecies) -> Vec<RelaxationChannel> {
    let solute = DiffusionModel::StokesEinstein {
        radius: 0.35e-9,
        viscosity: ViscosityModel::VogelFulcher {
            eta0: 9.28e-5,
            b: 356.0,
            t0: 100.0,
        },
    };
    let mech = DiffusionMechanism::new(
        D_CLOSEST,
        species,
        ConcentrationModel::PerryToluene,
        DiffusionModel::TolueneSelfDiffusion,
        solute,
    )
    .with_field(B0);
    vec![
        RelaxationChannel::orbach(orbach()),
        RelaxationChannel::TranslationalDiffusion(mech),
    ]
}

fn interior_extremum(y: &[f64], minimum: bool) -> Option<usize> {
    let best = if minimum {
        (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b]))
    } else {
        (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b]))
    }?;
    (best > 0 && best + 1 < y.len()).then_some(best)
}

fn composite_shape() -> Outcome {
    let temps = linspace(170.0, 300.0, 1301);
    let t2 = |ch: &[RelaxationChannel]| -> Vec<f64> {
        temps
            .iter()
            .map(|&t| 1.0 / compose_channels(ch, t).unwrap().value.r2)
            .collect()
    };
    let h = t2(&toluene_channels(NuclearSpecies::proton()));
    let d = t2(&toluene_channels(NuclearSpecies::deuteron()));
    let minimum = interior_extremum(&h, true);
    let maximum = interior_extremum(&h, false);
    let ordered = h.iter().zip(&d).all(|(a, b)| a < b);
    let detail = format!(
        "interior T2 minimum: {}; interior T2 maximum: {}; T2(h) < T2(d) on all 1301 points: {ordered}",
        minimum.map_or("none".into(), |i| format!("{} K", temps[i])),
        maximum.map_or("none".into(), |i| format!("{:.1} K ({:.3} us)", temps[i], h[i] * 1e6)),
    );
    if minimum.is_some() && ordered {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; rising Orbach and falling diffusion rates sum to an interior rate minimum, i.e. a T2 maximum"
        ))
    }
}

fn diffusion_datasets(noise: f64, seed: u64) -> Vec<DiffusionDataset> {
    let solute = DiffusionModel::parametric(2e-8, 1200.0, 160.0, 6.0);
    let temps = linspace(150.0, 300.0, 12);
    [
        (NuclearSpecies::proton(), "h", 0u64),
        (NuclearSpecies::deuteron(), "d", 1000),
    ]
    .into_iter()
    .map(|(species, label, offset)| {
        let mech = DiffusionMechanism::new(
            D_CLOSEST,
            species.clone(),
            ConcentrationModel::PerryToluene,
            DiffusionModel::TolueneSelfDiffusion,
            solute.clone(),
        );
        let channels = [
            RelaxationChannel::orbach(orbach()),
            RelaxationChannel::TranslationalDiffusion(mech),
        ];
        DiffusionDataset {
            data: t2_dataset(&channels, &temps, noise, seed + offset, label).unwrap(),
            species,
            concentration: ConcentrationModel::PerryToluene,
            solvent_diffusion: DiffusionModel::TolueneSelfDiffusion,
        }
    })
    .collect()
}

fn fitted_d(noise: f64, seed: u64) -> f64 {
    let mode = DiffusionFitMode::Parametric(SoluteFit {
        d0: ParamSpec::bounded("D0", 1e-7, 1e-14, 1e-2),
        activation: ParamSpec::fixed("Ea", 1200.0),
        vf_t0: ParamSpec::fixed("T0", 160.0),
        exponent: 6.0,
    });
    let spec = DiffusionFitSpec::new(
        diffusion_datasets(noise, seed),
        ParamSpec::bounded("d", 0.45e-9, 0.1e-9, 1.0e-9),
        mode,
        orbach(),
    );
    fit_diffusion(&spec).unwrap().d
}

fn diffusion_round_trip() -> Outcome {
    let noisy = fitted_d(0.05, 7);
    let exact = fitted_d(0.0, 0);
    check(
        (noisy / D_CLOSEST - 1.0).abs() < 0.10 && (exact / D_CLOSEST - 1.0).abs() < 1e-3,
        format!(
            "5% noise: d = {:.4} nm; noiseless: d = {:.6} nm",
            noisy * 1e9,
            exact * 1e9
        ),
    )
}

fn mixture_stoichiometry() -> Outcome {
    let components = vec![
        MixtureComponent {
            label: "CS2".into(),
            density: 1.266,
            molar_mass: 76.14,
            nuclei_per_molecule: Default::default(),
            volume_fraction: 0.75,
        },
        MixtureComponent {
            label: "S2Cl2".into(),
            density: 1.688,
            molar_mass: 135.04,
            nuclei_per_molecule: [("Cl".to_string(), 2.0)].into_iter().collect(),
            volume_fraction: 0.25,
        },
    ];
    let x = mole_fractions(&components).unwrap()["S2Cl2"];
    check(
        (x - 0.20).abs() <= 0.01,
        format!("S2Cl2 mole fraction = {x:.4}"),
    )
}

fn crossover() -> Outcome {
    let d_min =
        si_to_cm2_per_s(crossover_diffusion(&NuclearSpecies::chlorine35(), D_CLOSEST).unwrap());
    let report = classify_regime(cm2_per_s_to_si(5e-16), cm2_per_s_to_si(d_min), 0.12);
    let within = d_min / 1e-10 <= 2.0 && d_min / 1e-10 >= 0.5;
    check(
        within && report.regime == Regime::SlowDiffusion,
        format!(
            "D_min = {d_min:.4e} cm2/s; D = 5e-16 cm2/s -> {}",
            report.regime
        ),
    )
}

fn scaling() -> Outcome {
    let (p, _) = scaling_exponent(
        &[230e-6, 20e-6],
        &[cm2_per_s_to_si(1e-15), cm2_per_s_to_si(1e-10)],
    )
    .unwrap();
    let ds = logspace(1e-16, 1e-9, 15);
    let t2: Vec<f64> = ds.iter().map(|d| 3e-9 * d.powf(-0.36)).collect();
    let (q, _) = scaling_exponent(&t2, &ds).unwrap();
    check(
        (p - 0.212).abs() <= 0.005 && (q - 0.36).abs() <= 1e-6,
        format!("endpoint exponent p = {p:.4}; exact D^-0.36 series -> {q:.9}"),
    )
}

fn solvent_formulas() -> Outcome {
    let (lo, hi) =
        linspace(150.0, 300.0, 301)
            .into_iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), t| {
                let c = proton_concentration_toluene(t).unwrap().value;
                (lo.min(c), hi.max(c))
            });
    let d300 = toluene_self_diffusion(300.0).unwrap().value;
    check(
        lo >= 4.4e22 && hi <= 5.3e22 && (d300 / 2.04e-5 - 1.0).abs() <= 0.005,
        format!("concentration range [{lo:.4e}, {hi:.4e}] cm^-3; D(300 K) = {d300:.5e} cm2/s"),
    )
}

fn echo_fits() -> Outcome {
    let t2 = 230e-6;
    let mono = EchoDecayModel::Mono { a: 1.0, t2 };
    let long: Vec<f64> = linspace(0.0, 3.0 * t2, 41);
    let trace = echo_trace(&mono, &long, 0.02, 11).unwrap();
    let fitted = fit_echo(&trace, EchoModelKind::Mono).unwrap().value("T2");
    let mono_ok = (fitted / t2 - 1.0).abs() < 0.05;

    let stretched = EchoDecayModel::Stretched {
        a: 1.0,
        t2,
        n: 9.0 / 8.0,
    };
    let short = linspace(0.0, 0.15 * t2, 32);
    let mut fractions = Vec::new();
    let mut pattern_ok = true;
    for noise in [0.001, 0.0025, 0.005, 0.01, 0.02] {
        let hits = (0..20)
            .filter(|&seed| {
                let tr = echo_trace(&stretched, &short, noise, 100 + seed).unwrap();
                compare_mono_stretched(&tr, 9.0 / 8.0)
                    .unwrap()
                    .distinguishable
            })
            .count();
        let majority = hits * 2 > 20;
        pattern_ok &= majority == (noise < 0.005);
        fractions.push(format!("{}%: {hits}/20", noise * 100.0));
    }
    check(
        mono_ok && pattern_ok,
        format!(
            "mono T2 = {:.2} us (truth 230); distinguishable n=1 vs 9/8 by seed: {}",
            fitted * 1e6,
            fractions.join(", ")
        ),
    )
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn cli_robustness() -> Outcome {
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_relaxkit"))
            .args(args)
            .current_dir(fixtures())
            .output()
            .expect("binary runs")
    };
    let malformed: &[(&[&str], &[&str])] = &[
        (
            &["fit-orbach", "--data", "bad_negative_time.csv"],
            &["row 2", "time_us"],
        ),
        (
            &["fit-orbach", "--data", "bad_non_numeric.csv"],
            &["row 2", "time_us"],
        ),
        (
            &["fit-orbach", "--data", "bad_missing_column.csv"],
            &["time_us"],
        ),
        (
            &["fit-orbach", "--data", "bad_empty.csv"],
            &["bad_empty.csv"],
        ),
        (&["fit-echo", "--data", "bad_duplicate_tau.csv"], &["row 3"]),
        (
            &["predict", "--config", "bad_unknown_field.json"],
            &["channels[0]", "delta_mev"],
        ),
        (
            &["predict", "--config", "bad_wrong_type.json"],
            &["field_B0_T"],
        ),
        (
            &["predict", "--config", "bad_negative_distance.json"],
            &["channels[0].d_nm"],
        ),
        (&["predict", "--config", "bad_syntax.json"], &["line 2"]),
        (
            &["fit-orbach", "--data", "two_points.csv"],
            &["at least 3 points"],
        ),
    ];
    let mut problems = Vec::new();
    for (args, needles) in malformed {
        let o = run(args);
        let err = String::from_utf8_lossy(&o.stderr);
        if o.status.code() != Some(2) || !needles.iter().all(|n| err.contains(n)) {
            problems.push(format!("{args:?} -> {:?}: {}", o.status.code(), err.trim()));
        }
    }
    let golden: &[(&str, &[&str])] = &[
        (
            "predict_orbach",
            &[
                "predict",
                "--config",
                "orbach_only.json",
                "--temps",
                "170:300:14",
                "--json",
            ],
        ),
        (
            "predict_composite",
            &[
                "predict",
                "--config",
                "composite_h.json",
                "--temps",
                "170:300:27",
                "--json",
            ],
        ),
        (
            "fit_orbach",
            &["fit-orbach", "--data", "t1_delta60.csv", "--json"],
        ),
        (
            "fit_diffusion",
            &["fit-diffusion", "--config", "diffusion_fit.json", "--json"],
        ),
        (
            "fit_echo",
            &[
                "fit-echo",
                "--data",
                "echo_mono.csv",
                "--compare",
                "1.125",
                "--json",
            ],
        ),
        (
            "regime_cl",
            &[
                "regime",
                "--config",
                "regime_cl.json",
                "--D",
                "5e-16",
                "--json",
            ],
        ),
    ];
    for (name, args) in golden {
        let expected = std::fs::read(
            Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.json")),
        )
        .unwrap_or_default();
        for _ in 0..3 {
            let o = run(args);
            if !o.status.success() || o.stdout != expected {
                problems.push(format!("{name}: report differs from golden"));
                break;
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} malformed inputs exit 2 with addressed diagnostics; {} golden reports byte-stable over 3 runs", malformed.len(), golden.len())
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        (
            "spectral density",
            Duration::from_secs(1),
            spectral_density_shape,
        ),
        (
            "extreme narrowing identity",
            Duration::from_secs(1),
            extreme_narrowing,
        ),
        ("Orbach recovery", Duration::from_secs(5), orbach_recovery),
        ("isotope ratio", Duration::from_secs(1), isotope_ratio),
        (
            "composite-model shape",
            Duration::from_secs(5),
            composite_shape,
        ),
        (
            "diffusion-fit round trip",
            Duration::from_secs(30),
            diffusion_round_trip,
        ),
        (
            "mixture stoichiometry",
            Duration::from_secs(1),
            mixture_stoichiometry,
        ),
        ("crossover coefficient", Duration::from_secs(1), crossover),
        ("scaling exponent", Duration::from_secs(1), scaling),
        ("solvent formulas", Duration::from_secs(1), solvent_formulas),
        ("echo-decay fits", Duration::from_secs(10), echo_fits),
        ("CLI robustness", Duration::from_secs(5), cli_robustness),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        println!(
            "criterion {:2} {} {name} ({:.1} ms): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64() * 1e3
        );
        if !ok {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!(
            "acceptance: {} of 12 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
