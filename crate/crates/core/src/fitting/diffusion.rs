use std::collections::BTreeMap;

use serde::Serialize;

use super::invert::{invert_rate_for_d, DEFAULT_D_BRACKET};
use super::lm::{nonlinear_least_squares, LeastSquaresProblem, LmOptions, ParamSpec};
use super::{FitOutcome, FitParameter, RelaxationDataset, TimeQuantity};
use crate::error::{input, Error, Result};
use crate::mechanisms::{orbach_rate, DiffusionKernel, OrbachParams, ORBACH_T2_RATIO};
use crate::physconst::{NuclearSpecies, DEFAULT_FIELD_T};
use crate::solvent::{ConcentrationModel, DiffusionModel};

/// One T2 series together with the bath it was measured in. Only the
/// species, its concentration and the solvent self-diffusion differ
/// between datasets; d and the solute diffusion are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionDataset {
    pub data: RelaxationDataset,
    pub species: NuclearSpecies,
    pub concentration: ConcentrationModel,
    pub solvent_diffusion: DiffusionModel,
}

/// Parametric solute diffusion D0·exp(−Ea/T)·exp(−(T0/T)^p), SI.
#[derive(Debug, Clone, PartialEq)]
pub struct SoluteFit {
    /// m²/s; fitted internally as ln D0.
    pub d0: ParamSpec,
    /// K.
    pub activation: ParamSpec,
    /// K.
    pub vf_t0: ParamSpec,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionFitMode {
    Parametric(SoluteFit),
    /// Invert every point for D(T). `d_grid` (m) overrides the default
    /// 41-point logarithmic scan across the d bounds.
    Pointwise {
        d_grid: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionFitSpec {
    pub datasets: Vec<DiffusionDataset>,
    /// Distance of closest approach, m.
    pub d: ParamSpec,
    pub mode: DiffusionFitMode,
    /// Held fixed, normally from a prior T1 fit.
    pub orbach: OrbachParams,
    pub orbach_t2_ratio: f64,
    /// T.
    pub b0: f64,
    /// Weight by the per-point σ; otherwise every point carries the mean σ.
    pub weighted: bool,
    pub options: LmOptions,
}

impl DiffusionFitSpec {
    pub fn new(
        datasets: Vec<DiffusionDataset>,
        d: ParamSpec,
        mode: DiffusionFitMode,
        orbach: OrbachParams,
    ) -> Self {
        Self {
            datasets,
            d,
            mode,
            orbach,
            orbach_t2_ratio: ORBACH_T2_RATIO,
            b0: DEFAULT_FIELD_T,
            weighted: true,
            options: LmOptions::default(),
        }
    }
}

/// A measurement left out of the fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedPoint {
    pub label: String,
    pub temperature: f64,
    /// s.
    pub time: f64,
    /// 1/T2 minus the Orbach rate, 1/s.
    pub excess_rate: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseRow {
    pub label: String,
    pub temperature: f64,
    /// m²/s.
    pub total_diffusion: f64,
    /// Total minus solvent self-diffusion, m²/s. May be negative when the
    /// data are noisy.
    pub solute_diffusion: f64,
    pub out_of_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseDiffusion {
    pub rows: Vec<PointwiseRow>,
    /// Cross-isotope inconsistency at the selected d.
    pub inconsistency: f64,
    /// (d in m, inconsistency) for every scanned candidate.
    pub scan: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionFitOutcome {
    /// Parameters `d` (m) and, in parametric mode, `D0` (m²/s), `Ea` (K), `T0` (K).
    pub fit: FitOutcome,
    /// m.
    pub d: f64,
    #[serde(skip)]
    pub solute: Option<DiffusionModel>,
    pub pointwise: Option<PointwiseDiffusion>,
    pub excluded: Vec<ExcludedPoint>,
}

/// Per-point quantities that do not depend on the fitted parameters.
#[derive(Debug, Clone)]
struct Prepared {
    dataset: usize,
    temperature: f64,
    time: f64,
    sigma: f64,
    concentration: f64,
    solvent: f64,
    orbach_r2: f64,
    out_of_range: bool,
}

fn prepare(spec: &DiffusionFitSpec) -> Result<(Vec<Prepared>, Vec<ExcludedPoint>)> {
    if spec.datasets.is_empty() {
        return Err(input("diffusion fit needs at least one dataset"));
    }
    let mean_sigma = {
        let all: Vec<f64> = spec
            .datasets
            .iter()
            .flat_map(|d| d.data.points().iter().map(|p| p.sigma))
            .collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (k, ds) in spec.datasets.iter().enumerate() {
        if ds.data.quantity != TimeQuantity::T2 {
            return Err(input(format!(
                "dataset '{}' is not a T2 series",
                ds.data.label
            )));
        }
        ds.species.validate()?;
        for p in ds.data.points() {
            let orbach_r2 = orbach_rate(&spec.orbach, spec.orbach_t2_ratio, p.temperature)?.r2;
            let excess = 1.0 / p.time - orbach_r2;
            if !(excess > 0.0) {
                excluded.push(ExcludedPoint {
                    label: ds.data.label.clone(),
                    temperature: p.temperature,
                    time: p.time,
                    excess_rate: excess,
                    reason: "measured rate at or below the Orbach rate".into(),
                });
                continue;
            }
            let c = ds.concentration.evaluate(p.temperature)?;
            let solvent = ds.solvent_diffusion.evaluate(p.temperature)?;
            kept.push(Prepared {
                dataset: k,
                temperature: p.temperature,
                time: p.time,
                sigma: if spec.weighted { p.sigma } else { mean_sigma },
                concentration: c.value,
                solvent: solvent.value,
                orbach_r2,
                out_of_range: c.out_of_range || solvent.out_of_range,
            });
        }
    }
    Ok((kept, excluded))
}

const NM: f64 = 1e-9;

struct ParametricProblem<'a> {
    spec: &'a DiffusionFitSpec,
    points: &'a [Prepared],
    exponent: f64,
}

impl ParametricProblem<'_> {
    /// p = [d (nm), ln D0, Ea, T0].
    fn solute(&self, p: &[f64]) -> DiffusionModel {
        DiffusionModel::parametric(p[1].exp(), p[2], p[3], self.exponent)
    }
}

impl LeastSquaresProblem for ParametricProblem<'_> {
    fn residual_count(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, p: &[f64]) -> Result<Vec<f64>> {
        let solute = self.solute(p);
        self.points
            .iter()
            .map(|pt| {
                let species = &self.spec.datasets[pt.dataset].species;
                let kernel =
                    DiffusionKernel::new(species, pt.concentration, p[0] * NM, self.spec.b0)?;
                let d_total = pt.solvent + solute.evaluate(pt.temperature)?.value;
                let r2 = pt.orbach_r2 + kernel.rates(d_total)?.r2;
                Ok((1.0 / r2 - pt.time) / pt.sigma)
            })
            .collect()
    }
}

fn scaled(spec: &ParamSpec, name: &str, f: impl Fn(f64) -> f64) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        initial: f(spec.initial),
        lower: f(spec.lower),
        upper: f(spec.upper),
        fixed: spec.fixed,
    }
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn fit_parametric(
    spec: &DiffusionFitSpec,
    solute: &SoluteFit,
    points: &[Prepared],
    excluded: Vec<ExcludedPoint>,
) -> Result<DiffusionFitOutcome> {
    if !(solute.d0.initial > 0.0) {
        return Err(input("initial D0 must be > 0"));
    }
    let specs = vec![
        scaled(&spec.d, "d", |v| v / NM),
        scaled(&solute.d0, "D0", ln_or_neg_inf),
        scaled(&solute.activation, "Ea", |v| v),
        scaled(&solute.vf_t0, "T0", |v| v),
    ];
    let problem = ParametricProblem {
        spec,
        points,
        exponent: solute.exponent,
    };
    let mut fit = nonlinear_least_squares(&problem, &specs, &spec.options)?;
    let model = problem.solute(&fit.parameters.iter().map(|p| p.value).collect::<Vec<_>>());
    for p in &mut fit.parameters {
        match p.name.as_str() {
            "d" => {
                p.value *= NM;
                p.stderr = p.stderr.map(|s| s * NM);
            }
            "D0" => {
                p.value = p.value.exp();
                p.stderr = p.stderr.map(|s| s * p.value);
            }
            _ => {}
        }
    }
    let d = fit.value("d");
    Ok(DiffusionFitOutcome {
        fit,
        d,
        solute: Some(model),
        pointwise: None,
        excluded,
    })
}

/// Result of inverting every point at one candidate d.
struct Inversion {
    rows: Vec<PointwiseRow>,
    failed: Vec<(usize, Error)>,
    score: f64,
    terms: Vec<f64>,
}

fn invert_all(spec: &DiffusionFitSpec, points: &[Prepared], d: f64) -> Result<Inversion> {
    let mut rows = Vec::with_capacity(points.len());
    let mut failed = Vec::new();
    let mut groups: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, pt) in points.iter().enumerate() {
        let ds = &spec.datasets[pt.dataset];
        let kernel = DiffusionKernel::new(&ds.species, pt.concentration, d, spec.b0)?;
        match invert_rate_for_d(1.0 / pt.time - pt.orbach_r2, &kernel, DEFAULT_D_BRACKET) {
            Ok(total) => {
                let solute = total - pt.solvent;
                groups
                    .entry((pt.temperature * 1e6).round() as i64)
                    .or_default()
                    .push((total, solute));
                rows.push(PointwiseRow {
                    label: ds.data.label.clone(),
                    temperature: pt.temperature,
                    total_diffusion: total,
                    solute_diffusion: solute,
                    out_of_range: pt.out_of_range,
                });
            }
            Err(e @ Error::Bracket { .. }) => failed.push((i, e)),
            Err(e) => return Err(e),
        }
    }
    // At each temperature shared by several datasets the solute D should
    // agree; deviations are scaled by the mean total D there.
    let mut terms = Vec::new();
    for members in groups.values().filter(|g| g.len() > 1) {
        let n = members.len() as f64;
        let mean_total = members.iter().map(|m| m.0).sum::<f64>() / n;
        let mean_solute = members.iter().map(|m| m.1).sum::<f64>() / n;
        terms.extend(members.iter().map(|m| (m.1 - mean_solute) / mean_total));
    }
    let score = terms.iter().map(|t| t * t).sum();
    Ok(Inversion {
        rows,
        failed,
        score,
        terms,
    })
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

const DEFAULT_GRID_POINTS: usize = 41;
const GOLDEN_ITERATIONS: usize = 60;

fn fit_pointwise(
    spec: &DiffusionFitSpec,
    d_grid: &Option<Vec<f64>>,
    points: &[Prepared],
    mut excluded: Vec<ExcludedPoint>,
) -> Result<DiffusionFitOutcome> {
    let search = spec.datasets.len() > 1 && !spec.d.fixed;
    let mut scan = Vec::new();
    let mut iterations = 0;
    let d = if search {
        let grid = match d_grid {
            Some(g) if !g.is_empty() => {
                if g.iter().any(|v| !(*v > 0.0)) {
                    return Err(input("d grid values must be > 0"));
                }
                let mut g = g.clone();
                g.sort_by(f64::total_cmp);
                g
            }
            _ => {
                if !(spec.d.lower > 0.0 && spec.d.upper.is_finite() && spec.d.upper > spec.d.lower)
                {
                    return Err(input("pointwise d scan needs finite positive d bounds"));
                }
                log_grid(spec.d.lower, spec.d.upper, DEFAULT_GRID_POINTS)
            }
        };
        let score = |d: f64| -> Result<f64> {
            let inv = invert_all(spec, points, d)?;
            Ok(if inv.terms.is_empty() {
                f64::INFINITY
            } else {
                inv.score
            })
        };
        for &d in &grid {
            scan.push((d, score(d)?));
        }
        iterations = grid.len();
        let best = (0..scan.len())
            .min_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1))
            .unwrap();
        if !scan[best].1.is_finite() {
            return Err(input(
                "datasets share no temperatures; cannot compare isotopes",
            ));
        }
        if best > 0 && best + 1 < scan.len() {
            // Golden-section refinement in ln d between the grid neighbours.
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (scan[best - 1].0.ln(), scan[best + 1].0.ln());
            let mut c = b - g * (b - a);
            let mut e = a + g * (b - a);
            let (mut fc, mut fe) = (score(c.exp())?, score(e.exp())?);
            for _ in 0..GOLDEN_ITERATIONS {
                if fc < fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - g * (b - a);
                    fc = score(c.exp())?;
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + g * (b - a);
                    fe = score(e.exp())?;
                }
                iterations += 1;
            }
            let cand = (0.5 * (a + b)).exp();
            if score(cand)? <= scan[best].1 {
                cand
            } else {
                scan[best].0
            }
        } else {
            scan[best].0
        }
    } else {
        spec.d.initial
    };

    let inv = invert_all(spec, points, d)?;
    for (i, e) in &inv.failed {
        let pt = &points[*i];
        excluded.push(ExcludedPoint {
            label: spec.datasets[pt.dataset].data.label.clone(),
            temperature: pt.temperature,
            time: pt.time,
            excess_rate: 1.0 / pt.time - pt.orbach_r2,
            reason: e.to_string(),
        });
    }
    let dof = inv.terms.len().saturating_sub(1);
    let fit = FitOutcome {
        parameters: vec![FitParameter {
            name: "d".into(),
            value: d,
            stderr: None,
            fixed: !search,
        }],
        chi2: inv.score,
        reduced_chi2: if dof > 0 { inv.score / dof as f64 } else { 0.0 },
        degrees_of_freedom: dof,
        residuals: inv.terms.clone(),
        iterations,
        converged: true,
        singular: false,
    };
    Ok(DiffusionFitOutcome {
        fit,
        d,
        solute: None,
        pointwise: Some(PointwiseDiffusion {
            rows: inv.rows,
            inconsistency: inv.score,
            scan,
        }),
        excluded,
    })
}

/// Fits the translational-diffusion channel to one or more T2 series with
/// the Orbach channel held fixed. Points whose rate does not exceed the
/// Orbach rate are excluded and listed in the outcome.
pub fn fit_diffusion(spec: &DiffusionFitSpec) -> Result<DiffusionFitOutcome> {
    if !(spec.orbach_t2_ratio > 0.0 && spec.orbach_t2_ratio <= 1.0) {
        return Err(input("Orbach T2/T1 ratio must lie in (0, 1]"));
    }
    if !(spec.d.initial > 0.0) {
        return Err(input("initial d must be > 0"));
    }
    if !(spec.d.initial >= spec.d.lower && spec.d.initial <= spec.d.upper) {
        return Err(input("initial d outside its bounds"));
    }
    let (points, excluded) = prepare(spec)?;
    if points.is_empty() {
        return Err(input(
            "no points left after excluding those at or below the Orbach rate",
        ));
    }
    match &spec.mode {
        DiffusionFitMode::Parametric(solute) => fit_parametric(spec, solute, &points, excluded),
        DiffusionFitMode::Pointwise { d_grid } => fit_pointwise(spec, d_grid, &points, excluded),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mechanisms::{DiffusionMechanism, RelaxationChannel};
    use crate::synth::{linspace, t2_dataset};
    use approx::assert_relative_eq;

    pub(crate) const D0: f64 = 2e-8;
    pub(crate) const EA: f64 = 1200.0;
    pub(crate) const T0: f64 = 160.0;

    pub(crate) fn orbach() -> OrbachParams {
        OrbachParams::new(5e5, 60.0).unwrap()
    }

    pub(crate) fn true_solute() -> DiffusionModel {
        DiffusionModel::parametric(D0, EA, T0, 6.0)
    }

    pub(crate) fn dataset(
        species: NuclearSpecies,
        label: &str,
        d: f64,
        noise: f64,
        seed: u64,
    ) -> DiffusionDataset {
        let mech = DiffusionMechanism::new(
            d,
            species.clone(),
            ConcentrationModel::PerryToluene,
            DiffusionModel::TolueneSelfDiffusion,
            true_solute(),
        );
        let channels = [
            RelaxationChannel::orbach(orbach()),
            RelaxationChannel::TranslationalDiffusion(mech),
        ];
        DiffusionDataset {
            data: t2_dataset(&channels, &linspace(150.0, 300.0, 12), noise, seed, label).unwrap(),
            species,
            concentration: ConcentrationModel::PerryToluene,
            solvent_diffusion: DiffusionModel::TolueneSelfDiffusion,
        }
    }

    pub(crate) fn two_isotopes(noise: f64, seed: u64) -> Vec<DiffusionDataset> {
        vec![
            dataset(NuclearSpecies::proton(), "h-toluene", 0.35e-9, noise, seed),
            dataset(
                NuclearSpecies::deuteron(),
                "d-toluene",
                0.35e-9,
                noise,
                seed + 1000,
            ),
        ]
    }

    pub(crate) fn parametric(d0_initial: f64) -> DiffusionFitMode {
        DiffusionFitMode::Parametric(SoluteFit {
            d0: ParamSpec::bounded("D0", d0_initial, 1e-14, 1e-2),
            activation: ParamSpec::fixed("Ea", EA),
            vf_t0: ParamSpec::fixed("T0", T0),
            exponent: 6.0,
        })
    }

    pub(crate) fn d_spec(initial: f64) -> ParamSpec {
        ParamSpec::bounded("d", initial, 0.1e-9, 1.0e-9)
    }

    #[test]
    fn noiseless_parametric_round_trip() {
        let spec = DiffusionFitSpec::new(
            two_isotopes(0.0, 0),
            d_spec(0.45e-9),
            parametric(1e-7),
            orbach(),
        );
        let out = fit_diffusion(&spec).unwrap();
        assert!(out.fit.converged);
        assert_relative_eq!(out.d, 0.35e-9, max_relative = 1e-4);
        assert_relative_eq!(out.fit.value("D0"), D0, max_relative = 1e-4);
        assert!(out.excluded.is_empty());
    }

    #[test]
    fn noisy_parametric_recovers_d() {
        let spec = DiffusionFitSpec::new(
            two_isotopes(0.05, 21),
            d_spec(0.45e-9),
            parametric(1e-7),
            orbach(),
        );
        let out = fit_diffusion(&spec).unwrap();
        assert!((out.d / 0.35e-9 - 1.0).abs() < 0.1, "{}", out.d);
    }

    /// χ²_red with d held at 0.45 nm and the solute form free, started
    /// from the D0-only solution, over the free-d optimum.
    fn fixed_d_ratio(seed: u64) -> (f64, bool) {
        let data = two_isotopes(0.05, seed);
        let free = fit_diffusion(&DiffusionFitSpec::new(
            data.clone(),
            d_spec(0.45e-9),
            parametric(1e-7),
            orbach(),
        ))
        .unwrap();
        let d0_only = fit_diffusion(&DiffusionFitSpec::new(
            data.clone(),
            ParamSpec::fixed("d", 0.45e-9),
            parametric(1e-7),
            orbach(),
        ))
        .unwrap();
        let flexible = DiffusionFitMode::Parametric(SoluteFit {
            d0: ParamSpec::bounded("D0", d0_only.fit.value("D0"), 1e-14, 1e-2),
            activation: ParamSpec::bounded("Ea", EA, 0.0, 5000.0),
            vf_t0: ParamSpec::bounded("T0", T0, 0.0, 250.0),
            exponent: 6.0,
        });
        let fixed = fit_diffusion(&DiffusionFitSpec::new(
            data,
            ParamSpec::fixed("d", 0.45e-9),
            flexible,
            orbach(),
        ))
        .unwrap();
        (
            fixed.fit.reduced_chi2 / free.fit.reduced_chi2,
            fixed.fit.converged,
        )
    }

    #[test]
    fn larger_fixed_d_still_fits_reasonably() {
        let mut ratios: Vec<f64> = (0..10).map(|s| fixed_d_ratio(s).0).collect();
        let good = ratios.iter().filter(|r| **r < 4.0).count();
        ratios.sort_by(f64::total_cmp);
        assert!(good >= 7, "{ratios:?}");
        assert!(ratios[5] < 4.0, "{ratios:?}");
    }

    #[test]
    fn pointwise_single_dataset_recovers_d_table() {
        let data = vec![dataset(NuclearSpecies::proton(), "h", 0.35e-9, 0.0, 0)];
        let spec = DiffusionFitSpec::new(
            data,
            d_spec(0.35e-9),
            DiffusionFitMode::Pointwise { d_grid: None },
            orbach(),
        );
        let out = fit_diffusion(&spec).unwrap();
        let table = out.pointwise.unwrap();
        assert_eq!(table.rows.len(), 12);
        for row in &table.rows {
            let truth = DiffusionModel::TolueneSelfDiffusion
                .evaluate(row.temperature)
                .unwrap()
                .value
                + true_solute().evaluate(row.temperature).unwrap().value;
            assert_relative_eq!(row.total_diffusion, truth, max_relative = 1e-6);
        }
    }

    #[test]
    fn pointwise_two_isotopes_selects_d() {
        let spec = DiffusionFitSpec::new(
            two_isotopes(0.0, 0),
            d_spec(0.3e-9),
            DiffusionFitMode::Pointwise { d_grid: None },
            orbach(),
        );
        let out = fit_diffusion(&spec).unwrap();
        assert_relative_eq!(out.d, 0.35e-9, max_relative = 1e-3);
        assert!(out.pointwise.unwrap().scan.len() == DEFAULT_GRID_POINTS);
    }

    #[test]
    fn points_below_orbach_floor_are_excluded() {
        let mut data = two_isotopes(0.0, 0);
        let mut pts = data[0].data.points().to_vec();
        // At 300 K make the measured T2 longer than the Orbach limit alone.
        let last = pts.last_mut().unwrap();
        let r2_orb = orbach_rate(&orbach(), ORBACH_T2_RATIO, last.temperature)
            .unwrap()
            .r2;
        last.time = 2.0 / r2_orb;
        data[0].data = RelaxationDataset::new(TimeQuantity::T2, "h-toluene", pts).unwrap();
        let spec = DiffusionFitSpec::new(data, d_spec(0.45e-9), parametric(1e-7), orbach());
        let out = fit_diffusion(&spec).unwrap();
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].temperature, 300.0);
        assert!(out.excluded[0].excess_rate < 0.0);
        assert_relative_eq!(out.d, 0.35e-9, max_relative = 1e-4);
    }

    #[test]
    fn setup_errors() {
        let spec = DiffusionFitSpec::new(vec![], d_spec(0.35e-9), parametric(1e-7), orbach());
        assert!(fit_diffusion(&spec).is_err());
        let mut data = two_isotopes(0.0, 0);
        data[0].data.quantity = TimeQuantity::T1;
        let spec = DiffusionFitSpec::new(data, d_spec(0.35e-9), parametric(1e-7), orbach());
        assert!(fit_diffusion(&spec).is_err());
        let spec = DiffusionFitSpec::new(
            two_isotopes(0.0, 0),
            d_spec(2e-9),
            parametric(1e-7),
            orbach(),
        );
        assert!(fit_diffusion(&spec).is_err());
    }
}
