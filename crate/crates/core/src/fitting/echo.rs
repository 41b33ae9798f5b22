use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use super::lm::{nonlinear_least_squares, LeastSquaresProblem, LmOptions, ParamSpec};
use super::{weighted_linear_fit, EchoTrace, FitOutcome};
use crate::echodecay::EchoDecayModel;
use crate::error::{input, Result};

/// Which decay shape to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EchoModelKind {
    Mono,
    /// `n: None` fits the exponent; `Some(n)` holds it fixed.
    Stretched {
        n: Option<f64>,
    },
    ModulatedBi,
}

/// Parameter names reported by [`fit_echo`], per model kind.
pub const ECHO_PARAMETER_NAMES: [(&str, &[&str]); 3] = [
    ("mono", &["A", "T2"]),
    ("stretched", &["A", "T2", "n"]),
    (
        "modulated_bi",
        &[
            "A_inner",
            "T2_inner",
            "A_outer",
            "T2_outer",
            "omega_mod",
            "phase",
        ],
    ),
];

impl EchoModelKind {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            EchoModelKind::Mono => ECHO_PARAMETER_NAMES[0].1,
            EchoModelKind::Stretched { .. } => ECHO_PARAMETER_NAMES[1].1,
            EchoModelKind::ModulatedBi => ECHO_PARAMETER_NAMES[2].1,
        }
    }

    /// Rebuilds the decay model from a fit outcome produced for this kind.
    pub fn model_from(&self, fit: &FitOutcome) -> EchoDecayModel {
        match self {
            EchoModelKind::Mono => EchoDecayModel::Mono {
                a: fit.value("A"),
                t2: fit.value("T2"),
            },
            EchoModelKind::Stretched { .. } => EchoDecayModel::Stretched {
                a: fit.value("A"),
                t2: fit.value("T2"),
                n: fit.value("n"),
            },
            EchoModelKind::ModulatedBi => EchoDecayModel::ModulatedBi {
                a_inner: fit.value("A_inner"),
                t2_inner: fit.value("T2_inner"),
                a_outer: fit.value("A_outer"),
                t2_outer: fit.value("T2_outer"),
                omega_mod: fit.value("omega_mod"),
                phase: fit.value("phase"),
            },
        }
    }
}

// Internally τ and T2 are in μs and ω in rad/μs so that LM step tolerances
// see parameters of order one.
const US: f64 = 1e-6;

struct EchoProblem {
    kind: EchoModelKind,
    tau: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

impl EchoProblem {
    fn new(trace: &EchoTrace, kind: EchoModelKind) -> Self {
        let pts = trace.points();
        Self {
            kind,
            tau: pts.iter().map(|p| p.tau / US).collect(),
            y: pts.iter().map(|p| p.amplitude).collect(),
            sigma: pts.iter().map(|p| p.sigma).collect(),
        }
    }

    fn model(&self, p: &[f64], tau: f64) -> f64 {
        match self.kind {
            EchoModelKind::Mono => p[0] * (-2.0 * tau / p[1]).exp(),
            EchoModelKind::Stretched { .. } => p[0] * (-(2.0 * tau / p[1]).powf(p[2])).exp(),
            EchoModelKind::ModulatedBi => {
                p[0] * (-2.0 * tau / p[1]).exp()
                    + p[2] * (-2.0 * tau / p[3]).exp() * (p[4] * tau + p[5]).cos()
            }
        }
    }
}

impl LeastSquaresProblem for EchoProblem {
    fn residual_count(&self) -> usize {
        self.tau.len()
    }

    fn residuals(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok((0..self.tau.len())
            .map(|i| (self.model(p, self.tau[i]) - self.y[i]) / self.sigma[i])
            .collect())
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let m = self.tau.len();
        match self.kind {
            EchoModelKind::Mono => {
                let mut j = DMatrix::zeros(m, 2);
                for i in 0..m {
                    let x = 2.0 * self.tau[i] / p[1];
                    let e = (-x).exp();
                    j[(i, 0)] = e / self.sigma[i];
                    j[(i, 1)] = p[0] * e * x / p[1] / self.sigma[i];
                }
                Some(j)
            }
            EchoModelKind::Stretched { .. } => {
                let mut j = DMatrix::zeros(m, 3);
                for i in 0..m {
                    let x = 2.0 * self.tau[i] / p[1];
                    let u = x.powf(p[2]);
                    let e = (-u).exp();
                    j[(i, 0)] = e / self.sigma[i];
                    j[(i, 1)] = p[0] * e * p[2] * u / p[1] / self.sigma[i];
                    j[(i, 2)] = if x > 0.0 {
                        -p[0] * e * u * x.ln() / self.sigma[i]
                    } else {
                        0.0
                    };
                }
                Some(j)
            }
            EchoModelKind::ModulatedBi => None,
        }
    }
}

/// A and T2 starting values: A from the earliest samples, T2 from the
/// 1/e crossing, or from a log-linear slope if the trace never gets there.
fn initial_mono(tau: &[f64], y: &[f64]) -> (f64, f64) {
    let a = y
        .iter()
        .take(3)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-12);
    let target = a / std::f64::consts::E;
    if let Some(k) = y.iter().position(|&v| v < target) {
        if k > 0 {
            let (t0, t1, y0, y1) = (tau[k - 1], tau[k], y[k - 1], y[k]);
            let t = t0 + (t1 - t0) * (y0 - target) / (y0 - y1);
            if t > 0.0 {
                return (a, 2.0 * t);
            }
        }
    }
    let (x, ly): (Vec<f64>, Vec<f64>) = tau
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .unzip();
    let span = tau.last().copied().unwrap_or(1.0).max(1e-9);
    match weighted_linear_fit(&x, &ly, &vec![1.0; x.len()]) {
        Ok(f) if f.slope < 0.0 => (a, -2.0 / f.slope),
        _ => (a, 2.0 * span),
    }
}

/// Frequency (rad per unit τ) and complex amplitude of the strongest
/// component of `r` on a uniform frequency grid up to the sampling limit.
fn dominant_frequency(tau: &[f64], r: &[f64]) -> (f64, f64, f64) {
    let span = tau.last().unwrap() - tau.first().unwrap();
    let min_dt = tau
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let w_lo = 2.0 * PI / span;
    let w_hi = PI / min_dt;
    let steps = 2048;
    let mut best = (w_lo, 0.0, 0.0);
    for k in 0..=steps {
        let w = w_lo + (w_hi - w_lo) * k as f64 / steps as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in tau.iter().zip(r) {
            re += v * (w * t).cos();
            im -= v * (w * t).sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power, im.atan2(re));
        }
    }
    let amplitude = 2.0 * best.1.sqrt() / tau.len() as f64;
    (best.0, amplitude, best.2)
}

fn to_si(mut fit: FitOutcome) -> FitOutcome {
    for p in &mut fit.parameters {
        let scale = match p.name.as_str() {
            "T2" | "T2_inner" | "T2_outer" => US,
            "omega_mod" => 1.0 / US,
            _ => 1.0,
        };
        p.value *= scale;
        p.stderr = p.stderr.map(|s| s * scale);
    }
    fit
}

fn free_count(kind: EchoModelKind) -> usize {
    match kind {
        EchoModelKind::Mono => 2,
        EchoModelKind::Stretched { n: Some(_) } => 2,
        EchoModelKind::Stretched { n: None } => 3,
        EchoModelKind::ModulatedBi => 6,
    }
}

/// Fits an echo decay. Parameters are reported in SI (T2 in s, ω in rad/s).
/// Non-convergence is reported through `converged`, not as an error.
pub fn fit_echo(trace: &EchoTrace, kind: EchoModelKind) -> Result<FitOutcome> {
    let need = free_count(kind) + 2;
    if trace.len() < need {
        return Err(input(format!(
            "echo fit of this model needs at least {need} points, got {}",
            trace.len()
        )));
    }
    if let EchoModelKind::Stretched { n: Some(n) } = kind {
        if !(1.0..=3.0).contains(&n) {
            return Err(input(format!(
                "stretch exponent must lie in [1, 3], got {n}"
            )));
        }
    }
    let options = LmOptions::default();
    let problem = EchoProblem::new(trace, kind);
    let (a0, t0) = initial_mono(&problem.tau, &problem.y);
    let amp = ParamSpec::bounded("A", a0, 0.0, f64::INFINITY);
    let t2 = ParamSpec::bounded("T2", t0, t0 * 1e-6, f64::INFINITY);

    let specs = match kind {
        EchoModelKind::Mono => vec![amp, t2],
        EchoModelKind::Stretched { n } => {
            let n_spec = match n {
                Some(n) => ParamSpec::fixed("n", n),
                None => ParamSpec::bounded("n", 1.5, 1.0, 3.0),
            };
            vec![amp, t2, n_spec]
        }
        EchoModelKind::ModulatedBi => {
            let mono = EchoProblem::new(trace, EchoModelKind::Mono);
            let pre = nonlinear_least_squares(&mono, &[amp, t2], &options)?;
            let (a_m, t_m) = (pre.value("A"), pre.value("T2"));
            let resid: Vec<f64> = (0..mono.tau.len())
                .map(|i| mono.y[i] - mono.model(&[a_m, t_m], mono.tau[i]))
                .collect();
            let (w, b, phi) = dominant_frequency(&mono.tau, &resid);
            vec![
                ParamSpec::bounded("A_inner", a_m, 0.0, f64::INFINITY),
                ParamSpec::bounded("T2_inner", t_m, t_m * 1e-6, f64::INFINITY),
                ParamSpec::bounded("A_outer", b.max(1e-9), 0.0, f64::INFINITY),
                ParamSpec::bounded("T2_outer", t_m, t_m * 1e-6, f64::INFINITY),
                ParamSpec::bounded("omega_mod", w, 0.0, f64::INFINITY),
                ParamSpec::bounded("phase", phi, -2.0 * PI, 2.0 * PI),
            ]
        }
    };
    let fit = nonlinear_least_squares(&problem, &specs, &options)?;
    Ok(to_si(fit))
}

/// Mono versus fixed-exponent stretched fit of the same trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoModelComparison {
    pub mono: FitOutcome,
    pub stretched: FitOutcome,
    /// (χ²_mono − χ²_stretched)/ν.
    pub reduced_chi2_gap: f64,
    /// 3·√(2/ν): three standard deviations of a reduced χ² with ν dof.
    pub threshold: f64,
    pub distinguishable: bool,
}

/// Decides whether a stretched decay with exponent `n` describes the trace
/// better than a mono exponential by more than the statistical scatter of
/// the reduced χ².
pub fn compare_mono_stretched(trace: &EchoTrace, n: f64) -> Result<EchoModelComparison> {
    let mono = fit_echo(trace, EchoModelKind::Mono)?;
    let stretched = fit_echo(trace, EchoModelKind::Stretched { n: Some(n) })?;
    let nu = mono.degrees_of_freedom.max(1) as f64;
    let reduced_chi2_gap = (mono.chi2 - stretched.chi2) / nu;
    let threshold = 3.0 * (2.0 / nu).sqrt();
    Ok(EchoModelComparison {
        distinguishable: reduced_chi2_gap > threshold,
        mono,
        stretched,
        reduced_chi2_gap,
        threshold,
    })
}
