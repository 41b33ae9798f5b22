//! Least-squares engines and the fitting campaigns built on them:
//! Arrhenius/Orbach extraction from T1, the joint translational-diffusion
//! fit of T2 across isotopes, monotone inversion of rates for D(T), and
//! echo-decay fitting.

mod diffusion;
mod echo;
mod invert;
mod linear;
mod lm;
mod orbach;

use serde::Serialize;

use crate::error::{input, Result};

pub use diffusion::{
    fit_diffusion, DiffusionDataset, DiffusionFitMode, DiffusionFitOutcome, DiffusionFitSpec,
    ExcludedPoint, PointwiseDiffusion, SoluteFit,
};
pub use echo::{
    compare_mono_stretched, fit_echo, EchoModelComparison, EchoModelKind, ECHO_PARAMETER_NAMES,
};
pub use invert::{invert_rate_for_d, DEFAULT_D_BRACKET};
pub use linear::{weighted_linear_fit, LinearFit};
pub use lm::{
    finite_difference_jacobian, nonlinear_least_squares, LeastSquaresProblem, LmOptions, ParamSpec,
};
pub use orbach::{fit_orbach, OrbachFit};

/// Which relaxation time a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeQuantity {
    T1,
    T2,
}

/// Hyperfine line a measurement was taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HyperfineLine {
    /// Central M_I = 0 line.
    Central,
    /// High-field M_I = −1 line, inner (±1/2) coherence.
    HighFieldInner,
    /// High-field M_I = −1 line, outer (±3/2:±1/2) coherence.
    HighFieldOuter,
}

impl std::str::FromStr for HyperfineLine {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "MI_0" | "0" | "central" => Ok(HyperfineLine::Central),
            "MI_minus1_inner" | "-1i" | "inner" => Ok(HyperfineLine::HighFieldInner),
            "MI_minus1_outer" | "-1o" | "outer" => Ok(HyperfineLine::HighFieldOuter),
            other => Err(input(format!(
                "unknown hyperfine line '{other}' (expected MI_0, MI_minus1_inner, MI_minus1_outer)"
            ))),
        }
    }
}

/// One (T, time, σ) measurement, SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationPoint {
    /// K.
    pub temperature: f64,
    /// s.
    pub time: f64,
    /// s.
    pub sigma: f64,
    pub line: Option<HyperfineLine>,
}

/// A temperature-resolved T1 or T2 series, sorted by temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationDataset {
    pub quantity: TimeQuantity,
    pub label: String,
    points: Vec<RelaxationPoint>,
}

impl RelaxationDataset {
    /// Validates and sorts. Duplicate temperatures are kept in input order.
    pub fn new(
        quantity: TimeQuantity,
        label: impl Into<String>,
        mut points: Vec<RelaxationPoint>,
    ) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.temperature > 0.0) || !p.temperature.is_finite() {
                return Err(input(format!("point {i}: temperature must be > 0")));
            }
            if !(p.time > 0.0) || !p.time.is_finite() {
                return Err(input(format!("point {i}: time must be > 0")));
            }
            if !(p.sigma > 0.0) || !p.sigma.is_finite() {
                return Err(input(format!("point {i}: sigma must be > 0")));
            }
        }
        points.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));
        Ok(Self {
            quantity,
            label: label.into(),
            points,
        })
    }

    /// Builds a dataset from (T, time, σ) triples, SI.
    pub fn from_triples(
        quantity: TimeQuantity,
        label: impl Into<String>,
        triples: &[(f64, f64, f64)],
    ) -> Result<Self> {
        let points = triples
            .iter()
            .map(|&(temperature, time, sigma)| RelaxationPoint {
                temperature,
                time,
                sigma,
                line: None,
            })
            .collect();
        Self::new(quantity, label, points)
    }

    pub fn points(&self) -> &[RelaxationPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One echo amplitude sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EchoPoint {
    /// Inter-pulse delay τ, s.
    pub tau: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

/// Two-pulse echo decay V(τ), strictly increasing in τ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoTrace {
    points: Vec<EchoPoint>,
}

impl EchoTrace {
    /// Sorts by τ; duplicate τ, negative τ or nonpositive σ are errors.
    pub fn new(mut points: Vec<EchoPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.tau >= 0.0) || !p.tau.is_finite() {
                return Err(input(format!("point {i}: tau must be >= 0")));
            }
            if !p.amplitude.is_finite() {
                return Err(input(format!("point {i}: amplitude is not finite")));
            }
            if !(p.sigma > 0.0) || !p.sigma.is_finite() {
                return Err(input(format!("point {i}: sigma must be > 0")));
            }
        }
        points.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        if let Some(w) = points.windows(2).find(|w| w[0].tau == w[1].tau) {
            return Err(input(format!("duplicate tau {}", w[0].tau)));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[EchoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A fitted (or fixed) parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// From the covariance diagonal; absent for fixed parameters or when
    /// the normal equations are singular.
    pub stderr: Option<f64>,
    pub fixed: bool,
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    pub parameters: Vec<FitParameter>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub degrees_of_freedom: usize,
    /// Weighted residuals (model − data)/σ at the solution.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Normal equations were singular at the solution; stderrs omitted.
    pub singular: bool,
}

impl FitOutcome {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter. Panics if the name is unknown.
    pub fn value(&self, name: &str) -> f64 {
        self.parameter(name)
            .unwrap_or_else(|| panic!("no fit parameter named '{name}'"))
            .value
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.parameter(name).and_then(|p| p.stderr)
    }
}
