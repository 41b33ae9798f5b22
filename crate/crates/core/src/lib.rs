//! Electron-spin relaxation models for endohedral fullerenes in liquid and
//! frozen solution, and the fitting machinery used to extract model
//! parameters from temperature-resolved T1/T2 data and spin-echo traces.
//!
//! Everything inside the crate is SI. Conventional units (cm²/s, meV,
//! spins/cm³, μs, nm) appear only in the explicitly named boundary helpers.
//!
//! Modules:
//! - [`physconst`]: constants, nuclear species registry, unit conversion
//! - [`solvent`]: spin concentration, diffusion and viscosity models
//! - [`mechanisms`]: Orbach and translational-diffusion relaxation rates
//! - [`echodecay`]: echo-decay models and spectral-diffusion regime analysis
//! - [`fitting`]: linear/nonlinear least squares and the fitting campaigns
//! - [`synth`]: seeded synthetic data generation

pub mod echodecay;
mod error;
pub mod fitting;
pub mod mechanisms;
pub mod physconst;
pub mod solvent;
pub mod synth;

pub use error::{Error, Result};

pub use echodecay::{EchoDecayModel, Regime, RegimeReport};
pub use fitting::{
    EchoTrace, FitOutcome, FitParameter, RelaxationDataset, RelaxationPoint, TimeQuantity,
};
pub use mechanisms::{DiffusionMechanism, OrbachParams, RateResult, RelaxationChannel};
pub use physconst::{EnergyUnit, NuclearSpecies};
pub use solvent::{ConcentrationModel, DiffusionModel, Flagged, MixtureComponent, ViscosityModel};
