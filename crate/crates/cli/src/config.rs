//! JSON configuration. Unknown keys are rejected and every diagnostic names
//! the offending field path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use relaxkit::fitting::{DiffusionFitMode, LmOptions, ParamSpec, SoluteFit};
use relaxkit::mechanisms::ORBACH_T2_RATIO;
use relaxkit::physconst::units::{cm2_per_s_to_si, mhz_per_t_to_gamma, nm_to_m, per_cm3_to_si};
use relaxkit::physconst::DEFAULT_FIELD_T;
use relaxkit::solvent::{mixture_concentration, LogLinearTable};
use relaxkit::{
    ConcentrationModel, DiffusionMechanism, DiffusionModel, MixtureComponent, NuclearSpecies,
    OrbachParams, RelaxationChannel, ViscosityModel,
};

use crate::error::{CliError, CliResult};

fn default_b0() -> f64 {
    DEFAULT_FIELD_T
}

fn default_true() -> bool {
    true
}

fn default_exponent() -> f64 {
    6.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(rename = "field_B0_T", default = "default_b0")]
    pub field_b0: f64,
    /// Additional or overriding nuclear species.
    #[serde(default)]
    pub species: Vec<SpeciesDef>,
    #[serde(default)]
    pub channels: Vec<ChannelDef>,
    #[serde(default)]
    pub fit: FitOptions,
    pub regime: Option<RegimeDef>,
    pub diffusion_fit: Option<DiffusionFitDef>,
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// File name used to prefix diagnostics.
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesDef {
    pub label: String,
    pub element: String,
    #[serde(rename = "gamma_MHz_per_T")]
    pub gamma_mhz_per_t: f64,
    pub spin: f64,
    pub abundance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelDef {
    Orbach(OrbachDef),
    Diffusion {
        label: Option<String>,
        species: String,
        d_nm: f64,
        concentration: ConcentrationDef,
        solvent_diffusion: DiffusionDef,
        solute_diffusion: DiffusionDef,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbachDef {
    #[serde(rename = "A_per_s")]
    pub a_per_s: f64,
    #[serde(rename = "delta_meV")]
    pub delta_mev: f64,
    pub t2_ratio: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConcentrationDef {
    PerryToluene,
    Constant {
        per_cm3: f64,
    },
    /// (T in K, spins/cm³) knots.
    Table {
        points: Vec<[f64; 2]>,
    },
    Mixture {
        components: Vec<ComponentDef>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDef {
    pub label: String,
    pub density_g_per_cm3: f64,
    pub molar_mass_g_per_mol: f64,
    pub nuclei_per_molecule: BTreeMap<String, f64>,
    pub volume_fraction: f64,
}

impl ComponentDef {
    pub fn to_component(&self) -> MixtureComponent {
        MixtureComponent {
            label: self.label.clone(),
            density: self.density_g_per_cm3,
            molar_mass: self.molar_mass_g_per_mol,
            nuclei_per_molecule: self.nuclei_per_molecule.clone(),
            volume_fraction: self.volume_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionDef {
    Toluene,
    StokesEinstein {
        radius_nm: f64,
        viscosity: ViscosityDef,
    },
    Parametric {
        #[serde(rename = "D0_cm2_per_s")]
        d0_cm2_per_s: f64,
        #[serde(rename = "Ea_K")]
        ea_k: f64,
        #[serde(rename = "T0_K", default)]
        t0_k: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(rename = "validity_K")]
        validity_k: Option<[f64; 2]>,
    },
    /// (T in K, cm²/s) knots.
    Table {
        points: Vec<[f64; 2]>,
    },
    Sum {
        terms: Vec<DiffusionDef>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViscosityDef {
    VogelFulcher {
        #[serde(rename = "eta0_Pa_s")]
        eta0_pa_s: f64,
        #[serde(rename = "B_K")]
        b_k: f64,
        #[serde(rename = "T0_K")]
        t0_k: f64,
    },
    /// (T in K, Pa·s) knots.
    Table { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_true")]
    pub weighted: bool,
    pub max_iterations: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            max_iterations: None,
        }
    }
}

impl FitOptions {
    pub fn lm_options(&self) -> LmOptions {
        let mut o = LmOptions::default();
        if let Some(n) = self.max_iterations {
            o.max_iterations = n;
        }
        o
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeDef {
    pub species: String,
    pub d_nm: f64,
    pub concentration: ConcentrationDef,
    /// Temperature at which a temperature-dependent concentration is read.
    #[serde(rename = "temperature_K")]
    pub temperature_k: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDef {
    pub initial: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub fixed: bool,
}

impl ParamDef {
    /// ParamSpec with every value multiplied by `scale`.
    pub fn to_spec(&self, name: &str, scale: f64) -> ParamSpec {
        if self.fixed {
            return ParamSpec::fixed(name, self.initial * scale);
        }
        ParamSpec::bounded(
            name,
            self.initial * scale,
            self.lower.map_or(f64::NEG_INFINITY, |v| v * scale),
            self.upper.map_or(f64::INFINITY, |v| v * scale),
        )
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitModeDef {
    #[default]
    Parametric,
    Pointwise,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoluteDef {
    #[serde(rename = "D0_cm2_per_s")]
    pub d0_cm2_per_s: ParamDef,
    #[serde(rename = "Ea_K")]
    pub ea_k: ParamDef,
    #[serde(rename = "T0_K")]
    pub t0_k: ParamDef,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDef {
    pub label: String,
    /// CSV path, relative to the config file.
    pub file: Option<String>,
    pub species: String,
    pub concentration: ConcentrationDef,
    pub solvent_diffusion: DiffusionDef,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionFitDef {
    #[serde(default)]
    pub mode: FitModeDef,
    /// Defaults to the first Orbach entry of `channels`.
    pub orbach: Option<OrbachDef>,
    pub d_nm: ParamDef,
    pub solute: Option<SoluteDef>,
    pub d_grid_nm: Option<Vec<f64>>,
    pub datasets: Vec<DatasetDef>,
}

fn field_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("config field `{path}`: {msg}"))
}

fn positive(path: &str, v: f64) -> CliResult<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(field_err(path, format!("must be > 0, got {v}")));
    }
    Ok(v)
}

fn table(path: &str, points: &[[f64; 2]], scale: f64) -> CliResult<LogLinearTable> {
    LogLinearTable::new(points.iter().map(|p| (p[0], p[1] * scale)).collect())
        .map_err(|e| field_err(path, e))
}

/// Parses a config document; errors carry the JSON path, line and column.
pub fn parse_config(text: &str, source: &str) -> CliResult<ConfigDocument> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::input(format!("{source}: config field `{path}`: {inner}"))
    })?;
    positive("field_B0_T", doc.field_b0)?;
    for (i, s) in doc.species.iter().enumerate() {
        s.to_species()
            .map_err(|e| field_err(&format!("species[{i}]"), e))?;
    }
    doc.base_dir = PathBuf::new();
    doc.source = source.to_string();
    Ok(doc)
}

pub fn load_config(path: &Path) -> CliResult<ConfigDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut doc = parse_config(&text, &path.display().to_string())?;
    doc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(doc)
}

impl SpeciesDef {
    fn to_species(&self) -> relaxkit::Result<NuclearSpecies> {
        NuclearSpecies::new(
            self.label.clone(),
            self.element.clone(),
            mhz_per_t_to_gamma(self.gamma_mhz_per_t),
            self.spin,
            self.abundance,
        )
    }
}

impl OrbachDef {
    pub fn build(&self, path: &str) -> CliResult<(OrbachParams, f64)> {
        let params =
            OrbachParams::new(self.a_per_s, self.delta_mev).map_err(|e| field_err(path, e))?;
        let ratio = self.t2_ratio.unwrap_or(ORBACH_T2_RATIO);
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(field_err(&format!("{path}.t2_ratio"), "must lie in (0, 1]"));
        }
        Ok((params, ratio))
    }
}

impl ConfigDocument {
    /// Prefixes a diagnostic with the config file name, once.
    fn tag(&self, e: CliError) -> CliError {
        match e {
            CliError::Input(m) if !self.source.is_empty() && !m.starts_with(&self.source) => {
                CliError::Input(format!("{}: {m}", self.source))
            }
            other => other,
        }
    }

    pub fn species(&self, label: &str, path: &str) -> CliResult<NuclearSpecies> {
        self.species_untagged(label, path).map_err(|e| self.tag(e))
    }

    pub fn concentration(
        &self,
        def: &ConcentrationDef,
        species: &NuclearSpecies,
        path: &str,
    ) -> CliResult<ConcentrationModel> {
        self.concentration_untagged(def, species, path)
            .map_err(|e| self.tag(e))
    }

    pub fn diffusion(&self, def: &DiffusionDef, path: &str) -> CliResult<DiffusionModel> {
        self.diffusion_untagged(def, path).map_err(|e| self.tag(e))
    }

    pub fn channels(&self) -> CliResult<Vec<(String, RelaxationChannel)>> {
        self.channels_untagged().map_err(|e| self.tag(e))
    }

    pub fn fit_orbach_params(&self, def: &DiffusionFitDef) -> CliResult<(OrbachParams, f64)> {
        self.fit_orbach_params_untagged(def)
            .map_err(|e| self.tag(e))
    }

    pub fn fit_mode(&self, def: &DiffusionFitDef) -> CliResult<DiffusionFitMode> {
        self.fit_mode_untagged(def).map_err(|e| self.tag(e))
    }

    /// Config species first, then the built-in registry.
    fn species_untagged(&self, label: &str, path: &str) -> CliResult<NuclearSpecies> {
        if let Some(s) = self.species.iter().find(|s| s.label == label) {
            return s.to_species().map_err(|e| field_err(path, e));
        }
        NuclearSpecies::lookup(label)
            .ok_or_else(|| field_err(path, format!("unknown species '{label}'")))
    }

    fn concentration_untagged(
        &self,
        def: &ConcentrationDef,
        species: &NuclearSpecies,
        path: &str,
    ) -> CliResult<ConcentrationModel> {
        Ok(match def {
            ConcentrationDef::PerryToluene => ConcentrationModel::PerryToluene,
            ConcentrationDef::Constant { per_cm3 } => {
                if !(*per_cm3 >= 0.0) {
                    return Err(field_err(&format!("{path}.per_cm3"), "must be >= 0"));
                }
                ConcentrationModel::constant_per_cm3(*per_cm3)
            }
            ConcentrationDef::Table { points } => ConcentrationModel::Table(table(
                &format!("{path}.points"),
                points,
                per_cm3_to_si(1.0),
            )?),
            ConcentrationDef::Mixture { components } => {
                let comps: Vec<MixtureComponent> =
                    components.iter().map(ComponentDef::to_component).collect();
                let c = mixture_concentration(&comps, species)
                    .map_err(|e| field_err(&format!("{path}.components"), e))?;
                ConcentrationModel::constant_per_cm3(c)
            }
        })
    }

    fn diffusion_untagged(&self, def: &DiffusionDef, path: &str) -> CliResult<DiffusionModel> {
        Ok(match def {
            DiffusionDef::Toluene => DiffusionModel::TolueneSelfDiffusion,
            DiffusionDef::StokesEinstein {
                radius_nm,
                viscosity,
            } => DiffusionModel::StokesEinstein {
                radius: nm_to_m(positive(&format!("{path}.radius_nm"), *radius_nm)?),
                viscosity: viscosity_model(viscosity, &format!("{path}.viscosity"))?,
            },
            DiffusionDef::Parametric {
                d0_cm2_per_s,
                ea_k,
                t0_k,
                exponent,
                validity_k,
            } => DiffusionModel::Parametric {
                d0: cm2_per_s_to_si(positive(&format!("{path}.D0_cm2_per_s"), *d0_cm2_per_s)?),
                activation_k: *ea_k,
                vf_t0: *t0_k,
                exponent: *exponent,
                validity: validity_k.map(|v| (v[0], v[1])),
            },
            DiffusionDef::Table { points } => DiffusionModel::Table(table(
                &format!("{path}.points"),
                points,
                cm2_per_s_to_si(1.0),
            )?),
            DiffusionDef::Sum { terms } => DiffusionModel::Sum(
                terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| self.diffusion(t, &format!("{path}.terms[{i}]")))
                    .collect::<CliResult<_>>()?,
            ),
        })
    }

    /// Channels with display labels.
    fn channels_untagged(&self) -> CliResult<Vec<(String, RelaxationChannel)>> {
        if self.channels.is_empty() {
            return Err(field_err("channels", "at least one channel is required"));
        }
        self.channels
            .iter()
            .enumerate()
            .map(|(i, ch)| {
                let path = format!("channels[{i}]");
                match ch {
                    ChannelDef::Orbach(o) => {
                        let (params, t2_ratio) = o.build(&path)?;
                        Ok((
                            "orbach".to_string(),
                            RelaxationChannel::Orbach { params, t2_ratio },
                        ))
                    }
                    ChannelDef::Diffusion {
                        label,
                        species,
                        d_nm,
                        concentration,
                        solvent_diffusion,
                        solute_diffusion,
                    } => {
                        let sp = self.species(species, &format!("{path}.species"))?;
                        let mech = DiffusionMechanism::new(
                            nm_to_m(positive(&format!("{path}.d_nm"), *d_nm)?),
                            sp.clone(),
                            self.concentration(
                                concentration,
                                &sp,
                                &format!("{path}.concentration"),
                            )?,
                            self.diffusion(
                                solvent_diffusion,
                                &format!("{path}.solvent_diffusion"),
                            )?,
                            self.diffusion(solute_diffusion, &format!("{path}.solute_diffusion"))?,
                        )
                        .with_field(self.field_b0);
                        let name = label
                            .clone()
                            .unwrap_or_else(|| format!("diffusion_{}", sp.label));
                        Ok((name, RelaxationChannel::TranslationalDiffusion(mech)))
                    }
                }
            })
            .collect()
    }

    /// Orbach parameters for the diffusion fit.
    fn fit_orbach_params_untagged(&self, def: &DiffusionFitDef) -> CliResult<(OrbachParams, f64)> {
        if let Some(o) = &def.orbach {
            return o.build("diffusion_fit.orbach");
        }
        self.channels
            .iter()
            .enumerate()
            .find_map(|(i, ch)| match ch {
                ChannelDef::Orbach(o) => Some(o.build(&format!("channels[{i}]"))),
                _ => None,
            })
            .unwrap_or_else(|| {
                Err(field_err(
                    "diffusion_fit.orbach",
                    "missing; give Orbach parameters here or as a channel",
                ))
            })
    }

    fn fit_mode_untagged(&self, def: &DiffusionFitDef) -> CliResult<DiffusionFitMode> {
        match def.mode {
            FitModeDef::Pointwise => Ok(DiffusionFitMode::Pointwise {
                d_grid: def
                    .d_grid_nm
                    .as_ref()
                    .map(|g| g.iter().map(|v| nm_to_m(*v)).collect()),
            }),
            FitModeDef::Parametric => {
                let s = def.solute.as_ref().ok_or_else(|| {
                    field_err("diffusion_fit.solute", "required in parametric mode")
                })?;
                Ok(DiffusionFitMode::Parametric(SoluteFit {
                    d0: s.d0_cm2_per_s.to_spec("D0", cm2_per_s_to_si(1.0)),
                    activation: s.ea_k.to_spec("Ea", 1.0),
                    vf_t0: s.t0_k.to_spec("T0", 1.0),
                    exponent: s.exponent,
                }))
            }
        }
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn viscosity_model(def: &ViscosityDef, path: &str) -> CliResult<ViscosityModel> {
    Ok(match def {
        ViscosityDef::VogelFulcher {
            eta0_pa_s,
            b_k,
            t0_k,
        } => ViscosityModel::VogelFulcher {
            eta0: positive(&format!("{path}.eta0_Pa_s"), *eta0_pa_s)?,
            b: *b_k,
            t0: *t0_k,
        },
        ViscosityDef::Table { points } => {
            ViscosityModel::Table(table(&format!("{path}.points"), points, 1.0)?)
        }
    })
}
