//! Run configuration: a TOML file with [physics], [grid], [sde], [ensemble]
//! and [io] sections. Command-line flags override file values, which override
//! the scenario preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{GridSpec, MAX_STENCIL, MIN_GRID};
use crate::ensemble::{Azimuth, EnsembleOptions, InitialConditionSpec, TrapThresholds, START_WELL};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, Scenario, SurvivalSubset};
use crate::sde::{SdeOptions, DEFAULT_DT, EQUILIBRATION_TIME};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub scenario: String,
    /// Replacement values for fields of the preset, keyed by field name.
    #[serde(skip_serializing_if = "toml::Table::is_empty")]
    pub overrides: toml::Table,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            scenario: Scenario::CaseB.name().into(),
            overrides: toml::Table::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_g: Option<usize>,
    pub n_s: Option<usize>,
    pub stencil: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    /// [μs]
    pub dt: f64,
    /// Censoring horizon [μs]; the scenario default when absent.
    pub t_max: Option<f64>,
    /// Output sampling stride of the `simulate` time series.
    pub stride: usize,
    pub friction: bool,
    pub dipole_noise: bool,
    pub spontaneous_noise: bool,
    pub gravity: bool,
    /// Start of the equilibrium window for v_x rms and Δg [μs].
    pub equilibration: f64,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            dt: DEFAULT_DT,
            t_max: None,
            stride: 100,
            friction: true,
            dipole_noise: true,
            spontaneous_noise: true,
            gravity: false,
            equilibration: EQUILIBRATION_TIME,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: usize,
    pub seed: u64,
    pub resamples: usize,
    /// [μm/μs]
    pub v_threshold: f64,
    /// [μs]
    pub t_threshold: f64,
    /// "trapped" or "all"; the scenario default when absent.
    pub subset: Option<String>,
    /// Fixed initial azimuth [rad]; uniform when absent.
    pub theta: Option<f64>,
    pub well: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let th = TrapThresholds::default();
        EnsembleSection {
            n: 400,
            seed: 1,
            resamples: crate::ensemble::BOOTSTRAP_RESAMPLES,
            v_threshold: th.v_rms,
            t_threshold: th.time,
            subset: None,
            theta: None,
            well: START_WELL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Files are written here; standard output when absent.
    pub output_dir: Option<PathBuf>,
    pub cache: bool,
    pub cache_dir: PathBuf,
    /// Prefix outputs with a generation-time comment line.
    pub timestamp: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            output_dir: None,
            cache: true,
            cache_dir: PathBuf::from("cache"),
            timestamp: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsSection,
    pub grid: GridSection,
    pub sde: SdeSection,
    pub ensemble: EnsembleSection,
    pub io: IoSection,
}

/// Everything a subcommand needs, with defaults filled in and checked.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub scenario: Scenario,
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub sde: SdeOptions,
    pub ensemble: EnsembleOptions,
    pub io: IoSection,
}

fn parse_subset(s: &str) -> Result<SurvivalSubset> {
    match s {
        "trapped" => Ok(SurvivalSubset::Trapped),
        "all" => Ok(SurvivalSubset::All),
        other => Err(Error::Config(format!("subset must be 'trapped' or 'all', not '{other}'"))),
    }
}

fn subset_name(s: SurvivalSubset) -> &'static str {
    match s {
        SurvivalSubset::Trapped => "trapped",
        SurvivalSubset::All => "all",
    }
}

fn preset_table(p: &PhysicalParams) -> Result<toml::Table> {
    toml::Table::try_from(p).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.physics.scenario.parse()
    }

    /// The preset with the [physics.overrides] entries applied.
    pub fn physical_params(&self) -> Result<PhysicalParams> {
        let preset = self.scenario()?.params();
        let mut table = preset_table(&preset)?;
        for (k, v) in &self.physics.overrides {
            let slot = table
                .get_mut(k)
                .ok_or_else(|| Error::Config(format!("unknown physics parameter '{k}'")))?;
            // integers are accepted where floats are expected
            *slot = match (&*slot, v) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
                _ => v.clone(),
            };
        }
        let p: PhysicalParams = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let scenario = self.scenario()?;
        let params = self.physical_params()?;

        let base = GridSpec::for_params(&params);
        let grid = GridSpec {
            n_g: self.grid.n_g.unwrap_or(base.n_g),
            n_s: self.grid.n_s.unwrap_or(base.n_s),
            stencil: self.grid.stencil.unwrap_or(base.stencil),
        };
        if grid.n_g < MIN_GRID || grid.n_s < MIN_GRID {
            return Err(Error::Config(format!("grid axes need at least {MIN_GRID} nodes")));
        }
        if !matches!(grid.stencil, 4 | 6) || grid.stencil > MAX_STENCIL {
            return Err(Error::Config("stencil must be 4 or 6".into()));
        }

        let s = &self.sde;
        let sde = SdeOptions {
            dt: s.dt,
            t_max: s.t_max.unwrap_or_else(|| scenario.default_t_max()),
            stride: s.stride,
            friction: s.friction,
            dipole_noise: s.dipole_noise,
            spontaneous_noise: s.spontaneous_noise,
            gravity: s.gravity,
            equilibration: s.equilibration,
        };
        if !(sde.dt > 0.0) || !(sde.t_max >= 0.0) {
            return Err(Error::Config("dt must be positive and t_max nonnegative".into()));
        }

        let e = &self.ensemble;
        if e.n == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        let subset = match &e.subset {
            Some(s) => parse_subset(s)?,
            None => scenario.survival_subset(),
        };
        let initial = InitialConditionSpec {
            azimuth: e.theta.map_or(Azimuth::Uniform, Azimuth::Fixed),
            ..InitialConditionSpec::standard(&params)
        };
        let ensemble = EnsembleOptions {
            n: e.n,
            master_seed: e.seed,
            sde,
            well: e.well,
            initial,
            thresholds: TrapThresholds {
                v_rms: e.v_threshold,
                time: e.t_threshold,
            },
            subset,
            resamples: e.resamples,
        };
        Ok(Resolved {
            scenario,
            params,
            grid,
            sde,
            ensemble,
            io: self.io.clone(),
        })
    }

    /// A copy with every default made explicit and overrides reduced to the
    /// fields that differ from the preset. Loading it reproduces the same run.
    pub fn explicit(&self) -> Result<RunConfig> {
        let r = self.resolve()?;
        let preset = preset_table(&r.scenario.params())?;
        let resolved = preset_table(&r.params)?;
        let overrides = resolved
            .into_iter()
            .filter(|(k, v)| preset.get(k) != Some(v))
            .collect();
        Ok(RunConfig {
            physics: PhysicsSection {
                scenario: r.scenario.name().into(),
                overrides,
            },
            grid: GridSection {
                n_g: Some(r.grid.n_g),
                n_s: Some(r.grid.n_s),
                stencil: Some(r.grid.stencil),
            },
            sde: SdeSection {
                t_max: Some(r.sde.t_max),
                ..self.sde.clone()
            },
            ensemble: EnsembleSection {
                subset: Some(subset_name(r.ensemble.subset).into()),
                ..self.ensemble.clone()
            },
            io: self.io.clone(),
        })
    }
}
