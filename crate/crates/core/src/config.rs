//! JSON run configuration: one record drives every command.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::basis::SpinMode;
use crate::dynamics::{PropagatorConfig, TimeGrid};
use crate::ensemble::EnsembleConfig;
use crate::error::{invalid, Result};
use crate::hamiltonian::{ModelParams, SpinfulParams};
use crate::observables::InitialStateSpec;
use crate::optimize::{ParamName, ParameterSpace, StagesConfig};
use crate::perturbative::BroadeningSpec;
use crate::simulate::{OpenSolver, SimulationSpec};

fn spinless() -> SpinMode {
    SpinMode::Spinless
}

fn default_n_out() -> usize {
    401
}

/// Output horizon: either `t_max` in 1/eV or `tau_over_gamma` in units of `1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_over_gamma: Option<f64>,
    #[serde(default = "default_n_out")]
    pub n_out: usize,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub open_solver: OpenSolver,
}

impl DynamicsSection {
    pub fn grid(&self, gamma: f64) -> Result<TimeGrid> {
        let t_max = match (self.t_max, self.tau_over_gamma) {
            (Some(t), None) => t,
            (None, Some(r)) => {
                if gamma == 0.0 {
                    return Err(invalid("tau_over_gamma needs a nonzero gamma"));
                }
                r / gamma.abs()
            }
            _ => {
                return Err(invalid(
                    "dynamics needs exactly one of t_max, tau_over_gamma",
                ))
            }
        };
        TimeGrid::new(t_max, if t_max == 0.0 { 1 } else { self.n_out })
    }
}

/// Search box overrides and stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// Parameters to move; defaults to every parameter of the mode.
    #[serde(default)]
    pub active: Option<Vec<ParamName>>,
    /// Per-parameter `[min, max]` replacing the default box.
    #[serde(default)]
    pub bounds: std::collections::BTreeMap<ParamName, (f64, f64)>,
    pub stages: StagesConfig,
}

/// Golden-rule rate table settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    /// Couplings at which rates are tabulated (eV).
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub broadening: BroadeningSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write every realization's series in ensemble runs.
    #[serde(default)]
    pub dump_realizations: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    #[serde(default = "spinless")]
    pub spin_mode: SpinMode,
    pub model: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spinful: Option<SpinfulParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonons: Option<crate::phonon::PhononParams>,
    pub initial: InitialStateSpec,
    pub dynamics: DynamicsSection,
    /// Disorder seed of a single-realization run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbative: Option<RatesSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn simulation_spec(&self) -> Result<SimulationSpec> {
        let spec = SimulationSpec {
            n_sites: self.n_sites,
            spin_mode: self.spin_mode,
            model: self.model,
            spinful: self.spinful,
            phonons: self.phonons,
            initial: self.initial,
            grid: self.dynamics.grid(self.model.gamma)?,
            propagator: self.dynamics.propagator,
            open_solver: self.dynamics.open_solver,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation_spec()?;
        if let Some(e) = &self.ensemble {
            e.validate()?;
        }
        if let Some(o) = &self.optimize {
            self.parameter_space(o)?.validate()?;
        }
        if let Some(r) = &self.perturbative {
            r.broadening.validate()?;
            if r.gammas.is_empty() {
                return Err(invalid("perturbative.gammas is empty"));
            }
        }
        Ok(())
    }

    pub fn parameter_space(&self, o: &OptimizeSection) -> Result<ParameterSpace> {
        let mut space = match &o.active {
            None => ParameterSpace::default_box(self.model, self.phonons),
            Some(a) => ParameterSpace::with_active(self.model, self.phonons, a.clone()),
        };
        for (p, b) in &o.bounds {
            if !space.active.contains(p) {
                return Err(invalid(format!("bounds given for inactive parameter {p}")));
            }
            space.bounds.insert(*p, *b);
        }
        Ok(space)
    }
}

/// Field reference with units, for `schema` output.
pub fn schema() -> Value {
    let ev = |d: &str| json!({"type": "number", "units": "eV", "description": d});
    let dimless = |d: &str| json!({"type": "number", "units": "dimensionless", "description": d});
    let count = |d: &str| json!({"type": "integer", "units": "count", "description": d});
    json!({
        "title": "sfring run configuration",
        "type": "object",
        "additionalProperties": false,
        "required": ["n_sites", "model", "initial", "dynamics"],
        "properties": {
            "n_sites": count("ring size N >= 2"),
            "spin_mode": {"enum": ["spinless", "spinful"], "default": "spinless"},
            "seed": {"type": "integer", "units": "dimensionless", "description": "disorder seed of a single run"},
            "model": {
                "type": "object", "additionalProperties": false,
                "required": ["eps_t", "j_s", "gamma"],
                "properties": {
                    "eps_s": ev("singlet energy, default 1"),
                    "eps_t": ev("triplet energy"),
                    "j_s": ev("singlet hopping"),
                    "j_t": ev("triplet hopping"),
                    "chi": ev("triplet-triplet density interaction"),
                    "gamma": ev("singlet to triplet-pair coupling"),
                    "sigma_eps_s": ev("disorder width of eps_s"),
                    "sigma_eps_t": ev("disorder width of eps_t"),
                    "sigma_j_s": ev("disorder width of j_s"),
                    "sigma_j_t": ev("disorder width of j_t"),
                    "sigma_chi": ev("disorder width of chi"),
                    "sigma_gamma": ev("disorder width of gamma"),
                    "mu": {"type": "number", "units": "arbitrary", "description": "local dipole moment, default 1"}
                }
            },
            "spinful": {
                "type": "object", "additionalProperties": false, "required": ["j_t_mm"],
                "properties": {
                    "b": {"type": "array", "items": {"type": "number"}, "units": "eV", "description": "magnetic field (x, y, z)"},
                    "d": {"type": "array", "units": "eV", "description": "3x3 symmetric zero-field-splitting tensor"},
                    "j_t_mm": {"type": "array", "units": "eV", "description": "3x3 real symmetric m-resolved hopping, m = -1, 0, +1"},
                    "chi_iso": ev("isotropic triplet exchange")
                }
            },
            "phonons": {
                "type": "object", "additionalProperties": false, "required": ["omega0"],
                "properties": {
                    "omega0": ev("mode frequency"),
                    "d_ph": count("Fock cutoff per site, default 4"),
                    "x0": dimless("displacement offset of the modulated coupling"),
                    "g_s": ev("singlet-phonon coupling"),
                    "g_t": ev("triplet-phonon coupling"),
                    "gamma_minus": ev("relaxation rate, default 0.1"),
                    "gamma_plus": ev("excitation rate, default 0")
                }
            },
            "initial": {
                "type": "object", "additionalProperties": false, "required": ["n0", "method"],
                "properties": {
                    "n0": count("initial singlet number"),
                    "method": {"enum": ["brightest_eigenstate", "sector_ground_state", "w_state"]}
                }
            },
            "dynamics": {
                "type": "object", "additionalProperties": false,
                "description": "exactly one of t_max, tau_over_gamma",
                "properties": {
                    "t_max": {"type": "number", "units": "1/eV (hbar = 1)"},
                    "tau_over_gamma": dimless("horizon in units of 1/gamma"),
                    "n_out": count("output points, default 401"),
                    "propagator": {
                        "type": "object", "additionalProperties": false,
                        "properties": {
                            "method": {"enum": ["auto", "krylov", "dense_expm"]},
                            "krylov_dim": count("Krylov subspace size, default 30"),
                            "tolerance": dimless("local error per unit time, default 1e-10"),
                            "liouville_cap": count("largest Hilbert dimension for Liouville runs, default 2000"),
                            "mcwf": {
                                "type": "object", "additionalProperties": false,
                                "properties": {
                                    "n_traj": count("trajectories, default 1000"),
                                    "seed": {"type": "integer", "units": "dimensionless"},
                                    "jump_bisection_tolerance": dimless("jump-time accuracy in squared norm, default 1e-10"),
                                    "tolerance": dimless("trajectory Krylov tolerance, default 1e-8")
                                }
                            }
                        }
                    },
                    "open_solver": {"enum": ["liouville", "mcwf"]}
                }
            },
            "ensemble": {
                "type": "object", "additionalProperties": false, "required": ["n_realizations"],
                "properties": {
                    "n_realizations": count("disorder realizations"),
                    "master_seed": {"type": "integer", "units": "dimensionless"},
                    "tau_over_gamma": dimless("horizon in units of 1/gamma, default 20; null keeps dynamics horizon"),
                    "worker_count": count("threads, default all cores"),
                    "keep_series": {"type": "boolean"}
                }
            },
            "optimize": {
                "type": "object", "additionalProperties": false, "required": ["stages"],
                "properties": {
                    "active": {"type": "array", "items": {"enum": ["eps_t", "j_s", "j_t", "chi", "gamma", "sigma_j_t", "sigma_chi", "omega0", "x0", "g_s", "g_t"]}},
                    "bounds": {"type": "object", "description": "name -> [min, max] in the parameter's units"},
                    "stages": {
                        "type": "object", "additionalProperties": false,
                        "properties": {
                            "coarse": {"type": "object", "description": "{n_points, eval}"},
                            "fine": {"type": "object", "description": "{eval, n_starts, ftol, xtol, initial_step}"},
                            "max_evals": count("evaluation cap per stage, default 2000"),
                            "seed": {"type": "integer", "units": "dimensionless"}
                        }
                    }
                }
            },
            "perturbative": {
                "type": "object", "additionalProperties": false, "required": ["gammas"],
                "properties": {
                    "gammas": {"type": "array", "items": {"type": "number"}, "units": "eV"},
                    "broadening": {
                        "type": "object", "additionalProperties": false,
                        "properties": {"kind": {"enum": ["lorentzian", "gaussian"]}, "width": ev("line width, default 1e-3")}
                    }
                }
            },
            "output": {
                "type": "object", "additionalProperties": false,
                "properties": {"dir": {"type": "string"}, "dump_realizations": {"type": "boolean"}}
            }
        }
    })
}
