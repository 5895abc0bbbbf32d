//! Closed, Liouville-space and quantum-trajectory propagation.

pub mod krylov;
pub mod liouville;
pub mod mcwf;
pub mod state;
pub mod unitary;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use liouville::{propagate_liouville, propagate_liouville_with};
pub use mcwf::{propagate_mcwf, McwfConfig, TrajectoryEnsemble};
pub use state::{DensityMatrix, StateVector};
pub use unitary::{propagate_unitary, propagate_unitary_with};

/// Dense exponentials are used up to this Hilbert-space dimension.
pub const DENSE_DIM_LIMIT: usize = 256;

/// Output grid `t_k = k t_max / (n_out - 1)`; a zero horizon yields the single point 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_out: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_out: usize) -> Result<Self> {
        let g = TimeGrid { t_max, n_out };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(invalid(format!(
                "t_max must be finite and >= 0, got {}",
                self.t_max
            )));
        }
        if self.n_out == 0 || (self.t_max > 0.0 && self.n_out < 2) {
            return Err(invalid(format!(
                "n_out = {} too small for t_max = {}",
                self.n_out, self.t_max
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        if self.t_max == 0.0 {
            return vec![0.0];
        }
        let step = self.t_max / (self.n_out - 1) as f64;
        (0..self.n_out)
            .map(|k| {
                if k + 1 == self.n_out {
                    self.t_max
                } else {
                    k as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dense below [`DENSE_DIM_LIMIT`], Krylov above.
    #[default]
    Auto,
    Krylov,
    DenseExpm,
}

fn default_krylov_dim() -> usize {
    30
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_liouville_cap() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    /// Local error per unit time.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest Hilbert-space dimension admitted by the Liouville propagator.
    #[serde(default = "default_liouville_cap")]
    pub liouville_cap: usize,
    #[serde(default)]
    pub mcwf: McwfConfig,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            method: Method::Auto,
            krylov_dim: default_krylov_dim(),
            tolerance: default_tolerance(),
            liouville_cap: default_liouville_cap(),
            mcwf: McwfConfig::default(),
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(invalid(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.krylov_dim < 2 {
            return Err(invalid("krylov_dim must be >= 2"));
        }
        self.mcwf.validate()
    }

    pub(crate) fn krylov(&self, tol: f64) -> krylov::KrylovOptions {
        krylov::KrylovOptions {
            m: self.krylov_dim,
            tol,
            ..Default::default()
        }
    }
}
