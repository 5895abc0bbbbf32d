//! Disorder ensembles: many seeded realizations reduced to mean/std curves and
//! efficiency distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::enumerate_sector;
use crate::dynamics::TimeGrid;
use crate::error::{invalid, Error, Result};
use crate::observables::{time_avg_efficiency, ObservableSeries};
use crate::seed::derive_seed;
use crate::simulate::{simulate, SimulationSpec};

fn default_tau_over_gamma() -> Option<f64> {
    Some(20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Horizon in units of `1/gamma`; `None` keeps the simulation grid's `t_max`.
    #[serde(default = "default_tau_over_gamma")]
    pub tau_over_gamma: Option<f64>,
    /// Thread count; `None` uses the global pool.
    #[serde(default)]
    pub worker_count: Option<usize>,
    /// Keep every realization's series in the result.
    #[serde(default)]
    pub keep_series: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_realizations: 100,
            master_seed: 0,
            tau_over_gamma: default_tau_over_gamma(),
            worker_count: None,
            keep_series: false,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(invalid("n_realizations must be >= 1"));
        }
        if let Some(t) = self.tau_over_gamma {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("tau_over_gamma must be > 0, got {t}")));
            }
        }
        if self.worker_count == Some(0) {
            return Err(invalid("worker_count must be >= 1"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_realizations as u64)
            .map(|k| derive_seed(self.master_seed, k))
            .collect()
    }

    /// The simulation grid with `t_max` replaced by the configured horizon.
    pub fn grid(&self, spec: &SimulationSpec) -> Result<TimeGrid> {
        match self.tau_over_gamma {
            None => Ok(spec.grid),
            Some(t) => {
                let gamma = spec.model.gamma;
                if !(gamma.abs() > 0.0) {
                    return Err(invalid("tau_over_gamma needs a nonzero gamma"));
                }
                TimeGrid::new(t / gamma.abs(), spec.grid.n_out.max(2))
            }
        }
    }
}

/// Mean and population standard deviation at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub tau: f64,
    pub seeds: Vec<u64>,
    pub n_s: Band,
    pub n_t: Band,
    pub eta: Band,
    /// Per-realization time average of `eta` over `[0, tau]`.
    pub eta_bar: Vec<f64>,
    pub eta_bar_mean: f64,
    /// Ensemble spread of `eta_bar`.
    pub eta_bar_std: f64,
    /// Per-realization `eta(tau)`, the readout of the open model.
    pub eta_final: Vec<f64>,
    pub eta_final_mean: f64,
    pub eta_final_std: f64,
    /// Time-RMS fluctuation of the ensemble-mean `eta` curve.
    pub mean_eta_fluctuation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<ObservableSeries>>,
}

/// `(mean, population std)`
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    // identical samples give exactly zero spread
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn band(rows: &[&[f64]]) -> Band {
    let n_t = rows[0].len();
    let (mean, std) = (0..n_t)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            mean_std(&col)
        })
        .unzip();
    Band { mean, std }
}

impl EnsembleStats {
    /// Reduces realization series (in seed order) to ensemble statistics.
    pub fn from_series(
        series: Vec<ObservableSeries>,
        seeds: Vec<u64>,
        tau: f64,
        keep: bool,
    ) -> Result<Self> {
        if series.is_empty() || series.len() != seeds.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} series for {} seeds",
                series.len(),
                seeds.len()
            )));
        }
        let times = series[0].times.clone();
        if series.iter().any(|s| s.times != times) {
            return Err(Error::ShapeMismatch(
                "realizations on different time grids".into(),
            ));
        }
        let pick = |f: fn(&ObservableSeries) -> &Vec<f64>| -> Vec<&[f64]> {
            series.iter().map(|s| f(s).as_slice()).collect()
        };
        let n_s = band(&pick(|s| &s.n_s));
        let n_t = band(&pick(|s| &s.n_t));
        let eta = band(&pick(|s| &s.eta));
        let eta_bar = series
            .iter()
            .map(|s| time_avg_efficiency(&s.times, &s.eta, tau).map(|a| a.mean))
            .collect::<Result<Vec<_>>>()?;
        let (eta_bar_mean, eta_bar_std) = mean_std(&eta_bar);
        let eta_final: Vec<f64> = series.iter().map(|s| s.final_eta()).collect();
        let (eta_final_mean, eta_final_std) = mean_std(&eta_final);
        let mean_eta_fluctuation = time_avg_efficiency(&times, &eta.mean, tau)?.fluctuation;
        Ok(EnsembleStats {
            times,
            tau,
            seeds,
            n_s,
            n_t,
            eta,
            eta_bar,
            eta_bar_mean,
            eta_bar_std,
            eta_final,
            eta_final_mean,
            eta_final_std,
            mean_eta_fluctuation,
            series: keep.then_some(series),
        })
    }
}

/// Runs `config.n_realizations` seeded realizations of `spec` and reduces them.
///
/// Realization `k` samples disorder with `derive_seed(master_seed, k)`; the
/// reduction runs in `k` order, so results do not depend on the thread count.
pub fn run_ensemble(spec: &SimulationSpec, config: &EnsembleConfig) -> Result<EnsembleStats> {
    config.validate()?;
    spec.validate()?;
    let grid = config.grid(spec)?;
    let spec = SimulationSpec {
        grid,
        ..spec.clone()
    };
    let seeds = config.seeds();
    let run = || -> Result<Vec<ObservableSeries>> {
        seeds
            .par_iter()
            .map(|&seed| {
                spec.sample_disorder(seed)
                    .and_then(|dis| simulate(&spec, &dis))
                    .map_err(|e| Error::Realization {
                        seed,
                        source: Box::new(e),
                    })
            })
            .collect()
    };
    let series = match config.worker_count {
        None => run()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(run)?,
    };
    EnsembleStats::from_series(series, seeds, grid.t_max, config.keep_series)
}

/// `a (N - 2) / sqrt((N - 2)^2 + b)` with `a = 0.87`, `b = 4`.
pub fn size_fit(n_sites: usize) -> f64 {
    let x = n_sites as f64 - 2.0;
    0.87 * x / (x * x + 4.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScanRow {
    pub n_sites: usize,
    pub n0: usize,
    pub dim: usize,
    pub eta_bar_mean: Option<f64>,
    pub eta_bar_std: Option<f64>,
    pub fit: f64,
    /// Why the cell was not run.
    pub skipped: Option<String>,
}

/// One ensemble per `(N, n0)` cell; cells whose sector exceeds `dim_cap` are flagged and skipped.
pub fn size_scan(
    template: &SimulationSpec,
    n0_list: &[usize],
    n_list: &[usize],
    config: &EnsembleConfig,
    dim_cap: usize,
) -> Result<Vec<SizeScanRow>> {
    let mut rows = Vec::new();
    for &n_sites in n_list {
        for &n0 in n0_list {
            let mut spec = template.clone();
            spec.n_sites = n_sites;
            spec.initial.n0 = n0;
            let dim = enumerate_sector(n_sites, spec.initial.c0(), spec.spin_mode)?.dim();
            let mut row = SizeScanRow {
                n_sites,
                n0,
                dim,
                eta_bar_mean: None,
                eta_bar_std: None,
                fit: size_fit(n_sites),
                skipped: None,
            };
            if dim > dim_cap {
                let err = Error::DimensionOverflow { dim, cap: dim_cap };
                log::warn!("size scan cell N={n_sites}, n0={n0} skipped: {err}");
                row.skipped = Some(err.to_string());
            } else {
                let stats = run_ensemble(&spec, config)?;
                row.eta_bar_mean = Some(stats.eta_bar_mean);
                row.eta_bar_std = Some(stats.eta_bar_std);
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
