//! Derivative-free maximization of the fission efficiency over the parameter
//! box: a Latin-hypercube scatter followed by bounded Nelder-Mead refinement.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SpinMode;
use crate::dynamics::{PropagatorConfig, TimeGrid};
use crate::ensemble::{run_ensemble, EnsembleConfig};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::ModelParams;
use crate::observables::{is_steady, InitialStateSpec};
use crate::phonon::PhononParams;
use crate::seed::derive_seed;
use crate::simulate::{OpenSolver, SimulationSpec};

/// Parameters the optimizer can move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    EpsT,
    JS,
    JT,
    Chi,
    Gamma,
    SigmaJT,
    SigmaChi,
    Omega0,
    X0,
    GS,
    GT,
}

impl ParamName {
    pub const ALL: [ParamName; 11] = [
        ParamName::EpsT,
        ParamName::JS,
        ParamName::JT,
        ParamName::Chi,
        ParamName::Gamma,
        ParamName::SigmaJT,
        ParamName::SigmaChi,
        ParamName::Omega0,
        ParamName::X0,
        ParamName::GS,
        ParamName::GT,
    ];

    pub fn is_phonon(self) -> bool {
        matches!(
            self,
            ParamName::Omega0 | ParamName::X0 | ParamName::GS | ParamName::GT
        )
    }

    /// Table 1 optimization range.
    pub fn box_range(self) -> (f64, f64) {
        match self {
            ParamName::EpsT => (0.35, 0.65),
            ParamName::JS => (-0.2, 0.2),
            ParamName::JT => (0.0, 0.5),
            ParamName::Chi => (0.0, 0.3),
            ParamName::Gamma => (0.001, 0.6),
            ParamName::SigmaJT => (0.0, 0.2),
            ParamName::SigmaChi => (0.0, 0.2),
            ParamName::Omega0 => (0.0, 0.5),
            ParamName::X0 => (-0.1, 0.1),
            ParamName::GS => (0.0, 0.5),
            ParamName::GT => (0.0, 0.5),
        }
    }

    pub fn get(self, model: &ModelParams, phonons: Option<&PhononParams>) -> Option<f64> {
        Some(match self {
            ParamName::EpsT => model.eps_t,
            ParamName::JS => model.j_s,
            ParamName::JT => model.j_t,
            ParamName::Chi => model.chi,
            ParamName::Gamma => model.gamma,
            ParamName::SigmaJT => model.sigma_j_t,
            ParamName::SigmaChi => model.sigma_chi,
            ParamName::Omega0 => phonons?.omega0,
            ParamName::X0 => phonons?.x0,
            ParamName::GS => phonons?.g_s,
            ParamName::GT => phonons?.g_t,
        })
    }

    pub fn set(
        self,
        model: &mut ModelParams,
        phonons: Option<&mut PhononParams>,
        value: f64,
    ) -> Result<()> {
        let slot = match self {
            ParamName::EpsT => &mut model.eps_t,
            ParamName::JS => &mut model.j_s,
            ParamName::JT => &mut model.j_t,
            ParamName::Chi => &mut model.chi,
            ParamName::Gamma => &mut model.gamma,
            ParamName::SigmaJT => &mut model.sigma_j_t,
            ParamName::SigmaChi => &mut model.sigma_chi,
            p => {
                let ph = phonons.ok_or_else(|| invalid(format!("{p} needs phonon parameters")))?;
                match p {
                    ParamName::Omega0 => &mut ph.omega0,
                    ParamName::X0 => &mut ph.x0,
                    ParamName::GS => &mut ph.g_s,
                    _ => &mut ph.g_t,
                }
            }
        };
        *slot = value;
        Ok(())
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

/// Search box: `active` parameters move inside `bounds`, everything else is
/// frozen at its value in `base` / `base_phonons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    pub bounds: BTreeMap<ParamName, (f64, f64)>,
    pub active: Vec<ParamName>,
    pub base: ModelParams,
    #[serde(default)]
    pub base_phonons: Option<PhononParams>,
}

impl ParameterSpace {
    /// Table 1 box with every parameter of the mode active.
    pub fn default_box(base: ModelParams, base_phonons: Option<PhononParams>) -> Self {
        let open = base_phonons.is_some();
        let active: Vec<ParamName> = ParamName::ALL
            .into_iter()
            .filter(|p| {
                if open {
                    !matches!(p, ParamName::SigmaJT | ParamName::SigmaChi)
                } else {
                    !p.is_phonon()
                }
            })
            .collect();
        let bounds = active.iter().map(|&p| (p, p.box_range())).collect();
        ParameterSpace {
            bounds,
            active,
            base,
            base_phonons,
        }
    }

    /// Table 1 box restricted to `active`.
    pub fn with_active(
        base: ModelParams,
        base_phonons: Option<PhononParams>,
        active: Vec<ParamName>,
    ) -> Self {
        let bounds = active.iter().map(|&p| (p, p.box_range())).collect();
        ParameterSpace {
            bounds,
            active,
            base,
            base_phonons,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.active.is_empty() {
            return Err(invalid("no active parameters"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in &self.active {
            if !seen.insert(p) {
                return Err(invalid(format!("{p} listed twice")));
            }
            let (lo, hi) = self
                .bounds
                .get(&p)
                .copied()
                .ok_or_else(|| invalid(format!("no bounds for {p}")))?;
            if !(lo <= hi) {
                return Err(invalid(format!("bounds for {p}: min {lo} > max {hi}")));
            }
            if p.is_phonon() && self.base_phonons.is_none() {
                return Err(invalid(format!(
                    "{p} is active but no phonon parameters are given"
                )));
            }
        }
        self.base.validate()
    }

    pub fn dim(&self) -> usize {
        self.active.len()
    }

    fn range(&self, k: usize) -> (f64, f64) {
        self.bounds[&self.active[k]]
    }

    /// Active values of the base point.
    pub fn initial_point(&self) -> Vec<f64> {
        self.active
            .iter()
            .map(|p| {
                p.get(&self.base, self.base_phonons.as_ref())
                    .expect("validated")
            })
            .collect()
    }

    /// Clamps to the box; returns whether anything moved.
    pub fn clip(&self, x: &mut [f64]) -> bool {
        let mut moved = false;
        for (k, v) in x.iter_mut().enumerate() {
            let (lo, hi) = self.range(k);
            let c = v.clamp(lo, hi);
            if c != *v {
                log::info!("clipped {} from {} to {}", self.active[k], v, c);
                *v = c;
                moved = true;
            }
        }
        moved
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (lo, hi) = self.range(k);
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (lo, hi) = self.range(k);
                lo + v * (hi - lo)
            })
            .collect()
    }

    /// Full parameter records at active values `x`.
    pub fn materialize(&self, x: &[f64]) -> Result<(ModelParams, Option<PhononParams>)> {
        let mut model = self.base;
        let mut phonons = self.base_phonons;
        for (&p, &v) in self.active.iter().zip(x) {
            p.set(&mut model, phonons.as_mut(), v)?;
        }
        Ok((model, phonons))
    }

    pub fn named(&self, x: &[f64]) -> BTreeMap<ParamName, f64> {
        self.active.iter().copied().zip(x.iter().copied()).collect()
    }
}

/// Fidelity of one objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub n_sites: usize,
    pub initial: InitialStateSpec,
    pub ensemble: EnsembleConfig,
    /// Output points over the horizon.
    pub n_out: usize,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub open_solver: OpenSolver,
}

impl EvalConfig {
    pub fn closed(n_sites: usize, n_realizations: usize, tau_over_gamma: f64) -> Self {
        EvalConfig {
            n_sites,
            initial: InitialStateSpec::default_for(1),
            ensemble: EnsembleConfig {
                n_realizations,
                tau_over_gamma: Some(tau_over_gamma),
                ..Default::default()
            },
            n_out: 401,
            propagator: PropagatorConfig::default(),
            open_solver: OpenSolver::Liouville,
        }
    }

    /// Single deterministic realization of the open model.
    pub fn open(n_sites: usize, tau_over_gamma: f64) -> Self {
        EvalConfig {
            n_out: 201,
            ..Self::closed(n_sites, 1, tau_over_gamma)
        }
    }

    pub fn spec(&self, model: ModelParams, phonons: Option<PhononParams>) -> SimulationSpec {
        SimulationSpec {
            n_sites: self.n_sites,
            spin_mode: SpinMode::Spinless,
            model,
            spinful: None,
            phonons,
            initial: self.initial,
            grid: TimeGrid {
                t_max: 1.0,
                n_out: self.n_out,
            },
            propagator: self.propagator,
            open_solver: self.open_solver,
        }
    }
}

/// One objective value with its ensemble spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// `-eta_bar` (closed) or `-eta(tau)` (open).
    pub value: f64,
    pub std: f64,
    /// Open model only: whether `eta` had settled at `tau`.
    pub steady: Option<bool>,
}

/// Minimization target `O = -eta`; the mode follows from whether phonons are present.
pub fn objective(
    model: &ModelParams,
    phonons: Option<&PhononParams>,
    eval: &EvalConfig,
) -> Result<ObjectiveValue> {
    let spec = eval.spec(*model, phonons.copied());
    let stats = run_ensemble(&spec, &eval.ensemble)?;
    if phonons.is_some() {
        let steady = is_steady(&stats.times, &stats.eta.mean, model.gamma.abs());
        if !steady {
            log::warn!(
                "eta not steady at tau = {} for gamma = {}",
                stats.tau,
                model.gamma
            );
        }
        Ok(ObjectiveValue {
            value: -stats.eta_final_mean,
            std: stats.eta_final_std,
            steady: Some(steady),
        })
    } else {
        Ok(ObjectiveValue {
            value: -stats.eta_bar_mean,
            std: stats.eta_bar_std,
            steady: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coarse,
    Fine,
}

/// One line of the evaluation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub stage: Stage,
    pub params: BTreeMap<ParamName, f64>,
    pub objective: f64,
    pub std: f64,
    #[serde(default)]
    pub steady: Option<bool>,
    /// The proposed point lay outside the box and was clamped.
    #[serde(default)]
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseStage {
    /// Latin-hypercube sample count.
    pub n_points: usize,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineStage {
    pub eval: EvalConfig,
    /// Simplex restarts from the best coarse points.
    #[serde(default = "one")]
    pub n_starts: usize,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
    #[serde(default = "default_xtol")]
    pub xtol: f64,
    /// Initial simplex edge in box-normalized units.
    #[serde(default = "default_step")]
    pub initial_step: f64,
}

fn one() -> usize {
    1
}
fn default_ftol() -> f64 {
    1e-3
}
fn default_xtol() -> f64 {
    1e-4
}
fn default_step() -> f64 {
    0.05
}
fn default_max_evals() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagesConfig {
    #[serde(default)]
    pub coarse: Option<CoarseStage>,
    pub fine: Option<FineStage>,
    /// Evaluation cap per stage.
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: BTreeMap<ParamName, f64>,
    pub best_model: ModelParams,
    pub best_phonons: Option<PhononParams>,
    /// `None` when nothing was evaluated.
    pub best_objective: Option<f64>,
    pub log: Vec<EvalRecord>,
    pub total_evaluations: usize,
    pub budget_exhausted: bool,
}

/// Evaluates points, replaying a prior log where it matches.
struct Evaluator<'a> {
    space: &'a ParameterSpace,
    replay: Vec<EvalRecord>,
    log: Vec<EvalRecord>,
    sink: &'a mut dyn FnMut(&EvalRecord) -> Result<()>,
}

impl<'a> Evaluator<'a> {
    fn eval_batch(
        &mut self,
        stage: Stage,
        points: Vec<(Vec<f64>, bool)>,
        eval: &EvalConfig,
    ) -> Result<Vec<f64>> {
        let start = self.log.len();
        let space = self.space;
        let replay = &self.replay;
        let records: Vec<EvalRecord> = points
            .par_iter()
            .enumerate()
            .map(|(k, (x, clipped))| {
                let index = start + k;
                let params = space.named(x);
                if let Some(r) = replay.get(index) {
                    if r.params == params && r.stage == stage {
                        return Ok(r.clone());
                    }
                    log::warn!(
                        "log entry {index} does not match the replayed point; re-evaluating"
                    );
                }
                let (model, phonons) = space.materialize(x)?;
                let v =
                    objective(&model, phonons.as_ref(), eval).map_err(|e| Error::Evaluation {
                        params: format!("{params:?}"),
                        source: Box::new(e),
                    })?;
                Ok(EvalRecord {
                    index,
                    stage,
                    params,
                    objective: v.value,
                    std: v.std,
                    steady: v.steady,
                    clipped: *clipped,
                })
            })
            .collect::<Result<_>>()?;
        let values = records.iter().map(|r| r.objective).collect();
        for r in records {
            (self.sink)(&r)?;
            self.log.push(r);
        }
        Ok(values)
    }

    fn eval(&mut self, stage: Stage, x: Vec<f64>, clipped: bool, eval: &EvalConfig) -> Result<f64> {
        Ok(self.eval_batch(stage, vec![(x, clipped)], eval)?[0])
    }
}

/// `n` stratified samples of the unit cube, one per stratum in every coordinate.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

/// Outcome of a bounded simplex search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead on the unit cube. Trial points are clamped into `[0, 1]^d`
/// before evaluation; `f` receives the clamped point and whether it moved.
pub fn nelder_mead<F>(
    x0: &[f64],
    step: f64,
    ftol: f64,
    xtol: f64,
    max_evals: usize,
    mut f: F,
) -> Result<SimplexResult>
where
    F: FnMut(&[f64], bool) -> Result<f64>,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut call = |x: Vec<f64>, evals: &mut usize| -> Result<(Vec<f64>, f64)> {
        let mut c = x.clone();
        let mut moved = false;
        for v in c.iter_mut() {
            let w = v.clamp(0.0, 1.0);
            moved |= w != *v;
            *v = w;
        }
        *evals += 1;
        let fx = f(&c, moved)?;
        Ok((c, fx))
    };
    if max_evals == 0 {
        return Ok(SimplexResult {
            x: x0.to_vec(),
            f: f64::NAN,
            evaluations: 0,
            converged: false,
        });
    }
    let mut simplex = vec![call(x0.to_vec(), &mut evals)?];
    for k in 0..n {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[k] = if x[k] + step <= 1.0 {
            x[k] + step
        } else {
            x[k] - step
        };
        simplex.push(call(x, &mut evals)?);
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut simplex);
    if simplex.len() < n + 1 {
        let (x, f) = simplex[0].clone();
        return Ok(SimplexResult {
            x,
            f,
            evaluations: evals,
            converged: false,
        });
    }
    let converged = |s: &[(Vec<f64>, f64)]| {
        let fspread = s.iter().map(|v| (v.1 - s[0].1).abs()).fold(0.0, f64::max);
        let xspread = s
            .iter()
            .flat_map(|v| v.0.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        fspread <= ftol && xspread <= xtol
    };
    while !converged(&simplex) && evals < max_evals {
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v.0[d]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let reflected = call(along(1.0), &mut evals)?;
        if reflected.1 < simplex[0].1 {
            let expanded = if evals < max_evals {
                Some(call(along(2.0), &mut evals)?)
            } else {
                None
            };
            simplex[n] = match expanded {
                Some(e) if e.1 < reflected.1 => e,
                _ => reflected,
            };
        } else if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
        } else {
            let outside = reflected.1 < worst.1;
            let contracted = if evals < max_evals {
                call(along(if outside { 0.5 } else { -0.5 }), &mut evals)?
            } else {
                break;
            };
            let accept = if outside {
                contracted.1 <= reflected.1
            } else {
                contracted.1 < worst.1
            };
            if accept {
                simplex[n] = contracted;
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&v.0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    *v = call(x, &mut evals)?;
                }
            }
        }
        sort(&mut simplex);
    }
    let done = converged(&simplex);
    let (x, f) = simplex[0].clone();
    Ok(SimplexResult {
        x,
        f,
        evaluations: evals,
        converged: done,
    })
}

/// Scatter then simplex refinement. `prior` is a previous evaluation log to
/// replay (resume); every new record is handed to `sink` as it is produced.
pub fn run_optimization(
    space: &ParameterSpace,
    stages: &StagesConfig,
    prior: Vec<EvalRecord>,
    sink: &mut dyn FnMut(&EvalRecord) -> Result<()>,
) -> Result<OptimizationResult> {
    space.validate()?;
    let mut ev = Evaluator {
        space,
        replay: prior,
        log: Vec::new(),
        sink,
    };
    let mut exhausted = false;
    let x_init = space.initial_point();
    let mut starts: Vec<Vec<f64>> = Vec::new();

    if let Some(coarse) = &stages.coarse {
        let n = coarse.n_points.min(stages.max_evals);
        exhausted |= n < coarse.n_points;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stages.seed, 0));
        let points: Vec<(Vec<f64>, bool)> = latin_hypercube(n, space.dim(), &mut rng)
            .into_iter()
            .map(|u| (space.from_unit(&u), false))
            .collect();
        let values = ev.eval_batch(Stage::Coarse, points.clone(), &coarse.eval)?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let n_starts = stages.fine.as_ref().map_or(0, |f| f.n_starts);
        starts = order
            .into_iter()
            .take(n_starts)
            .map(|k| points[k].0.clone())
            .collect();
    }

    let mut final_stage = Stage::Coarse;
    if let Some(fine) = &stages.fine {
        final_stage = Stage::Fine;
        if starts.is_empty() {
            let mut x = x_init.clone();
            space.clip(&mut x);
            starts.push(x);
        }
        let mut budget = stages.max_evals;
        for x0 in &starts {
            let u0 = space.to_unit(x0);
            let eval_cfg = fine.eval.clone();
            let res = nelder_mead(
                &u0,
                fine.initial_step,
                fine.ftol,
                fine.xtol,
                budget,
                |u, clipped| {
                    let x = space.from_unit(u);
                    ev.eval(Stage::Fine, x, clipped, &eval_cfg)
                },
            )?;
            budget -= res.evaluations;
            if !res.converged {
                exhausted = true;
            }
            if budget == 0 {
                break;
            }
        }
        if stages.max_evals == 0 {
            exhausted = true;
        }
    }

    let best = ev
        .log
        .iter()
        .filter(|r| r.stage == final_stage)
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .cloned();
    let (best_params, best_objective) = match best {
        Some(r) => (r.params, Some(r.objective)),
        None => (space.named(&x_init), None),
    };
    if exhausted {
        log::warn!("evaluation budget exhausted; returning best so far");
    }
    let x_best: Vec<f64> = space.active.iter().map(|p| best_params[p]).collect();
    let (best_model, best_phonons) = space.materialize(&x_best)?;
    Ok(OptimizationResult {
        best_params,
        best_model,
        best_phonons,
        best_objective,
        total_evaluations: ev.log.len(),
        log: ev.log,
        budget_exhausted: exhausted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub eta: f64,
    pub std: f64,
    pub steady: Option<bool>,
}

/// `eta` at each `gamma`, all else fixed; the horizon scales as `1/gamma`.
pub fn gamma_sweep(
    model: &ModelParams,
    phonons: Option<&PhononParams>,
    gammas: &[f64],
    eval: &EvalConfig,
) -> Result<Vec<GammaRow>> {
    gammas
        .iter()
        .map(|&gamma| {
            let m = ModelParams { gamma, ..*model };
            let v = objective(&m, phonons, eval)?;
            Ok(GammaRow {
                gamma,
                eta: -v.value,
                std: v.std,
                steady: v.steady,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_quadratic_minimum() {
        let target = [0.3, 0.7, 0.55];
        let res = nelder_mead(&[0.5, 0.5, 0.5], 0.1, 1e-14, 1e-8, 5000, |x, _| {
            Ok(x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum())
        })
        .unwrap();
        assert!(res.converged);
        for (a, b) in res.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn simplex_respects_box() {
        let res = nelder_mead(&[0.5], 0.1, 1e-10, 1e-8, 500, |x, _| {
            assert!((0.0..=1.0).contains(&x[0]));
            Ok(-x[0])
        })
        .unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn latin_hypercube_stratifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = latin_hypercube(10, 2, &mut rng);
        for d in 0..2 {
            let mut bins: Vec<usize> = pts.iter().map(|p| (p[d] * 10.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn space_round_trip_and_clip() {
        let space = ParameterSpace::default_box(ModelParams::optimised_closed(), None);
        assert_eq!(space.dim(), 7);
        let x = space.initial_point();
        let back = space.from_unit(&space.to_unit(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut y = x.clone();
        y[0] = 2.0;
        assert!(space.clip(&mut y));
        assert_eq!(y[0], 0.65);
        let (m, _) = space.materialize(&y).unwrap();
        assert_eq!(m.eps_t, 0.65);
    }

    #[test]
    fn zero_budget_returns_initial_point() {
        let space = ParameterSpace::with_active(
            ModelParams::resonant(1.0, -0.1, 0.1),
            None,
            vec![ParamName::EpsT],
        );
        let stages = StagesConfig {
            coarse: None,
            fine: Some(FineStage {
                eval: EvalConfig::closed(4, 1, 10.0),
                n_starts: 1,
                ftol: 1e-3,
                xtol: 1e-4,
                initial_step: 0.05,
            }),
            max_evals: 0,
            seed: 0,
        };
        let res = run_optimization(&space, &stages, Vec::new(), &mut |_| Ok(())).unwrap();
        assert!(res.budget_exhausted);
        assert_eq!(res.best_objective, None);
        assert_eq!(res.best_params[&ParamName::EpsT], 0.4);
    }
}
