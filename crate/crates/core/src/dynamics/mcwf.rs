//! Waiting-time quantum trajectories.
//!
//! Between jumps the unnormalized state follows `exp(-i H_eff t)`; a jump
//! fires when its squared norm falls to a uniform random threshold.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::krylov::{Arnoldi, KrylovStepper};
use crate::dynamics::state::{norm, StateVector};
use crate::dynamics::unitary::check_hermitian;
use crate::dynamics::{PropagatorConfig, TimeGrid};
use crate::error::{invalid, Result};
use crate::phonon::LindbladSpec;
use crate::seed::derive_seed;
use crate::sparse::{check_tag, SparseOperator};

fn default_n_traj() -> usize {
    1000
}

fn default_bisection() -> f64 {
    1e-10
}

fn default_traj_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McwfConfig {
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// Accuracy of the jump time, in squared norm.
    #[serde(default = "default_bisection")]
    pub jump_bisection_tolerance: f64,
    /// Krylov local error per unit time along trajectories.
    #[serde(default = "default_traj_tol")]
    pub tolerance: f64,
}

impl Default for McwfConfig {
    fn default() -> Self {
        McwfConfig {
            n_traj: default_n_traj(),
            seed: 0,
            jump_bisection_tolerance: default_bisection(),
            tolerance: default_traj_tol(),
        }
    }
}

impl McwfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(invalid("n_traj must be >= 1"));
        }
        if !(self.jump_bisection_tolerance > 0.0) || !(self.tolerance > 0.0) {
            return Err(invalid("trajectory tolerances must be > 0"));
        }
        Ok(())
    }
}

/// Per-observable trajectory statistics on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    /// `mean[obs][k]`
    pub mean: Vec<Vec<f64>>,
    /// Standard error of the mean, `std / sqrt(n_traj)` with `ddof = 1`.
    pub stderr: Vec<Vec<f64>>,
    /// `trajectories[traj][obs][k]`
    pub trajectories: Vec<Vec<Vec<f64>>>,
    pub jumps: Vec<usize>,
}

impl TrajectoryEnsemble {
    pub fn n_traj(&self) -> usize {
        self.trajectories.len()
    }
}

struct Trajectory<'a> {
    h_eff: SparseOperator,
    jumps: Vec<(&'a SparseOperator, f64)>,
    observables: &'a [&'a SparseOperator],
    config: PropagatorConfig,
    anorm: f64,
}

impl Trajectory<'_> {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.h_eff.apply(x, y);
        y.iter_mut().for_each(|z| *z *= C64::new(0.0, -1.0));
    }

    fn record(&self, phi: &[C64]) -> Vec<f64> {
        let n2 = phi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        self.observables
            .iter()
            .map(|o| o.expectation(phi).re / n2)
            .collect()
    }

    fn draw_threshold(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.jumps.is_empty() {
            0.0
        } else {
            rng.random::<f64>()
        }
    }

    /// Step length in `(0, tau]` at which the squared norm reaches `target`.
    fn bisect(&self, arn: &Arnoldi, tau: f64, target: f64) -> (f64, Vec<C64>) {
        let tol = self.config.mcwf.jump_bisection_tolerance;
        let (mut lo, mut hi) = (0.0, tau);
        let mut best = arn.exp_coefficients(tau).0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let coef = arn.exp_coefficients(mid).0;
            let n2 = coef.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if (n2 - target).abs() <= tol {
                return (mid, coef);
            }
            if n2 > target {
                lo = mid;
            } else {
                hi = mid;
                best = coef;
            }
            if hi - lo <= 1e-15 * tau {
                break;
            }
        }
        (hi, best)
    }

    fn run(&self, psi0: &[C64], times: &[f64], seed: u64) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stepper =
            KrylovStepper::new(self.config.krylov(self.config.mcwf.tolerance), self.anorm);
        let apply = |x: &[C64], y: &mut [C64]| self.apply(x, y);
        let n_obs = self.observables.len();
        let mut series = vec![Vec::with_capacity(times.len()); n_obs];
        let mut push = |vals: Vec<f64>| {
            for (s, v) in series.iter_mut().zip(vals) {
                s.push(v);
            }
        };

        // phi is kept at unit norm; `budget` is the threshold relative to it
        let mut phi = psi0.to_vec();
        let mut budget = self.draw_threshold(&mut rng);
        let mut t = 0.0;
        let mut n_jumps = 0;
        for &t_out in times {
            while t_out - t > 1e-14 * t_out.max(1.0) {
                let (next, tau, arn) = stepper.exp_step(&apply, &phi, t_out - t)?;
                let n2 = next.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if n2 > budget {
                    let n = n2.sqrt();
                    phi = next.into_iter().map(|z| z / n).collect();
                    budget /= n2;
                    t = if t_out - (t + tau) <= 1e-14 * t_out.max(1.0) {
                        t_out
                    } else {
                        t + tau
                    };
                    continue;
                }
                let (s, coef) = self.bisect(&arn, tau, budget);
                let state = arn.combine(&coef);
                t += s;
                phi = self.jump(&state, &mut rng);
                n_jumps += 1;
                budget = self.draw_threshold(&mut rng);
            }
            push(self.record(&phi));
        }
        Ok((series, n_jumps))
    }

    /// Applies a channel drawn with weight `gamma_k ||L_k phi||^2`.
    fn jump(&self, phi: &[C64], rng: &mut ChaCha8Rng) -> Vec<C64> {
        let candidates: Vec<(Vec<C64>, f64)> = self
            .jumps
            .iter()
            .map(|(l, rate)| {
                let v = l.mul_vec(phi);
                let w = rate * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
                (v, w)
            })
            .collect();
        let total: f64 = candidates.iter().map(|(_, w)| w).sum();
        let n = norm(phi);
        if total <= 0.0 {
            return phi.iter().map(|z| z / n).collect();
        }
        let mut r = rng.random::<f64>() * total;
        let mut chosen = candidates.len() - 1;
        for (k, (_, w)) in candidates.iter().enumerate() {
            if r < *w {
                chosen = k;
                break;
            }
            r -= w;
        }
        let v = &candidates[chosen].0;
        let nv = norm(v);
        v.iter().map(|z| z / nv).collect()
    }
}

/// Runs `config.mcwf.n_traj` trajectories in parallel and reduces them in
/// trajectory order, so results do not depend on the worker count.
pub fn propagate_mcwf(
    h: &SparseOperator,
    dissipator: &LindbladSpec,
    psi0: &StateVector,
    grid: &TimeGrid,
    config: &PropagatorConfig,
    observables: &[&SparseOperator],
) -> Result<TrajectoryEnsemble> {
    check_tag(h.tag(), psi0.tag())?;
    check_hermitian(h)?;
    psi0.check_normalized(1e-10)?;
    grid.validate()?;
    config.validate()?;
    for o in observables {
        check_tag(h.tag(), o.tag())?;
    }
    let decay = dissipator.decay_operator(h.dim(), h.tag())?;
    let h_eff = h.sub(&decay.scaled(C64::new(0.0, 0.5)))?;
    let mut jumps = Vec::with_capacity(dissipator.len());
    for j in &dissipator.jumps {
        check_tag(h.tag(), j.op.tag())?;
        jumps.push((&j.op, j.rate));
    }
    let anorm = h_eff.norm_inf();
    let traj = Trajectory {
        h_eff,
        jumps,
        observables,
        config: *config,
        anorm,
    };
    let times = grid.times();
    let n_traj = config.mcwf.n_traj;
    let results = (0..n_traj)
        .into_par_iter()
        .map(|k| traj.run(psi0.amps(), &times, derive_seed(config.mcwf.seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;

    let n_obs = observables.len();
    let nt = times.len();
    let mut mean = vec![vec![0.0; nt]; n_obs];
    let mut stderr = vec![vec![0.0; nt]; n_obs];
    for (series, _) in &results {
        for o in 0..n_obs {
            for k in 0..nt {
                mean[o][k] += series[o][k];
            }
        }
    }
    let nf = n_traj as f64;
    mean.iter_mut().flatten().for_each(|m| *m /= nf);
    if n_traj > 1 {
        for (series, _) in &results {
            for o in 0..n_obs {
                for k in 0..nt {
                    stderr[o][k] += (series[o][k] - mean[o][k]).powi(2);
                }
            }
        }
        stderr
            .iter_mut()
            .flatten()
            .for_each(|s| *s = (*s / (nf - 1.0)).sqrt() / nf.sqrt());
    }
    let (trajectories, jumps) = results.into_iter().unzip();
    Ok(TrajectoryEnsemble {
        times,
        mean,
        stderr,
        trajectories,
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SpinMode;
    use crate::dynamics::unitary::propagate_unitary;
    use crate::phonon::{ladder, Jump};
    use crate::sparse::BasisTag;

    fn damped_mode() -> (SparseOperator, LindbladSpec, StateVector, SparseOperator) {
        let tag = BasisTag::sector(1, 0, SpinMode::Spinless).embedded(2);
        let a = SparseOperator::from_dense(tag, &ladder(2).map(|x| C64::new(x, 0.0)));
        let h = SparseOperator::from_diagonal(tag, &[0.0, 0.25]);
        let spec = LindbladSpec {
            jumps: vec![Jump {
                label: "a".into(),
                op: a,
                rate: 0.1,
            }],
        };
        let n = SparseOperator::from_diagonal(tag, &[0.0, 1.0]);
        (h, spec, StateVector::basis_state(tag, 2, 1), n)
    }

    #[test]
    fn damped_mode_within_three_standard_errors() {
        let (h, spec, psi, n) = damped_mode();
        let grid = TimeGrid::new(30.0, 16).unwrap();
        let cfg = PropagatorConfig {
            mcwf: McwfConfig {
                n_traj: 2000,
                seed: 7,
                ..Default::default()
            },
            ..Default::default()
        };
        let ens = propagate_mcwf(&h, &spec, &psi, &grid, &cfg, &[&n]).unwrap();
        for (k, t) in ens.times.iter().enumerate() {
            let exact = (-0.1 * t).exp();
            assert!(
                (ens.mean[0][k] - exact).abs() <= 3.0 * ens.stderr[0][k] + 1e-10,
                "t={t}"
            );
        }
    }

    #[test]
    fn no_jumps_reproduces_unitary_evolution() {
        let tag = BasisTag::sector(2, 2, SpinMode::Spinless);
        let mut b = crate::sparse::OperatorBuilder::new(3, tag);
        b.push(0, 0, 1.0);
        b.push(1, 1, 0.9);
        b.push(0, 2, 0.1);
        b.push(2, 0, 0.1);
        let h = b.build();
        let n = SparseOperator::from_diagonal(tag, &[0.0, 1.0, 2.0]);
        let psi = StateVector::basis_state(tag, 3, 0);
        let grid = TimeGrid::new(20.0, 11).unwrap();
        let cfg = PropagatorConfig {
            mcwf: McwfConfig {
                n_traj: 4,
                ..Default::default()
            },
            ..Default::default()
        };
        let ens = propagate_mcwf(&h, &LindbladSpec::default(), &psi, &grid, &cfg, &[&n]).unwrap();
        let exact = propagate_unitary(&h, &psi, &grid, &PropagatorConfig::default()).unwrap();
        for (k, s) in exact.iter().enumerate() {
            let want = s.expectation(&n).unwrap();
            for traj in &ens.trajectories {
                assert!((traj[0][k] - want).abs() < 1e-8);
            }
            assert_eq!(ens.stderr[0][k], 0.0);
        }
        assert!(ens.jumps.iter().all(|&j| j == 0));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let (h, spec, psi, n) = damped_mode();
        let grid = TimeGrid::new(10.0, 5).unwrap();
        let cfg = PropagatorConfig {
            mcwf: McwfConfig {
                n_traj: 50,
                seed: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = propagate_mcwf(&h, &spec, &psi, &grid, &cfg, &[&n]).unwrap();
        let b = propagate_mcwf(&h, &spec, &psi, &grid, &cfg, &[&n]).unwrap();
        assert_eq!(a, b);
    }
}
