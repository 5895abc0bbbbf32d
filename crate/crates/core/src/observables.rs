//! Initial-state selection, optical brightness and efficiency functionals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, SectorBasis, SiteLabel};
use crate::dynamics::state::StateVector;
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{build_h_s, DisorderRealization, ModelParams};
use crate::sparse::BasisTag;

/// Energy window within which eigenvalues are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMethod {
    BrightestEigenstate,
    SectorGroundState,
    WState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSpec {
    pub n0: usize,
    pub method: InitialMethod,
}

impl InitialStateSpec {
    /// Brightest eigenstate for a single singlet, sector ground state otherwise.
    pub fn default_for(n0: usize) -> Self {
        let method = if n0 == 1 {
            InitialMethod::BrightestEigenstate
        } else {
            InitialMethod::SectorGroundState
        };
        InitialStateSpec { n0, method }
    }

    /// Conserved charge of the initial state.
    pub fn c0(&self) -> usize {
        2 * self.n0
    }
}

/// Total dipole `M = mu sum_i (S_i† + S_i)` between the sectors `C` and `C + 2`.
///
/// Stored as the raising block `mu sum_i S_i†` (upper x lower); the lowering
/// block is its transpose.
#[derive(Debug, Clone)]
pub struct DipoleCoupling {
    pub lower: BasisTag,
    pub upper: BasisTag,
    pub raising: DMatrix<f64>,
}

pub fn total_dipole_operator(
    lower: &SectorBasis,
    upper: &SectorBasis,
    mu: f64,
) -> Result<DipoleCoupling> {
    if upper.n_sites() != lower.n_sites()
        || upper.spin_mode() != lower.spin_mode()
        || upper.c0() != lower.c0() + 2
    {
        return Err(Error::BasisMismatch {
            expected: BasisTag::sector(lower.n_sites(), lower.c0() + 2, lower.spin_mode()),
            found: upper.tag(),
        });
    }
    let mut m = DMatrix::zeros(upper.dim(), lower.dim());
    if mu != 0.0 {
        for (col, cfg) in lower.configs().iter().enumerate() {
            for i in 0..cfg.n_sites() {
                if cfg[i] == SiteLabel::S0 {
                    let row = upper.config_index(&cfg.with(i, SiteLabel::S1))?;
                    m[(row, col)] += mu;
                }
            }
        }
    }
    Ok(DipoleCoupling {
        lower: lower.tag(),
        upper: upper.tag(),
        raising: m,
    })
}

impl DipoleCoupling {
    /// `M |psi>` projected onto the upper sector.
    pub fn raise(&self, psi: &StateVector) -> Result<StateVector> {
        crate::sparse::check_tag(self.lower, psi.tag())?;
        let v = self.raising.map(|x| C64::new(x, 0.0)) * DVector::from_column_slice(psi.amps());
        Ok(StateVector::new(self.upper, v.as_slice().to_vec()))
    }

    /// `<upper| M |lower>`
    pub fn amplitude(&self, upper: &StateVector, lower: &StateVector) -> Result<C64> {
        let raised = self.raise(lower)?;
        upper.inner(&raised)
    }
}

/// The uniform single-singlet superposition.
pub fn w_state(basis: &SectorBasis) -> Result<StateVector> {
    if basis.c0() != 2 {
        return Err(Error::Unsupported(format!(
            "W state needs C0 = 2, got {}",
            basis.c0()
        )));
    }
    let idx = basis.block_indices(1, 0);
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    let w = 1.0 / (idx.len() as f64).sqrt();
    for i in idx {
        amps[i] = C64::new(w, 0.0);
    }
    Ok(StateVector::new(basis.tag(), amps))
}

/// Eigenvectors of the `n`-singlet block grouped into degenerate clusters.
struct Clusters {
    indices: Vec<usize>,
    energies: Vec<f64>,
    /// Orthonormal columns over the block indices, per cluster.
    groups: Vec<DMatrix<C64>>,
}

fn singlet_block(
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
    n: usize,
) -> Result<Clusters> {
    let indices = basis.block_indices(n, 0);
    if indices.is_empty() {
        return Err(invalid(format!(
            "no {n}-singlet configurations in sector C0 = {}",
            basis.c0()
        )));
    }
    let h = build_h_s(basis, params, dis)?;
    let eig = h.restrict_dense(&indices).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut energies = Vec::new();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let e0 = eig.eigenvalues[order[start]];
        let mut end = start + 1;
        while end < order.len() && eig.eigenvalues[order[end]] - e0 <= DEGENERACY_TOL {
            end += 1;
        }
        let cols: Vec<_> = order[start..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k))
            .collect();
        groups.push(DMatrix::from_columns(&cols));
        energies.push(e0);
        start = end;
    }
    Ok(Clusters {
        indices,
        energies,
        groups,
    })
}

fn embed(basis: &SectorBasis, indices: &[usize], v: &DVector<C64>) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    for (k, &i) in indices.iter().enumerate() {
        amps[i] = v[k];
    }
    StateVector::new(basis.tag(), amps)
}

/// Projection of `target` (over the block indices) onto a cluster.
fn project(group: &DMatrix<C64>, target: &DVector<C64>) -> DVector<C64> {
    group * (group.adjoint() * target)
}

/// Fixes the global phase so the largest-magnitude amplitude is real positive.
fn fix_phase(v: &mut DVector<C64>) {
    if let Some(big) = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
    {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|z| *z *= ph);
        }
    }
}

/// Chooses the cluster with the largest overlap with `target`; ties go to
/// the lower energy. Returns the normalized projection.
fn brightest_in(clusters: &Clusters, target: &DVector<C64>) -> DVector<C64> {
    let mut best: Option<(usize, f64)> = None;
    for (c, g) in clusters.groups.iter().enumerate() {
        let w = project(g, target).norm();
        match best {
            Some((_, bw)) if w <= bw * (1.0 + 1e-9) + 1e-12 => {}
            _ => best = Some((c, w)),
        }
    }
    let (c, w) = best.expect("at least one cluster");
    if w <= 1e-12 {
        let mut v = clusters.groups[0].column(0).into_owned();
        fix_phase(&mut v);
        return v;
    }
    project(&clusters.groups[c], target) / C64::new(w, 0.0)
}

/// Initial exciton state on the `C0 = 2 n0` sector `basis`.
///
/// `brightest_eigenstate` climbs the singlet ladder: at each filling it
/// keeps the eigenstate (or degenerate-level projection) reached with the
/// largest dipole amplitude from the previous one, starting from the
/// ground state. `sector_ground_state` uses the lowest level, resolved by
/// the same dipole projection when degenerate.
pub fn select_initial_state(
    spec: &InitialStateSpec,
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
) -> Result<StateVector> {
    let n = basis.n_sites();
    if spec.n0 < 1 || spec.n0 > n {
        return Err(invalid(format!("n0 = {} outside [1, {n}]", spec.n0)));
    }
    if basis.c0() != spec.c0() {
        return Err(Error::BasisMismatch {
            expected: BasisTag::sector(n, spec.c0(), basis.spin_mode()),
            found: basis.tag(),
        });
    }
    if spec.method == InitialMethod::WState {
        if spec.n0 != 1 {
            return Err(Error::Unsupported(
                "W state is defined for n0 = 1 only".into(),
            ));
        }
        return w_state(basis);
    }

    // bright ladder from the vacuum up to n0 singlets
    let mut prev_basis = enumerate_sector(n, 0, basis.spin_mode())?;
    let mut prev = StateVector::basis_state(prev_basis.tag(), 1, 0);
    for level in 1..=spec.n0 {
        let sector = if level == spec.n0 {
            basis.clone()
        } else {
            enumerate_sector(n, 2 * level, basis.spin_mode())?
        };
        let clusters = singlet_block(&sector, params, dis, level)?;
        let raised = total_dipole_operator(&prev_basis, &sector, 1.0)?.raise(&prev)?;
        let target = DVector::from_iterator(
            clusters.indices.len(),
            clusters.indices.iter().map(|&i| raised.amps()[i]),
        );
        let pick_ground = level == spec.n0 && spec.method == InitialMethod::SectorGroundState;
        let v = if pick_ground {
            let ground = Clusters {
                indices: clusters.indices.clone(),
                energies: vec![clusters.energies[0]],
                groups: vec![clusters.groups[0].clone()],
            };
            brightest_in(&ground, &target)
        } else {
            brightest_in(&clusters, &target)
        };
        prev = embed(&sector, &clusters.indices, &v);
        prev_basis = sector;
    }
    prev.normalize()?;
    Ok(prev)
}

/// `eta(t) = <N_T>_t / (2 <N_S>_0)`.
pub fn efficiency(n_t: &[f64], n_s0: f64) -> Result<Vec<f64>> {
    if n_s0 == 0.0 {
        return Err(Error::DivisionByZero("initial singlet population is zero"));
    }
    let eta: Vec<f64> = n_t.iter().map(|x| x / (2.0 * n_s0)).collect();
    if let Some(bad) = eta.iter().find(|&&e| !(-1e-9..=1.0 + 1e-9).contains(&e)) {
        log::warn!("efficiency {bad} outside [0, 1]");
    }
    Ok(eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub mean: f64,
    /// Root-mean-square deviation of `eta` from `mean` over `[0, tau]`.
    pub fluctuation: f64,
    pub n_points: usize,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Trapezoidal `(1/tau) int_0^tau eta dt`, interpolating linearly at `tau`.
pub fn time_avg_efficiency(times: &[f64], eta: &[f64], tau: f64) -> Result<TimeAverage> {
    if times.len() != eta.len() || times.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} times vs {} values",
            times.len(),
            eta.len()
        )));
    }
    let t_last = *times.last().expect("nonempty");
    if tau > t_last * (1.0 + 1e-12) || tau < 0.0 {
        return Err(invalid(format!("tau = {tau} outside [0, {t_last}]")));
    }
    if tau == 0.0 || times.len() == 1 {
        return Ok(TimeAverage {
            mean: eta[0],
            fluctuation: 0.0,
            n_points: 1,
        });
    }
    let mut t: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for k in 0..times.len() {
        if times[k] <= tau {
            t.push(times[k]);
            y.push(eta[k]);
        } else {
            let (t0, t1) = (times[k - 1], times[k]);
            let w = (tau - t0) / (t1 - t0);
            t.push(tau);
            y.push(eta[k - 1] + w * (eta[k] - eta[k - 1]));
            break;
        }
    }
    if t.len() < 50 {
        log::warn!("time average over only {} grid points", t.len());
    }
    let span = t.last().expect("nonempty") - t[0];
    let mean = trapezoid(&t, &y) / span;
    let sq: Vec<f64> = y.iter().map(|v| (v - mean).powi(2)).collect();
    let fluctuation = (trapezoid(&t, &sq) / span).max(0.0).sqrt();
    Ok(TimeAverage {
        mean,
        fluctuation,
        n_points: t.len(),
    })
}

/// `1 - (eps_s - 2 eps_t) / eps_s`.
pub fn thermodynamic_efficiency(eps_s: f64, eps_t: f64) -> Result<f64> {
    if !(eps_s > 0.0) {
        return Err(invalid(format!("eps_s must be > 0, got {eps_s}")));
    }
    Ok(1.0 - (eps_s - 2.0 * eps_t) / eps_s)
}

/// `<N_T>_t = cos(4 gamma t + pi) + 1` of the resonant pair.
pub fn resonant_reference(gamma: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be > 0, got {gamma}")));
    }
    Ok(times
        .iter()
        .map(|t| (4.0 * gamma * t + std::f64::consts::PI).cos() + 1.0)
        .collect())
}

/// Largest `|d eta / dt|` over the last 10% of the run.
pub fn final_slope(times: &[f64], eta: &[f64]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let t_end = *times.last().expect("nonempty");
    let start = times
        .iter()
        .position(|&t| t >= 0.9 * t_end)
        .unwrap_or(0)
        .min(times.len() - 2);
    (start..times.len() - 1)
        .map(|k| ((eta[k + 1] - eta[k]) / (times[k + 1] - times[k])).abs())
        .fold(0.0, f64::max)
}

/// Steady state when `|d eta / dt| < 1e-4 gamma` over the last 10% of the run.
pub fn is_steady(times: &[f64], eta: &[f64], gamma: f64) -> bool {
    final_slope(times, eta) < 1e-4 * gamma.abs()
}

/// Expectation values on an output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub n_s: Vec<f64>,
    pub n_t: Vec<f64>,
    pub cqn: Vec<f64>,
    pub eta: Vec<f64>,
    /// Standard errors `[n_s, n_t, cqn, eta]` for trajectory averages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<[Vec<f64>; 4]>,
}

impl ObservableSeries {
    pub fn new(times: Vec<f64>, n_s: Vec<f64>, n_t: Vec<f64>, cqn: Vec<f64>) -> Result<Self> {
        let n = times.len();
        if n == 0 || n_s.len() != n || n_t.len() != n || cqn.len() != n {
            return Err(Error::ShapeMismatch(
                "observable columns differ in length".into(),
            ));
        }
        let eta = efficiency(&n_t, n_s[0])?;
        Ok(ObservableSeries {
            times,
            n_s,
            n_t,
            cqn,
            eta,
            stderr: None,
        })
    }

    pub fn time_average(&self) -> Result<TimeAverage> {
        time_avg_efficiency(
            &self.times,
            &self.eta,
            *self.times.last().expect("nonempty"),
        )
    }

    pub fn final_eta(&self) -> f64 {
        *self.eta.last().expect("nonempty")
    }

    /// `max_t |<C>_t - <C>_0|`
    pub fn charge_drift(&self) -> f64 {
        self.cqn
            .iter()
            .map(|c| (c - self.cqn[0]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SpinMode;
    use std::f64::consts::PI;

    fn chain(n: usize, n0: usize) -> SectorBasis {
        enumerate_sector(n, 2 * n0, SpinMode::Spinless).unwrap()
    }

    #[test]
    fn dipole_norms() {
        for n in [3usize, 5] {
            let vac = chain(n, 0);
            let one = chain(n, 1);
            let m = total_dipole_operator(&vac, &one, 0.7).unwrap();
            let g = StateVector::basis_state(vac.tag(), 1, 0);
            let raised = m.raise(&g).unwrap();
            assert!((raised.norm() - (n as f64).sqrt() * 0.7).abs() < 1e-14);
            let w = w_state(&one).unwrap();
            let amp = m.amplitude(&w, &g).unwrap();
            assert!((amp.re - (n as f64).sqrt() * 0.7).abs() < 1e-14);
        }
        let zero = total_dipole_operator(&chain(3, 0), &chain(3, 1), 0.0).unwrap();
        assert_eq!(zero.raising.iter().map(|x| x.abs()).sum::<f64>(), 0.0);
    }

    #[test]
    fn all_methods_give_w_state_for_one_singlet() {
        let basis = chain(6, 1);
        let p = ModelParams {
            j_s: -0.1,
            ..Default::default()
        };
        let dis = DisorderRealization::zero(6);
        let w = w_state(&basis).unwrap();
        let h = build_h_s(&basis, &p, &dis).unwrap();
        for method in [
            InitialMethod::BrightestEigenstate,
            InitialMethod::SectorGroundState,
            InitialMethod::WState,
        ] {
            let psi = select_initial_state(&InitialStateSpec { n0: 1, method }, &basis, &p, &dis)
                .unwrap();
            assert!(psi.fidelity(&w).unwrap() > 1.0 - 1e-10);
            assert!((psi.expectation(&h).unwrap() - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_block_selects_uniform_superposition() {
        let basis = chain(5, 1);
        let dis = DisorderRealization::zero(5);
        let psi = select_initial_state(
            &InitialStateSpec {
                n0: 1,
                method: InitialMethod::BrightestEigenstate,
            },
            &basis,
            &ModelParams::default(),
            &dis,
        )
        .unwrap();
        assert!(psi.fidelity(&w_state(&basis).unwrap()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn full_filling_is_unique() {
        let basis = chain(4, 4);
        let p = ModelParams::optimised_closed();
        let dis = DisorderRealization::zero(4);
        for method in [
            InitialMethod::BrightestEigenstate,
            InitialMethod::SectorGroundState,
        ] {
            let psi = select_initial_state(&InitialStateSpec { n0: 4, method }, &basis, &p, &dis)
                .unwrap();
            let k = basis
                .config_index(&"[S1,S1,S1,S1]".parse().unwrap())
                .unwrap();
            assert!((psi.amps()[k].norm() - 1.0).abs() < 1e-14);
        }
        let err = select_initial_state(
            &InitialStateSpec {
                n0: 2,
                method: InitialMethod::WState,
            },
            &chain(4, 2),
            &p,
            &dis,
        );
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn efficiency_arithmetic() {
        assert_eq!(efficiency(&[2.0, 1.7], 1.0).unwrap(), vec![1.0, 0.85]);
        assert!(matches!(
            efficiency(&[1.0], 0.0),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn time_averages() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 / 100.0).collect();
        let c = vec![0.3; times.len()];
        let avg = time_avg_efficiency(&times, &c, 10.0).unwrap();
        assert!((avg.mean - 0.3).abs() < 1e-12 && avg.fluctuation < 1e-12);
        let ramp: Vec<f64> = times.iter().map(|t| t / 10.0).collect();
        assert!((time_avg_efficiency(&times, &ramp, 10.0).unwrap().mean - 0.5).abs() < 1e-4);

        let gamma = 0.05;
        let period = PI / (2.0 * gamma);
        let times: Vec<f64> = (0..=4000)
            .map(|k| k as f64 * 4.0 * period / 4000.0)
            .collect();
        let nt = resonant_reference(gamma, &times).unwrap();
        let eta = efficiency(&nt, 1.0).unwrap();
        let avg = time_avg_efficiency(&times, &eta, 4.0 * period).unwrap();
        assert!((avg.mean - 0.5).abs() < 1e-6);
        assert!((avg.fluctuation - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-4);
    }

    #[test]
    fn resonant_reference_points() {
        let g = 0.05;
        let v = resonant_reference(g, &[0.0, PI / (4.0 * g), PI / (8.0 * g)]).unwrap();
        assert!(v[0].abs() < 1e-15);
        assert!((v[1] - 2.0).abs() < 1e-15);
        assert!((v[2] - 1.0).abs() < 1e-15);
        assert!(resonant_reference(0.0, &[0.0]).is_err());
    }

    #[test]
    fn thermodynamic_limits() {
        assert_eq!(thermodynamic_efficiency(1.0, 0.5).unwrap(), 1.0);
        assert!((thermodynamic_efficiency(1.0, 0.372).unwrap() - 0.744).abs() < 1e-12);
        assert_eq!(thermodynamic_efficiency(1.0, 0.0).unwrap(), 0.0);
    }
}
