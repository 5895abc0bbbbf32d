//! Single-realization pipeline: basis, Hamiltonian, initial state, propagation
//! and observables.

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, SectorBasis, SpinMode};
use crate::dynamics::{
    propagate_liouville_with, propagate_mcwf, propagate_unitary_with, DensityMatrix,
    PropagatorConfig, TimeGrid,
};
use crate::error::{invalid, Result};
use crate::hamiltonian::{
    build_exciton_hamiltonian, build_number_operators, sample_disorder, DisorderRealization,
    ModelParams, SpinfulParams,
};
use crate::observables::{select_initial_state, InitialStateSpec, ObservableSeries};
use crate::phonon::{
    build_dissipator, build_embedded_basis, build_open_hamiltonian, franck_condon_state,
    PhononParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OpenSolver {
    #[default]
    Liouville,
    Mcwf,
}

/// Everything needed to produce one observable series, except the disorder draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n_sites: usize,
    pub spin_mode: SpinMode,
    pub model: ModelParams,
    pub spinful: Option<SpinfulParams>,
    /// Present for the open (phonon-embedded) model.
    pub phonons: Option<PhononParams>,
    pub initial: InitialStateSpec,
    pub grid: TimeGrid,
    pub propagator: PropagatorConfig,
    pub open_solver: OpenSolver,
}

impl SimulationSpec {
    /// Closed spinless ring with default propagation settings.
    pub fn closed(
        n_sites: usize,
        model: ModelParams,
        initial: InitialStateSpec,
        grid: TimeGrid,
    ) -> Self {
        SimulationSpec {
            n_sites,
            spin_mode: SpinMode::Spinless,
            model,
            spinful: None,
            phonons: None,
            initial,
            grid,
            propagator: PropagatorConfig::default(),
            open_solver: OpenSolver::Liouville,
        }
    }

    /// Phonon-embedded spinless ring.
    pub fn open(
        n_sites: usize,
        model: ModelParams,
        phonons: PhononParams,
        initial: InitialStateSpec,
        grid: TimeGrid,
    ) -> Self {
        SimulationSpec {
            phonons: Some(phonons),
            ..Self::closed(n_sites, model, initial, grid)
        }
    }

    pub fn is_open(&self) -> bool {
        self.phonons.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.grid.validate()?;
        self.propagator.validate()?;
        if let Some(p) = &self.phonons {
            p.validate()?;
        }
        match (self.spin_mode, &self.spinful) {
            (SpinMode::Spinful, None) => {
                return Err(invalid("spinful mode requires spinful parameters"))
            }
            (SpinMode::Spinless, Some(_)) => {
                return Err(invalid("spinful parameters given in spinless mode"))
            }
            (SpinMode::Spinful, Some(sp)) => sp.validate()?,
            _ => {}
        }
        if self.n_sites < 2 {
            return Err(invalid(format!(
                "ring needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if self.initial.n0 < 1 || self.initial.n0 > self.n_sites {
            return Err(invalid(format!(
                "n0 = {} outside [1, {}]",
                self.initial.n0, self.n_sites
            )));
        }
        Ok(())
    }

    pub fn sector(&self) -> Result<SectorBasis> {
        enumerate_sector(self.n_sites, self.initial.c0(), self.spin_mode)
    }

    pub fn sample_disorder(&self, seed: u64) -> Result<DisorderRealization> {
        sample_disorder(&self.model, self.n_sites, seed)
    }
}

/// Runs one realization and returns `<N_S>`, `<N_T>`, `<C>` and `eta` on the grid.
pub fn simulate(spec: &SimulationSpec, dis: &DisorderRealization) -> Result<ObservableSeries> {
    spec.validate()?;
    let sector = spec.sector()?;
    let psi_ex = select_initial_state(&spec.initial, &sector, &spec.model, dis)?;
    let (n_s, n_t, c) = build_number_operators(&sector);
    let times = spec.grid.times();
    let mut cols = [
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
    ];

    let Some(phonons) = &spec.phonons else {
        let h = build_exciton_hamiltonian(&sector, &spec.model, spec.spinful.as_ref(), dis)?;
        propagate_unitary_with(&h, &psi_ex, &spec.grid, &spec.propagator, |_, _, psi| {
            for (col, op) in cols.iter_mut().zip([&n_s, &n_t, &c]) {
                col.push(psi.expectation(op)?);
            }
            Ok(())
        })?;
        let [a, b, q] = cols;
        return ObservableSeries::new(times, a, b, q);
    };

    let embedded = build_embedded_basis(&sector, phonons.d_ph)?;
    let h = build_open_hamiltonian(&embedded, &spec.model, phonons, spec.spinful.as_ref(), dis)?;
    let spec_l = build_dissipator(&embedded, phonons)?;
    let ops = [
        embedded.embed_exciton(&n_s)?,
        embedded.embed_exciton(&n_t)?,
        embedded.embed_exciton(&c)?,
    ];
    let psi0 = franck_condon_state(&embedded, &psi_ex)?;
    match spec.open_solver {
        OpenSolver::Liouville => {
            let rho0 = DensityMatrix::from_pure(&psi0);
            propagate_liouville_with(
                &h,
                &spec_l,
                &rho0,
                &spec.grid,
                &spec.propagator,
                |_, _, rho| {
                    for (col, op) in cols.iter_mut().zip(&ops) {
                        col.push(rho.expectation(op)?);
                    }
                    Ok(())
                },
            )?;
            let [a, b, q] = cols;
            ObservableSeries::new(times, a, b, q)
        }
        OpenSolver::Mcwf => {
            let refs: Vec<_> = ops.iter().collect();
            let ens = propagate_mcwf(&h, &spec_l, &psi0, &spec.grid, &spec.propagator, &refs)?;
            let [a, b, q]: [Vec<f64>; 3] = ens.mean.clone().try_into().expect("three observables");
            let mut series = ObservableSeries::new(ens.times.clone(), a, b, q)?;
            let n_s0 = series.n_s[0];
            let eta_err = ens.stderr[1].iter().map(|e| e / (2.0 * n_s0)).collect();
            series.stderr = Some([
                ens.stderr[0].clone(),
                ens.stderr[1].clone(),
                ens.stderr[2].clone(),
                eta_err,
            ]);
            Ok(series)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{resonant_reference, InitialMethod};

    #[test]
    fn resonant_ring_follows_rabi_formula() {
        let gamma = 0.05;
        let model = ModelParams::resonant(1.0, -0.1, gamma);
        let t_max = 4.0 * std::f64::consts::PI / (2.0 * gamma);
        let spec = SimulationSpec::closed(
            6,
            model,
            InitialStateSpec::default_for(1),
            TimeGrid::new(t_max, 401).unwrap(),
        );
        let s = simulate(&spec, &DisorderRealization::zero(6)).unwrap();
        let reference = resonant_reference(gamma, &s.times).unwrap();
        let err = s
            .n_t
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
        assert!(s.charge_drift() < 1e-10);
    }

    #[test]
    fn full_filling_blocks_fission() {
        let spec = SimulationSpec::closed(
            4,
            ModelParams::optimised_closed(),
            InitialStateSpec {
                n0: 4,
                method: InitialMethod::SectorGroundState,
            },
            TimeGrid::new(50.0, 51).unwrap(),
        );
        let dis = spec.sample_disorder(5).unwrap();
        let s = simulate(&spec, &dis).unwrap();
        assert!(s.eta.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn open_mode_conserves_charge() {
        let grid = TimeGrid::new(200.0, 21).unwrap();
        let mut phonons = PhononParams::optimised_dissipative();
        phonons.d_ph = 3;
        let spec = SimulationSpec::open(
            2,
            ModelParams::optimised_dissipative(),
            phonons,
            InitialStateSpec::default_for(1),
            grid,
        );
        let s = simulate(&spec, &DisorderRealization::zero(2)).unwrap();
        assert!(s.charge_drift() < 1e-10);
        assert!(s.eta.iter().all(|&e| (-1e-9..=1.0 + 1e-9).contains(&e)));
    }
}
