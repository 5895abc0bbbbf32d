use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::dynamics::krylov::KrylovStepper;
use crate::dynamics::state::StateVector;
use crate::dynamics::{Method, PropagatorConfig, TimeGrid, DENSE_DIM_LIMIT};
use crate::error::{Error, Result};
use crate::sparse::{check_tag, SparseOperator};

pub(crate) fn check_hermitian(h: &SparseOperator) -> Result<()> {
    let err = h.hermiticity_error();
    if err > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NonHermitian(err));
    }
    Ok(())
}

pub(crate) fn use_dense(method: Method, dim: usize) -> bool {
    match method {
        Method::Auto => dim <= DENSE_DIM_LIMIT,
        Method::Krylov => false,
        Method::DenseExpm => true,
    }
}

/// Spectral form `H = U diag(E) U†` of a Hermitian operator.
pub struct Eigensystem {
    pub energies: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn new(h: &DMatrix<C64>) -> Self {
        let eig = h.clone().symmetric_eigen();
        Eigensystem {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    /// `U exp(-i E t) U† psi` given `c = U† psi`.
    pub fn evolve(&self, coeffs: &DVector<C64>, t: f64) -> DVector<C64> {
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(self.energies.iter())
                .map(|(c, &e)| c * C64::new(0.0, -e * t).exp()),
        );
        &self.vectors * phased
    }
}

/// Evolves `psi0` under `exp(-iHt)` and hands each grid state to `observer`.
pub fn propagate_unitary_with<F>(
    h: &SparseOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
    config: &PropagatorConfig,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &StateVector) -> Result<()>,
{
    check_tag(h.tag(), psi0.tag())?;
    check_hermitian(h)?;
    psi0.check_normalized(1e-10)?;
    grid.validate()?;
    config.validate()?;
    let times = grid.times();

    if use_dense(config.method, h.dim()) {
        let eig = Eigensystem::new(&h.to_dense());
        let c = eig.vectors.adjoint() * DVector::from_column_slice(psi0.amps());
        for (k, &t) in times.iter().enumerate() {
            // t = 0 is psi0 itself, not V V^dagger psi0
            if t == 0.0 {
                observer(k, t, psi0)?;
                continue;
            }
            let psi = StateVector::new(psi0.tag(), eig.evolve(&c, t).as_slice().to_vec());
            observer(k, t, &psi)?;
        }
        return Ok(());
    }

    let apply = |x: &[C64], y: &mut [C64]| {
        h.apply(x, y);
        y.iter_mut().for_each(|z| *z *= C64::new(0.0, -1.0));
    };
    let mut stepper = KrylovStepper::new(config.krylov(config.tolerance), h.norm_inf());
    let mut psi = psi0.clone();
    let mut t_prev = 0.0;
    for (k, &t) in times.iter().enumerate() {
        if t > t_prev {
            let next = stepper.expv(&apply, psi.amps(), t - t_prev)?;
            psi = StateVector::new(psi0.tag(), next);
            t_prev = t;
        }
        observer(k, t, &psi)?;
    }
    Ok(())
}

/// States `exp(-iH t_k) psi0` on every grid point.
pub fn propagate_unitary(
    h: &SparseOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
    config: &PropagatorConfig,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(grid.n_out);
    propagate_unitary_with(h, psi0, grid, config, |_, _, psi| {
        out.push(psi.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_sector, SpinMode};
    use crate::hamiltonian::{build_exciton_hamiltonian, DisorderRealization, ModelParams};

    fn chain_hamiltonian(n: usize, c0: usize) -> (SparseOperator, StateVector) {
        let basis = enumerate_sector(n, c0, SpinMode::Spinless).unwrap();
        let p = ModelParams {
            eps_t: 0.45,
            j_s: -0.08,
            j_t: 0.13,
            chi: 0.05,
            gamma: 0.1,
            ..Default::default()
        };
        let h = build_exciton_hamiltonian(&basis, &p, None, &DisorderRealization::zero(n)).unwrap();
        let psi = StateVector::basis_state(basis.tag(), basis.dim(), 0);
        (h, psi)
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let (h, psi) = chain_hamiltonian(3, 2);
        let zero = SparseOperator::zeros(h.dim(), h.tag());
        for method in [Method::DenseExpm, Method::Krylov] {
            let cfg = PropagatorConfig {
                method,
                ..Default::default()
            };
            let out =
                propagate_unitary(&zero, &psi, &TimeGrid::new(5.0, 6).unwrap(), &cfg).unwrap();
            assert!(out
                .iter()
                .all(|s| s == &psi || s.fidelity(&psi).unwrap() > 1.0 - 1e-14));
        }
    }

    #[test]
    fn krylov_and_dense_agree() {
        let (h, psi) = chain_hamiltonian(6, 4);
        let grid = TimeGrid::new(40.0, 21).unwrap();
        let dense = propagate_unitary(
            &h,
            &psi,
            &grid,
            &PropagatorConfig {
                method: Method::DenseExpm,
                ..Default::default()
            },
        )
        .unwrap();
        let kry = propagate_unitary(
            &h,
            &psi,
            &grid,
            &PropagatorConfig {
                method: Method::Krylov,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in dense.iter().zip(&kry) {
            let err = a
                .amps()
                .iter()
                .zip(b.amps())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "err {err}");
            assert!((b.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_hermitian_and_unnormalized_input() {
        let (h, psi) = chain_hamiltonian(3, 2);
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let skew = h.scaled(C64::new(0.0, 1.0));
        assert!(matches!(
            propagate_unitary(&skew, &psi, &grid, &PropagatorConfig::default()),
            Err(Error::NonHermitian(_))
        ));
        let mut bad = psi.clone();
        bad.amps_mut()[0] = C64::new(2.0, 0.0);
        assert!(matches!(
            propagate_unitary(&h, &bad, &grid, &PropagatorConfig::default()),
            Err(Error::Norm(_))
        ));
    }
}
