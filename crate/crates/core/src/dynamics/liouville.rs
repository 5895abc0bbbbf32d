use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::dynamics::krylov::KrylovStepper;
use crate::dynamics::state::DensityMatrix;
use crate::dynamics::unitary::check_hermitian;
use crate::dynamics::{Method, PropagatorConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::phonon::LindbladSpec;
use crate::sparse::{check_tag, SparseOperator};

/// Hilbert-space dimension up to which the dense superoperator is formed on request.
pub const DENSE_SUPEROPERATOR_LIMIT: usize = 32;

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

fn adjoint_into(src: &[C64], dst: &mut [C64], dim: usize) {
    for r in 0..dim {
        for c in 0..dim {
            dst[c * dim + r] = src[r * dim + c].conj();
        }
    }
}

/// `L(rho) = -i (H_eff rho - rho H_eff†) + sum_k gamma_k L_k rho L_k†`
/// with `H_eff = H - (i/2) sum_k gamma_k L_k† L_k`, acting on row-major matrices.
pub struct LiouvilleGenerator {
    dim: usize,
    h_eff: SparseOperator,
    jumps: Vec<(SparseOperator, f64)>,
    norm_estimate: f64,
}

impl LiouvilleGenerator {
    pub fn new(h: &SparseOperator, dissipator: &LindbladSpec) -> Result<Self> {
        check_hermitian(h)?;
        let mut norm_estimate = 2.0 * h.norm_inf();
        for j in &dissipator.jumps {
            check_tag(h.tag(), j.op.tag())?;
            norm_estimate += 2.0 * j.rate * j.op.norm_inf().powi(2);
        }
        let decay = dissipator.decay_operator(h.dim(), h.tag())?;
        let h_eff = h.sub(&decay.scaled(C64::new(0.0, 0.5)))?;
        Ok(LiouvilleGenerator {
            dim: h.dim(),
            h_eff,
            jumps: dissipator
                .jumps
                .iter()
                .map(|j| (j.op.clone(), j.rate))
                .collect(),
            norm_estimate,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_estimate(&self) -> f64 {
        self.norm_estimate
    }

    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        let mut scratch = vec![C64::new(0.0, 0.0); d * d];
        let mut tmp = vec![C64::new(0.0, 0.0); d * d];
        let mut adj = vec![C64::new(0.0, 0.0); d * d];
        self.h_eff.mul_dense(rho, d, out);
        adjoint_into(rho, &mut adj, d);
        self.h_eff.mul_dense(&adj, d, &mut scratch);
        adjoint_into(&scratch, &mut tmp, d);
        // out = -i (H_eff rho - rho H_eff†)
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o = MINUS_I * (*o - t);
        }
        for (l, rate) in &self.jumps {
            l.mul_dense(rho, d, &mut scratch);
            adjoint_into(&scratch, &mut adj, d);
            l.mul_dense(&adj, d, &mut scratch);
            adjoint_into(&scratch, &mut tmp, d);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += *rate * t;
            }
        }
    }

    /// Dense matrix of the generator on row-major vectorized operators.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim * self.dim;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            e[k] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            e[k] = C64::new(0.0, 0.0);
            for (r, v) in col.iter().enumerate() {
                m[(r, k)] = *v;
            }
        }
        m
    }
}

/// Evolves `rho0` under the GKSL generator and hands each grid state to `observer`.
pub fn propagate_liouville_with<F>(
    h: &SparseOperator,
    dissipator: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    config: &PropagatorConfig,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &DensityMatrix) -> Result<()>,
{
    check_tag(h.tag(), rho0.tag())?;
    if h.dim() > config.liouville_cap {
        return Err(Error::DimensionOverflow {
            dim: h.dim(),
            cap: config.liouville_cap,
        });
    }
    rho0.validate()?;
    grid.validate()?;
    config.validate()?;
    let gen = LiouvilleGenerator::new(h, dissipator)?;
    let times = grid.times();
    let tag = rho0.tag();
    let d = h.dim();

    if config.method == Method::DenseExpm && d <= DENSE_SUPEROPERATOR_LIMIT {
        let sup = gen.to_dense();
        let mut x = DVector::from_column_slice(rho0.data());
        let mut cached: Option<(f64, DMatrix<C64>)> = None;
        let mut t_prev = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let dt = t - t_prev;
            if dt > 0.0 {
                let reuse = matches!(&cached, Some((c, _)) if (c - dt).abs() <= 1e-13 * dt);
                if !reuse {
                    cached = Some((dt, (&sup * C64::new(dt, 0.0)).exp()));
                }
                x = &cached.as_ref().expect("propagator cached").1 * x;
                t_prev = t;
            }
            observer(
                k,
                t,
                &DensityMatrix::from_row_major(tag, d, x.as_slice().to_vec())?,
            )?;
        }
        return Ok(());
    }
    if config.method == Method::DenseExpm {
        log::warn!(
            "dense superoperator requested for dim {d} > {DENSE_SUPEROPERATOR_LIMIT}; using Krylov"
        );
    }

    let apply = |x: &[C64], y: &mut [C64]| gen.apply(x, y);
    let mut stepper = KrylovStepper::new(config.krylov(config.tolerance), gen.norm_estimate());
    let mut rho = rho0.clone();
    let mut t_prev = 0.0;
    for (k, &t) in times.iter().enumerate() {
        if t > t_prev {
            let next = stepper.phiv(&apply, rho.data(), t - t_prev)?;
            rho = DensityMatrix::from_row_major(tag, d, next)?;
            t_prev = t;
        }
        observer(k, t, &rho)?;
    }
    Ok(())
}

/// Density matrices on every grid point.
pub fn propagate_liouville(
    h: &SparseOperator,
    dissipator: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    config: &PropagatorConfig,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(grid.n_out);
    propagate_liouville_with(h, dissipator, rho0, grid, config, |_, _, rho| {
        out.push(rho.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SpinMode;
    use crate::dynamics::state::StateVector;
    use crate::dynamics::unitary::propagate_unitary;
    use crate::phonon::{ladder, Jump};
    use crate::sparse::BasisTag;

    fn mode_tag() -> BasisTag {
        BasisTag::sector(1, 0, SpinMode::Spinless).embedded(2)
    }

    fn damped_mode(rate: f64) -> (SparseOperator, LindbladSpec, DensityMatrix, SparseOperator) {
        let tag = mode_tag();
        let a = ladder(2).map(|x| C64::new(x, 0.0));
        let a = SparseOperator::from_dense(tag, &a);
        let h = SparseOperator::from_diagonal(tag, &[0.0, 0.25]);
        let spec = LindbladSpec {
            jumps: vec![Jump {
                label: "a".into(),
                op: a,
                rate,
            }],
        };
        let psi = StateVector::basis_state(tag, 2, 1);
        let n = SparseOperator::from_diagonal(tag, &[0.0, 1.0]);
        (h, spec, DensityMatrix::from_pure(&psi), n)
    }

    #[test]
    fn damped_mode_decays_exponentially() {
        let (h, spec, rho0, n) = damped_mode(0.1);
        let grid = TimeGrid::new(50.0, 26).unwrap();
        for method in [Method::Krylov, Method::DenseExpm] {
            let cfg = PropagatorConfig {
                method,
                ..Default::default()
            };
            let out = propagate_liouville(&h, &spec, &rho0, &grid, &cfg).unwrap();
            for (rho, t) in out.iter().zip(grid.times()) {
                let pop = rho.expectation(&n).unwrap();
                assert!((pop - (-0.1 * t).exp()).abs() < 1e-8, "{method:?} t={t}");
                assert!((rho.trace().re - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_limit_matches_pure_state_evolution() {
        let tag = BasisTag::sector(2, 2, SpinMode::Spinless);
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::new(0.9, 0.0);
        m[(0, 2)] = C64::new(0.1, 0.0);
        m[(2, 0)] = C64::new(0.1, 0.0);
        m[(1, 2)] = C64::new(0.0, 0.05);
        m[(2, 1)] = C64::new(0.0, -0.05);
        let h = SparseOperator::from_dense(tag, &m);
        let psi = StateVector::basis_state(tag, 3, 0);
        let grid = TimeGrid::new(30.0, 16).unwrap();
        let states = propagate_unitary(&h, &psi, &grid, &PropagatorConfig::default()).unwrap();
        let rhos = propagate_liouville(
            &h,
            &LindbladSpec::default(),
            &DensityMatrix::from_pure(&psi),
            &grid,
            &PropagatorConfig::default(),
        )
        .unwrap();
        for (s, r) in states.iter().zip(&rhos) {
            let exact = DensityMatrix::from_pure(s);
            let err = exact
                .data()
                .iter()
                .zip(r.data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "err {err}");
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let (h, spec, rho0, _) = damped_mode(0.1);
        let cfg = PropagatorConfig {
            liouville_cap: 1,
            ..Default::default()
        };
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert!(matches!(
            propagate_liouville(&h, &spec, &rho0, &grid, &cfg),
            Err(Error::DimensionOverflow { .. })
        ));
    }
}
