use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::{check_tag, BasisTag, SparseOperator};

/// Pure state over a tagged basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    tag: BasisTag,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(tag: BasisTag, amps: Vec<C64>) -> Self {
        StateVector { tag, amps }
    }

    pub fn basis_state(tag: BasisTag, dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { tag, amps }
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// Scales to unit norm; fails on the zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Norm(n));
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            Err(Error::Norm(n))
        } else {
            Ok(())
        }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_tag(self.tag, other.tag)?;
        Ok(dot(&self.amps, &other.amps))
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Real part of `<psi|A|psi>` for unit-norm `psi`.
    pub fn expectation(&self, op: &SparseOperator) -> Result<f64> {
        check_tag(op.tag(), self.tag)?;
        Ok(op.expectation(&self.amps).re)
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense density matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    tag: BasisTag,
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_row_major(tag: BasisTag, dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {dim}x{dim} density matrix",
                data.len()
            )));
        }
        Ok(DensityMatrix { tag, dim, data })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let dim = psi.dim();
        let a = psi.amps();
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(a[r] * a[c].conj());
            }
        }
        DensityMatrix {
            tag: psi.tag(),
            dim,
            data,
        }
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// Real part of `Tr(A rho)`.
    pub fn expectation(&self, op: &SparseOperator) -> Result<f64> {
        check_tag(op.tag(), self.tag)?;
        let mut acc = C64::new(0.0, 0.0);
        for (r, c, v) in op.iter() {
            acc += v * self.get(c, r);
        }
        Ok(acc.re)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dense();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-8) and positivity (-1e-7).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian ({herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-7 {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}
