//! Brute-force operators on the unrestricted product space `d^N`.
//!
//! Every term is assembled as a tensor product of single-site matrices, with
//! no reference to sectors or configuration moves; used to cross-check the
//! sector builders.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis::{ExcitonConfig, SectorBasis, SpinMode};
use crate::dynamics::state::StateVector;
use crate::error::{invalid, Result};
use crate::hamiltonian::{
    local_spin_hamiltonian, spin_matrices, DisorderRealization, ModelParams, SpinfulParams,
};

/// Largest product-space dimension the oracle will build.
pub const FULL_SPACE_CAP: usize = 15_625;

type Local = Vec<(usize, usize, C64)>;

/// Sparse operator on the product space, kept in a sorted map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FullOperator {
    pub dim: usize,
    pub entries: BTreeMap<(usize, usize), C64>,
}

impl FullOperator {
    fn new(dim: usize) -> Self {
        FullOperator {
            dim,
            entries: BTreeMap::new(),
        }
    }

    fn add(&mut self, r: usize, c: usize, v: C64) {
        *self.entries.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v;
    }

    fn absorb(&mut self, other: FullOperator, scale: C64) {
        for ((r, c), v) in other.entries {
            self.add(r, c, scale * v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries
            .get(&(r, c))
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        for (&(r, c), v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `<a| A |b>`
    pub fn element(&self, a: &[C64], b: &[C64]) -> C64 {
        let ab = self.apply(b);
        a.iter().zip(&ab).map(|(x, y)| x.conj() * y).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(r, c), v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(r, c), v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `max |[A, D]|` for a diagonal `D` given by its entries.
    pub fn commutator_with_diagonal(&self, diag: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|(&(r, c), v)| (v * (diag[c] - diag[r])).norm())
            .fold(0.0, f64::max)
    }
}

/// Product space of `n_sites` sites with `d` local states each.
#[derive(Debug, Clone)]
pub struct FullSpace {
    n_sites: usize,
    mode: SpinMode,
    d: usize,
    dim: usize,
}

fn ket_bra(a: usize, b: usize) -> Local {
    vec![(a, b, C64::new(1.0, 0.0))]
}

const S0: usize = 0;
const S1: usize = 1;

impl FullSpace {
    pub fn new(n_sites: usize, mode: SpinMode) -> Result<Self> {
        let d = mode.local_dim();
        let dim = d.checked_pow(n_sites as u32).unwrap_or(usize::MAX);
        if n_sites < 2 || dim > FULL_SPACE_CAP {
            return Err(invalid(format!(
                "product space of {n_sites} sites too large or too small"
            )));
        }
        Ok(FullSpace {
            n_sites,
            mode,
            d,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        if self.n_sites == 2 {
            vec![(0, 1)]
        } else {
            (0..self.n_sites)
                .map(|i| (i, (i + 1) % self.n_sites))
                .collect()
        }
    }

    /// Local codes of the triplet states.
    fn triplets(&self) -> Vec<usize> {
        (2..self.d).collect()
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_sites];
        for site in (0..self.n_sites).rev() {
            out[site] = index % self.d;
            index /= self.d;
        }
        out
    }

    fn compose(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &x| acc * self.d + x)
    }

    pub fn index_of(&self, cfg: &ExcitonConfig) -> Result<usize> {
        let labels = self.mode.labels();
        let digits = cfg
            .labels()
            .iter()
            .map(|l| {
                labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| invalid(format!("label {l:?} not in {:?}", self.mode)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.compose(&digits))
    }

    /// `prod_k O_k` with `O_k` acting on `sites[k]` and the identity elsewhere.
    fn product(&self, factors: &[(usize, &Local)]) -> FullOperator {
        let mut op = FullOperator::new(self.dim);
        for col in 0..self.dim {
            let digits = self.digits(col);
            let mut partial = vec![(digits.clone(), C64::new(1.0, 0.0))];
            // factors act right to left
            for &(site, local) in factors.iter().rev() {
                let mut next = Vec::new();
                for (dig, amp) in &partial {
                    for &(r, c, v) in local {
                        if c == dig[site] {
                            let mut d2 = dig.clone();
                            d2[site] = r;
                            next.push((d2, amp * v));
                        }
                    }
                }
                partial = next;
            }
            for (dig, amp) in partial {
                if amp != C64::new(0.0, 0.0) {
                    op.add(self.compose(&dig), col, amp);
                }
            }
        }
        op
    }

    fn sum_into(&self, total: &mut FullOperator, factors: &[(usize, &Local)], scale: f64) {
        if scale != 0.0 {
            total.absorb(self.product(factors), C64::new(scale, 0.0));
        }
    }

    fn n_triplet_local(&self) -> Local {
        self.triplets()
            .into_iter()
            .map(|t| (t, t, C64::new(1.0, 0.0)))
            .collect()
    }

    pub fn h_s(&self, params: &ModelParams, dis: &DisorderRealization) -> FullOperator {
        let mut h = FullOperator::new(self.dim);
        let n_s = ket_bra(S1, S1);
        let up = ket_bra(S1, S0);
        let down = ket_bra(S0, S1);
        for i in 0..self.n_sites {
            self.sum_into(&mut h, &[(i, &n_s)], params.eps_s + dis.eps_s[i]);
        }
        for (k, (i, j)) in self.bonds().into_iter().enumerate() {
            let amp = params.j_s + dis.j_s[k];
            self.sum_into(&mut h, &[(i, &up), (j, &down)], amp);
            self.sum_into(&mut h, &[(j, &up), (i, &down)], amp);
        }
        h
    }

    pub fn h_t(
        &self,
        params: &ModelParams,
        spinful: Option<&SpinfulParams>,
        dis: &DisorderRealization,
    ) -> FullOperator {
        let mut h = FullOperator::new(self.dim);
        let n_t = self.n_triplet_local();
        for i in 0..self.n_sites {
            self.sum_into(&mut h, &[(i, &n_t)], params.eps_t + dis.eps_t[i]);
        }
        match (self.mode, spinful) {
            (SpinMode::Spinless, _) => {
                let up = ket_bra(2, S0);
                let down = ket_bra(S0, 2);
                for (k, (i, j)) in self.bonds().into_iter().enumerate() {
                    let amp = params.j_t + dis.j_t[k];
                    self.sum_into(&mut h, &[(i, &up), (j, &down)], amp);
                    self.sum_into(&mut h, &[(j, &up), (i, &down)], amp);
                    self.sum_into(&mut h, &[(i, &n_t), (j, &n_t)], params.chi + dis.chi[k]);
                }
            }
            (SpinMode::Spinful, Some(sp)) => {
                let loc = local_spin_hamiltonian(sp);
                let local: Local = (0..3)
                    .flat_map(|r| (0..3).map(move |c| (r, c)))
                    .map(|(r, c)| (r + 2, c + 2, loc[r][c]))
                    .collect();
                let unit = C64::new(1.0, 0.0);
                for i in 0..self.n_sites {
                    h.absorb(self.product(&[(i, &local)]), unit);
                }
                let s = spin_matrices();
                let spin_local: Vec<Local> = s
                    .iter()
                    .map(|m| {
                        (0..3)
                            .flat_map(|r| (0..3).map(move |c| (r, c)))
                            .map(|(r, c)| (r + 2, c + 2, m[r][c]))
                            .collect()
                    })
                    .collect();
                for (k, (i, j)) in self.bonds().into_iter().enumerate() {
                    for m in 0..3 {
                        for mp in 0..3 {
                            let mut amp = sp.j_t_mm[m][mp];
                            if m == mp {
                                amp += dis.j_t[k];
                            }
                            let up = ket_bra(m + 2, S0);
                            let down = ket_bra(S0, mp + 2);
                            // T†_{i m} T_{j m'} + T†_{j m'} T_{i m}
                            self.sum_into(&mut h, &[(i, &up), (j, &down)], amp);
                            let up2 = ket_bra(mp + 2, S0);
                            let down2 = ket_bra(S0, m + 2);
                            self.sum_into(&mut h, &[(j, &up2), (i, &down2)], amp);
                        }
                    }
                    for sa in &spin_local {
                        self.sum_into(&mut h, &[(i, sa), (j, sa)], sp.chi_iso);
                    }
                }
            }
            (SpinMode::Spinful, None) => {}
        }
        h
    }

    /// Pair creator `P†_{ij}` as a list of `(code_i, code_j, weight)`.
    fn pair(&self) -> Vec<(usize, usize, f64)> {
        match self.mode {
            SpinMode::Spinless => vec![(2, 2, 1.0)],
            SpinMode::Spinful => {
                let w = 1.0 / 3f64.sqrt();
                // codes: T- = 2, T0 = 3, T+ = 4
                vec![(3, 3, w), (2, 4, -w), (4, 2, -w)]
            }
        }
    }

    pub fn h_int(&self, params: &ModelParams, dis: &DisorderRealization) -> FullOperator {
        let mut h = FullOperator::new(self.dim);
        let annihilate = ket_bra(S0, S1);
        let create = ket_bra(S1, S0);
        for (k, (i, j)) in self.bonds().into_iter().enumerate() {
            let g = params.gamma + dis.gamma[k];
            for (a, b, w) in self.pair() {
                let ta = ket_bra(a, S0);
                let tb = ket_bra(b, S0);
                let ta_d = ket_bra(S0, a);
                let tb_d = ket_bra(S0, b);
                // P† S_i and P† S_j
                self.sum_into(&mut h, &[(i, &ta), (j, &tb), (i, &annihilate)], g * w);
                self.sum_into(&mut h, &[(i, &ta), (j, &tb), (j, &annihilate)], g * w);
                // S_i† P and S_j† P
                self.sum_into(&mut h, &[(i, &create), (i, &ta_d), (j, &tb_d)], g * w);
                self.sum_into(&mut h, &[(j, &create), (i, &ta_d), (j, &tb_d)], g * w);
            }
        }
        h
    }

    pub fn hamiltonian(
        &self,
        params: &ModelParams,
        spinful: Option<&SpinfulParams>,
        dis: &DisorderRealization,
    ) -> FullOperator {
        let mut h = self.h_s(params, dis);
        let unit = C64::new(1.0, 0.0);
        h.absorb(self.h_t(params, spinful, dis), unit);
        h.absorb(self.h_int(params, dis), unit);
        h
    }

    /// Diagonal of `C = 2 N_S + N_T`.
    pub fn charge(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                self.digits(k)
                    .iter()
                    .map(|&x| match x {
                        S0 => 0.0,
                        S1 => 2.0,
                        _ => 1.0,
                    })
                    .sum()
            })
            .collect()
    }

    /// Product-space positions of the sector configurations.
    pub fn sector_indices(&self, basis: &SectorBasis) -> Result<Vec<usize>> {
        basis.configs().iter().map(|c| self.index_of(c)).collect()
    }

    pub fn project(&self, basis: &SectorBasis, op: &FullOperator) -> Result<DMatrix<C64>> {
        let idx = self.sector_indices(basis)?;
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
            op.get(idx[r], idx[c])
        }))
    }

    pub fn lift(&self, basis: &SectorBasis, psi: &StateVector) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (k, i) in self.sector_indices(basis)?.into_iter().enumerate() {
            out[i] = psi.amps()[k];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_sector;

    #[test]
    fn matrix_elements_from_tensor_products() {
        let fs = FullSpace::new(3, SpinMode::Spinless).unwrap();
        let p = ModelParams {
            gamma: 0.2,
            j_t: 0.3,
            ..Default::default()
        };
        let dis = DisorderRealization::zero(3);
        let h = fs.hamiltonian(&p, None, &dis);
        let idx = |s: &str| fs.index_of(&s.parse().unwrap()).unwrap();
        assert_eq!(h.get(idx("[T1,T1,S0]"), idx("[S1,S0,S0]")).re, 0.2);
        assert_eq!(h.get(idx("[T1,S0,T1]"), idx("[S1,S0,S0]")).re, 0.2);
        assert_eq!(h.get(idx("[S0,T1,S0]"), idx("[T1,S0,S0]")).re, 0.3);
        assert!(h.hermiticity_error() < 1e-15);
        assert!(h.commutator_with_diagonal(&fs.charge()) < 1e-15);
        let sector = enumerate_sector(3, 2, SpinMode::Spinless).unwrap();
        assert_eq!(fs.sector_indices(&sector).unwrap().len(), 6);
    }
}
