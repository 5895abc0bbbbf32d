//! One truncated harmonic mode per site, its couplings to the excitons, and
//! the local Markovian damping of each mode.
//!
//! Embedded index = `exciton_index * d_ph^N + phonon_index`, where the phonon
//! index reads the Fock numbers as base-`d_ph` digits with site 0 most
//! significant.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{ring_bonds, SectorBasis};
use crate::dynamics::state::StateVector;
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{
    build_bond_interaction, build_exciton_free, DisorderRealization, ModelParams, SpinfulParams,
};
use crate::sparse::{check_tag, BasisTag, OperatorBuilder, SparseOperator};

pub const DEFAULT_EMBED_CAP: usize = 1 << 24;

fn default_d_ph() -> usize {
    4
}

fn default_gamma_minus() -> f64 {
    0.1
}

/// Tier-I mode and tier-II bath parameters (energies and rates in eV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhononParams {
    pub omega0: f64,
    #[serde(default = "default_d_ph")]
    pub d_ph: usize,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub g_s: f64,
    #[serde(default)]
    pub g_t: f64,
    #[serde(default = "default_gamma_minus")]
    pub gamma_minus: f64,
    #[serde(default)]
    pub gamma_plus: f64,
}

impl PhononParams {
    /// Phonon part of the best dissipative point.
    pub fn optimised_dissipative() -> Self {
        PhononParams {
            omega0: 0.25,
            d_ph: default_d_ph(),
            x0: -0.035,
            g_s: 0.0,
            g_t: 0.0038,
            gamma_minus: 0.1,
            gamma_plus: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_ph < 2 {
            return Err(invalid(format!("d_ph must be >= 2, got {}", self.d_ph)));
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("x0", self.x0),
            ("g_s", self.g_s),
            ("g_t", self.g_t),
            ("gamma_minus", self.gamma_minus),
            ("gamma_plus", self.gamma_plus),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if self.gamma_minus < 0.0 || self.gamma_plus < 0.0 {
            return Err(invalid("dissipation rates must be >= 0"));
        }
        Ok(())
    }
}

/// Sector basis tensored with `N` truncated oscillators.
#[derive(Debug, Clone)]
pub struct EmbeddedBasis {
    sector: SectorBasis,
    d_ph: usize,
    ph_dim: usize,
}

pub fn build_embedded_basis(sector: &SectorBasis, d_ph: usize) -> Result<EmbeddedBasis> {
    build_embedded_basis_capped(sector, d_ph, DEFAULT_EMBED_CAP)
}

pub fn build_embedded_basis_capped(
    sector: &SectorBasis,
    d_ph: usize,
    cap: usize,
) -> Result<EmbeddedBasis> {
    if d_ph < 2 {
        return Err(invalid(format!("d_ph must be >= 2, got {d_ph}")));
    }
    let overflow = || Error::DimensionOverflow {
        dim: usize::MAX,
        cap,
    };
    let ph_dim = (0..sector.n_sites())
        .try_fold(1usize, |acc, _| acc.checked_mul(d_ph).ok_or_else(overflow))?;
    let dim = sector.dim().checked_mul(ph_dim).ok_or_else(overflow)?;
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    Ok(EmbeddedBasis {
        sector: sector.clone(),
        d_ph,
        ph_dim,
    })
}

impl EmbeddedBasis {
    pub fn sector(&self) -> &SectorBasis {
        &self.sector
    }

    pub fn d_ph(&self) -> usize {
        self.d_ph
    }

    pub fn n_sites(&self) -> usize {
        self.sector.n_sites()
    }

    pub fn phonon_dim(&self) -> usize {
        self.ph_dim
    }

    pub fn dim(&self) -> usize {
        self.sector.dim() * self.ph_dim
    }

    pub fn tag(&self) -> BasisTag {
        self.sector.tag().embedded(self.d_ph)
    }

    pub fn index(&self, exciton: usize, fock: &[usize]) -> Result<usize> {
        if fock.len() != self.n_sites()
            || fock.iter().any(|&n| n >= self.d_ph)
            || exciton >= self.sector.dim()
        {
            return Err(Error::ShapeMismatch(format!(
                "({exciton}, {fock:?}) is not a valid embedded index"
            )));
        }
        let ph = fock.iter().fold(0, |acc, &n| acc * self.d_ph + n);
        Ok(exciton * self.ph_dim + ph)
    }

    /// Inverse of [`EmbeddedBasis::index`].
    pub fn split(&self, index: usize) -> (usize, Vec<usize>) {
        let mut ph = index % self.ph_dim;
        let mut fock = vec![0; self.n_sites()];
        for site in (0..self.n_sites()).rev() {
            fock[site] = ph % self.d_ph;
            ph /= self.d_ph;
        }
        (index / self.ph_dim, fock)
    }

    fn stride(&self, site: usize) -> usize {
        self.d_ph.pow((self.n_sites() - 1 - site) as u32)
    }

    fn digit(&self, ph: usize, site: usize) -> usize {
        (ph / self.stride(site)) % self.d_ph
    }

    /// `A ⊗ 1_ph` for an exciton operator `A`.
    pub fn embed_exciton(&self, op: &SparseOperator) -> Result<SparseOperator> {
        self.tensor(op, None)
    }

    /// `A ⊗ f_site`, with `f` a `d_ph x d_ph` matrix acting on one mode.
    pub fn tensor(
        &self,
        op: &SparseOperator,
        factor: Option<(usize, &DMatrix<f64>)>,
    ) -> Result<SparseOperator> {
        check_tag(self.sector.tag(), op.tag())?;
        let p = self.ph_dim;
        let mut b = OperatorBuilder::new(self.dim(), self.tag());
        for (r, c, v) in op.iter() {
            for ph in 0..p {
                match factor {
                    None => b.push(r * p + ph, c * p + ph, v),
                    Some((site, f)) => {
                        let n = self.digit(ph, site);
                        let base = ph - n * self.stride(site);
                        for m in 0..self.d_ph {
                            let w = f[(m, n)];
                            if w != 0.0 {
                                b.push(r * p + base + m * self.stride(site), c * p + ph, v * w);
                            }
                        }
                    }
                }
            }
        }
        Ok(b.build())
    }

    /// `1_ex ⊗ a_site`
    pub fn annihilation(&self, site: usize) -> SparseOperator {
        let id = SparseOperator::identity(self.sector.dim(), self.sector.tag());
        self.tensor(&id, Some((site, &ladder(self.d_ph))))
            .expect("identity carries the sector tag")
    }

    pub fn creation(&self, site: usize) -> SparseOperator {
        let id = SparseOperator::identity(self.sector.dim(), self.sector.tag());
        self.tensor(&id, Some((site, &ladder(self.d_ph).transpose())))
            .expect("identity carries the sector tag")
    }

    /// Total phonon number `sum_i a_i† a_i`.
    pub fn phonon_number(&self) -> SparseOperator {
        let diag: Vec<f64> = (0..self.dim())
            .map(|k| {
                let ph = k % self.ph_dim;
                (0..self.n_sites()).map(|s| self.digit(ph, s) as f64).sum()
            })
            .collect();
        SparseOperator::from_diagonal(self.tag(), &diag)
    }
}

/// Truncated annihilation operator, `a|n> = sqrt(n)|n-1>`.
pub fn ladder(d_ph: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d_ph, d_ph);
    for n in 1..d_ph {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

fn displacement(d_ph: usize, offset: f64) -> DMatrix<f64> {
    let a = ladder(d_ph);
    &a + a.transpose() + DMatrix::identity(d_ph, d_ph) * offset
}

/// `H_ph = omega0 sum_i a_i† a_i`.
pub fn build_h_ph(embedded: &EmbeddedBasis, params: &PhononParams) -> SparseOperator {
    embedded.phonon_number().scaled(params.omega0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Singlet,
    Triplet,
}

/// `sum_i g n_X^(i) ⊗ (a_i† + a_i)` with `g = g_s` or `g_t`.
pub fn build_local_couplings(
    embedded: &EmbeddedBasis,
    params: &PhononParams,
    which: CouplingKind,
) -> Result<SparseOperator> {
    let g = match which {
        CouplingKind::Singlet => params.g_s,
        CouplingKind::Triplet => params.g_t,
    };
    let sector = embedded.sector();
    let x = displacement(embedded.d_ph(), 0.0);
    let mut terms = Vec::with_capacity(sector.n_sites());
    for site in 0..sector.n_sites() {
        let occ: Vec<f64> = sector
            .configs()
            .iter()
            .map(|c| {
                let hit = match which {
                    CouplingKind::Singlet => c[site].is_singlet(),
                    CouplingKind::Triplet => c[site].is_triplet(),
                };
                if hit {
                    g
                } else {
                    0.0
                }
            })
            .collect();
        let n = SparseOperator::from_diagonal(sector.tag(), &occ);
        terms.push(embedded.tensor(&n, Some((site, &x)))?);
    }
    SparseOperator::sum(&terms)
}

/// Fission coupling dressed by the displacement of the first site of each
/// bond: `sum_b gamma_b V_b ⊗ (a_i† + a_i + x0)`.
pub fn build_modulated_interaction(
    embedded: &EmbeddedBasis,
    params: &PhononParams,
    model: &ModelParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    let sector = embedded.sector();
    let x = displacement(embedded.d_ph(), params.x0);
    let mut terms = Vec::new();
    for (k, bond) in ring_bonds(sector.n_sites()).into_iter().enumerate() {
        let amp = model.gamma + dis.gamma.get(k).copied().unwrap_or(0.0);
        let v = build_bond_interaction(sector, bond, amp)?;
        terms.push(embedded.tensor(&v, Some((bond.0, &x)))?);
    }
    if terms.is_empty() {
        return Ok(SparseOperator::zeros(embedded.dim(), embedded.tag()));
    }
    SparseOperator::sum(&terms)
}

/// Open-system Hamiltonian `H_S + H_T + modulated interaction + H_ph + g_S + g_T couplings`.
pub fn build_open_hamiltonian(
    embedded: &EmbeddedBasis,
    model: &ModelParams,
    phonons: &PhononParams,
    spinful: Option<&SpinfulParams>,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    phonons.validate()?;
    let free = build_exciton_free(embedded.sector(), model, spinful, dis)?;
    let parts = [
        embedded.embed_exciton(&free)?,
        build_modulated_interaction(embedded, phonons, model, dis)?,
        build_h_ph(embedded, phonons),
        build_local_couplings(embedded, phonons, CouplingKind::Singlet)?,
        build_local_couplings(embedded, phonons, CouplingKind::Triplet)?,
    ];
    SparseOperator::sum(&parts)
}

#[derive(Debug, Clone)]
pub struct Jump {
    pub label: String,
    pub op: SparseOperator,
    pub rate: f64,
}

/// Jump operators with their rates; empty means closed dynamics.
#[derive(Debug, Clone, Default)]
pub struct LindbladSpec {
    pub jumps: Vec<Jump>,
}

impl LindbladSpec {
    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    /// `sum_k gamma_k L_k† L_k`
    pub fn decay_operator(&self, dim: usize, tag: BasisTag) -> Result<SparseOperator> {
        let mut total = SparseOperator::zeros(dim, tag);
        for j in &self.jumps {
            total = total.add(&j.op.adjoint().matmul(&j.op)?.scaled(j.rate))?;
        }
        Ok(total)
    }
}

/// `a_i` at `gamma_minus` and `a_i†` at `gamma_plus` on every site; zero
/// rates are left out.
pub fn build_dissipator(embedded: &EmbeddedBasis, params: &PhononParams) -> Result<LindbladSpec> {
    params.validate()?;
    let mut jumps = Vec::new();
    for site in 0..embedded.n_sites() {
        if params.gamma_minus > 0.0 {
            jumps.push(Jump {
                label: format!("a_{site}"),
                op: embedded.annihilation(site),
                rate: params.gamma_minus,
            });
        }
        if params.gamma_plus > 0.0 {
            jumps.push(Jump {
                label: format!("a+_{site}"),
                op: embedded.creation(site),
                rate: params.gamma_plus,
            });
        }
    }
    Ok(LindbladSpec { jumps })
}

/// `|psi> ⊗ |0...0>_ph`
pub fn franck_condon_state(embedded: &EmbeddedBasis, exciton: &StateVector) -> Result<StateVector> {
    check_tag(embedded.sector().tag(), exciton.tag())?;
    exciton.check_normalized(1e-10)?;
    let p = embedded.phonon_dim();
    let mut amps = vec![C64::new(0.0, 0.0); embedded.dim()];
    for (k, &a) in exciton.amps().iter().enumerate() {
        amps[k * p] = a;
    }
    Ok(StateVector::new(embedded.tag(), amps))
}
