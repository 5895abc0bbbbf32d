//! Exciton Hamiltonians on a sector basis.
//!
//! All builders walk the sector configurations and emit second-quantized
//! amplitudes directly; hard-core operators on distinct sites commute, so no
//! sign bookkeeping is needed.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{count_particles, ring_bonds, SectorBasis, SiteLabel, SpinMode};
use crate::error::{invalid, Error, Result};
use crate::sparse::{OperatorBuilder, SparseOperator};

fn one() -> f64 {
    1.0
}

/// Exciton parameters in eV; `sigma_*` are Gaussian disorder widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "one")]
    pub eps_s: f64,
    pub eps_t: f64,
    pub j_s: f64,
    #[serde(default)]
    pub j_t: f64,
    #[serde(default)]
    pub chi: f64,
    pub gamma: f64,
    #[serde(default)]
    pub sigma_eps_s: f64,
    #[serde(default)]
    pub sigma_eps_t: f64,
    #[serde(default)]
    pub sigma_j_s: f64,
    #[serde(default)]
    pub sigma_j_t: f64,
    #[serde(default)]
    pub sigma_chi: f64,
    #[serde(default)]
    pub sigma_gamma: f64,
    /// Local optical dipole moment.
    #[serde(default = "one")]
    pub mu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            eps_s: 1.0,
            eps_t: 0.5,
            j_s: 0.0,
            j_t: 0.0,
            chi: 0.0,
            gamma: 0.0,
            sigma_eps_s: 0.0,
            sigma_eps_t: 0.0,
            sigma_j_s: 0.0,
            sigma_j_t: 0.0,
            sigma_chi: 0.0,
            sigma_gamma: 0.0,
            mu: 1.0,
        }
    }
}

impl ModelParams {
    /// Triplet pair tuned onto the bright singlet: `eps_t = eps_s/2 - |j_s|`.
    pub fn resonant(eps_s: f64, j_s: f64, gamma: f64) -> Self {
        ModelParams {
            eps_s,
            eps_t: eps_s / 2.0 - j_s.abs(),
            j_s,
            gamma,
            ..Default::default()
        }
    }

    /// Best closed-system point of the reference optimization.
    pub fn optimised_closed() -> Self {
        ModelParams {
            eps_s: 1.0,
            eps_t: 0.515,
            j_s: -0.001,
            j_t: 0.3,
            chi: 0.068,
            gamma: 0.437,
            sigma_j_t: 0.114,
            sigma_chi: 0.005,
            ..Default::default()
        }
    }

    /// Exciton part of the best dissipative point.
    pub fn optimised_dissipative() -> Self {
        ModelParams {
            eps_s: 1.0,
            eps_t: 0.372,
            j_s: -0.001,
            j_t: 0.0,
            chi: 0.0,
            gamma: 0.0103,
            ..Default::default()
        }
    }

    pub fn sigmas(&self) -> [(&'static str, f64); 6] {
        [
            ("sigma_eps_s", self.sigma_eps_s),
            ("sigma_eps_t", self.sigma_eps_t),
            ("sigma_j_s", self.sigma_j_s),
            ("sigma_j_t", self.sigma_j_t),
            ("sigma_chi", self.sigma_chi),
            ("sigma_gamma", self.sigma_gamma),
        ]
    }

    pub fn has_disorder(&self) -> bool {
        self.sigmas().iter().any(|&(_, s)| s != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            ("eps_s", self.eps_s),
            ("eps_t", self.eps_t),
            ("j_s", self.j_s),
            ("j_t", self.j_t),
            ("chi", self.chi),
            ("gamma", self.gamma),
            ("mu", self.mu),
        ];
        for (name, v) in values.iter().chain(self.sigmas().iter()) {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, s) in self.sigmas() {
            if s < 0.0 {
                return Err(invalid(format!("{name} must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Spin-resolved triplet couplings, all in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinfulParams {
    /// Magnetic field, identical on every site.
    #[serde(default)]
    pub b: [f64; 3],
    /// Zero-field-splitting tensor in the (x, y, z) frame.
    #[serde(default)]
    pub d: [[f64; 3]; 3],
    /// Hopping `J_{m m'}` with rows and columns ordered m = -1, 0, +1.
    pub j_t_mm: [[f64; 3]; 3],
    #[serde(default)]
    pub chi_iso: f64,
}

impl SpinfulParams {
    /// No field, no ZFS, m-diagonal hopping `j_t`, no exchange.
    pub fn isotropic(j_t: f64) -> Self {
        let mut j = [[0.0; 3]; 3];
        for (k, row) in j.iter_mut().enumerate() {
            row[k] = j_t;
        }
        SpinfulParams {
            b: [0.0; 3],
            d: [[0.0; 3]; 3],
            j_t_mm: j,
            chi_iso: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            for b in 0..3 {
                let dj = (self.j_t_mm[a][b] - self.j_t_mm[b][a]).abs();
                if dj > 1e-12 {
                    return Err(Error::NonHermitian(dj));
                }
                let dd = (self.d[a][b] - self.d[b][a]).abs();
                if dd > 1e-12 {
                    return Err(invalid(format!(
                        "ZFS tensor is not symmetric (|D - D^T| = {dd:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One sample of the parameter disorder; site arrays have length N and bond
/// arrays follow [`ring_bonds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub eps_s: Vec<f64>,
    pub eps_t: Vec<f64>,
    pub j_s: Vec<f64>,
    pub j_t: Vec<f64>,
    pub chi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl DisorderRealization {
    pub fn zero(n_sites: usize) -> Self {
        let nb = ring_bonds(n_sites).len();
        DisorderRealization {
            seed: 0,
            eps_s: vec![0.0; n_sites],
            eps_t: vec![0.0; n_sites],
            j_s: vec![0.0; nb],
            j_t: vec![0.0; nb],
            chi: vec![0.0; nb],
            gamma: vec![0.0; nb],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.eps_s.len()
    }
}

/// Draws every offset from `N(0, sigma)`.
///
/// The standard-normal stream is consumed in a fixed order regardless of which
/// sigmas vanish, so the same seed yields correlated samples across parameter
/// points.
pub fn sample_disorder(
    params: &ModelParams,
    n_sites: usize,
    seed: u64,
) -> Result<DisorderRealization> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = ring_bonds(n_sites).len();
    let mut draw = |len: usize, sigma: f64| -> Vec<f64> {
        (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if sigma == 0.0 {
                    0.0
                } else {
                    sigma * z
                }
            })
            .collect()
    };
    Ok(DisorderRealization {
        seed,
        eps_s: draw(n_sites, params.sigma_eps_s),
        eps_t: draw(n_sites, params.sigma_eps_t),
        j_s: draw(nb, params.sigma_j_s),
        j_t: draw(nb, params.sigma_j_t),
        chi: draw(nb, params.sigma_chi),
        gamma: draw(nb, params.sigma_gamma),
    })
}

fn check_realization(basis: &SectorBasis, dis: &DisorderRealization) -> Result<()> {
    let nb = ring_bonds(basis.n_sites()).len();
    let ok = dis.eps_s.len() == basis.n_sites()
        && dis.eps_t.len() == basis.n_sites()
        && [&dis.j_s, &dis.j_t, &dis.chi, &dis.gamma]
            .iter()
            .all(|v| v.len() == nb);
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "disorder realization does not fit a ring of {} sites",
            basis.n_sites()
        )))
    }
}

fn require_mode(basis: &SectorBasis, mode: SpinMode) -> Result<()> {
    if basis.spin_mode() == mode {
        Ok(())
    } else {
        let mut expected = basis.tag();
        expected.spin_mode = mode;
        Err(Error::BasisMismatch {
            expected,
            found: basis.tag(),
        })
    }
}

/// `H_S`: local singlet energies plus nearest-neighbour singlet hopping.
pub fn build_h_s(
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    check_realization(basis, dis)?;
    let bonds = ring_bonds(basis.n_sites());
    let mut b = OperatorBuilder::new(basis.dim(), basis.tag());
    for (col, cfg) in basis.configs().iter().enumerate() {
        let diag: f64 = (0..cfg.n_sites())
            .filter(|&i| cfg[i].is_singlet())
            .map(|i| params.eps_s + dis.eps_s[i])
            .sum();
        b.push(col, col, diag);
        for (k, &(i, j)) in bonds.iter().enumerate() {
            let amp = params.j_s + dis.j_s[k];
            for (from, to) in [(i, j), (j, i)] {
                if cfg[from] == SiteLabel::S1 && cfg[to] == SiteLabel::S0 {
                    let next = cfg.with_pair((from, SiteLabel::S0), (to, SiteLabel::S1));
                    b.push(basis.config_index(&next)?, col, amp);
                }
            }
        }
    }
    Ok(b.build())
}

/// `H_T` for spinless triplets: energies, hopping and `chi n_T n_T` on bonds.
pub fn build_h_t(
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    require_mode(basis, SpinMode::Spinless)?;
    check_realization(basis, dis)?;
    let bonds = ring_bonds(basis.n_sites());
    let mut b = OperatorBuilder::new(basis.dim(), basis.tag());
    for (col, cfg) in basis.configs().iter().enumerate() {
        let mut diag: f64 = (0..cfg.n_sites())
            .filter(|&i| cfg[i].is_triplet())
            .map(|i| params.eps_t + dis.eps_t[i])
            .sum();
        for (k, &(i, j)) in bonds.iter().enumerate() {
            if cfg[i].is_triplet() && cfg[j].is_triplet() {
                diag += params.chi + dis.chi[k];
            }
            let amp = params.j_t + dis.j_t[k];
            for (from, to) in [(i, j), (j, i)] {
                if cfg[from] == SiteLabel::T1 && cfg[to] == SiteLabel::S0 {
                    let next = cfg.with_pair((from, SiteLabel::S0), (to, SiteLabel::T1));
                    b.push(basis.config_index(&next)?, col, amp);
                }
            }
        }
        b.push(col, col, diag);
    }
    Ok(b.build())
}

/// Singlet-to-pair amplitudes created on bond `(i, j)`; the first label sits on `i`.
fn pair_channels(mode: SpinMode) -> Vec<(SiteLabel, SiteLabel, f64)> {
    match mode {
        SpinMode::Spinless => vec![(SiteLabel::T1, SiteLabel::T1, 1.0)],
        SpinMode::Spinful => {
            let w = 1.0 / 3f64.sqrt();
            vec![
                (SiteLabel::TZero, SiteLabel::TZero, w),
                (SiteLabel::TMinus, SiteLabel::TPlus, -w),
                (SiteLabel::TPlus, SiteLabel::TMinus, -w),
            ]
        }
    }
}

/// Fission/fusion term of a single bond with coupling `amp`:
/// `amp (P†_{ij} S_i + P†_{ij} S_j + h.c.)` with `P†` the pair creator of the mode.
pub fn build_bond_interaction(
    basis: &SectorBasis,
    bond: (usize, usize),
    amp: f64,
) -> Result<SparseOperator> {
    let (i, j) = bond;
    let channels = pair_channels(basis.spin_mode());
    let mut b = OperatorBuilder::new(basis.dim(), basis.tag());
    if amp == 0.0 {
        return Ok(b.build());
    }
    for (col, cfg) in basis.configs().iter().enumerate() {
        let singlet_on_bond = matches!(
            (cfg[i], cfg[j]),
            (SiteLabel::S1, SiteLabel::S0) | (SiteLabel::S0, SiteLabel::S1)
        );
        if !singlet_on_bond {
            continue;
        }
        for &(a, c, w) in &channels {
            let row = basis.config_index(&cfg.with_pair((i, a), (j, c)))?;
            b.push(row, col, amp * w);
            b.push(col, row, amp * w);
        }
    }
    Ok(b.build())
}

/// `H_int` summed over all ring bonds, for either spin mode.
pub fn build_h_int(
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    check_realization(basis, dis)?;
    let terms = ring_bonds(basis.n_sites())
        .into_iter()
        .enumerate()
        .map(|(k, bond)| build_bond_interaction(basis, bond, params.gamma + dis.gamma[k]))
        .collect::<Result<Vec<_>>>()?;
    SparseOperator::sum(&terms)
}

/// Spin-1 matrices in the m = -1, 0, +1 basis.
pub fn spin_matrices() -> [[[C64; 3]; 3]; 3] {
    let z = C64::new(0.0, 0.0);
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    let sx = [[z, r, z], [r, z, r], [z, r, z]];
    let sy = [[z, i, z], [-i, z, i], [z, -i, z]];
    let sz = [
        [C64::new(-1.0, 0.0), z, z],
        [z, z, z],
        [z, z, C64::new(1.0, 0.0)],
    ];
    [sx, sy, sz]
}

fn mat_mul3(a: &[[C64; 3]; 3], b: &[[C64; 3]; 3]) -> [[C64; 3]; 3] {
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Single-triplet operator `B.S + S^T D S`, indexed by (m' + 1, m + 1).
pub fn local_spin_hamiltonian(spinful: &SpinfulParams) -> [[C64; 3]; 3] {
    let s = spin_matrices();
    let mut h = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] += spinful.b[a] * s[a][r][c];
            }
        }
        for bb in 0..3 {
            if spinful.d[a][bb] == 0.0 {
                continue;
            }
            let prod = mat_mul3(&s[a], &s[bb]);
            for r in 0..3 {
                for c in 0..3 {
                    h[r][c] += spinful.d[a][bb] * prod[r][c];
                }
            }
        }
    }
    h
}

fn m_index(label: SiteLabel) -> Option<usize> {
    label.m().map(|m| (m + 1) as usize)
}

fn label_of(k: usize) -> SiteLabel {
    SiteLabel::triplet_with_m(k as i8 - 1).expect("m index in 0..3")
}

/// Spin-resolved `H_T`: triplet energies, Zeeman and ZFS terms, m-resolved
/// hopping and isotropic exchange `chi_iso S_i . S_j` on bonds.
///
/// Hopping disorder is added to the m-diagonal channels; spinless `chi` has no
/// spinful counterpart and must vanish.
pub fn build_spinful_h_t(
    basis: &SectorBasis,
    params: &ModelParams,
    spinful: &SpinfulParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    require_mode(basis, SpinMode::Spinful)?;
    check_realization(basis, dis)?;
    spinful.validate()?;
    if params.chi != 0.0 || params.sigma_chi != 0.0 || dis.chi.iter().any(|&c| c != 0.0) {
        return Err(Error::Unsupported(
            "density-density chi is a spinless coupling; use chi_iso in spinful mode".into(),
        ));
    }
    let local = local_spin_hamiltonian(spinful);
    let s = spin_matrices();
    let bonds = ring_bonds(basis.n_sites());
    let mut b = OperatorBuilder::new(basis.dim(), basis.tag());

    for (col, cfg) in basis.configs().iter().enumerate() {
        for i in 0..cfg.n_sites() {
            let Some(m) = m_index(cfg[i]) else { continue };
            b.push(col, col, params.eps_t + dis.eps_t[i]);
            for (mp, row_h) in local.iter().enumerate() {
                let amp = row_h[m];
                if amp != C64::new(0.0, 0.0) {
                    let row = basis.config_index(&cfg.with(i, label_of(mp)))?;
                    b.push(row, col, amp);
                }
            }
        }
        for (k, &(i, j)) in bonds.iter().enumerate() {
            for (from, to) in [(i, j), (j, i)] {
                let Some(m) = m_index(cfg[from]) else {
                    continue;
                };
                if cfg[to] != SiteLabel::S0 {
                    continue;
                }
                // sum_{m m'} J_{m m'} T†_{i,m} T_{j,m'} + h.c. with J real symmetric
                for mp in 0..3 {
                    let mut amp = spinful.j_t_mm[mp][m];
                    if mp == m {
                        amp += dis.j_t[k];
                    }
                    if amp != 0.0 {
                        let next = cfg.with_pair((from, SiteLabel::S0), (to, label_of(mp)));
                        b.push(basis.config_index(&next)?, col, amp);
                    }
                }
            }
            if spinful.chi_iso != 0.0 {
                let (Some(mi), Some(mj)) = (m_index(cfg[i]), m_index(cfg[j])) else {
                    continue;
                };
                for pi in 0..3 {
                    for pj in 0..3 {
                        let amp: C64 = (0..3).map(|a| s[a][pi][mi] * s[a][pj][mj]).sum();
                        if amp.norm() > 0.0 {
                            let next = cfg.with_pair((i, label_of(pi)), (j, label_of(pj)));
                            b.push(basis.config_index(&next)?, col, spinful.chi_iso * amp);
                        }
                    }
                }
            }
        }
    }
    Ok(b.build())
}

/// `H_int` for spinful triplets: singlets couple only to the pair
/// `(T0 T0 - T- T+ - T+ T-)/sqrt(3)`.
pub fn build_spinful_h_int(
    basis: &SectorBasis,
    params: &ModelParams,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    require_mode(basis, SpinMode::Spinful)?;
    build_h_int(basis, params, dis)
}

/// Diagonal counting operators `(N_S, N_T, C)` with `C = 2 N_S + N_T`.
pub fn build_number_operators(
    basis: &SectorBasis,
) -> (SparseOperator, SparseOperator, SparseOperator) {
    let counts: Vec<(usize, usize)> = basis.configs().iter().map(count_particles).collect();
    let n_s: Vec<f64> = counts.iter().map(|&(s, _)| s as f64).collect();
    let n_t: Vec<f64> = counts.iter().map(|&(_, t)| t as f64).collect();
    let c: Vec<f64> = counts.iter().map(|&(s, t)| (2 * s + t) as f64).collect();
    let tag = basis.tag();
    (
        SparseOperator::from_diagonal(tag, &n_s),
        SparseOperator::from_diagonal(tag, &n_t),
        SparseOperator::from_diagonal(tag, &c),
    )
}

/// `H_S + H_T` without the fission coupling.
pub fn build_exciton_free(
    basis: &SectorBasis,
    params: &ModelParams,
    spinful: Option<&SpinfulParams>,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    let h_s = build_h_s(basis, params, dis)?;
    let h_t = match (basis.spin_mode(), spinful) {
        (SpinMode::Spinless, _) => build_h_t(basis, params, dis)?,
        (SpinMode::Spinful, Some(sp)) => build_spinful_h_t(basis, params, sp, dis)?,
        (SpinMode::Spinful, None) => {
            return Err(invalid("spinful basis requires spinful parameters"));
        }
    };
    h_s.add(&h_t)
}

/// Full exciton Hamiltonian `H_S + H_T + H_int`.
pub fn build_exciton_hamiltonian(
    basis: &SectorBasis,
    params: &ModelParams,
    spinful: Option<&SpinfulParams>,
    dis: &DisorderRealization,
) -> Result<SparseOperator> {
    build_exciton_free(basis, params, spinful, dis)?.add(&build_h_int(basis, params, dis)?)
}
