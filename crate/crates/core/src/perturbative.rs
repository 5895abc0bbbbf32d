//! Golden-rule rates between eigenmanifolds and closed-form singlet/triplet-pair
//! transition elements.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{ring_bonds, ExcitonConfig, SiteLabel};
use crate::dynamics::state::{dot, StateVector};
use crate::error::{invalid, Error, Result};
use crate::sparse::{check_tag, SparseOperator};

/// Probability-weighted eigenstates of one block.
#[derive(Debug, Clone)]
pub struct EigenDistribution {
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    pub probabilities: Vec<f64>,
}

/// How probability is spread over the eigenstates of a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Uniform,
    /// All weight on the lowest eigenvalue.
    Ground,
    Explicit(Vec<f64>),
}

impl EigenDistribution {
    pub fn new(
        energies: Vec<f64>,
        states: Vec<StateVector>,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        if energies.len() != states.len()
            || states.len() != probabilities.len()
            || states.is_empty()
        {
            return Err(Error::ShapeMismatch(format!(
                "{} energies, {} states, {} probabilities",
                energies.len(),
                states.len(),
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        let tag = states[0].tag();
        for (a, sa) in states.iter().enumerate() {
            check_tag(tag, sa.tag())?;
            for (b, sb) in states.iter().enumerate().skip(a) {
                let expected = if a == b { 1.0 } else { 0.0 };
                let overlap = sa.inner(sb)?;
                if (overlap - expected).norm() > 1e-10 {
                    return Err(invalid(format!(
                        "states {a} and {b} not orthonormal: overlap {overlap}"
                    )));
                }
            }
        }
        Ok(EigenDistribution {
            energies,
            states,
            probabilities,
        })
    }

    /// Diagonalizes `h` on the basis rows `indices` and embeds the eigenvectors.
    pub fn from_block(h: &SparseOperator, indices: &[usize], weighting: Weighting) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("empty block"));
        }
        let eig = h.restrict_dense(indices).symmetric_eigen();
        let mut order: Vec<usize> = (0..indices.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let states = order
            .iter()
            .map(|&k| {
                let mut amps = vec![C64::new(0.0, 0.0); h.dim()];
                for (r, &i) in indices.iter().enumerate() {
                    amps[i] = eig.eigenvectors[(r, k)];
                }
                StateVector::new(h.tag(), amps)
            })
            .collect();
        let n = indices.len();
        let probabilities = match weighting {
            Weighting::Uniform => vec![1.0 / n as f64; n],
            Weighting::Ground => (0..n).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
            Weighting::Explicit(p) => p,
        };
        Self::new(energies, states, probabilities)
    }

    /// A single state carrying all the weight, at energy `<psi|h|psi>`.
    pub fn pure(h: &SparseOperator, psi: StateVector) -> Result<Self> {
        let energy = psi.expectation(h)?;
        Self::new(vec![energy], vec![psi], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BroadeningKind {
    #[default]
    Lorentzian,
    Gaussian,
}

/// Regularized delta function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadeningSpec {
    pub kind: BroadeningKind,
    /// eV
    pub width: f64,
}

impl Default for BroadeningSpec {
    fn default() -> Self {
        BroadeningSpec {
            kind: BroadeningKind::Lorentzian,
            width: 1e-3,
        }
    }
}

impl BroadeningSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(invalid(format!(
                "broadening width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    /// Unit-area line shape at detuning `x`; `x = 0` gives the peak value.
    pub fn delta(&self, x: f64) -> f64 {
        let w = self.width;
        match self.kind {
            BroadeningKind::Lorentzian => w / PI / (x * x + w * w),
            BroadeningKind::Gaussian => (-0.5 * (x / w).powi(2)).exp() / (w * (2.0 * PI).sqrt()),
        }
    }
}

/// `sum_{a a'} p_a 2 pi |<phi_a'|H1|phi_a>|^2 delta(E_a - E_a')`
pub fn fgr_rate(
    initial: &EigenDistribution,
    final_: &EigenDistribution,
    h1: &SparseOperator,
    broadening: &BroadeningSpec,
) -> Result<f64> {
    broadening.validate()?;
    let mut rate = 0.0;
    for ((e, psi), &p) in initial
        .energies
        .iter()
        .zip(&initial.states)
        .zip(&initial.probabilities)
    {
        check_tag(h1.tag(), psi.tag())?;
        if p == 0.0 {
            continue;
        }
        let h_psi = h1.mul_vec(psi.amps());
        for (ef, phi) in final_.energies.iter().zip(&final_.states) {
            check_tag(h1.tag(), phi.tag())?;
            let m = dot(phi.amps(), &h_psi);
            rate += p * 2.0 * PI * m.norm_sqr() * broadening.delta(e - ef);
        }
    }
    Ok(rate)
}

fn check_square(m: &DMatrix<C64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `<phi'|H_int|phi>` for a one-singlet state `phi = sum_i c_i S†_i|0>` and a
/// triplet pair `phi' = sum_{i != j} ct_ij T†_i T†_j|0>` over ordered pairs.
///
/// Both orderings of a pair address the same configuration, so each ring bond
/// contributes `(c_i + c_j) conj(ct_ij + ct_ji)`.
pub fn transition_element_1s_2t(c: &[C64], c_tilde: &DMatrix<C64>, g: f64) -> Result<C64> {
    let n = c.len();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!(
            "need at least 2 sites, got {n}"
        )));
    }
    check_square(c_tilde, n, "pair amplitude matrix")?;
    Ok(ring_bonds(n)
        .into_iter()
        .map(|(i, j)| (c[i] + c[j]) * (c_tilde[(i, j)] + c_tilde[(j, i)]).conj())
        .sum::<C64>()
        * g)
}

/// Spinful pair amplitudes `ct[m][m']` (m ordered -1, 0, +1), each an ordered
/// site-pair matrix: `phi' = sum ct[m][m']_ij T†_{i m} T†_{j m'}|0>`.
pub type SpinfulPairAmplitudes = [[DMatrix<C64>; 3]; 3];

/// `<phi'|H_int|phi>` in the spinful model; only the singlet-character pair
/// `(T0 T0 - T- T+ - T+ T-)/sqrt(3)` couples.
pub fn transition_element_spinful(
    c: &[C64],
    c_tilde: &SpinfulPairAmplitudes,
    g: f64,
) -> Result<C64> {
    let n = c.len();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!(
            "need at least 2 sites, got {n}"
        )));
    }
    for row in c_tilde {
        for m in row {
            check_square(m, n, "pair amplitude matrix")?;
        }
    }
    // amplitude on the configuration with T_a at i and T_b at j
    let amp =
        |a: usize, b: usize, i: usize, j: usize| c_tilde[a][b][(i, j)] + c_tilde[b][a][(j, i)];
    let w = 1.0 / 3f64.sqrt();
    Ok(ring_bonds(n)
        .into_iter()
        .map(|(i, j)| {
            let pair = amp(1, 1, i, j) - amp(0, 2, i, j) - amp(2, 0, i, j);
            (c[i] + c[j]) * pair.conj()
        })
        .sum::<C64>()
        * (g * w))
}

/// Amplitudes of a spinless state keyed by configuration.
pub type AmplitudeMap = HashMap<ExcitonConfig, C64>;

/// `<phi'|H_int|phi>` for arbitrary spinless states, summed over fission and
/// fusion moves on every ring bond with all other sites unchanged.
pub fn transition_element_general(
    phi: &AmplitudeMap,
    phi_prime: &AmplitudeMap,
    g: f64,
) -> Result<C64> {
    let n = phi
        .keys()
        .chain(phi_prime.keys())
        .map(|c| c.n_sites())
        .next()
        .unwrap_or(2);
    for cfg in phi.keys().chain(phi_prime.keys()) {
        if cfg.n_sites() != n {
            return Err(Error::ShapeMismatch(format!(
                "mixed ring sizes {n} and {}",
                cfg.n_sites()
            )));
        }
        if cfg
            .labels()
            .iter()
            .any(|l| !matches!(l, SiteLabel::S0 | SiteLabel::S1 | SiteLabel::T1))
        {
            return Err(invalid(format!("{cfg} is not a spinless configuration")));
        }
    }
    let bonds = ring_bonds(n);
    let bra = |cfg: ExcitonConfig| phi_prime.get(&cfg).map_or(C64::new(0.0, 0.0), |a| a.conj());
    let mut total = C64::new(0.0, 0.0);
    for (cfg, &a) in phi {
        for &(i, j) in &bonds {
            match (cfg.labels()[i], cfg.labels()[j]) {
                (SiteLabel::S1, SiteLabel::S0) | (SiteLabel::S0, SiteLabel::S1) => {
                    total += bra(cfg.with_pair((i, SiteLabel::T1), (j, SiteLabel::T1))) * a;
                }
                (SiteLabel::T1, SiteLabel::T1) => {
                    total += bra(cfg.with_pair((i, SiteLabel::S1), (j, SiteLabel::S0))) * a;
                    total += bra(cfg.with_pair((i, SiteLabel::S0), (j, SiteLabel::S1))) * a;
                }
                _ => {}
            }
        }
    }
    Ok(total * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_sector, SpinMode};
    use crate::hamiltonian::{build_exciton_free, build_h_int, DisorderRealization, ModelParams};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn single_bond_elements() {
        let mut ct = DMatrix::zeros(3, 3);
        ct[(0, 1)] = re(1.0);
        let e = transition_element_1s_2t(&[re(1.0), re(0.0), re(0.0)], &ct, 0.3).unwrap();
        assert!((e - re(0.3)).norm() < 1e-15);

        let mut far = DMatrix::zeros(4, 4);
        far[(0, 2)] = re(1.0);
        let e = transition_element_1s_2t(&[re(0.5); 4], &far, 1.0).unwrap();
        assert_eq!(e, re(0.0));
        assert!(transition_element_1s_2t(&[re(1.0); 3], &DMatrix::zeros(4, 4), 1.0).is_err());
    }

    #[test]
    fn spinful_channels() {
        let zero = || DMatrix::<C64>::zeros(3, 3);
        let c = [re(1.0), re(0.0), re(0.0)];
        let mut ct: SpinfulPairAmplitudes =
            std::array::from_fn(|_| std::array::from_fn(|_| zero()));
        ct[2][2][(0, 1)] = re(1.0);
        assert_eq!(transition_element_spinful(&c, &ct, 1.0).unwrap(), re(0.0));

        let w = 1.0 / 3f64.sqrt();
        let mut ct: SpinfulPairAmplitudes =
            std::array::from_fn(|_| std::array::from_fn(|_| zero()));
        ct[1][1][(0, 1)] = re(w);
        ct[0][2][(0, 1)] = re(-w);
        ct[2][0][(0, 1)] = re(-w);
        let e = transition_element_spinful(&c, &ct, 0.2).unwrap();
        assert!((e - re(0.2)).norm() < 1e-15);
    }

    #[test]
    fn lorentzian_peak_and_area() {
        let b = BroadeningSpec::default();
        assert!((b.delta(0.0) - 1.0 / (PI * 1e-3)).abs() < 1e-9);
        let g = BroadeningSpec {
            kind: BroadeningKind::Gaussian,
            width: 0.1,
        };
        let area: f64 = (-2000..=2000)
            .map(|k| g.delta(k as f64 * 1e-3) * 1e-3)
            .sum();
        assert!((area - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fgr_rate_scales_with_coupling_squared() {
        let basis = enumerate_sector(6, 2, SpinMode::Spinless).unwrap();
        let dis = DisorderRealization::zero(6);
        let rate = |gamma: f64| {
            let p = ModelParams::resonant(1.0, -0.1, gamma);
            let h0 = build_exciton_free(&basis, &p, None, &dis).unwrap();
            let h1 = build_h_int(&basis, &p, &dis).unwrap();
            let init =
                EigenDistribution::from_block(&h0, &basis.block_indices(1, 0), Weighting::Ground)
                    .unwrap();
            let fin =
                EigenDistribution::from_block(&h0, &basis.block_indices(0, 2), Weighting::Uniform)
                    .unwrap();
            fgr_rate(&init, &fin, &h1, &BroadeningSpec::default()).unwrap()
        };
        let ratio = rate(0.1) / rate(0.05);
        assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
        assert_eq!(rate(0.0), 0.0);
    }
}
