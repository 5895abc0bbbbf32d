//! Exciton configuration space restricted to a fixed value of the conserved
//! charge `C = 2 N_S + N_T`.
//!
//! Every site carries exactly one label. In the spinless model a site is
//! `S0`, `S1` or `T1`; the spinful model resolves the triplet into its three
//! `m` components. Configurations are enumerated in lexicographic order of
//! the per-site label codes with site 0 most significant, so the same
//! `(N, C0, mode)` always yields the same sequence.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sparse::BasisTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinMode {
    Spinless,
    Spinful,
}

impl SpinMode {
    /// Local labels in canonical code order.
    pub fn labels(self) -> &'static [SiteLabel] {
        match self {
            SpinMode::Spinless => &[SiteLabel::S0, SiteLabel::S1, SiteLabel::T1],
            SpinMode::Spinful => &[
                SiteLabel::S0,
                SiteLabel::S1,
                SiteLabel::TMinus,
                SiteLabel::TZero,
                SiteLabel::TPlus,
            ],
        }
    }

    pub fn local_dim(self) -> usize {
        self.labels().len()
    }

    pub fn triplets(self) -> &'static [SiteLabel] {
        &self.labels()[2..]
    }
}

/// Local state of one ring site.
///
/// The declaration order is the canonical code order within each mode
/// (`T1` is only used in spinless mode, `TMinus`..`TPlus` only in spinful).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteLabel {
    S0,
    S1,
    T1,
    TMinus,
    TZero,
    TPlus,
}

impl SiteLabel {
    pub fn is_singlet(self) -> bool {
        self == SiteLabel::S1
    }

    pub fn is_triplet(self) -> bool {
        matches!(
            self,
            SiteLabel::T1 | SiteLabel::TMinus | SiteLabel::TZero | SiteLabel::TPlus
        )
    }

    /// Contribution of this site to `C`.
    pub fn charge(self) -> usize {
        match self {
            SiteLabel::S0 => 0,
            SiteLabel::S1 => 2,
            _ => 1,
        }
    }

    /// Spin projection of a spinful triplet.
    pub fn m(self) -> Option<i8> {
        match self {
            SiteLabel::TMinus => Some(-1),
            SiteLabel::TZero => Some(0),
            SiteLabel::TPlus => Some(1),
            _ => None,
        }
    }

    pub fn triplet_with_m(m: i8) -> Option<SiteLabel> {
        match m {
            -1 => Some(SiteLabel::TMinus),
            0 => Some(SiteLabel::TZero),
            1 => Some(SiteLabel::TPlus),
            _ => None,
        }
    }

    pub fn belongs_to(self, mode: SpinMode) -> bool {
        mode.labels().contains(&self)
    }

    fn symbol(self) -> &'static str {
        match self {
            SiteLabel::S0 => "S0",
            SiteLabel::S1 => "S1",
            SiteLabel::T1 => "T1",
            SiteLabel::TMinus => "T-",
            SiteLabel::TZero => "T0",
            SiteLabel::TPlus => "T+",
        }
    }
}

impl FromStr for SiteLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "S0" => SiteLabel::S0,
            "S1" => SiteLabel::S1,
            "T1" | "T" => SiteLabel::T1,
            "T-" | "T(-1)" => SiteLabel::TMinus,
            "T0" | "T(0)" => SiteLabel::TZero,
            "T+" | "T(+1)" => SiteLabel::TPlus,
            other => return Err(invalid(format!("unknown site label {other:?}"))),
        })
    }
}

/// Labels of all `N` sites of the ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExcitonConfig(pub Vec<SiteLabel>);

impl ExcitonConfig {
    pub fn new(labels: Vec<SiteLabel>) -> Self {
        ExcitonConfig(labels)
    }

    pub fn ground(n_sites: usize) -> Self {
        ExcitonConfig(vec![SiteLabel::S0; n_sites])
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> &[SiteLabel] {
        &self.0
    }

    pub fn charge(&self) -> usize {
        self.0.iter().map(|l| l.charge()).sum()
    }

    pub fn with(&self, site: usize, label: SiteLabel) -> Self {
        let mut next = self.clone();
        next.0[site] = label;
        next
    }

    pub fn with_pair(&self, (i, a): (usize, SiteLabel), (j, b): (usize, SiteLabel)) -> Self {
        let mut next = self.clone();
        next.0[i] = a;
        next.0[j] = b;
        next
    }
}

impl std::ops::Index<usize> for ExcitonConfig {
    type Output = SiteLabel;

    fn index(&self, site: usize) -> &SiteLabel {
        &self.0[site]
    }
}

impl fmt::Display for ExcitonConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l.symbol())?;
        }
        write!(f, "]")
    }
}

impl FromStr for ExcitonConfig {
    type Err = Error;

    /// Parses `[S1,S0,T1]` (brackets optional).
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let labels = inner
            .split(',')
            .map(SiteLabel::from_str)
            .collect::<Result<Vec<_>>>()?;
        Ok(ExcitonConfig(labels))
    }
}

/// Singlet and triplet counts `(n_S, n_T)` of a configuration.
pub fn count_particles(config: &ExcitonConfig) -> (usize, usize) {
    config.0.iter().fold((0, 0), |(s, t), l| {
        (s + l.is_singlet() as usize, t + l.is_triplet() as usize)
    })
}

#[derive(Debug, Clone)]
pub struct SectorBasis {
    n_sites: usize,
    c0: usize,
    spin_mode: SpinMode,
    configs: Vec<ExcitonConfig>,
    index_of: HashMap<ExcitonConfig, usize>,
}

/// All configurations with `2 n_S + n_T = c0`, in canonical order.
pub fn enumerate_sector(n_sites: usize, c0: usize, spin_mode: SpinMode) -> Result<SectorBasis> {
    if n_sites < 2 {
        return Err(invalid(format!(
            "ring needs at least 2 sites, got {n_sites}"
        )));
    }
    if c0 > 2 * n_sites {
        return Err(invalid(format!("C0 = {c0} outside [0, {}]", 2 * n_sites)));
    }

    let labels = spin_mode.labels();
    let mut configs = Vec::new();
    let mut current = Vec::with_capacity(n_sites);
    fill(&mut current, n_sites, c0, labels, &mut configs);

    let index_of = configs
        .iter()
        .enumerate()
        .map(|(k, c)| (c.clone(), k))
        .collect();
    Ok(SectorBasis {
        n_sites,
        c0,
        spin_mode,
        configs,
        index_of,
    })
}

fn fill(
    current: &mut Vec<SiteLabel>,
    n_sites: usize,
    remaining: usize,
    labels: &[SiteLabel],
    out: &mut Vec<ExcitonConfig>,
) {
    let free = n_sites - current.len();
    if free == 0 {
        if remaining == 0 {
            out.push(ExcitonConfig(current.clone()));
        }
        return;
    }
    // each remaining site holds at most charge 2
    if remaining > 2 * free {
        return;
    }
    for &label in labels {
        let q = label.charge();
        if q <= remaining {
            current.push(label);
            fill(current, n_sites, remaining - q, labels, out);
            current.pop();
        }
    }
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn c0(&self) -> usize {
        self.c0
    }

    pub fn spin_mode(&self) -> SpinMode {
        self.spin_mode
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[ExcitonConfig] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> &ExcitonConfig {
        &self.configs[index]
    }

    pub fn tag(&self) -> BasisTag {
        BasisTag::sector(self.n_sites, self.c0, self.spin_mode)
    }

    /// Index lookup that returns `None` for configurations outside the sector.
    pub fn find(&self, config: &ExcitonConfig) -> Option<usize> {
        self.index_of.get(config).copied()
    }

    /// Canonical index of `config`.
    pub fn config_index(&self, config: &ExcitonConfig) -> Result<usize> {
        if config.n_sites() != self.n_sites {
            return Err(Error::ShapeMismatch(format!(
                "config has {} sites, basis has {}",
                config.n_sites(),
                self.n_sites
            )));
        }
        if let Some(bad) = config.0.iter().find(|l| !l.belongs_to(self.spin_mode)) {
            return Err(invalid(format!(
                "label {bad:?} not valid in {:?} mode",
                self.spin_mode
            )));
        }
        self.find(config).ok_or_else(|| Error::NotInSector {
            config: config.to_string(),
            c0: self.c0,
        })
    }

    /// Indices of the configurations with exactly `n_s` singlets and `n_t` triplets.
    pub fn block_indices(&self, n_s: usize, n_t: usize) -> Vec<usize> {
        self.configs
            .iter()
            .enumerate()
            .filter(|(_, c)| count_particles(c) == (n_s, n_t))
            .map(|(k, _)| k)
            .collect()
    }
}

/// Nearest-neighbour bonds of the ring with periodic closure.
///
/// For `N = 2` the two directed bonds `(1,2)` and `(2,1)` describe the same
/// physical pair, so only one is kept.
pub fn ring_bonds(n_sites: usize) -> Vec<(usize, usize)> {
    match n_sites {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> ExcitonConfig {
        s.parse().unwrap()
    }

    fn brute_force(n: usize, c0: usize, mode: SpinMode) -> Vec<ExcitonConfig> {
        let labels = mode.labels();
        let d = labels.len();
        let total = d.pow(n as u32);
        let mut out = Vec::new();
        for mut code in 0..total {
            let mut v = vec![SiteLabel::S0; n];
            for site in (0..n).rev() {
                v[site] = labels[code % d];
                code /= d;
            }
            let c = ExcitonConfig(v);
            if c.charge() == c0 {
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn small_sector_dimensions() {
        assert_eq!(enumerate_sector(3, 2, SpinMode::Spinless).unwrap().dim(), 6);
        assert_eq!(enumerate_sector(3, 0, SpinMode::Spinless).unwrap().dim(), 1);
        assert_eq!(enumerate_sector(3, 2, SpinMode::Spinful).unwrap().dim(), 30);
    }

    #[test]
    fn matches_brute_force_filter_in_order() {
        for n in 2..=6 {
            for mode in [SpinMode::Spinless, SpinMode::Spinful] {
                if mode == SpinMode::Spinful && n > 5 {
                    continue;
                }
                for c0 in 0..=2 * n {
                    let basis = enumerate_sector(n, c0, mode).unwrap();
                    // brute force walks codes in increasing order, which is the canonical order
                    assert_eq!(basis.configs(), brute_force(n, c0, mode).as_slice());
                }
            }
        }
    }

    #[test]
    fn even_sector_multinomial_formula() {
        fn fact(k: usize) -> u128 {
            (1..=k as u128).product()
        }
        for n in 2..=6usize {
            for n0 in 0..=n {
                let mut expected = 0u128;
                for k in 0..=n0 {
                    let t = 2 * (n0 - k);
                    if k + t <= n {
                        expected += fact(n) / (fact(k) * fact(t) * fact(n - k - t));
                    }
                }
                let dim = enumerate_sector(n, 2 * n0, SpinMode::Spinless)
                    .unwrap()
                    .dim();
                assert_eq!(dim as u128, expected, "N={n} n0={n0}");
            }
        }
    }

    #[test]
    fn counts() {
        assert_eq!(count_particles(&cfg("[S1,S0,S0]")), (1, 0));
        assert_eq!(count_particles(&cfg("[T1,T1,S0]")), (0, 2));
        let c = cfg("[S1,T1,T1,S0]");
        assert_eq!(count_particles(&c), (1, 2));
        assert_eq!(c.charge(), 4);
    }

    #[test]
    fn index_round_trip_and_errors() {
        let basis = enumerate_sector(4, 4, SpinMode::Spinless).unwrap();
        assert_eq!(basis.config_index(&basis.configs()[0]).unwrap(), 0);
        for (k, c) in basis.configs().iter().enumerate() {
            assert_eq!(basis.config_index(c).unwrap(), k);
        }
        let err = basis.config_index(&cfg("[S1,S1,T1,S0]")).unwrap_err();
        assert!(matches!(err, Error::NotInSector { c0: 4, .. }));
    }

    #[test]
    fn rejects_out_of_range_charge() {
        assert!(enumerate_sector(3, 7, SpinMode::Spinless).is_err());
        assert!(enumerate_sector(1, 0, SpinMode::Spinless).is_err());
    }

    #[test]
    fn bonds_deduplicate_dimer() {
        assert_eq!(ring_bonds(2), vec![(0, 1)]);
        assert_eq!(ring_bonds(3), vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn display_parse_round_trip() {
        let c = cfg("[T-,T0,S1,T+]");
        assert_eq!(c.to_string(), "[T-,T0,S1,T+]");
        assert_eq!(cfg(&c.to_string()), c);
    }
}
