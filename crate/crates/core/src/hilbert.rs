//! Sector Hilbert spaces for U(1)-symmetric models.
//!
//! Spin-1/2 lattices are split into fixed total-magnetization sectors;
//! spinful fermions into fixed total-particle-number sectors. Bases carry
//! explicit configuration lists plus index maps, and all local operators
//! are assembled directly inside (or between adjacent) sectors.

use crate::error::{Error, Result};
use crate::operator::SparseOperator;
use num_complex::Complex64;
use std::collections::HashMap;

fn combinations(n: usize, k: usize) -> Vec<u64> {
    // all k-subsets of {0..n} as bitmasks, ascending in mask value
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(0);
        return out;
    }
    // Gosper's hack-style enumeration in increasing mask order.
    let mut mask: u64 = (1u64 << k) - 1;
    let limit: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    loop {
        out.push(mask);
        if mask == (limit & (((1u64 << k) - 1) << (n - k))) {
            break;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}

// ---------------------------------------------------------------------------
// Spin sectors
// ---------------------------------------------------------------------------

/// Fixed total-S^z sector of a spin-1/2 lattice.
///
/// Configurations are stored as bitmasks with bit `i` set when site `i` is
/// down, and enumerated lexicographically reading site 0 first with up
/// before down (so the two-site zero-magnetization sector orders as
/// `[up-down, down-up]`).
#[derive(Debug, Clone)]
pub struct SpinSectorBasis {
    n_sites: usize,
    n_down: usize,
    total_sz_twice: i64,
    configs: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SpinSectorBasis {
    /// Sector with `2 S^z_total = total_sz_twice` on `n_sites` spins.
    pub fn new(n_sites: usize, total_sz_twice: i64) -> Result<Self> {
        if n_sites == 0 || n_sites > 60 {
            return Err(Error::Basis(format!(
                "spin sector supports 1..=60 sites, got {n_sites}"
            )));
        }
        let n = n_sites as i64;
        if total_sz_twice.abs() > n || (n - total_sz_twice) % 2 != 0 {
            return Err(Error::Basis(format!(
                "no sector with 2*Sz = {total_sz_twice} on {n_sites} spin-1/2 sites"
            )));
        }
        let n_down = ((n - total_sz_twice) / 2) as usize;
        let mut configs = combinations(n_sites, n_down);
        // lexicographic site-0-major order with up < down
        configs.sort_unstable_by_key(|&mask| {
            (0..n_sites).fold(0u64, |acc, site| {
                (acc << 1) | ((mask >> site) & 1)
            })
        });
        let index = configs
            .iter()
            .enumerate()
            .map(|(i, &m)| (m, i))
            .collect();
        Ok(SpinSectorBasis {
            n_sites,
            n_down,
            total_sz_twice,
            configs,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn total_sz_twice(&self) -> i64 {
        self.total_sz_twice
    }

    pub fn config(&self, i: usize) -> u64 {
        self.configs[i]
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    /// `S^z` eigenvalue (+1/2 or -1/2) of `site` in configuration `i`.
    pub fn sz_value(&self, i: usize, site: usize) -> f64 {
        if (self.configs[i] >> site) & 1 == 1 {
            -0.5
        } else {
            0.5
        }
    }

    /// `sum_i w_i m_i` with `m_i = +-1/2` for configuration `i`; this is the
    /// exponent weight entering diagonal gauges.
    pub fn weighted_sz(&self, i: usize, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.n_sites);
        let mask = self.configs[i];
        weights
            .iter()
            .enumerate()
            .map(|(site, &w)| if (mask >> site) & 1 == 1 { -0.5 * w } else { 0.5 * w })
            .sum()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            Err(Error::Basis(format!("site {site} outside 0..{}", self.n_sites)))
        } else {
            Ok(())
        }
    }

    /// Diagonal operator `S^z_site` on this sector.
    pub fn op_sz(&self, site: usize) -> Result<SparseOperator> {
        self.check_site(site)?;
        let trips: Vec<_> = (0..self.dim())
            .map(|i| (i, i, Complex64::new(self.sz_value(i, site), 0.0)))
            .collect();
        SparseOperator::from_triplets(self.dim(), self.dim(), &trips)
    }

    /// `S^+_site`, mapping this sector into `target` (total 2Sz raised by 2).
    pub fn op_splus(&self, target: &SpinSectorBasis, site: usize) -> Result<SparseOperator> {
        self.check_site(site)?;
        if target.n_sites != self.n_sites || target.total_sz_twice != self.total_sz_twice + 2 {
            return Err(Error::Basis(
                "raising operator must target the sector with 2Sz raised by 2".into(),
            ));
        }
        let mut trips = Vec::new();
        for (i, &mask) in self.configs.iter().enumerate() {
            if (mask >> site) & 1 == 1 {
                let flipped = mask & !(1u64 << site);
                let j = target
                    .index_of(flipped)
                    .ok_or_else(|| Error::Basis("target sector misses raised configuration".into()))?;
                trips.push((j, i, Complex64::new(1.0, 0.0)));
            }
        }
        SparseOperator::from_triplets(target.dim(), self.dim(), &trips)
    }

    /// `S^-_site`, mapping this sector into `target` (total 2Sz lowered by 2).
    pub fn op_sminus(&self, target: &SpinSectorBasis, site: usize) -> Result<SparseOperator> {
        self.check_site(site)?;
        if target.n_sites != self.n_sites || target.total_sz_twice != self.total_sz_twice - 2 {
            return Err(Error::Basis(
                "lowering operator must target the sector with 2Sz lowered by 2".into(),
            ));
        }
        let mut trips = Vec::new();
        for (i, &mask) in self.configs.iter().enumerate() {
            if (mask >> site) & 1 == 0 {
                let flipped = mask | (1u64 << site);
                let j = target
                    .index_of(flipped)
                    .ok_or_else(|| Error::Basis("target sector misses lowered configuration".into()))?;
                trips.push((j, i, Complex64::new(1.0, 0.0)));
            }
        }
        SparseOperator::from_triplets(target.dim(), self.dim(), &trips)
    }

    /// Sector-preserving `S^+_i S^-_j` for distinct sites.
    pub fn op_pair_pm(&self, i: usize, j: usize) -> Result<SparseOperator> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(Error::Basis("pair operator needs distinct sites".into()));
        }
        let mut trips = Vec::new();
        for (idx, &mask) in self.configs.iter().enumerate() {
            // S^-_j needs site j up; S^+_i needs site i down.
            if (mask >> j) & 1 == 0 && (mask >> i) & 1 == 1 {
                let out = (mask | (1u64 << j)) & !(1u64 << i);
                let jdx = self.index_of(out).expect("pair flip stays in sector");
                trips.push((jdx, idx, Complex64::new(1.0, 0.0)));
            }
        }
        SparseOperator::from_triplets(self.dim(), self.dim(), &trips)
    }

    /// Diagonal `S^z_i S^z_j`.
    pub fn op_szsz(&self, i: usize, j: usize) -> Result<SparseOperator> {
        self.check_site(i)?;
        self.check_site(j)?;
        let trips: Vec<_> = (0..self.dim())
            .map(|idx| {
                (
                    idx,
                    idx,
                    Complex64::new(self.sz_value(idx, i) * self.sz_value(idx, j), 0.0),
                )
            })
            .collect();
        SparseOperator::from_triplets(self.dim(), self.dim(), &trips)
    }
}

// ---------------------------------------------------------------------------
// Fermion sectors
// ---------------------------------------------------------------------------

/// Spin index for spinful fermions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// Mode id for (site, spin): site-major with up before down.
pub fn mode_index(site: usize, spin: Spin) -> usize {
    2 * site
        + match spin {
            Spin::Up => 0,
            Spin::Down => 1,
        }
}

/// Fixed total-particle-number sector of spinful fermions on `n_sites`
/// sites (2 modes per site, Jordan-Wigner ordered by mode id).
#[derive(Debug, Clone)]
pub struct FermionSectorBasis {
    n_sites: usize,
    n_modes: usize,
    n_particles: usize,
    configs: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl FermionSectorBasis {
    pub fn new(n_sites: usize, n_particles: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > 30 {
            return Err(Error::Basis(format!(
                "fermion sector supports 1..=30 sites, got {n_sites}"
            )));
        }
        let n_modes = 2 * n_sites;
        if n_particles > n_modes {
            return Err(Error::Basis(format!(
                "{n_particles} fermions do not fit in {n_modes} modes"
            )));
        }
        let configs = combinations(n_modes, n_particles);
        let index = configs
            .iter()
            .enumerate()
            .map(|(i, &m)| (m, i))
            .collect();
        Ok(FermionSectorBasis {
            n_sites,
            n_modes,
            n_particles,
            configs,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn config(&self, i: usize) -> u64 {
        self.configs[i]
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    /// Occupation of `mode` in configuration `i`.
    pub fn occupation(&self, i: usize, mode: usize) -> f64 {
        ((self.configs[i] >> mode) & 1) as f64
    }

    /// Total occupation of `site` (both spins) in configuration `i`.
    pub fn site_occupation(&self, i: usize, site: usize) -> f64 {
        self.occupation(i, mode_index(site, Spin::Up))
            + self.occupation(i, mode_index(site, Spin::Down))
    }

    /// `sum_i w_i n_i` with `n_i` the total site occupation of configuration
    /// `i`; the exponent weight entering fermionic diagonal gauges.
    pub fn weighted_occupation(&self, i: usize, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.n_sites);
        weights
            .iter()
            .enumerate()
            .map(|(site, &w)| w * self.site_occupation(i, site))
            .sum()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            Err(Error::Basis(format!("mode {mode} outside 0..{}", self.n_modes)))
        } else {
            Ok(())
        }
    }

    /// Diagonal number operator of a single mode.
    pub fn op_mode_number(&self, mode: usize) -> Result<SparseOperator> {
        self.check_mode(mode)?;
        let trips: Vec<_> = (0..self.dim())
            .map(|i| (i, i, Complex64::new(self.occupation(i, mode), 0.0)))
            .collect();
        SparseOperator::from_triplets(self.dim(), self.dim(), &trips)
    }

    /// Diagonal total number operator of a site.
    pub fn op_site_number(&self, site: usize) -> Result<SparseOperator> {
        let up = self.op_mode_number(mode_index(site, Spin::Up))?;
        let down = self.op_mode_number(mode_index(site, Spin::Down))?;
        up.add(&down)
    }

    /// Creation operator `c^†_mode`, mapping this sector into `target`
    /// (particle number raised by one), with the Jordan-Wigner sign.
    pub fn op_c_dag(&self, target: &FermionSectorBasis, mode: usize) -> Result<SparseOperator> {
        self.check_mode(mode)?;
        if target.n_sites != self.n_sites || target.n_particles != self.n_particles + 1 {
            return Err(Error::Basis(
                "creation operator must target the sector with one more particle".into(),
            ));
        }
        let mut trips = Vec::new();
        for (i, &mask) in self.configs.iter().enumerate() {
            if (mask >> mode) & 1 == 0 {
                let sign = jw_sign(mask, mode);
                let out = mask | (1u64 << mode);
                let j = target
                    .index_of(out)
                    .ok_or_else(|| Error::Basis("target sector misses raised configuration".into()))?;
                trips.push((j, i, Complex64::new(sign, 0.0)));
            }
        }
        SparseOperator::from_triplets(target.dim(), self.dim(), &trips)
    }

    /// Annihilation operator `c_mode`, mapping this sector into `target`
    /// (particle number lowered by one), with the Jordan-Wigner sign.
    pub fn op_c(&self, target: &FermionSectorBasis, mode: usize) -> Result<SparseOperator> {
        self.check_mode(mode)?;
        if target.n_sites != self.n_sites || target.n_particles + 1 != self.n_particles {
            return Err(Error::Basis(
                "annihilation operator must target the sector with one fewer particle".into(),
            ));
        }
        let mut trips = Vec::new();
        for (i, &mask) in self.configs.iter().enumerate() {
            if (mask >> mode) & 1 == 1 {
                let sign = jw_sign(mask, mode);
                let out = mask & !(1u64 << mode);
                let j = target
                    .index_of(out)
                    .ok_or_else(|| Error::Basis("target sector misses lowered configuration".into()))?;
                trips.push((j, i, Complex64::new(sign, 0.0)));
            }
        }
        SparseOperator::from_triplets(target.dim(), self.dim(), &trips)
    }

    /// Sector-preserving normal-ordered string
    /// `c^†_{creators[0]} ... c^†_{creators[end]} c_{annihilators[0]} ... c_{annihilators[end]}`,
    /// applied to kets rightmost factor first. Requires
    /// `creators.len() == annihilators.len()` and no repeated mode within
    /// either list.
    pub fn op_string(&self, creators: &[usize], annihilators: &[usize]) -> Result<SparseOperator> {
        if creators.len() != annihilators.len() {
            return Err(Error::Basis(
                "sector-preserving string needs equally many creators and annihilators".into(),
            ));
        }
        for &m in creators.iter().chain(annihilators) {
            self.check_mode(m)?;
        }
        let mut trips = Vec::new();
        'config: for (i, &mask) in self.configs.iter().enumerate() {
            let mut m = mask;
            let mut sign = 1.0f64;
            for &mode in annihilators.iter().rev() {
                if (m >> mode) & 1 == 0 {
                    continue 'config;
                }
                sign *= jw_sign(m, mode);
                m &= !(1u64 << mode);
            }
            for &mode in creators.iter().rev() {
                if (m >> mode) & 1 == 1 {
                    continue 'config;
                }
                sign *= jw_sign(m, mode);
                m |= 1u64 << mode;
            }
            let j = self
                .index_of(m)
                .expect("balanced string stays within the sector");
            trips.push((j, i, Complex64::new(sign, 0.0)));
        }
        SparseOperator::from_triplets(self.dim(), self.dim(), &trips)
    }

    /// Sector-preserving bilinear `c^†_p c_q`.
    pub fn op_bilinear(&self, p: usize, q: usize) -> Result<SparseOperator> {
        self.op_string(&[p], &[q])
    }

    /// Hermitian hop `c^†_{i,s} c_{j,s} + c^†_{j,s} c_{i,s}`.
    pub fn op_hop(&self, i: usize, j: usize, spin: Spin) -> Result<SparseOperator> {
        let p = mode_index(i, spin);
        let q = mode_index(j, spin);
        self.op_bilinear(p, q)?.add(&self.op_bilinear(q, p)?)
    }

    /// Bare-Pauli raising operator `S^+_site = 2 c^†_{site,up} c_{site,down}`.
    pub fn op_pauli_plus(&self, site: usize) -> Result<SparseOperator> {
        Ok(self
            .op_bilinear(mode_index(site, Spin::Up), mode_index(site, Spin::Down))?
            .scaled(Complex64::new(2.0, 0.0)))
    }

    /// Bare-Pauli `S^z_site = n_up - n_down` (eigenvalues -1, 0, +1... on the
    /// four local states: 0 for empty and doubly occupied).
    pub fn op_pauli_z(&self, site: usize) -> Result<SparseOperator> {
        let up = self.op_mode_number(mode_index(site, Spin::Up))?;
        let down = self.op_mode_number(mode_index(site, Spin::Down))?;
        up.sub(&down)
    }

    /// Bare-Pauli `S^x` and `S^y` components.
    pub fn op_pauli_xy(&self, site: usize) -> Result<(SparseOperator, SparseOperator)> {
        let plus = self.op_pauli_plus(site)?;
        let minus = plus.adjoint();
        let sx = plus.add(&minus)?.scaled(Complex64::new(0.5, 0.0));
        let sy = plus.sub(&minus)?.scaled(Complex64::new(0.0, -0.5));
        Ok((sx, sy))
    }

    /// Pair-transfer operator entering pair correlations:
    /// `c^†_{m,up} c^†_{m,down} c_{n,up} c_{n,down}`.
    pub fn op_pair_hop(&self, m: usize, n: usize) -> Result<SparseOperator> {
        self.op_string(
            &[mode_index(m, Spin::Up), mode_index(m, Spin::Down)],
            &[mode_index(n, Spin::Up), mode_index(n, Spin::Down)],
        )
    }
}

/// Parity sign of occupied modes strictly below `mode`.
fn jw_sign(mask: u64, mode: usize) -> f64 {
    let below = mask & ((1u64 << mode) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
