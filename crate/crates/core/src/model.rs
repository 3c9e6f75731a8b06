//! Hamiltonian assembly: U(1)-symmetric spin-1/2 exchange models and
//! spinful lattice fermions, built directly inside symmetry sectors.

use crate::error::{Error, Result};
use crate::hilbert::{mode_index, FermionSectorBasis, Spin, SpinSectorBasis};
use crate::lattice::Lattice;
use crate::operator::SparseOperator;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-bond exchange couplings for
/// `H = sum_b Jxy_b (S^+_i S^-_j + S^-_i S^+_j) + Jz_b S^z_i S^z_j`.
#[derive(Debug, Clone)]
pub struct XxzCouplings {
    pub jxy: Vec<f64>,
    pub jz: Vec<f64>,
}

impl XxzCouplings {
    pub fn homogeneous(n_bonds: usize, jxy: f64, jz: f64) -> Self {
        XxzCouplings {
            jxy: vec![jxy; n_bonds],
            jz: vec![jz; n_bonds],
        }
    }

    /// Independent uniform draws per bond, deterministic in the seed.
    pub fn random(
        n_bonds: usize,
        jxy_range: (f64, f64),
        jz_range: (f64, f64),
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jxy = (0..n_bonds)
            .map(|_| rng.gen_range(jxy_range.0..=jxy_range.1))
            .collect();
        let jz = (0..n_bonds)
            .map(|_| rng.gen_range(jz_range.0..=jz_range.1))
            .collect();
        XxzCouplings { jxy, jz }
    }

    /// Certified bound `max_b |Jxy_b|` entering the twist norm lemmas.
    pub fn jxy_max(&self) -> f64 {
        self.jxy.iter().map(|j| j.abs()).fold(0.0, f64::max)
    }

    /// Certified bound `max_b |Jz_b|`.
    pub fn jz_max(&self) -> f64 {
        self.jz.iter().map(|j| j.abs()).fold(0.0, f64::max)
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if self.jxy.len() != lattice.bonds().len() || self.jz.len() != lattice.bonds().len() {
            return Err(Error::Model(format!(
                "couplings cover {} bonds but the lattice has {}",
                self.jxy.len().min(self.jz.len()),
                lattice.bonds().len()
            )));
        }
        Ok(())
    }
}

/// Spectral norm of the flip part `S^+_i S^-_j + S^-_i S^+_j` of a single
/// bond (spin-1/2): exactly 1.
pub const PAIR_PLUS_NORM: f64 = 1.0;
/// Spectral norm of the circulation part `S^+_i S^-_j - S^-_i S^+_j` of a
/// single bond (spin-1/2): exactly 1.
pub const PAIR_MINUS_NORM: f64 = 1.0;
/// `S^2 = 1/4` bound on `|S^z_i S^z_j|` per bond.
pub const SZ_PAIR_NORM: f64 = 0.25;

/// Certified bound on a single bond term,
/// `|Jxy| * ||flip part|| + |Jz| * ||S^z S^z||`.
pub fn bond_term_norm_bound(jxy: f64, jz: f64) -> f64 {
    jxy.abs() * PAIR_PLUS_NORM + jz.abs() * SZ_PAIR_NORM
}

/// Assemble the exchange Hamiltonian inside a fixed-magnetization sector.
///
/// The flip term connects configurations that differ by exchanging an
/// up-down pair across a bond (amplitude `Jxy_b`); the Ising term is
/// diagonal. The result is real symmetric; hermiticity is certified before
/// returning.
pub fn assemble_xxz(
    lattice: &Lattice,
    couplings: &XxzCouplings,
    basis: &SpinSectorBasis,
) -> Result<SparseOperator> {
    if basis.n_sites() != lattice.n_sites() {
        return Err(Error::Model(format!(
            "basis covers {} sites but the lattice has {}",
            basis.n_sites(),
            lattice.n_sites()
        )));
    }
    couplings.validate(lattice)?;
    let dim = basis.dim();
    let mut trips: Vec<(usize, usize, Complex64)> = Vec::new();
    for idx in 0..dim {
        let mask = basis.config(idx);
        let mut diag = 0.0;
        for (b, &(i, j)) in lattice.bonds().iter().enumerate() {
            let down_i = (mask >> i) & 1 == 1;
            let down_j = (mask >> j) & 1 == 1;
            let mz = if down_i == down_j { 0.25 } else { -0.25 };
            diag += couplings.jz[b] * mz;
            if down_i != down_j {
                let flipped = mask ^ (1u64 << i) ^ (1u64 << j);
                let jdx = basis
                    .index_of(flipped)
                    .expect("bond flip preserves total magnetization");
                trips.push((jdx, idx, Complex64::new(couplings.jxy[b], 0.0)));
            }
        }
        trips.push((idx, idx, Complex64::new(diag, 0.0)));
    }
    let h = SparseOperator::from_triplets(dim, dim, &trips)?;
    h.assert_hermitian(crate::operator::HERMITICITY_TOL)?;
    Ok(h)
}

/// Parameters of a spinful lattice-fermion Hamiltonian
/// `H = -sum_b t_b sum_s (c^†_{i,s} c_{j,s} + h.c.)
///      + U sum_i n_{i,up} n_{i,down} + sum_i eps_i n_i
///      + sum_b v_b n_i n_j + sum_i B_i . S_i`
/// with bare-Pauli on-site spin operators.
#[derive(Debug, Clone)]
pub struct HubbardParams {
    /// Hopping per bond.
    pub t: Vec<f64>,
    /// On-site interaction.
    pub u: f64,
    /// On-site potential per site.
    pub eps: Vec<f64>,
    /// Density-density interaction per bond.
    pub v: Vec<f64>,
    /// Zeeman field per site, coupled to the bare-Pauli spin vector.
    pub b_field: Vec<[f64; 3]>,
}

impl HubbardParams {
    pub fn uniform(lattice: &Lattice, t: f64, u: f64) -> Self {
        HubbardParams {
            t: vec![t; lattice.bonds().len()],
            u,
            eps: vec![0.0; lattice.n_sites()],
            v: vec![0.0; lattice.bonds().len()],
            b_field: vec![[0.0; 3]; lattice.n_sites()],
        }
    }

    /// Certified bound `max_b |t_b|`.
    pub fn t_max(&self) -> f64 {
        self.t.iter().map(|t| t.abs()).fold(0.0, f64::max)
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        let nb = lattice.bonds().len();
        let ns = lattice.n_sites();
        if self.t.len() != nb || self.v.len() != nb {
            return Err(Error::Model("bond parameter lists must cover every bond".into()));
        }
        if self.eps.len() != ns || self.b_field.len() != ns {
            return Err(Error::Model("site parameter lists must cover every site".into()));
        }
        Ok(())
    }
}

/// Assemble the fermion Hamiltonian inside a fixed particle-number sector.
pub fn assemble_hubbard(
    lattice: &Lattice,
    params: &HubbardParams,
    basis: &FermionSectorBasis,
) -> Result<SparseOperator> {
    if basis.n_sites() != lattice.n_sites() {
        return Err(Error::Model(format!(
            "basis covers {} sites but the lattice has {}",
            basis.n_sites(),
            lattice.n_sites()
        )));
    }
    params.validate(lattice)?;
    let dim = basis.dim();
    let mut h = SparseOperator::zero(dim, dim);
    for (b, &(i, j)) in lattice.bonds().iter().enumerate() {
        if params.t[b] != 0.0 {
            for spin in [Spin::Up, Spin::Down] {
                let hop = basis.op_hop(i, j, spin)?;
                h = h.add(&hop.scaled(Complex64::new(-params.t[b], 0.0)))?;
            }
        }
        if params.v[b] != 0.0 {
            let ninj = basis.op_site_number(i)?.matmul(&basis.op_site_number(j)?)?;
            h = h.add(&ninj.scaled(Complex64::new(params.v[b], 0.0)))?;
        }
    }
    for site in 0..lattice.n_sites() {
        if params.u != 0.0 {
            let nu = basis.op_mode_number(mode_index(site, Spin::Up))?;
            let nd = basis.op_mode_number(mode_index(site, Spin::Down))?;
            h = h.add(&nu.matmul(&nd)?.scaled(Complex64::new(params.u, 0.0)))?;
        }
        if params.eps[site] != 0.0 {
            h = h.add(
                &basis
                    .op_site_number(site)?
                    .scaled(Complex64::new(params.eps[site], 0.0)),
            )?;
        }
        let [bx, by, bz] = params.b_field[site];
        if bx != 0.0 || by != 0.0 {
            let (sx, sy) = basis.op_pauli_xy(site)?;
            h = h.add(&sx.scaled(Complex64::new(bx, 0.0)))?;
            h = h.add(&sy.scaled(Complex64::new(by, 0.0)))?;
        }
        if bz != 0.0 {
            h = h.add(&basis.op_pauli_z(site)?.scaled(Complex64::new(bz, 0.0)))?;
        }
    }
    h.assert_hermitian(crate::operator::HERMITICITY_TOL)?;
    Ok(h)
}
