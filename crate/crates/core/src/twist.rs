//! Imaginary gauge twist: the radial profile, diagonal gauge operators,
//! annulus perturbations K and L, and the closed-form norm bounds they are
//! certified against.
//!
//! The profile vanishes outside radius `R` of the chosen center `m`,
//! interpolates as `theta(r) = R^(1-D/2) ((r/R)^kappa - 1)` for
//! `1 <= r <= R`, and takes the `r = 1` value at the center itself, so
//! bonds incident to `m` carry no twist. Conjugating the Hamiltonian by
//! `G(2a) = diag(exp[-2a * sum_i theta_i m_i])` is exactly `H + K + iL`
//! with `K` and `L` supported on the annulus bonds.

use crate::error::{Error, Result};
use crate::hilbert::{FermionSectorBasis, SpinSectorBasis};
use crate::lattice::{DimensionEstimate, Lattice};
use crate::model::{XxzCouplings, PAIR_MINUS_NORM, PAIR_PLUS_NORM, SZ_PAIR_NORM};
use crate::operator::SparseOperator;
use num_complex::Complex64;

/// Largest admissible magnitude for any exponent fed to `exp` inside gauge
/// weights; beyond this the result would overflow or denormalize.
pub const GAUGE_EXPONENT_LIMIT: f64 = 600.0;

/// Radial twist profile around a center site.
#[derive(Debug, Clone)]
pub struct TwistProfile {
    pub center: usize,
    pub radius: usize,
    pub kappa: f64,
    /// Certified sphere-growth dimension of the lattice.
    pub d: f64,
    /// Certified sphere-growth constant.
    pub c0: f64,
    /// Per-site twist values.
    pub theta: Vec<f64>,
    /// Graph distances from the center.
    pub dist: Vec<usize>,
}

impl TwistProfile {
    pub fn theta(&self, site: usize) -> f64 {
        self.theta[site]
    }

    /// `theta_i - theta_j` oriented from the closer endpoint `i`.
    pub fn delta(&self, i: usize, j: usize) -> f64 {
        self.theta[i] - self.theta[j]
    }

    /// Twist value at the center (equal to the profile at distance 1).
    pub fn theta_center(&self) -> f64 {
        self.theta[self.center]
    }
}

/// Admissible open interval for the profile exponent at dimension `d`.
pub fn kappa_window(d: f64) -> (f64, f64) {
    (1.0 - d / 2.0, 1.5 - d / 2.0)
}

/// Midpoint default `kappa = 5/4 - D/2`.
pub fn default_kappa(d: f64) -> f64 {
    1.25 - d / 2.0
}

/// Build the radial twist profile and certify its bond-Lipschitz bound.
///
/// Requires a certified dimension `1 <= D < 2` (flagged lattices are
/// rejected) and `kappa` strictly inside `(1 - D/2, 3/2 - D/2)`. Every
/// bond is checked against `|theta_i - theta_j| <=
/// kappa R^(1 - D/2 - kappa) r^(kappa - 1) <= 1` with `r` the closer
/// endpoint distance.
pub fn build_theta(
    lattice: &Lattice,
    estimate: &DimensionEstimate,
    center: usize,
    radius: usize,
    kappa: Option<f64>,
) -> Result<TwistProfile> {
    if center >= lattice.n_sites() {
        return Err(Error::Config(format!("twist center {center} is not a lattice site")));
    }
    if estimate.flagged || estimate.d < 1.0 {
        return Err(Error::Config(format!(
            "certified dimension {:.4} is outside theorem scope (requires 1 <= D < 2)",
            estimate.d
        )));
    }
    if radius < 2 {
        return Err(Error::Config(format!(
            "twist radius must be at least 2, got {radius}"
        )));
    }
    let d = estimate.d;
    let (lo, hi) = kappa_window(d);
    let kappa = kappa.unwrap_or_else(|| default_kappa(d));
    if kappa <= lo || kappa >= hi {
        return Err(Error::Config(format!(
            "profile exponent {kappa} lies outside the open admissible window ({lo}, {hi}) at dimension {d}"
        )));
    }
    let dist = lattice.distances_from(center)?.dist;
    let r_f = radius as f64;
    let prefactor = r_f.powf(1.0 - d / 2.0);
    let theta: Vec<f64> = dist
        .iter()
        .map(|&r| {
            if r == 0 {
                prefactor * (r_f.powf(-kappa) - 1.0)
            } else if r <= radius {
                prefactor * ((r as f64 / r_f).powf(kappa) - 1.0)
            } else {
                0.0
            }
        })
        .collect();

    // Theorem check: per-bond Lipschitz bound, itself bounded by 1.
    let lipschitz_prefactor = kappa * r_f.powf(1.0 - d / 2.0 - kappa);
    if lipschitz_prefactor > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "profile Lipschitz prefactor {lipschitz_prefactor} exceeds 1; admissibility violated"
        )));
    }
    for &(i, j) in lattice.bonds() {
        let r = dist[i].min(dist[j]).max(1);
        let bound = lipschitz_prefactor * (r as f64).powf(kappa - 1.0);
        let delta = (theta[i] - theta[j]).abs();
        if delta > bound * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Config(format!(
                "bond ({i}, {j}) violates the profile Lipschitz bound: {delta} > {bound}"
            )));
        }
    }
    Ok(TwistProfile {
        center,
        radius,
        kappa,
        d,
        c0: estimate.c0,
        theta,
        dist,
    })
}

// ---------------------------------------------------------------------------
// Diagonal gauge
// ---------------------------------------------------------------------------

/// Diagonal gauge `G(a) = diag(exp[-a w])` kept in log-domain, where the
/// per-configuration weight is `w = sum_i theta_i m_i` for spins
/// (`m_i = +-1/2`) or `w = sum_i theta_i n_i` for fermions.
#[derive(Debug, Clone)]
pub struct DiagonalGauge {
    weights: Vec<f64>,
}

impl DiagonalGauge {
    pub fn for_spins(basis: &SpinSectorBasis, theta: &[f64]) -> Result<Self> {
        if theta.len() != basis.n_sites() {
            return Err(Error::Config("twist profile does not cover every site".into()));
        }
        Ok(DiagonalGauge {
            weights: (0..basis.dim()).map(|i| basis.weighted_sz(i, theta)).collect(),
        })
    }

    pub fn for_fermions(basis: &FermionSectorBasis, theta: &[f64]) -> Result<Self> {
        if theta.len() != basis.n_sites() {
            return Err(Error::Config("twist profile does not cover every site".into()));
        }
        Ok(DiagonalGauge {
            weights: (0..basis.dim())
                .map(|i| basis.weighted_occupation(i, theta))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Log-domain weights `w` with `G(a) = diag(exp[-a w])`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Similarity transform `G(a)^-1 A G(a)`: entry `(r, c)` is scaled by
    /// `exp[a (w_r - w_c)]`. Exponents beyond `GAUGE_EXPONENT_LIMIT` abort
    /// with an overflow error instead of returning infinities.
    pub fn conjugate(&self, op: &SparseOperator, alpha: f64) -> Result<SparseOperator> {
        gauge_conjugate_rect(op, &self.weights, &self.weights, alpha)
    }

    /// `G(a) v` computed entrywise in log-domain.
    pub fn apply(&self, v: &nalgebra::DVector<Complex64>, alpha: f64) -> Result<nalgebra::DVector<Complex64>> {
        self.scale_vector(v, -alpha)
    }

    /// `G(a)^-1 v`.
    pub fn apply_inverse(
        &self,
        v: &nalgebra::DVector<Complex64>,
        alpha: f64,
    ) -> Result<nalgebra::DVector<Complex64>> {
        self.scale_vector(v, alpha)
    }

    fn scale_vector(
        &self,
        v: &nalgebra::DVector<Complex64>,
        sign_alpha: f64,
    ) -> Result<nalgebra::DVector<Complex64>> {
        if v.len() != self.weights.len() {
            return Err(Error::Config("vector dimension does not match the gauge".into()));
        }
        let mut out = v.clone();
        for (x, &w) in out.iter_mut().zip(&self.weights) {
            let e = sign_alpha * w;
            if e.abs() > GAUGE_EXPONENT_LIMIT {
                return Err(Error::Overflow(format!(
                    "gauge exponent {e:.3e} exceeds the overflow guard"
                )));
            }
            *x *= Complex64::new(e.exp(), 0.0);
        }
        Ok(out)
    }
}

/// Rectangular similarity scaling `G_row(a)^-1 A G_col(a)` for operators
/// between two sectors, each with its own gauge weights.
pub fn gauge_conjugate_rect(
    op: &SparseOperator,
    row_weights: &[f64],
    col_weights: &[f64],
    alpha: f64,
) -> Result<SparseOperator> {
    if op.nrows() != row_weights.len() || op.ncols() != col_weights.len() {
        return Err(Error::Config("gauge weights do not match the operator shape".into()));
    }
    let mut overflow: Option<f64> = None;
    let out = op.map_entries(|r, c, v| {
        let e = alpha * (row_weights[r] - col_weights[c]);
        if e.abs() > GAUGE_EXPONENT_LIMIT {
            overflow = Some(e);
            v
        } else {
            v * Complex64::new(e.exp(), 0.0)
        }
    });
    if let Some(e) = overflow {
        return Err(Error::Overflow(format!(
            "gauge exponent {e:.3e} exceeds the overflow guard"
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Annulus and the twist perturbations
// ---------------------------------------------------------------------------

/// A lattice bond inside the twist annulus, oriented from its closer
/// endpoint.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusBond {
    /// Index into `lattice.bonds()`.
    pub bond: usize,
    /// Endpoint closer to the twist center.
    pub closer: usize,
    /// Endpoint farther from the twist center.
    pub farther: usize,
    /// Distance of the closer endpoint from the center.
    pub r: usize,
}

/// Bonds whose closer endpoint lies at distance `1 ..= R-1` from the twist
/// center. Bonds incident to the center and bonds at or beyond the cutoff
/// carry no twist difference and are excluded.
pub fn annulus_bonds(lattice: &Lattice, profile: &TwistProfile) -> Vec<AnnulusBond> {
    let mut out = Vec::new();
    for (b, &(i, j)) in lattice.bonds().iter().enumerate() {
        let (closer, farther) = if profile.dist[i] <= profile.dist[j] {
            (i, j)
        } else {
            (j, i)
        };
        let r = profile.dist[closer];
        if r >= 1 && r + 1 <= profile.radius {
            out.push(AnnulusBond {
                bond: b,
                closer,
                farther,
                r,
            });
        }
    }
    out
}

/// The twist perturbations at strength `alpha`:
/// `K = sum_A Jxy_b (cosh(2 a delta_b) - 1) (S+_i S-_j + S-_i S+_j)` (real
/// symmetric) and
/// `L = -i sum_A Jxy_b sinh(2 a delta_b) (S+_i S-_j - S-_i S+_j)`
/// (hermitian with purely imaginary entries), with `delta_b` the twist
/// difference oriented from the closer endpoint. They satisfy
/// `G(2a)^-1 H G(2a) = H + K + iL` exactly.
pub fn build_kl(
    lattice: &Lattice,
    couplings: &XxzCouplings,
    basis: &SpinSectorBasis,
    profile: &TwistProfile,
    alpha: f64,
) -> Result<(SparseOperator, SparseOperator)> {
    couplings.validate(lattice)?;
    if basis.n_sites() != lattice.n_sites() {
        return Err(Error::Model("basis and lattice site counts differ".into()));
    }
    let dim = basis.dim();
    let mut k = SparseOperator::zero(dim, dim);
    let mut l = SparseOperator::zero(dim, dim);
    for ab in annulus_bonds(lattice, profile) {
        let delta = profile.delta(ab.closer, ab.farther);
        let jxy = couplings.jxy[ab.bond];
        let arg = 2.0 * alpha * delta;
        if arg.abs() > GAUGE_EXPONENT_LIMIT {
            return Err(Error::Overflow(format!(
                "twist bond exponent {arg:.3e} exceeds the overflow guard"
            )));
        }
        let pm = basis.op_pair_pm(ab.closer, ab.farther)?;
        let mp = basis.op_pair_pm(ab.farther, ab.closer)?;
        let flip = pm.add(&mp)?;
        let circ = pm.sub(&mp)?;
        k = k.add(&flip.scaled(Complex64::new(jxy * (arg.cosh() - 1.0), 0.0)))?;
        l = l.add(&circ.scaled(Complex64::new(0.0, -jxy * arg.sinh())))?;
    }
    k.assert_hermitian(crate::operator::HERMITICITY_TOL)?;
    l.assert_hermitian(crate::operator::HERMITICITY_TOL)?;
    Ok((k, l))
}

/// `H + K + iL`: the similarity-transformed Hamiltonian, real but no longer
/// symmetric.
pub fn twisted_hamiltonian(
    h: &SparseOperator,
    k: &SparseOperator,
    l: &SparseOperator,
) -> Result<SparseOperator> {
    h.add(k)?.add(&l.scaled(Complex64::new(0.0, 1.0)))
}

/// `[L, [H, L]]`.
pub fn double_commutator(h: &SparseOperator, l: &SparseOperator) -> Result<SparseOperator> {
    let inner = crate::operator::commutator(h, l)?;
    crate::operator::commutator(l, &inner)
}

// ---------------------------------------------------------------------------
// Closed-form lemma bounds
// ---------------------------------------------------------------------------

/// Outcome of one lemma inequality `lhs <= rhs`.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl LemmaCheck {
    pub fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        LemmaCheck {
            name,
            lhs,
            rhs,
            margin,
            pass: lhs <= rhs + 1e-12 * rhs.abs().max(1.0),
        }
    }
}

/// Closed-form bound on `||K||`:
/// `Jxy_max ||flip|| C0^2 (cosh 2a - 1) (2 kappa + D - 1)/(2 kappa + D - 2)`.
pub fn lemma_k_rhs(jxy_max: f64, c0: f64, d: f64, kappa: f64, alpha: f64) -> f64 {
    jxy_max
        * PAIR_PLUS_NORM
        * c0
        * c0
        * ((2.0 * alpha).cosh() - 1.0)
        * (2.0 * kappa + d - 1.0)
        / (2.0 * kappa + d - 2.0)
}

/// Closed-form bound on `||L||`:
/// `Jxy_max ||circ|| C0^2 |sinh 2a| (1 + R^(D/2)/(kappa + D - 1))`.
pub fn lemma_l_rhs(jxy_max: f64, c0: f64, d: f64, kappa: f64, radius: usize, alpha: f64) -> f64 {
    jxy_max
        * PAIR_MINUS_NORM
        * c0
        * c0
        * (2.0 * alpha).sinh().abs()
        * (1.0 + (radius as f64).powf(d / 2.0) / (kappa + d - 1.0))
}

/// Closed-form bound on `||[L, [H, L]]||`:
/// `C1 (sinh 2a)^2 (2 kappa + D - 1)/(2 kappa + D - 2)`.
pub fn lemma_double_rhs(c1: f64, d: f64, kappa: f64, alpha: f64) -> f64 {
    let s = (2.0 * alpha).sinh();
    c1 * s * s * (2.0 * kappa + d - 1.0) / (2.0 * kappa + d - 2.0)
}

/// Alpha-independent constant certified by graph enumeration:
/// with `w_b = |Jxy_b| |delta_b|` over annulus bonds,
/// `n_b` the number of lattice bonds sharing an endpoint with `b`, and the
/// inner sum running over annulus bonds touching the radius-1 ball around
/// `b`'s endpoints,
/// `Q = 4 ||circ||^2 h_max sum_b n_b w_b sum_(c ~ B1(b)) w_c`
/// satisfies `||[L,[H,L]]|| <= Q (sinh 2a)^2` for every `alpha`; the
/// returned constant is `C1 = Q (2 kappa + D - 2)/(2 kappa + D - 1)` so
/// that the closed-form bound reproduces exactly `Q (sinh 2a)^2`.
pub fn certified_c1(
    lattice: &Lattice,
    couplings: &XxzCouplings,
    profile: &TwistProfile,
) -> Result<f64> {
    couplings.validate(lattice)?;
    let h_max = couplings.jxy_max() * PAIR_PLUS_NORM + couplings.jz_max() * SZ_PAIR_NORM;
    let annulus = annulus_bonds(lattice, profile);
    let bonds = lattice.bonds();
    let mut q = 0.0;
    for ab in &annulus {
        let w_b = couplings.jxy[ab.bond].abs() * profile.delta(ab.closer, ab.farther).abs();
        if w_b == 0.0 {
            continue;
        }
        // bonds sharing an endpoint with b (b itself included)
        let n_b = bonds
            .iter()
            .filter(|&&(x, y)| {
                x == ab.closer || x == ab.farther || y == ab.closer || y == ab.farther
            })
            .count() as f64;
        // radius-1 ball around b's endpoints
        let mut ball: Vec<usize> = vec![ab.closer, ab.farther];
        ball.extend_from_slice(lattice.neighbors(ab.closer));
        ball.extend_from_slice(lattice.neighbors(ab.farther));
        ball.sort_unstable();
        ball.dedup();
        let inner: f64 = annulus
            .iter()
            .filter(|c| {
                ball.binary_search(&c.closer).is_ok() || ball.binary_search(&c.farther).is_ok()
            })
            .map(|c| couplings.jxy[c.bond].abs() * profile.delta(c.closer, c.farther).abs())
            .sum();
        q += n_b * w_b * inner;
    }
    q *= 4.0 * PAIR_MINUS_NORM * PAIR_MINUS_NORM * h_max;
    Ok(q * (2.0 * profile.kappa + profile.d - 2.0) / (2.0 * profile.kappa + profile.d - 1.0))
}

/// Smallest constant that would make the closed-form double-commutator
/// bound tight at this `alpha`:
/// `C1_min = lhs (2 kappa + D - 2) / ((sinh 2a)^2 (2 kappa + D - 1))`.
pub fn minimal_c1(lhs: f64, d: f64, kappa: f64, alpha: f64) -> f64 {
    let s = (2.0 * alpha).sinh();
    lhs * (2.0 * kappa + d - 2.0) / (s * s * (2.0 * kappa + d - 1.0))
}
