//! Contour-integral construction of the twisted ground projector and the
//! resolvent-norm certificates behind it.
//!
//! The twisted Hamiltonian `H' = H + K + iL` is real but non-symmetric. Its
//! ground projector is recovered as a Riesz contour integral of the resolvent
//! over a rectangle enclosing exactly the ground manifold, and compared
//! against the direct similarity transform of the hermitian projector. The
//! module also evaluates the gap-margin function `f(a)`, searches the largest
//! admissible twist strength `a0`, samples exact resolvent norms along the
//! contour against their ceilings, and assembles the closed-form bound on
//! `||P(2a)||`.
//!
//! Everything here works inside one symmetry sector, where the sector
//! projector is the identity matrix; resolvents, projectors, and norms are
//! all sector-restricted objects.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operator::{dense_hermitian_eigen, dense_operator_norm, lanczos_extreme_psd, SparseOperator};
use crate::spectral::GroundSector;
use crate::twist::{DiagonalGauge, LemmaCheck, GAUGE_EXPONENT_LIMIT};

/// Quadrature nodes per contour segment on the first refinement level.
pub const INITIAL_NODES_PER_SEGMENT: usize = 32;
/// Hard cap on nodes per segment during adaptive doubling.
pub const MAX_NODES_PER_SEGMENT: usize = 512;
/// Acceptance threshold for the projector idempotence defect.
pub const IDEMPOTENCE_TOL: f64 = 1e-8;
/// Acceptance threshold for the change under quadrature doubling.
pub const DOUBLING_TOL: f64 = 1e-8;
/// Relative residual certification for iterative resolvent norms.
pub const RESOLVENT_NORM_TOL: f64 = 1e-10;

const SINGULAR_NODE_MSG: &str = "contour node too close to the twisted spectrum";

// ---------------------------------------------------------------------------
// Contour
// ---------------------------------------------------------------------------

/// Rectangular integration contour around the ground manifold.
///
/// The rectangle has corners `E_- +- i y0` and `E_+ +- i y0`. Both real
/// anchors sit mid-gap: `E_-` half a gap below the lowest ground energy,
/// `E_+` half a gap above the highest one, so the distance from `{E_-, E_+}`
/// to the sector spectrum is exactly `gap/2` and the rectangle encloses the
/// `q` ground energies and nothing else.
#[derive(Debug, Clone)]
pub struct Contour {
    pub e_minus: f64,
    pub e_plus: f64,
    pub y0: f64,
    /// Imaginary safety margin `y0 - ||L||`; positive by construction.
    pub c3: f64,
    /// Per-segment Gauss-Legendre node count on the first level.
    pub nodes_per_segment: usize,
}

impl Contour {
    /// Total rectangle circumference.
    pub fn perimeter(&self) -> f64 {
        2.0 * (self.e_plus - self.e_minus) + 4.0 * self.y0
    }

    /// Retry contour after a singular solve: pushes the horizontal segments
    /// away from the spectrum while keeping the mid-gap anchors `E_+-`.
    fn inflated(&self) -> Contour {
        let mut c = self.clone();
        c.y0 *= 1.5;
        c.c3 = self.c3 + 0.5 * self.y0;
        c
    }

    /// Upper-half path, counterclockwise: up the `E_+` vertical, across the
    /// top, down the `E_-` vertical. For real `H'` the lower half is the
    /// complex conjugate of this path reversed, so the full Riesz integral is
    /// `Im(integral over the upper path)/pi`.
    fn upper_segments(&self) -> [(Complex64, Complex64); 3] {
        let ep = Complex64::new(self.e_plus, 0.0);
        let ep_top = Complex64::new(self.e_plus, self.y0);
        let em_top = Complex64::new(self.e_minus, self.y0);
        let em = Complex64::new(self.e_minus, 0.0);
        [(ep, ep_top), (ep_top, em_top), (em_top, em)]
    }
}

/// Contour for a detected ground sector: `E_- = E_0 - gap/2`,
/// `E_+ = E_top + gap/2`, `y0 = ||L|| + max(1, gap)`.
pub fn choose_contour(sector: &GroundSector, l_norm: f64) -> Result<Contour> {
    if !(sector.gap > 0.0) {
        return Err(Error::NoGap("contour requested without a positive sector gap".into()));
    }
    if !(l_norm >= 0.0) || !l_norm.is_finite() {
        return Err(Error::Config(format!("invalid twist generator norm {l_norm}")));
    }
    let y0 = l_norm + 1.0f64.max(sector.gap);
    Ok(Contour {
        e_minus: sector.e0 - 0.5 * sector.gap,
        e_plus: sector.e_top() + 0.5 * sector.gap,
        y0,
        c3: y0 - l_norm,
        nodes_per_segment: INITIAL_NODES_PER_SEGMENT,
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` via the symmetric
/// eigendecomposition of the Jacobi matrix (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut jac = DMatrix::zeros(m, m);
    for i in 1..m {
        let k = i as f64;
        let b = k / (4.0 * k * k - 1.0).sqrt();
        jac[(i - 1, i)] = b;
        jac[(i, i - 1)] = b;
    }
    let (vals, vecs) = crate::operator::sym_eigen_sorted(jac);
    let weights = vecs.iter().map(|v| 2.0 * v[0] * v[0]).collect();
    (vals, weights)
}

// ---------------------------------------------------------------------------
// Hessenberg resolvent solver
// ---------------------------------------------------------------------------

/// Shifted linear solves `(z - H')x = b` for a fixed real matrix and many
/// complex shifts.
///
/// One orthogonal Hessenberg reduction `H' = Q T Q^t` is done up front; each
/// shift then needs only an `O(n^2)` elimination of the subdiagonal of
/// `z - T`. Orthogonality of `Q` also makes singular values shift-invariant:
/// `sigma_min(z - H') = sigma_min(z - T)`, so norm certification can stay in
/// `T` coordinates.
pub struct HessenbergSolver {
    q: DMatrix<f64>,
    t: DMatrix<f64>,
    dim: usize,
    scale: f64,
}

impl HessenbergSolver {
    pub fn new(h_prime: &DMatrix<f64>) -> Result<Self> {
        let n = h_prime.nrows();
        if n != h_prime.ncols() {
            return Err(Error::Model("resolvent solver needs a square matrix".into()));
        }
        if n == 0 {
            return Err(Error::Model("resolvent solver needs a nonempty matrix".into()));
        }
        let scale = h_prime.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let (q, t) = if n == 1 {
            (DMatrix::identity(1, 1), h_prime.clone())
        } else {
            let hess = nalgebra::linalg::Hessenberg::new(h_prime.clone());
            let q = hess.q();
            let t = hess.h();
            (q, t)
        };
        Ok(HessenbergSolver { q, t, dim: n, scale })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eliminate the subdiagonal of `z - T` with adjacent-row partial
    /// pivoting. Fails when a pivot collapses, i.e. `z` is numerically on
    /// the twisted spectrum.
    pub fn factor(&self, z: Complex64) -> Result<FactoredResolvent> {
        let n = self.dim;
        let mut u = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                u[r * n + c] = -Complex64::new(self.t[(r, c)], 0.0);
            }
            u[r * n + r] += z;
        }
        let piv_floor = 1e-13 * (self.scale + z.norm()).max(1e-300);
        let mut mults = Vec::with_capacity(n.saturating_sub(1));
        let mut swaps = Vec::with_capacity(n.saturating_sub(1));
        for j in 0..n.saturating_sub(1) {
            let swap = u[(j + 1) * n + j].norm() > u[j * n + j].norm();
            if swap {
                for c in j..n {
                    u.swap(j * n + c, (j + 1) * n + c);
                }
            }
            let pivot = u[j * n + j];
            if pivot.norm() < piv_floor {
                return Err(Error::NonConvergence(SINGULAR_NODE_MSG.into()));
            }
            let m = u[(j + 1) * n + j] / pivot;
            u[(j + 1) * n + j] = Complex64::new(0.0, 0.0);
            for c in j + 1..n {
                let s = u[j * n + c];
                u[(j + 1) * n + c] -= m * s;
            }
            mults.push(m);
            swaps.push(swap);
        }
        if u[(n - 1) * n + (n - 1)].norm() < piv_floor {
            return Err(Error::NonConvergence(SINGULAR_NODE_MSG.into()));
        }
        Ok(FactoredResolvent { u, mults, swaps, dim: n })
    }

    /// `(z - H')^-1 b` in the original coordinates.
    pub fn solve(&self, z: Complex64, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let fact = self.factor(z)?;
        Ok(self.from_t_coords(&fact.solve_vec(&self.to_t_coords(b))))
    }

    fn to_t_coords(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let re = v.map(|x| x.re);
        let im = v.map(|x| x.im);
        let tre = self.q.tr_mul(&re);
        let tim = self.q.tr_mul(&im);
        DVector::from_fn(self.dim, |i, _| Complex64::new(tre[i], tim[i]))
    }

    fn from_t_coords(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let re = v.map(|x| x.re);
        let im = v.map(|x| x.im);
        let ore = &self.q * re;
        let oim = &self.q * im;
        DVector::from_fn(self.dim, |i, _| Complex64::new(ore[i], oim[i]))
    }

    /// `Q M Q^t` for a real matrix assembled in `T` coordinates.
    fn to_original(&self, m_t: &DMatrix<f64>) -> DMatrix<f64> {
        &self.q * m_t * self.q.transpose()
    }
}

/// LU-style factorization of one shifted Hessenberg matrix `z - T`,
/// supporting plain, adjoint, and full-inverse solves in `O(n^2)`, `O(n^2)`,
/// and `O(n^3)` respectively.
pub struct FactoredResolvent {
    /// Upper-triangular factor, row-major.
    u: Vec<Complex64>,
    mults: Vec<Complex64>,
    swaps: Vec<bool>,
    dim: usize,
}

impl FactoredResolvent {
    fn apply_elimination_vec(&self, b: &mut [Complex64]) {
        for j in 0..self.dim.saturating_sub(1) {
            if self.swaps[j] {
                b.swap(j, j + 1);
            }
            let s = b[j];
            b[j + 1] -= self.mults[j] * s;
        }
    }

    fn back_substitute_vec(&self, b: &mut [Complex64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut acc = b[i];
            for c in i + 1..n {
                acc -= self.u[i * n + c] * b[c];
            }
            b[i] = acc / self.u[i * n + i];
        }
    }

    /// `(z - T)^-1 b`.
    pub fn solve_vec(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let mut x: Vec<Complex64> = b.iter().copied().collect();
        self.apply_elimination_vec(&mut x);
        self.back_substitute_vec(&mut x);
        DVector::from_vec(x)
    }

    /// `(z - T)^-dagger b`, reusing the same factors.
    pub fn solve_adjoint_vec(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.dim;
        let mut y: Vec<Complex64> = b.iter().copied().collect();
        // Forward substitution with U^dagger (lower triangular).
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.u[j * n + i].conj() * y[j];
            }
            y[i] = acc / self.u[i * n + i].conj();
        }
        // Undo the elimination sequence, transposed: descending j, add-back
        // with the conjugate multiplier, then the recorded swap.
        for j in (0..n.saturating_sub(1)).rev() {
            let s = y[j + 1];
            y[j] -= self.mults[j].conj() * s;
            if self.swaps[j] {
                y.swap(j, j + 1);
            }
        }
        DVector::from_vec(y)
    }

    /// Full `(z - T)^-1`, row-major. The elimination phase touches one row
    /// pair per column; the cost is the `O(n^3)` back-substitution.
    pub fn inverse(&self) -> Vec<Complex64> {
        let n = self.dim;
        let mut x = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            x[i * n + i] = Complex64::new(1.0, 0.0);
        }
        for j in 0..n.saturating_sub(1) {
            if self.swaps[j] {
                let (top, bottom) = x.split_at_mut((j + 1) * n);
                top[j * n..(j + 1) * n].swap_with_slice(&mut bottom[..n]);
            }
            let m = self.mults[j];
            let (top, bottom) = x.split_at_mut((j + 1) * n);
            let src = &top[j * n..(j + 1) * n];
            let dst = &mut bottom[..n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= m * s;
            }
        }
        for i in (0..n).rev() {
            let (above, below) = x.split_at_mut((i + 1) * n);
            let row_i = &mut above[i * n..(i + 1) * n];
            for c in i + 1..n {
                let coeff = self.u[i * n + c];
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                let row_c = &below[(c - i - 1) * n..(c - i) * n];
                for (d, s) in row_i.iter_mut().zip(row_c) {
                    *d -= coeff * s;
                }
            }
            let inv_pivot = Complex64::new(1.0, 0.0) / self.u[i * n + i];
            for d in row_i.iter_mut() {
                *d *= inv_pivot;
            }
        }
        x
    }
}

/// Assemble the dense real `H' = H + K + iL` from the sparse pieces. `H + K`
/// must be real symmetric and `L` purely imaginary hermitian, so the sum is
/// real (the `iL` term contributes `-Im L`).
pub fn build_h_prime(
    h: &SparseOperator,
    k: &SparseOperator,
    l: &SparseOperator,
) -> Result<DMatrix<f64>> {
    let hk = h.add(k)?;
    if !hk.is_real(1e-12) {
        return Err(Error::Model("H + K has non-real entries".into()));
    }
    let hk_d = hk.to_dense();
    let l_d = l.to_dense();
    let l_scale = l.max_abs().max(1.0);
    if l_d.iter().any(|v| v.re.abs() > 1e-12 * l_scale) {
        return Err(Error::Model("twist generator L has non-imaginary entries".into()));
    }
    let n = hk_d.nrows();
    Ok(DMatrix::from_fn(n, n, |r, c| hk_d[(r, c)].re - l_d[(r, c)].im))
}

// ---------------------------------------------------------------------------
// Contour projector
// ---------------------------------------------------------------------------

/// Ground projector of the twisted Hamiltonian, from the contour quadrature.
#[derive(Debug, Clone)]
pub struct TwistedProjector {
    /// Real projector matrix in the sector basis.
    pub matrix: DMatrix<f64>,
    /// Exact spectral norm of `matrix`.
    pub norm: f64,
    /// Operator-norm bound (Frobenius) on `P^2 - P`.
    pub idempotence_defect: f64,
    /// Frobenius change under the final node doubling, an upper bound on the
    /// norm change.
    pub quadrature_error: f64,
    /// Accepted node count per contour segment.
    pub nodes_per_segment: usize,
}

impl TwistedProjector {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Riesz contour integral `P(2a) = (1/2 pi i) \oint (z - H')^-1 dz` over the
/// contour rectangle, restricted to the sector (where the magnetization
/// projector is the identity).
///
/// Nodes per segment start at `contour.nodes_per_segment` and double until
/// both the idempotence defect and the doubling change fall below `1e-8`.
/// A solve that lands on the twisted spectrum inflates the contour once and
/// retries; a second singular solve is an error.
pub fn contour_project(solver: &HessenbergSolver, contour: &Contour) -> Result<TwistedProjector> {
    match contour_project_attempt(solver, contour) {
        Err(Error::NonConvergence(msg)) if msg == SINGULAR_NODE_MSG => {
            contour_project_attempt(solver, &contour.inflated())
        }
        other => other,
    }
}

fn contour_project_attempt(
    solver: &HessenbergSolver,
    contour: &Contour,
) -> Result<TwistedProjector> {
    let mut nodes = contour.nodes_per_segment;
    let mut prev: Option<(DMatrix<f64>, usize)> = None;
    while nodes <= MAX_NODES_PER_SEGMENT {
        let p = quadrature_projector(solver, contour, nodes)?;
        if let Some((p_prev, _)) = &prev {
            let change = (&p - p_prev).norm();
            let defect = (&p * &p - &p).norm();
            if change < DOUBLING_TOL && defect < IDEMPOTENCE_TOL {
                let matrix = solver.to_original(&p);
                let norm = dense_operator_norm(&matrix.map(|x| Complex64::new(x, 0.0)));
                return Ok(TwistedProjector {
                    matrix,
                    norm,
                    idempotence_defect: defect,
                    quadrature_error: change,
                    nodes_per_segment: nodes,
                });
            }
        }
        prev = Some((p, nodes));
        nodes *= 2;
    }
    Err(Error::NonConvergence(format!(
        "contour quadrature did not stabilize within {MAX_NODES_PER_SEGMENT} nodes per segment"
    )))
}

/// One quadrature level, assembled in `T` coordinates: `Im(sum)/pi` over the
/// upper-half path (the real-matrix symmetry supplies the lower half).
fn quadrature_projector(
    solver: &HessenbergSolver,
    contour: &Contour,
    nodes_per_segment: usize,
) -> Result<DMatrix<f64>> {
    let n = solver.dim;
    let (ts, ws) = gauss_legendre(nodes_per_segment);
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for (a, b) in contour.upper_segments() {
        let center = (a + b) * Complex64::new(0.5, 0.0);
        let half = (b - a) * Complex64::new(0.5, 0.0);
        for (&t, &w) in ts.iter().zip(&ws) {
            let z = center + half * Complex64::new(t, 0.0);
            let coeff = half * Complex64::new(w, 0.0);
            let inv = solver.factor(z)?.inverse();
            for (dst, src) in acc.iter_mut().zip(&inv) {
                *dst += coeff * src;
            }
        }
    }
    Ok(DMatrix::from_fn(n, n, |r, c| acc[r * n + c].im / std::f64::consts::PI))
}

/// Direct-oracle route to the twisted projector: `G(2a)^-1 P G(2a)` with
/// `P = sum_k v_k v_k^dagger` over the detected ground manifold.
pub fn direct_twisted_projector(
    sector: &GroundSector,
    gauge: &DiagonalGauge,
    two_alpha: f64,
) -> Result<DMatrix<Complex64>> {
    let n = gauge.dim();
    if sector.vectors.iter().any(|v| v.len() != n) {
        return Err(Error::Config("ground vectors do not match the gauge dimension".into()));
    }
    let w = gauge.weights();
    let mut p = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for v in &sector.vectors {
        for r in 0..n {
            for c in 0..n {
                p[(r, c)] += v[r] * v[c].conj();
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            let e = two_alpha * (w[r] - w[c]);
            if e.abs() > GAUGE_EXPONENT_LIMIT {
                return Err(Error::Overflow(format!(
                    "gauge exponent {e:.3e} exceeds the overflow guard"
                )));
            }
            p[(r, c)] *= Complex64::new(e.exp(), 0.0);
        }
    }
    Ok(p)
}

/// Exact `||G(2a)^-1 P G(2a)||` through the rank-`q` reduction: the nonzero
/// eigenvalues of `X^dagger X` equal those of `(V^dagger G^2 V)(V^dagger
/// G^-2 V)`, evaluated through a symmetric square-root split for stability.
pub fn twisted_projector_norm(
    sector: &GroundSector,
    gauge: &DiagonalGauge,
    two_alpha: f64,
) -> Result<f64> {
    let n = gauge.dim();
    let q = sector.q;
    if q == 0 {
        return Ok(0.0);
    }
    if sector.vectors.len() < q || sector.vectors.iter().any(|v| v.len() != n) {
        return Err(Error::Config("ground vectors do not match the gauge dimension".into()));
    }
    let w = gauge.weights();
    let mut m_plus = DMatrix::from_element(q, q, Complex64::new(0.0, 0.0));
    let mut m_minus = m_plus.clone();
    for r in 0..n {
        let e = 2.0 * two_alpha * w[r];
        if e.abs() > GAUGE_EXPONENT_LIMIT {
            return Err(Error::Overflow(format!(
                "gauge exponent {e:.3e} exceeds the overflow guard"
            )));
        }
        let g2 = Complex64::new((-e).exp(), 0.0);
        let g2_inv = Complex64::new(e.exp(), 0.0);
        for a in 0..q {
            let va = sector.vectors[a][r].conj();
            for b in 0..q {
                let vb = sector.vectors[b][r];
                m_plus[(a, b)] += va * g2 * vb;
                m_minus[(a, b)] += va * g2_inv * vb;
            }
        }
    }
    // S = M_-^{1/2} M_+ M_-^{1/2} is hermitian PSD with the same spectrum as
    // M_- M_+.
    let (vals, vecs) = dense_hermitian_eigen(&m_minus)?;
    let mut root = DMatrix::from_element(q, q, Complex64::new(0.0, 0.0));
    for (lam, v) in vals.iter().zip(&vecs) {
        let s = lam.max(0.0).sqrt();
        for a in 0..q {
            for b in 0..q {
                root[(a, b)] += Complex64::new(s, 0.0) * v[a] * v[b].conj();
            }
        }
    }
    let s = &root * m_plus * &root;
    let (svals, _) = dense_hermitian_eigen(&s)?;
    Ok(svals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// Gap margin f(a) and the twist-strength search
// ---------------------------------------------------------------------------

/// Margin report for one twist strength.
#[derive(Debug, Clone)]
pub struct GapMarginReport {
    pub alpha: f64,
    pub k_norm: f64,
    pub l_norm: f64,
    /// `||[L, [H, L]]||`.
    pub double_comm_norm: f64,
    /// `f(a) = sqrt(||[L,[H,L]]||/(2 gap) + 2 (spread/gap) ||L||^2)`.
    pub f: f64,
    /// `gap/2 - ||K|| - f(a)`.
    pub margin: f64,
    pub c4_required: f64,
    pub admissible: bool,
}

/// The gap-margin function `f(a)`.
pub fn f_alpha(double_comm_norm: f64, l_norm: f64, sector: &GroundSector) -> f64 {
    (double_comm_norm / (2.0 * sector.gap)
        + 2.0 * (sector.spread / sector.gap) * l_norm * l_norm)
        .max(0.0)
        .sqrt()
}

/// Norms and margin for one `(H, K, L)` triple at twist strength `alpha`.
pub fn gap_margin(
    h: &SparseOperator,
    k: &SparseOperator,
    l: &SparseOperator,
    sector: &GroundSector,
    alpha: f64,
    c4_required: f64,
) -> Result<GapMarginReport> {
    let k_norm = crate::operator::operator_norm(k)?;
    let l_norm = crate::operator::operator_norm(l)?;
    let double_comm_norm = crate::operator::operator_norm(&crate::twist::double_commutator(h, l)?)?;
    let f = f_alpha(double_comm_norm, l_norm, sector);
    let margin = 0.5 * sector.gap - k_norm - f;
    Ok(GapMarginReport {
        alpha,
        k_norm,
        l_norm,
        double_comm_norm,
        f,
        margin,
        c4_required,
        admissible: margin >= c4_required,
    })
}

/// Result of scanning the twist-strength grid.
#[derive(Debug, Clone)]
pub struct Alpha0Search {
    pub reports: Vec<GapMarginReport>,
    /// Largest grid strength whose margin clears the requirement.
    pub alpha0: Option<f64>,
    pub c4_required: f64,
}

impl Alpha0Search {
    pub fn required(&self) -> Result<f64> {
        self.alpha0
            .ok_or_else(|| Error::NoAdmissibleTwist)
    }
}

/// Default twist-strength grid `{0.05, 0.10, ..., 0.50}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

/// Scan twist strengths: for each grid `alpha` build `K`, `L` on the annulus,
/// evaluate the margin `gap/2 - ||K|| - f(alpha)`, and keep the largest
/// strength meeting `c4_required` (default `gap/8`).
#[allow(clippy::too_many_arguments)]
pub fn alpha0_search(
    lattice: &crate::lattice::Lattice,
    couplings: &crate::model::XxzCouplings,
    basis: &crate::hilbert::SpinSectorBasis,
    h: &SparseOperator,
    sector: &GroundSector,
    profile: &crate::twist::TwistProfile,
    c4_required: Option<f64>,
    grid: &[f64],
) -> Result<Alpha0Search> {
    let c4 = c4_required.unwrap_or(sector.gap / 8.0);
    if !(c4 > 0.0) {
        return Err(Error::Config(format!("margin requirement must be positive, got {c4}")));
    }
    let mut reports = Vec::with_capacity(grid.len());
    let mut alpha0 = None;
    for &alpha in grid {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("twist grid contains non-positive strength {alpha}")));
        }
        let (k, l) = crate::twist::build_kl(lattice, couplings, basis, profile, alpha)?;
        let report = gap_margin(h, &k, &l, sector, alpha, c4)?;
        if report.admissible {
            alpha0 = Some(match alpha0 {
                Some(best) if best > alpha => best,
                _ => alpha,
            });
        }
        reports.push(report);
    }
    Ok(Alpha0Search { reports, alpha0, c4_required: c4 })
}

/// Off-diagonal matrix-element bound: for random `Phi` split by the ground
/// projector into `Phi_- = P Phi` and `Phi_+ = (1-P) Phi`, verify
/// `|<Phi_+, L Phi_->| <= f ||Phi_+|| ||Phi_-||`. Returns the worst trial.
pub fn matrix_element_lemma(
    l: &SparseOperator,
    sector: &GroundSector,
    f_value: f64,
    trials: usize,
    seed: u64,
) -> Result<LemmaCheck> {
    let n = l.nrows();
    if sector.vectors.iter().any(|v| v.len() != n) {
        return Err(Error::Config("ground vectors do not match the operator dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(f64, f64)> = None;
    for _ in 0..trials.max(1) {
        let phi = DVector::from_fn(n, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let mut phi_minus = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for v in &sector.vectors {
            let c = v.dotc(&phi);
            phi_minus.axpy(c, v, Complex64::new(1.0, 0.0));
        }
        let phi_plus = &phi - &phi_minus;
        let lhs = phi_plus.dotc(&l.apply(&phi_minus)).norm();
        let rhs = f_value * phi_plus.norm() * phi_minus.norm();
        let keep = match worst {
            Some((wl, wr)) => lhs - rhs > wl - wr,
            None => true,
        };
        if keep {
            worst = Some((lhs, rhs));
        }
    }
    let (lhs, rhs) = worst.expect("at least one trial");
    Ok(LemmaCheck::new("off-diagonal matrix-element bound", lhs, rhs))
}

// ---------------------------------------------------------------------------
// Resolvent-norm ceilings along the contour
// ---------------------------------------------------------------------------

/// Which contour segment a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Vertical segment through `E_+`; ceiling `1/c4_required`.
    VerticalPlus,
    /// Vertical segment through `E_-`; ceiling `1/c4_required`.
    VerticalMinus,
    /// Horizontal segment at `Im z = y0`; ceiling `1/C3`.
    Horizontal,
}

/// One certified resolvent-norm sample against its lemma ceiling.
#[derive(Debug, Clone)]
pub struct ResolventSample {
    pub z: Complex64,
    pub segment: SegmentKind,
    pub norm: f64,
    pub ceiling: f64,
    pub margin: f64,
}

impl ResolventSample {
    pub fn pass(&self) -> bool {
        self.margin >= -1e-12 * self.ceiling.abs().max(1.0)
    }
}

/// Exact `||(H' - z)^-1||` restricted to the sector: the reciprocal smallest
/// singular value of `z - H'`, certified by a Krylov run on the inverse Gram
/// operator `(z-T)^-1 (z-T)^-dagger` built from the Hessenberg factors.
pub fn resolvent_restricted_norm(
    solver: &HessenbergSolver,
    z: Complex64,
    seed: u64,
) -> Result<f64> {
    let fact = solver.factor(z)?;
    let lam = lanczos_extreme_psd(
        solver.dim,
        |v| fact.solve_vec(&fact.solve_adjoint_vec(v)),
        RESOLVENT_NORM_TOL,
        seed,
    )?;
    Ok(lam.max(0.0).sqrt())
}

/// Sample the exact resolvent norm along the three distinct contour segments
/// (conjugation symmetry of a real `H'` covers the lower half plane) and
/// compare each value to its lemma ceiling: `1/c4_required` on the vertical
/// segments through `E_+-`, `1/C3` on the horizontal segment.
pub fn check_resolvent_lemmas(
    solver: &HessenbergSolver,
    contour: &Contour,
    c4_required: f64,
    seed: u64,
) -> Result<Vec<ResolventSample>> {
    if !(c4_required > 0.0) || !(contour.c3 > 0.0) {
        return Err(Error::Config("resolvent ceilings need positive margins".into()));
    }
    let mut samples = Vec::new();
    let vertical_fracs = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    for (kind, x) in [
        (SegmentKind::VerticalPlus, contour.e_plus),
        (SegmentKind::VerticalMinus, contour.e_minus),
    ] {
        for &fy in &vertical_fracs {
            let z = Complex64::new(x, fy * contour.y0);
            let norm = resolvent_restricted_norm(solver, z, seed)?;
            let ceiling = 1.0 / c4_required;
            samples.push(ResolventSample { z, segment: kind, norm, ceiling, margin: ceiling - norm });
        }
    }
    let horizontal_fracs = [0.0, 0.25, 0.5, 0.75, 1.0];
    for &fx in &horizontal_fracs {
        let z = Complex64::new(
            contour.e_minus + fx * (contour.e_plus - contour.e_minus),
            contour.y0,
        );
        let norm = resolvent_restricted_norm(solver, z, seed)?;
        let ceiling = 1.0 / contour.c3;
        samples.push(ResolventSample {
            z,
            segment: SegmentKind::Horizontal,
            norm,
            ceiling,
            margin: ceiling - norm,
        });
    }
    Ok(samples)
}

/// Closed-form ceiling on `||P(2a)||` assembled from the contour geometry:
/// vertical segments of length `2 y0` bounded by `1/c4_required`, horizontal
/// segments of length `E_+ - E_-` bounded by `1/C3`, divided by `2 pi`.
pub fn assembled_rhs(contour: &Contour, c4_required: f64) -> f64 {
    (2.0 * (2.0 * contour.y0) / c4_required
        + 2.0 * (contour.e_plus - contour.e_minus) / contour.c3)
        / (2.0 * std::f64::consts::PI)
}

/// Final projector-norm bound: exact `||P(2a)||` against the assembled rhs.
pub fn norm_p2alpha_bound(
    p2alpha_norm: f64,
    contour: &Contour,
    c4_required: f64,
) -> LemmaCheck {
    LemmaCheck::new(
        "twisted projector norm bound",
        p2alpha_norm,
        assembled_rhs(contour, c4_required),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SpinSectorBasis;
    use crate::lattice::{estimate_dimension, DimensionSpec, Lattice};
    use crate::model::{assemble_xxz, XxzCouplings};
    use crate::spectral::{detect_ground_sector, DetectionOptions};
    use crate::twist::{build_kl, build_theta};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// chain(n), uniform JXY=1/JZ, sector M=0, detected with the given
    /// degeneracy tolerance.
    fn chain_setup(
        n: usize,
        jz: f64,
        eps_deg: Option<f64>,
    ) -> (Lattice, XxzCouplings, SpinSectorBasis, SparseOperator, GroundSector) {
        let lattice = Lattice::chain(n, false).unwrap();
        let couplings = XxzCouplings::homogeneous(lattice.bonds().len(), 1.0, jz);
        let basis = SpinSectorBasis::new(n, 0).unwrap();
        let h = assemble_xxz(&lattice, &couplings, &basis).unwrap();
        let opts = DetectionOptions { eps_deg, ..DetectionOptions::default() };
        let sector = detect_ground_sector(&h, &opts).unwrap();
        (lattice, couplings, basis, h, sector)
    }

    #[test]
    fn gauss_legendre_is_exact_on_low_degree_polynomials() {
        let (t, w) = gauss_legendre(4);
        assert_eq!(t.len(), 4);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
        // degree-7 exactness: int x^6 = 2/7, int x^7 = 0
        let m6: f64 = t.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        let m7: f64 = t.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((m6 - 2.0 / 7.0).abs() < 1e-14, "m6 {m6}");
        assert!(m7.abs() < 1e-14);
    }

    #[test]
    fn hessenberg_solver_matches_dense_lu_on_plain_and_adjoint_solves() {
        use rand::Rng;
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let solver = HessenbergSolver::new(&a).unwrap();
        let z = c(0.3, 0.9);
        let b = DVector::from_fn(n, |i, _| c((i as f64).sin(), (i as f64 * 0.7).cos()));

        let x = solver.solve(z, &b).unwrap();
        let zma = DMatrix::from_fn(n, n, |r, cc| {
            let d = if r == cc { z } else { c(0.0, 0.0) };
            d - c(a[(r, cc)], 0.0)
        });
        let resid = (&zma * &x - &b).norm();
        assert!(resid < 1e-10, "plain solve residual {resid}");

        // Adjoint solve in T coordinates against an explicitly built system.
        let fact = solver.factor(z).unwrap();
        let bt = solver.to_t_coords(&b);
        let y = fact.solve_adjoint_vec(&bt);
        let zt = DMatrix::from_fn(n, n, |r, cc| {
            let d = if r == cc { z } else { c(0.0, 0.0) };
            d - c(solver.t[(r, cc)], 0.0)
        });
        let resid_adj = (zt.adjoint() * &y - &bt).norm();
        assert!(resid_adj < 1e-10, "adjoint solve residual {resid_adj}");
    }

    #[test]
    fn factored_inverse_agrees_with_vector_solves() {
        use rand::Rng;
        let n = 23;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let solver = HessenbergSolver::new(&a).unwrap();
        let z = c(-0.4, 1.3);
        let fact = solver.factor(z).unwrap();
        let inv = fact.inverse();
        for col in [0usize, 7, n - 1] {
            let e = DVector::from_fn(n, |i, _| if i == col { c(1.0, 0.0) } else { c(0.0, 0.0) });
            let x = fact.solve_vec(&e);
            let max_dev = (0..n)
                .map(|r| (inv[r * n + col] - x[r]).norm())
                .fold(0.0f64, f64::max);
            assert!(max_dev < 1e-11, "column {col} deviates by {max_dev}");
        }
    }

    #[test]
    fn resolvent_norm_matches_dense_singular_value_oracle() {
        // Small twisted chain; dense oracle = smallest eigenvalue of the
        // Gram matrix (z-H')^dagger (z-H').
        let (lattice, couplings, basis, h, sector) = chain_setup(6, 4.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 3, None).unwrap();
        let (k, l) = build_kl(&lattice, &couplings, &basis, &profile, 0.2).unwrap();
        let hp = build_h_prime(&h, &k, &l).unwrap();
        let solver = HessenbergSolver::new(&hp).unwrap();
        let contour = choose_contour(&sector, crate::operator::operator_norm(&l).unwrap()).unwrap();

        for z in [
            c(contour.e_plus, 0.0),
            c(contour.e_plus, contour.y0),
            c(0.5 * (contour.e_plus + contour.e_minus), contour.y0),
        ] {
            let norm = resolvent_restricted_norm(&solver, z, 3).unwrap();
            let n = hp.nrows();
            let zma = DMatrix::from_fn(n, n, |r, cc| {
                let d = if r == cc { z } else { c(0.0, 0.0) };
                d - c(hp[(r, cc)], 0.0)
            });
            let gram = zma.adjoint() * &zma;
            let (vals, _) = dense_hermitian_eigen(&gram).unwrap();
            let oracle = 1.0 / vals[0].max(0.0).sqrt();
            assert!(
                (norm - oracle).abs() <= 1e-7 * oracle,
                "norm {norm} vs oracle {oracle} at z={z}"
            );
        }
    }

    #[test]
    fn contour_anchors_sit_mid_gap_on_the_two_site_flip_model() {
        // Two sites, pure transverse coupling: sector energies -J, +J with
        // J=1, so the gap is 2 and the rectangle anchors are -2 and 0.
        let (_, _, _, _, sector) = {
            let lattice = Lattice::chain(2, false).unwrap();
            let couplings = XxzCouplings::homogeneous(1, 1.0, 0.0);
            let basis = SpinSectorBasis::new(2, 0).unwrap();
            let h = assemble_xxz(&lattice, &couplings, &basis).unwrap();
            let sector = detect_ground_sector(&h, &DetectionOptions::default()).unwrap();
            (lattice, couplings, basis, h, sector)
        };
        assert_eq!(sector.q, 1);
        let contour = choose_contour(&sector, 0.0).unwrap();
        assert!((contour.e_minus + 2.0).abs() < 1e-12);
        assert!(contour.e_plus.abs() < 1e-12);
        assert!((contour.y0 - 2.0).abs() < 1e-12);
        assert!((contour.c3 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn untwisted_contour_projector_equals_the_eigenvector_projector() {
        let (_, _, _, h, sector) = chain_setup(6, 4.0, Some(0.5));
        let hp = h.to_dense().map(|v| v.re);
        let solver = HessenbergSolver::new(&hp).unwrap();
        let contour = choose_contour(&sector, 0.0).unwrap();
        let proj = contour_project(&solver, &contour).unwrap();

        assert!(proj.idempotence_defect < IDEMPOTENCE_TOL);
        assert!(proj.quadrature_error < DOUBLING_TOL);
        assert!((proj.trace() - sector.q as f64).abs() < 1e-9, "trace {}", proj.trace());
        assert!((proj.norm - 1.0).abs() < 1e-9, "norm {}", proj.norm);

        let n = hp.nrows();
        let mut direct = DMatrix::zeros(n, n);
        for v in &sector.vectors {
            for r in 0..n {
                for cc in 0..n {
                    direct[(r, cc)] += (v[r] * v[cc].conj()).re;
                }
            }
        }
        let dev = (&proj.matrix - &direct).norm();
        assert!(dev < 1e-10, "contour vs eigenprojector deviation {dev}");
    }

    #[test]
    fn twisted_contour_projector_matches_direct_conjugation_and_trace_identity() {
        let (lattice, couplings, basis, h, sector) = chain_setup(8, 4.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 5, None).unwrap();
        let alpha = 0.2;
        let (k, l) = build_kl(&lattice, &couplings, &basis, &profile, alpha).unwrap();
        let hp = build_h_prime(&h, &k, &l).unwrap();

        // Conjugation identity guard: H' must be the exact similarity
        // transform of H under G(2 alpha).
        let gauge = DiagonalGauge::for_spins(&basis, &profile.theta).unwrap();
        let conj = gauge.conjugate(&h, 2.0 * alpha).unwrap().to_dense();
        let defect = (0..hp.nrows())
            .flat_map(|r| (0..hp.ncols()).map(move |cc| (r, cc)))
            .map(|(r, cc)| (conj[(r, cc)] - c(hp[(r, cc)], 0.0)).norm())
            .fold(0.0f64, f64::max);
        assert!(defect < 1e-10, "similarity defect {defect}");

        let solver = HessenbergSolver::new(&hp).unwrap();
        let l_norm = crate::operator::operator_norm(&l).unwrap();
        let contour = choose_contour(&sector, l_norm).unwrap();
        let proj = contour_project(&solver, &contour).unwrap();
        let direct = direct_twisted_projector(&sector, &gauge, 2.0 * alpha).unwrap();
        let dev = (direct.map(|v| v.re) - &proj.matrix).norm();
        assert!(dev < 1e-8, "contour vs direct conjugation deviation {dev}");
        let imag = direct.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
        assert!(imag < 1e-12);

        // Rank-q norm route agrees with the dense norm of the quadrature
        // matrix.
        let rank_q = twisted_projector_norm(&sector, &gauge, 2.0 * alpha).unwrap();
        assert!(
            (rank_q - proj.norm).abs() < 1e-7 * rank_q.max(1.0),
            "rank-q {rank_q} vs dense {}",
            proj.norm
        );

        // Gauge-trace identity: e^{a(theta_m - theta_n)} Tr[S+_m S-_n P(a)]
        // equals the untwisted trace, here at twist strength 2 alpha.
        let (m_site, n_site) = (1usize, 6usize);
        let flip = basis.op_pair_pm(m_site, n_site).unwrap();
        let p0 = {
            let n = hp.nrows();
            let mut p = DMatrix::from_element(n, n, c(0.0, 0.0));
            for v in &sector.vectors {
                for r in 0..n {
                    for cc in 0..n {
                        p[(r, cc)] += v[r] * v[cc].conj();
                    }
                }
            }
            p
        };
        let flip_d = flip.to_dense();
        let tr_plain = (&flip_d * &p0).trace();
        let tr_twisted = (&flip_d * proj.matrix.map(|x| c(x, 0.0))).trace();
        let phase =
            (2.0 * alpha * (profile.theta(m_site) - profile.theta(n_site))).exp();
        let dev_tr = (tr_twisted * c(phase, 0.0) - tr_plain).norm();
        assert!(dev_tr < 1e-8, "gauge trace identity defect {dev_tr}");
    }

    #[test]
    fn f_alpha_vanishes_without_twist_and_drops_the_spread_term_when_degenerate() {
        let (_, _, _, _, sector) = chain_setup(6, 4.0, Some(0.5));
        assert_eq!(f_alpha(0.0, 0.0, &sector), 0.0);
        let mut flat = sector.clone();
        flat.spread = 0.0;
        let f = f_alpha(0.9, 123.0, &flat);
        assert!((f - (0.9 / (2.0 * flat.gap)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn alpha0_search_finds_a_strength_and_its_reports_are_admissible_prefixes() {
        let (lattice, couplings, basis, h, sector) = chain_setup(8, 8.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 5, None).unwrap();
        let grid = default_alpha_grid();
        let search =
            alpha0_search(&lattice, &couplings, &basis, &h, &sector, &profile, None, &grid)
                .unwrap();
        let alpha0 = search.required().unwrap();
        assert!(alpha0 > 0.0);
        assert_eq!(search.reports.len(), grid.len());
        // Small strengths keep most of the gap: the first report must be
        // admissible and the margin must decrease with alpha.
        assert!(search.reports[0].admissible);
        for pair in search.reports.windows(2) {
            assert!(pair[1].margin <= pair[0].margin + 1e-12);
        }
    }

    #[test]
    fn impossible_margin_requirement_reports_no_admissible_twist() {
        let (lattice, couplings, basis, h, sector) = chain_setup(6, 8.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 3, None).unwrap();
        let search = alpha0_search(
            &lattice,
            &couplings,
            &basis,
            &h,
            &sector,
            &profile,
            Some(10.0 * sector.gap),
            &default_alpha_grid(),
        )
        .unwrap();
        assert!(search.alpha0.is_none());
        let err = search.required().unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleTwist));
        assert_eq!(err.to_string(), "no admissible twist strength at this volume");
    }

    #[test]
    fn matrix_element_bound_holds_on_a_hundred_random_vectors() {
        let (lattice, couplings, basis, h, sector) = chain_setup(8, 4.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 5, None).unwrap();
        let (_, l) = build_kl(&lattice, &couplings, &basis, &profile, 0.2).unwrap();
        let l_norm = crate::operator::operator_norm(&l).unwrap();
        let ddc = crate::operator::operator_norm(
            &crate::twist::double_commutator(&h, &l).unwrap(),
        )
        .unwrap();
        let f = f_alpha(ddc, l_norm, &sector);
        let check = matrix_element_lemma(&l, &sector, f, 100, 42).unwrap();
        assert!(check.pass, "worst trial lhs {} rhs {}", check.lhs, check.rhs);
    }

    #[test]
    fn resolvent_samples_respect_their_ceilings_and_the_untwisted_midgap_value() {
        let (lattice, couplings, basis, h, sector) = chain_setup(8, 8.0, Some(0.5));
        let dims = estimate_dimension(&lattice, DimensionSpec::default());
        let profile = build_theta(&lattice, &dims, 0, 5, None).unwrap();
        let grid = default_alpha_grid();
        let search =
            alpha0_search(&lattice, &couplings, &basis, &h, &sector, &profile, None, &grid)
                .unwrap();
        let alpha0 = search.required().unwrap();

        // Untwisted: the resolvent norm at the mid-gap anchor is exactly
        // 2/gap.
        let h_dense = h.to_dense().map(|v| v.re);
        let solver0 = HessenbergSolver::new(&h_dense).unwrap();
        let contour0 = choose_contour(&sector, 0.0).unwrap();
        let at_anchor =
            resolvent_restricted_norm(&solver0, c(contour0.e_plus, 0.0), 5).unwrap();
        assert!(
            (at_anchor - 2.0 / sector.gap).abs() < 1e-8,
            "mid-gap norm {at_anchor} vs {}",
            2.0 / sector.gap
        );

        // Twisted at alpha0: every sampled node passes its ceiling.
        let (k, l) = build_kl(&lattice, &couplings, &basis, &profile, alpha0).unwrap();
        let hp = build_h_prime(&h, &k, &l).unwrap();
        let solver = HessenbergSolver::new(&hp).unwrap();
        let l_norm = crate::operator::operator_norm(&l).unwrap();
        let contour = choose_contour(&sector, l_norm).unwrap();
        let samples =
            check_resolvent_lemmas(&solver, &contour, search.c4_required, 5).unwrap();
        assert_eq!(samples.len(), 13);
        for s in &samples {
            assert!(
                s.pass(),
                "sample at z={} norm {} exceeds ceiling {}",
                s.z,
                s.norm,
                s.ceiling
            );
        }
    }

    #[test]
    fn assembled_ceiling_is_affine_in_the_twist_generator_norm() {
        // With ||L|| modeled as c sqrt(R) at D=1 and fixed constants, the
        // assembled rhs must be exactly affine in sqrt(R).
        let gap = 2.0;
        let c4 = gap / 8.0;
        let rhs_at = |r: f64| {
            let l_norm = 0.7 * r.sqrt();
            let y0 = l_norm + 1.0f64.max(gap);
            let contour = Contour {
                e_minus: -3.0,
                e_plus: 1.0,
                y0,
                c3: y0 - l_norm,
                nodes_per_segment: INITIAL_NODES_PER_SEGMENT,
            };
            assembled_rhs(&contour, c4)
        };
        let (r1, r2, r3) = (4.0, 9.0, 16.0);
        let (v1, v2, v3) = (rhs_at(r1), rhs_at(r2), rhs_at(r3));
        let slope12 = (v2 - v1) / (r2.sqrt() - r1.sqrt());
        let slope23 = (v3 - v2) / (r3.sqrt() - r2.sqrt());
        assert!(
            (slope12 - slope23).abs() < 1e-12 * slope12.abs(),
            "not affine in sqrt(R): slopes {slope12} vs {slope23}"
        );
        assert!(v3 > v2 && v2 > v1);
    }

    #[test]
    fn untwisted_projector_norm_bound_holds_with_unit_norm() {
        let (_, _, _, _, sector) = chain_setup(6, 4.0, Some(0.5));
        let contour = choose_contour(&sector, 0.0).unwrap();
        let check = norm_p2alpha_bound(1.0, &contour, sector.gap / 8.0);
        assert!(check.pass);
        assert!(check.rhs > 1.0);
    }
}
