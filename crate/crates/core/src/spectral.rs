//! Ground-sector detection: lowest eigenpairs, degeneracy resolution, and
//! uniform-gap certification.
//!
//! A "ground sector" is the lowest group of `q` eigenvalues whose internal
//! spread stays below a degeneracy tolerance while the jump to the next
//! eigenvalue clears a minimal gap. Small problems are solved densely with
//! the full spectrum; larger ones use deflated Lanczos with an adaptive
//! number of computed eigenvalues.

use crate::error::{Error, Result};
use crate::operator::{
    dense_hermitian_eigen, lanczos_lowest, LanczosOptions, SparseOperator, DENSE_NORM_THRESHOLD,
};
use nalgebra::DVector;
use num_complex::Complex64;

/// Options controlling ground-sector detection.
#[derive(Debug, Clone)]
pub struct DetectionOptions {
    /// Degeneracy tolerance: eigenvalues within this of the lowest are part
    /// of the ground manifold. `None` resolves to `1e-6 * scale` where the
    /// scale is the spectral range (dense path) or a Gershgorin bound
    /// (iterative path).
    pub eps_deg: Option<f64>,
    /// Minimal jump accepted as the sector gap.
    pub gap_min: f64,
    /// Largest admissible ground-manifold size.
    pub prefix_cap: usize,
    /// Seed for the iterative eigensolver.
    pub seed: u64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        DetectionOptions {
            eps_deg: None,
            gap_min: 1e-3,
            prefix_cap: 32,
            seed: 0x9d0c_17e5,
        }
    }
}

/// A certified gapped ground sector.
#[derive(Debug, Clone)]
pub struct GroundSector {
    /// Ground-manifold dimension.
    pub q: usize,
    /// Computed lowest eigenvalues, ascending (full spectrum truncated to 64
    /// entries on the dense path; the Lanczos window otherwise).
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors spanning the ground manifold.
    pub vectors: Vec<DVector<Complex64>>,
    /// Sector gap `E_q - E_{q-1}`.
    pub gap: f64,
    /// Ground-manifold spread `E_{q-1} - E_0`.
    pub spread: f64,
    /// Mean ground-manifold energy.
    pub mean_energy: f64,
    /// Lowest eigenvalue.
    pub e0: f64,
    /// Spectral scale used to resolve the degeneracy tolerance.
    pub scale: f64,
    /// Degeneracy tolerance actually applied.
    pub eps_deg: f64,
}

impl GroundSector {
    /// Highest energy inside the ground manifold.
    pub fn e_top(&self) -> f64 {
        self.e0 + self.spread
    }

    /// Lowest energy above the ground manifold.
    pub fn e_next(&self) -> f64 {
        self.e_top() + self.gap
    }
}

/// Lowest `k` eigenpairs of a hermitian sparse operator, ascending.
/// Dimensions up to `DENSE_NORM_THRESHOLD` are diagonalized densely;
/// larger operators use deflated Lanczos with certified residuals.
pub fn lowest_eigenpairs(
    h: &SparseOperator,
    k: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<DVector<Complex64>>)> {
    if h.nrows() != h.ncols() {
        return Err(Error::Model("eigenpairs need a square operator".into()));
    }
    let dim = h.nrows();
    let k = k.min(dim);
    if dim <= DENSE_NORM_THRESHOLD {
        let (vals, vecs) = dense_hermitian_eigen(&h.to_dense())?;
        Ok((vals[..k].to_vec(), vecs[..k].to_vec()))
    } else {
        let opts = LanczosOptions {
            k,
            seed,
            ..Default::default()
        };
        lanczos_lowest(dim, |x| h.apply(x), &opts)
    }
}

/// Outcome of scanning a sorted eigenvalue list for a gapped prefix.
enum Scan {
    Detected { q: usize, gap: f64 },
    /// The degenerate prefix runs into the end of the computed values, so a
    /// longer list is needed to decide.
    Truncated,
    CapExceeded,
    NoJump,
}

fn scan_values(vals: &[f64], eps_deg: f64, gap_min: f64, prefix_cap: usize, complete: bool) -> Scan {
    let len = vals.len();
    if len < 2 {
        return if complete { Scan::NoJump } else { Scan::Truncated };
    }
    // largest manifold size whose spread stays within the tolerance
    let mut q_pre = 1;
    while q_pre < len && vals[q_pre] - vals[0] <= eps_deg {
        q_pre += 1;
    }
    if q_pre > prefix_cap {
        return Scan::CapExceeded;
    }
    if q_pre == len {
        // every computed value is inside the manifold
        return if complete { Scan::NoJump } else { Scan::Truncated };
    }
    // largest q <= q_pre whose jump clears the minimal gap
    for q in (1..=q_pre).rev() {
        let gap = vals[q] - vals[q - 1];
        if gap >= gap_min {
            return Scan::Detected { q, gap };
        }
    }
    Scan::NoJump
}

/// Detect the gapped ground sector of a hermitian sparse operator.
///
/// The dense path uses the complete spectrum. The iterative path computes
/// the lowest 8 eigenvalues first and doubles the window (16, then 32)
/// whenever the degenerate prefix runs into the end of the computed values
/// or two successive windows disagree; certified Lanczos residuals make a
/// stable two-window agreement the accepting condition.
pub fn detect_ground_sector(h: &SparseOperator, opts: &DetectionOptions) -> Result<GroundSector> {
    if h.nrows() != h.ncols() {
        return Err(Error::Model("ground-sector detection needs a square operator".into()));
    }
    let dim = h.nrows();
    if dim < 2 {
        return Err(Error::NoGap("the sector has fewer than two states".into()));
    }
    if dim <= DENSE_NORM_THRESHOLD {
        let (vals, vecs) = dense_hermitian_eigen(&h.to_dense())?;
        let scale = vals[0].abs().max(vals[dim - 1].abs()).max(1e-300);
        let eps_deg = opts.eps_deg.unwrap_or(1e-6 * scale);
        match scan_values(&vals, eps_deg, opts.gap_min, opts.prefix_cap, true) {
            Scan::Detected { q, gap } => Ok(build_sector(
                &vals[..dim.min(64)],
                &vecs[..q],
                q,
                gap,
                scale,
                eps_deg,
            )),
            Scan::CapExceeded => Err(Error::NoGap(format!(
                "ground manifold exceeds the size cap of {}",
                opts.prefix_cap
            ))),
            _ => Err(Error::NoGap(format!(
                "no jump of at least {} above a manifold resolved at tolerance {eps_deg:.3e}",
                opts.gap_min
            ))),
        }
    } else {
        let scale = h.gershgorin_bound().max(1e-300);
        let eps_deg = opts.eps_deg.unwrap_or(1e-6 * scale);
        let mut windows: Vec<usize> = [8usize, 16, 32]
            .iter()
            .map(|&k| k.min(dim))
            .collect();
        windows.dedup();
        let mut previous: Option<(usize, f64, Vec<f64>, Vec<DVector<Complex64>>)> = None;
        for (stage, &k) in windows.iter().enumerate() {
            let last = stage + 1 == windows.len();
            let (vals, vecs) = lowest_eigenpairs(h, k, opts.seed)?;
            match scan_values(&vals, eps_deg, opts.gap_min, opts.prefix_cap, k == dim) {
                Scan::Detected { q, gap } => {
                    if let Some((pq, pgap, _, _)) = &previous {
                        if *pq == q && (pgap - gap).abs() <= 1e-7 * scale.max(1.0) {
                            return Ok(build_sector(&vals, &vecs[..q], q, gap, scale, eps_deg));
                        }
                    }
                    if last {
                        return Ok(build_sector(&vals, &vecs[..q], q, gap, scale, eps_deg));
                    }
                    previous = Some((q, gap, vals, vecs));
                }
                Scan::Truncated => {
                    if last {
                        return Err(Error::NoGap(format!(
                            "ground manifold not resolved within the largest window of {k} eigenvalues"
                        )));
                    }
                    previous = None;
                }
                Scan::CapExceeded => {
                    return Err(Error::NoGap(format!(
                        "ground manifold exceeds the size cap of {}",
                        opts.prefix_cap
                    )))
                }
                Scan::NoJump => {
                    if last {
                        return Err(Error::NoGap(format!(
                            "no jump of at least {} above a manifold resolved at tolerance {eps_deg:.3e}",
                            opts.gap_min
                        )));
                    }
                    previous = None;
                }
            }
        }
        unreachable!("window loop always returns at the last stage")
    }
}

fn build_sector(
    vals: &[f64],
    ground_vecs: &[DVector<Complex64>],
    q: usize,
    gap: f64,
    scale: f64,
    eps_deg: f64,
) -> GroundSector {
    let spread = vals[q - 1] - vals[0];
    let mean_energy = vals[..q].iter().sum::<f64>() / q as f64;
    GroundSector {
        q,
        energies: vals.to_vec(),
        vectors: ground_vecs.to_vec(),
        gap,
        spread,
        mean_energy,
        e0: vals[0],
        scale,
        eps_deg,
    }
}

/// Normalized ground-manifold expectation `Tr(P A) / q` (the plain
/// expectation value when the ground state is unique).
pub fn ground_expectation(sector: &GroundSector, op: &SparseOperator) -> Result<Complex64> {
    if sector.vectors.is_empty() {
        return Err(Error::Model("ground sector carries no vectors".into()));
    }
    if op.ncols() != sector.vectors[0].len() {
        return Err(Error::Model("operator dimension does not match the sector".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for v in &sector.vectors {
        acc += v.dotc(&op.apply(v));
    }
    Ok(acc / Complex64::new(sector.q as f64, 0.0))
}
