//! Command-line pipelines: configuration-driven experiment runs with
//! deterministic, schema-versioned outputs.
//!
//! Exit-code contract (enforced by the binary): `0` when every asserted
//! margin is nonnegative, `2` for configuration or input errors, `3` when no
//! uniform gap is detected, `4` for an inequality-margin violation.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::decay::{
    fit_decay, transverse_correlation, transverse_pair_operator, verify_bound_chain,
    CorrelationRecord,
};
use crate::error::{Error, Result};
use crate::hilbert::{mode_index, FermionSectorBasis, Spin, SpinSectorBasis};
use crate::lattice::{estimate_dimension, DimensionEstimate, Lattice};
use crate::model::{assemble_hubbard, assemble_xxz, HubbardParams, XxzCouplings};
use crate::operator::{operator_norm, SparseOperator};
use crate::report::{fmt_float, write_csv, write_json, SCHEMA_VERSION};
use crate::resolvent::{alpha0_search, matrix_element_lemma, twisted_projector_norm};
use crate::spectral::{detect_ground_sector, DetectionOptions, GroundSector};
use crate::twist::{
    build_theta, certified_c1, lemma_double_rhs, lemma_k_rhs, lemma_l_rhs, DiagonalGauge,
    TwistProfile,
};

/// Numerical laboratory for gapped quantum lattice models: twisted
/// projectors, gap-margin lemmas, and stretched-exponential correlation
/// bounds verified by exact computation.
#[derive(Debug, Parser)]
#[command(name = "gaplab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the sphere-growth dimension of the configured lattice.
    Lattice(CommonArgs),
    /// Detect the gapped ground sector and report energies, gap, and spread.
    Spectrum(CommonArgs),
    /// Verify the twist norm lemmas and search the admissible strength grid.
    VerifyLemmas(CommonArgs),
    /// Verify the inequality chain ending in the stretched-exponential
    /// correlation bound.
    BoundChain(CommonArgs),
    /// Compute ground-sector correlations over all site pairs.
    Sweep(CommonArgs),
    /// Fit the stretched-exponential decay exponent to correlations from the
    /// twist center.
    Fit(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed override for randomized coupling draws.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lattice(args) => cmd_lattice(&args),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::VerifyLemmas(args) => cmd_verify_lemmas(&args),
        Command::BoundChain(args) => cmd_bound_chain(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Fit(args) => cmd_fit(&args),
    }
}

// ---------------------------------------------------------------------------
// Shared context
// ---------------------------------------------------------------------------

enum ModelContext {
    Spin { basis: SpinSectorBasis, couplings: XxzCouplings, h: SparseOperator },
    Fermion { basis: FermionSectorBasis, params: HubbardParams, h: SparseOperator },
}

impl ModelContext {
    fn hamiltonian(&self) -> &SparseOperator {
        match self {
            ModelContext::Spin { h, .. } => h,
            ModelContext::Fermion { h, .. } => h,
        }
    }
}

struct RunContext {
    cfg: RunConfig,
    out_dir: PathBuf,
    lattice: Lattice,
    dims: DimensionEstimate,
}

impl RunContext {
    fn build(args: &CommonArgs) -> Result<RunContext> {
        if let Some(threads) = args.threads {
            // First caller wins; later invocations in the same process keep
            // the existing pool, which never affects output bytes.
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .ok();
        }
        let cfg = RunConfig::load(&args.config)?;
        let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        let lattice = cfg.lattice.build()?;
        let dims = estimate_dimension(&lattice, cfg.lattice.dimension_spec());
        Ok(RunContext { cfg, out_dir, lattice, dims })
    }

    /// Assemble the configured model; the seed override replaces any
    /// configured random-draw seed.
    fn model(&self, seed: Option<u64>) -> Result<ModelContext> {
        let model = self.cfg.model_required()?;
        match model.kind.as_str() {
            "xxz" => {
                let basis = SpinSectorBasis::new(self.lattice.n_sites(), model.sector)?;
                let couplings = model.xxz_couplings(&self.lattice, seed)?;
                let h = assemble_xxz(&self.lattice, &couplings, &basis)?;
                Ok(ModelContext::Spin { basis, couplings, h })
            }
            "hubbard" => {
                let basis =
                    FermionSectorBasis::new(self.lattice.n_sites(), model.sector as usize)?;
                let params = model.hubbard_params(&self.lattice)?;
                let h = assemble_hubbard(&self.lattice, &params, &basis)?;
                Ok(ModelContext::Fermion { basis, params, h })
            }
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }

    fn detect(&self, model: &ModelContext) -> Result<GroundSector> {
        let tol = &self.cfg.tolerances;
        let opts = DetectionOptions {
            eps_deg: tol.eps_deg,
            gap_min: tol.gap_min,
            ..DetectionOptions::default()
        };
        detect_ground_sector(model.hamiltonian(), &opts)
    }

    /// Twist profile placed per the configuration; lattices certified at
    /// `D >= 2` are rejected inside `build_theta`.
    fn profile(&self, radius: usize) -> Result<TwistProfile> {
        build_theta(
            &self.lattice,
            &self.dims,
            self.cfg.twist.center,
            radius,
            self.cfg.twist.kappa,
        )
    }

    fn default_radius(&self) -> Result<usize> {
        match self.cfg.twist.radius {
            Some(r) => Ok(r),
            None => {
                let field = self.lattice.distances_from(self.cfg.twist.center)?;
                Ok(field.max_distance().max(2))
            }
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn complex_row(v: Complex64) -> [String; 3] {
    [fmt_float(v.re), fmt_float(v.im), fmt_float(v.norm())]
}

// ---------------------------------------------------------------------------
// lattice
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LatticeReport {
    schema_version: &'static str,
    kind: String,
    n_sites: usize,
    n_bonds: usize,
    graph_radius: usize,
    diameter: usize,
    dimension: f64,
    c0: f64,
    flagged: bool,
    calibration_window: usize,
    fitted_exponent: f64,
    max_radius_used: usize,
    grid_step: f64,
}

fn cmd_lattice(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let report = LatticeReport {
        schema_version: SCHEMA_VERSION,
        kind: ctx.cfg.lattice.kind.clone(),
        n_sites: ctx.lattice.n_sites(),
        n_bonds: ctx.lattice.bonds().len(),
        graph_radius: ctx.lattice.radius(),
        diameter: ctx.lattice.diameter(),
        dimension: ctx.dims.d,
        c0: ctx.dims.c0,
        flagged: ctx.dims.flagged,
        calibration_window: ctx.dims.calibration_window,
        fitted_exponent: ctx.dims.fitted_exponent,
        max_radius_used: ctx.dims.max_radius_used,
        grid_step: ctx.dims.grid_step,
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("lattice.json"), &report)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = ctx
            .dims
            .residuals
            .iter()
            .map(|r| {
                vec![
                    r.center.to_string(),
                    r.radius.to_string(),
                    r.sphere_size.to_string(),
                    fmt_float(r.slack),
                ]
            })
            .collect();
        write_csv(
            &ctx.out("lattice_residuals.csv"),
            &["center", "radius", "sphere_size", "slack"],
            &rows,
        )?;
    }
    println!(
        "lattice {}: {} sites, {} bonds, certified D = {:.6}, C0 = {:.6}{}",
        report.kind,
        report.n_sites,
        report.n_bonds,
        report.dimension,
        report.c0,
        if report.flagged { " (flagged: outside twist scope)" } else { "" }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SpectrumReport {
    schema_version: &'static str,
    sector_dimension: usize,
    q: usize,
    e0: f64,
    gap: f64,
    spread: f64,
    mean_energy: f64,
    eps_deg: f64,
    energies: Vec<f64>,
}

fn cmd_spectrum(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let model = ctx.model(args.seed)?;
    let sector = ctx.detect(&model)?;
    let report = SpectrumReport {
        schema_version: SCHEMA_VERSION,
        sector_dimension: model.hamiltonian().nrows(),
        q: sector.q,
        e0: sector.e0,
        gap: sector.gap,
        spread: sector.spread,
        mean_energy: sector.mean_energy,
        eps_deg: sector.eps_deg,
        energies: sector.energies.clone(),
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("spectrum.json"), &report)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = sector
            .energies
            .iter()
            .enumerate()
            .map(|(i, &e)| vec![i.to_string(), fmt_float(e)])
            .collect();
        write_csv(&ctx.out("spectrum.csv"), &["index", "energy"], &rows)?;
    }
    println!(
        "spectrum: q = {}, E0 = {:.12}, gap = {:.12}, spread = {:.3e}",
        sector.q, sector.e0, sector.gap, sector.spread
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-lemmas
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LemmaEntry {
    alpha: f64,
    k_norm: f64,
    k_rhs: f64,
    l_norm: f64,
    l_rhs: f64,
    double_comm_norm: f64,
    double_comm_rhs: f64,
    f: f64,
    matrix_element_lhs: f64,
    matrix_element_rhs: f64,
    margin: f64,
    admissible: bool,
    all_pass: bool,
}

#[derive(Serialize)]
struct LemmaReportFile {
    schema_version: &'static str,
    center: usize,
    radius: usize,
    kappa: f64,
    dimension: f64,
    c0: f64,
    c1: f64,
    gap: f64,
    spread: f64,
    c4_required: f64,
    alpha0: Option<f64>,
    note: Option<String>,
    entries: Vec<LemmaEntry>,
}

fn cmd_verify_lemmas(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let model = ctx.model(args.seed)?;
    let (basis, couplings, h) = match &model {
        ModelContext::Spin { basis, couplings, h } => (basis, couplings, h),
        ModelContext::Fermion { .. } => {
            return Err(Error::Config(
                "verify-lemmas needs a spin model: the twist correction operators are \
                 defined for transverse exchange couplings"
                    .into(),
            ))
        }
    };
    let sector = ctx.detect(&model)?;
    let radius = ctx.default_radius()?;
    let profile = ctx.profile(radius)?;
    let grid = ctx.cfg.twist.grid();
    let c4 = sector.gap * ctx.cfg.tolerances.c4_fraction;
    let search =
        alpha0_search(&ctx.lattice, couplings, basis, h, &sector, &profile, Some(c4), &grid)?;
    let c1 = certified_c1(&ctx.lattice, couplings, &profile)?;
    let jxy_max = couplings.jxy_max();

    let mut entries = Vec::with_capacity(search.reports.len());
    let mut violation: Option<String> = None;
    for report in &search.reports {
        let k_rhs = lemma_k_rhs(jxy_max, profile.c0, profile.d, profile.kappa, report.alpha);
        let l_rhs =
            lemma_l_rhs(jxy_max, profile.c0, profile.d, profile.kappa, radius, report.alpha);
        let dc_rhs = lemma_double_rhs(c1, profile.d, profile.kappa, report.alpha);
        let (_, l_op) =
            crate::twist::build_kl(&ctx.lattice, couplings, basis, &profile, report.alpha)?;
        let me = matrix_element_lemma(&l_op, &sector, report.f, 100, 0x5eed_0001)?;
        let tol = |rhs: f64| 1e-12 * rhs.abs().max(1.0);
        let all_pass = report.k_norm <= k_rhs + tol(k_rhs)
            && report.l_norm <= l_rhs + tol(l_rhs)
            && report.double_comm_norm <= dc_rhs + tol(dc_rhs)
            && me.pass;
        if !all_pass && violation.is_none() {
            violation = Some(format!(
                "norm lemma violated at alpha = {}: K {} vs {}, L {} vs {}, [L,[H,L]] {} vs {}, \
                 matrix element {} vs {}",
                report.alpha,
                report.k_norm,
                k_rhs,
                report.l_norm,
                l_rhs,
                report.double_comm_norm,
                dc_rhs,
                me.lhs,
                me.rhs
            ));
        }
        entries.push(LemmaEntry {
            alpha: report.alpha,
            k_norm: report.k_norm,
            k_rhs,
            l_norm: report.l_norm,
            l_rhs,
            double_comm_norm: report.double_comm_norm,
            double_comm_rhs: dc_rhs,
            f: report.f,
            matrix_element_lhs: me.lhs,
            matrix_element_rhs: me.rhs,
            margin: report.margin,
            admissible: report.admissible,
            all_pass,
        });
    }

    let note = if search.alpha0.is_none() {
        Some(
            "no admissible twist strength at this volume (consistent with the bound's \
             sufficiently-large-volume hypothesis, not a lemma violation)"
                .to_string(),
        )
    } else {
        None
    };
    let file = LemmaReportFile {
        schema_version: SCHEMA_VERSION,
        center: profile.center,
        radius,
        kappa: profile.kappa,
        dimension: profile.d,
        c0: profile.c0,
        c1,
        gap: sector.gap,
        spread: sector.spread,
        c4_required: search.c4_required,
        alpha0: search.alpha0,
        note: note.clone(),
        entries,
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("lemmas.json"), &file)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = file
            .entries
            .iter()
            .map(|e| {
                vec![
                    fmt_float(e.alpha),
                    fmt_float(e.k_norm),
                    fmt_float(e.k_rhs),
                    fmt_float(e.l_norm),
                    fmt_float(e.l_rhs),
                    fmt_float(e.double_comm_norm),
                    fmt_float(e.double_comm_rhs),
                    fmt_float(e.f),
                    fmt_float(e.matrix_element_lhs),
                    fmt_float(e.matrix_element_rhs),
                    fmt_float(e.margin),
                    e.admissible.to_string(),
                    e.all_pass.to_string(),
                ]
            })
            .collect();
        write_csv(
            &ctx.out("lemmas.csv"),
            &[
                "alpha",
                "k_norm",
                "k_rhs",
                "l_norm",
                "l_rhs",
                "double_comm_norm",
                "double_comm_rhs",
                "f",
                "matrix_element_lhs",
                "matrix_element_rhs",
                "margin",
                "admissible",
                "all_pass",
            ],
            &rows,
        )?;
    }
    for e in &file.entries {
        println!(
            "alpha = {:.3}: margin = {:+.6e} {} [norm lemmas {}]",
            e.alpha,
            e.margin,
            if e.admissible { "(admissible)" } else { "" },
            if e.all_pass { "pass" } else { "FAIL" }
        );
    }
    match (violation, search.alpha0) {
        (Some(msg), _) => Err(Error::MarginViolation(msg)),
        (None, Some(a0)) => {
            println!("alpha0 = {a0} (required margin {:.6e})", search.c4_required);
            Ok(())
        }
        (None, None) => {
            println!("{}", note.expect("set when alpha0 is absent"));
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// bound-chain
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BoundChainEntry {
    m: usize,
    n: usize,
    r: usize,
    alpha: f64,
    lhs: f64,
    rhs: f64,
    margin: f64,
    decay_factor: f64,
    p2alpha_norm: f64,
    trace_identity_defect: f64,
    pass: bool,
    identity_ok: bool,
}

#[derive(Serialize)]
struct BoundChainFile {
    schema_version: &'static str,
    observable: String,
    center: usize,
    min_margin: f64,
    max_identity_defect: f64,
    all_pass: bool,
    entries: Vec<BoundChainEntry>,
}

/// Observable entering the bound chain: the operator, its exact norm, the
/// correlation record, and the gauge charge it transfers.
struct ChainObservable {
    op: SparseOperator,
    norm: f64,
    rec: CorrelationRecord,
    charge: f64,
}

fn chain_observable(
    ctx: &RunContext,
    model: &ModelContext,
    sector: &GroundSector,
    m: usize,
    n: usize,
) -> Result<ChainObservable> {
    match model {
        ModelContext::Spin { basis, .. } => {
            let op = transverse_pair_operator(basis, m, n)?;
            let norm = operator_norm(&op)?;
            let rec = transverse_correlation(sector, basis, &ctx.lattice, m, n)?;
            Ok(ChainObservable { op, norm, rec, charge: 1.0 })
        }
        ModelContext::Fermion { basis, .. } => match ctx.cfg.fit.kind.as_str() {
            "single" => {
                let op = basis.op_bilinear(mode_index(m, Spin::Up), mode_index(n, Spin::Up))?;
                let norm = operator_norm(&op)?;
                let value = crate::spectral::ground_expectation(sector, &op)?;
                let rec = CorrelationRecord {
                    m,
                    n,
                    r: ctx.lattice.distance(m, n)?,
                    value,
                    abs: value.norm(),
                };
                Ok(ChainObservable { op, norm, rec, charge: 1.0 })
            }
            "pair" => {
                let op = basis.op_pair_hop(m, n)?;
                let norm = operator_norm(&op)?;
                let value = crate::spectral::ground_expectation(sector, &op)?;
                let rec = CorrelationRecord {
                    m,
                    n,
                    r: ctx.lattice.distance(m, n)?,
                    value,
                    abs: value.norm(),
                };
                Ok(ChainObservable { op, norm, rec, charge: 2.0 })
            }
            other => Err(Error::Config(format!(
                "bound-chain for fermion models supports fit kinds `single` and `pair` \
                 (the particle-number gauge does not damp `{other}`)"
            ))),
        },
    }
}

fn chain_gauge(model: &ModelContext, profile: &TwistProfile) -> Result<DiagonalGauge> {
    match model {
        ModelContext::Spin { basis, .. } => DiagonalGauge::for_spins(basis, &profile.theta),
        ModelContext::Fermion { basis, .. } => {
            DiagonalGauge::for_fermions(basis, &profile.theta)
        }
    }
}

fn cmd_bound_chain(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let model = ctx.model(args.seed)?;
    let sector = ctx.detect(&model)?;
    let m = ctx.cfg.twist.center;
    let field = ctx.lattice.distances_from(m)?;
    let r_min = ctx.cfg.fit.r_min;
    let r_max = ctx.cfg.fit.r_max.unwrap_or(usize::MAX);
    let grid = ctx.cfg.twist.grid();

    let mut entries = Vec::new();
    for n in 0..ctx.lattice.n_sites() {
        let r = field.dist[n];
        if n == m || r < r_min || r > r_max {
            continue;
        }
        let profile = ctx.profile_at(m, r)?;
        let gauge = chain_gauge(&model, &profile)?;
        let obs = chain_observable(&ctx, &model, &sector, m, n)?;
        for &alpha in &grid {
            let p2a = twisted_projector_norm(&sector, &gauge, 2.0 * alpha * obs.charge)?;
            let report = verify_bound_chain(
                &obs.rec,
                &obs.op,
                obs.norm,
                p2a,
                &profile,
                alpha,
                obs.charge,
                &sector,
                &gauge,
            )?;
            entries.push(BoundChainEntry {
                m,
                n,
                r,
                alpha,
                lhs: report.lhs,
                rhs: report.rhs,
                margin: report.margin,
                decay_factor: report.decay_factor,
                p2alpha_norm: p2a,
                trace_identity_defect: report.trace_identity_defect,
                pass: report.pass,
                identity_ok: report.identity_ok,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "no sites in the distance window [{r_min}, {}] from center {m}",
            ctx.cfg.fit.r_max.map_or("inf".to_string(), |v| v.to_string())
        )));
    }

    let min_margin = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    let max_defect = entries
        .iter()
        .map(|e| e.trace_identity_defect)
        .fold(0.0f64, f64::max);
    let all_pass = entries.iter().all(|e| e.pass && e.identity_ok);
    let file = BoundChainFile {
        schema_version: SCHEMA_VERSION,
        observable: match &model {
            ModelContext::Spin { .. } => "spin".to_string(),
            ModelContext::Fermion { .. } => ctx.cfg.fit.kind.clone(),
        },
        center: m,
        min_margin,
        max_identity_defect: max_defect,
        all_pass,
        entries,
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("bound_chain.json"), &file)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = file
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.m.to_string(),
                    e.n.to_string(),
                    e.r.to_string(),
                    fmt_float(e.alpha),
                    fmt_float(e.lhs),
                    fmt_float(e.rhs),
                    fmt_float(e.margin),
                    fmt_float(e.decay_factor),
                    fmt_float(e.p2alpha_norm),
                    fmt_float(e.trace_identity_defect),
                    e.pass.to_string(),
                    e.identity_ok.to_string(),
                ]
            })
            .collect();
        write_csv(
            &ctx.out("bound_chain.csv"),
            &[
                "m",
                "n",
                "r",
                "alpha",
                "lhs",
                "rhs",
                "margin",
                "decay_factor",
                "p2alpha_norm",
                "trace_identity_defect",
                "pass",
                "identity_ok",
            ],
            &rows,
        )?;
    }
    println!(
        "bound-chain: {} checks, min margin = {:+.6e}, max identity defect = {:.3e}",
        file.entries.len(),
        min_margin,
        max_defect
    );
    if !all_pass {
        return Err(Error::MarginViolation(format!(
            "bound chain violated: min margin {min_margin:e}, max identity defect {max_defect:e}"
        )));
    }
    Ok(())
}

impl RunContext {
    /// Profile centered at `m` with the pair distance as radius (bound-chain
    /// runs place one profile per target distance).
    fn profile_at(&self, m: usize, radius: usize) -> Result<TwistProfile> {
        build_theta(&self.lattice, &self.dims, m, radius, self.cfg.twist.kappa)
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepRecord {
    kind: &'static str,
    m: usize,
    n: usize,
    r: usize,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct SweepFile {
    schema_version: &'static str,
    lattice: String,
    n_sites: usize,
    sector: i64,
    records: Vec<SweepRecord>,
}

fn sweep_records(
    ctx: &RunContext,
    model: &ModelContext,
    sector: &GroundSector,
) -> Result<Vec<SweepRecord>> {
    let n_sites = ctx.lattice.n_sites();
    let pairs: Vec<(usize, usize)> =
        (0..n_sites).flat_map(|m| (m..n_sites).map(move |n| (m, n))).collect();
    match model {
        ModelContext::Spin { basis, .. } => pairs
            .par_iter()
            .map(|&(m, n)| {
                let rec = transverse_correlation(sector, basis, &ctx.lattice, m, n)?;
                Ok(SweepRecord {
                    kind: "spin",
                    m,
                    n,
                    r: rec.r,
                    re: rec.value.re,
                    im: rec.value.im,
                    abs: rec.abs,
                })
            })
            .collect(),
        ModelContext::Fermion { basis, params, .. } => {
            let with_spin = params
                .b_field
                .iter()
                .all(|b| b[0] == 0.0 && b[1] == 0.0);
            let nested: Vec<Vec<SweepRecord>> = pairs
                .par_iter()
                .map(|&(m, n)| {
                    let set = crate::decay::fermion_correlations(
                        sector,
                        basis,
                        &ctx.lattice,
                        params,
                        m,
                        n,
                        with_spin,
                    )?;
                    let mut out = Vec::with_capacity(3);
                    for (kind, rec) in [("single", Some(&set.single)), ("pair", Some(&set.pair)), ("spin", set.spin.as_ref())]
                    {
                        if let Some(rec) = rec {
                            out.push(SweepRecord {
                                kind,
                                m,
                                n,
                                r: rec.r,
                                re: rec.value.re,
                                im: rec.value.im,
                                abs: rec.abs,
                            });
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            Ok(nested.into_iter().flatten().collect())
        }
    }
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let model = ctx.model(args.seed)?;
    let sector = ctx.detect(&model)?;
    let records = sweep_records(&ctx, &model, &sector)?;
    let file = SweepFile {
        schema_version: SCHEMA_VERSION,
        lattice: ctx.cfg.lattice.kind.clone(),
        n_sites: ctx.lattice.n_sites(),
        sector: ctx.cfg.model_required()?.sector,
        records,
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("sweep.json"), &file)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = file
            .records
            .iter()
            .map(|r| {
                let mut row = vec![
                    file.lattice.clone(),
                    file.n_sites.to_string(),
                    file.sector.to_string(),
                    r.kind.to_string(),
                    r.m.to_string(),
                    r.n.to_string(),
                    r.r.to_string(),
                ];
                row.extend(complex_row(Complex64::new(r.re, r.im)));
                row
            })
            .collect();
        write_csv(
            &ctx.out("sweep.csv"),
            &["lattice", "n_sites", "sector", "kind", "m", "n", "r", "re", "im", "abs"],
            &rows,
        )?;
    }
    println!("sweep: {} records over {} sites", file.records.len(), file.n_sites);
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FitFile {
    schema_version: &'static str,
    observable: String,
    center: usize,
    r_min: usize,
    r_max: Option<usize>,
    dimension: f64,
    gamma: f64,
    prefactor: f64,
    exponent_theory: f64,
    rms: f64,
    free_p: f64,
    free_gamma: f64,
    free_prefactor: f64,
    free_rms: f64,
    grid_edge: bool,
    n_points: usize,
    n_distances: usize,
}

fn fit_observable(
    ctx: &RunContext,
    model: &ModelContext,
    sector: &GroundSector,
    m: usize,
    n: usize,
) -> Result<CorrelationRecord> {
    match model {
        ModelContext::Spin { basis, .. } => {
            if ctx.cfg.fit.kind != "spin" {
                return Err(Error::Config(format!(
                    "spin models fit the `spin` observable, not `{}`",
                    ctx.cfg.fit.kind
                )));
            }
            transverse_correlation(sector, basis, &ctx.lattice, m, n)
        }
        ModelContext::Fermion { basis, params, .. } => {
            let set = crate::decay::fermion_correlations(
                sector,
                basis,
                &ctx.lattice,
                params,
                m,
                n,
                ctx.cfg.fit.kind == "spin",
            )?;
            Ok(match ctx.cfg.fit.kind.as_str() {
                "single" => set.single,
                "pair" => set.pair,
                _ => set.spin.expect("requested above"),
            })
        }
    }
}

fn cmd_fit(args: &CommonArgs) -> Result<()> {
    let ctx = RunContext::build(args)?;
    let model = ctx.model(args.seed)?;
    let sector = ctx.detect(&model)?;
    let m = ctx.cfg.twist.center;
    let field = ctx.lattice.distances_from(m)?;
    let r_min = ctx.cfg.fit.r_min;
    let r_max = ctx.cfg.fit.r_max.unwrap_or(usize::MAX);
    let targets: Vec<usize> = (0..ctx.lattice.n_sites())
        .filter(|&n| n != m && field.dist[n] >= r_min && field.dist[n] <= r_max)
        .collect();
    let records: Vec<CorrelationRecord> = targets
        .par_iter()
        .map(|&n| fit_observable(&ctx, &model, &sector, m, n))
        .collect::<Result<_>>()?;
    let fit = fit_decay(&records, ctx.dims.d)?;

    let file = FitFile {
        schema_version: SCHEMA_VERSION,
        observable: ctx.cfg.fit.kind.clone(),
        center: m,
        r_min,
        r_max: ctx.cfg.fit.r_max,
        dimension: ctx.dims.d,
        gamma: fit.gamma,
        prefactor: fit.prefactor,
        exponent_theory: fit.exponent_theory,
        rms: fit.rms,
        free_p: fit.free_p,
        free_gamma: fit.free_gamma,
        free_prefactor: fit.free_prefactor,
        free_rms: fit.free_rms,
        grid_edge: fit.grid_edge,
        n_points: fit.n_points,
        n_distances: fit.n_distances,
    };
    if ctx.cfg.output.wants("json") {
        write_json(&ctx.out("fit.json"), &file)?;
    }
    if ctx.cfg.output.wants("csv") {
        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                let mut row = vec![r.m.to_string(), r.n.to_string(), r.r.to_string()];
                row.extend(complex_row(r.value));
                row
            })
            .collect();
        write_csv(&ctx.out("fit_records.csv"), &["m", "n", "r", "re", "im", "abs"], &rows)?;
    }
    println!(
        "fit: gamma = {:.9} at p = {} (theory), free p = {:.4}{} over {} points",
        fit.gamma,
        fit.exponent_theory,
        fit.free_p,
        if fit.grid_edge { " [grid edge]" } else { "" },
        fit.n_points
    );
    Ok(())
}
