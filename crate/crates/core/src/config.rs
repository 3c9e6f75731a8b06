//! Declarative run configuration for the command-line pipelines.
//!
//! A single TOML file describes the lattice, the model and its symmetry
//! sector, the twist profile and strength grid, detection tolerances, and
//! output destinations. Randomized coupling draws always carry an explicit
//! seed so every run is reproducible byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DimensionSpec, Lattice};
use crate::model::{HubbardParams, XxzCouplings};

/// Parsed and validated run configuration.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    /// Optional for lattice-only runs; model-dependent subcommands require
    /// it.
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub twist: TwistConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl RunConfig {
    /// Read and validate a configuration file. Parse failures keep the TOML
    /// line diagnostics.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if let Some(model) = &self.model {
            model.validate()?;
        }
        self.twist.validate()?;
        self.tolerances.validate()?;
        self.fit.validate()?;
        Ok(())
    }

    /// The model section, required by every model-dependent subcommand.
    pub fn model_required(&self) -> Result<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a [model] section".into()))
    }
}

/// Which graph to build.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// `chain`, `gasket`, `square`, or `edge-list`.
    pub kind: String,
    /// Chain length or square width.
    pub n: Option<usize>,
    /// Square height (defaults to the width).
    pub height: Option<usize>,
    /// Gasket generation.
    pub generation: Option<u32>,
    /// Close the chain into a ring.
    #[serde(default)]
    pub periodic: bool,
    /// Edge-list file (one `a b` pair per line) for `kind = "edge-list"`.
    pub path: Option<PathBuf>,
    /// Certify this dimension instead of searching the grid (e.g.
    /// `ln 3 / ln 2` for gaskets).
    pub dimension: Option<f64>,
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "chain" => self.require(self.n.is_some(), "chain needs `n`"),
            "gasket" => self.require(self.generation.is_some(), "gasket needs `generation`"),
            "square" => self.require(self.n.is_some(), "square needs `n` (width)"),
            "edge-list" => match &self.path {
                Some(p) if p.exists() => Ok(()),
                Some(p) => Err(Error::Config(format!(
                    "edge-list file {} does not exist",
                    p.display()
                ))),
                None => Err(Error::Config("edge-list needs `path`".into())),
            },
            other => Err(Error::Config(format!("unknown lattice kind `{other}`"))),
        }
    }

    fn require(&self, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Config(msg.into()))
        }
    }

    pub fn build(&self) -> Result<Lattice> {
        match self.kind.as_str() {
            "chain" => Lattice::chain(self.n.unwrap_or(0), self.periodic),
            "gasket" => Lattice::sierpinski(self.generation.unwrap_or(0)),
            "square" => {
                let w = self.n.unwrap_or(0);
                Lattice::square(w, self.height.unwrap_or(w))
            }
            "edge-list" => {
                let p = self.path.as_ref().expect("validated");
                Lattice::from_edge_list(&std::fs::read_to_string(p)?)
            }
            other => Err(Error::Config(format!("unknown lattice kind `{other}`"))),
        }
    }

    pub fn dimension_spec(&self) -> DimensionSpec {
        match self.dimension {
            Some(d) => DimensionSpec::Fixed(d),
            None => DimensionSpec::default(),
        }
    }
}

/// Hamiltonian family, couplings, and symmetry sector.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `xxz` or `hubbard`.
    pub kind: String,
    /// Conserved quantum number: `2 S^z_total` for spins, particle number
    /// for fermions.
    pub sector: i64,
    /// Uniform transverse coupling (spin models).
    pub jxy: Option<f64>,
    /// Uniform longitudinal coupling (spin models).
    pub jz: Option<f64>,
    /// Seeded random coupling draw replacing the uniform values.
    pub random: Option<RandomCouplings>,
    /// Certified coupling-scale cap: realized `max |J|` (or `max |t|`) must
    /// stay within it.
    pub j_max: Option<f64>,
    /// Uniform hopping (fermion models).
    pub t: Option<f64>,
    /// On-site interaction (fermion models).
    pub u: Option<f64>,
    /// Per-site potential (fermion models; defaults to zero).
    pub eps: Option<Vec<f64>>,
    /// Per-site longitudinal Zeeman field (fermion models).
    pub b_z: Option<Vec<f64>>,
}

/// Independent uniform draws per bond; the seed is mandatory.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCouplings {
    pub seed: u64,
    pub jxy_range: [f64; 2],
    pub jz_range: [f64; 2],
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "xxz" => {
                if self.random.is_none() && (self.jxy.is_none() || self.jz.is_none()) {
                    return Err(Error::Config(
                        "xxz needs `jxy` and `jz`, or a seeded `random` block".into(),
                    ));
                }
                if let Some(r) = &self.random {
                    if r.jxy_range[0] > r.jxy_range[1] || r.jz_range[0] > r.jz_range[1] {
                        return Err(Error::Config("random coupling ranges must be ordered".into()));
                    }
                }
                Ok(())
            }
            "hubbard" => {
                if self.t.is_none() {
                    return Err(Error::Config("hubbard needs `t`".into()));
                }
                if self.sector < 0 {
                    return Err(Error::Config("fermion sector needs `sector >= 0`".into()));
                }
                Ok(())
            }
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }

    /// Realized spin couplings; `seed_override` replaces the configured
    /// draw seed.
    pub fn xxz_couplings(
        &self,
        lattice: &Lattice,
        seed_override: Option<u64>,
    ) -> Result<XxzCouplings> {
        let nb = lattice.bonds().len();
        let couplings = match &self.random {
            Some(r) => XxzCouplings::random(
                nb,
                (r.jxy_range[0], r.jxy_range[1]),
                (r.jz_range[0], r.jz_range[1]),
                seed_override.unwrap_or(r.seed),
            ),
            None => XxzCouplings::homogeneous(
                nb,
                self.jxy.expect("validated"),
                self.jz.expect("validated"),
            ),
        };
        if let Some(cap) = self.j_max {
            let realized = couplings.jxy_max().max(couplings.jz_max());
            if realized > cap {
                return Err(Error::Config(format!(
                    "realized coupling scale {realized} exceeds j_max = {cap}"
                )));
            }
        }
        Ok(couplings)
    }

    /// Realized fermion parameters.
    pub fn hubbard_params(&self, lattice: &Lattice) -> Result<HubbardParams> {
        let mut params = HubbardParams::uniform(lattice, self.t.expect("validated"), self.u.unwrap_or(0.0));
        if let Some(eps) = &self.eps {
            if eps.len() != lattice.n_sites() {
                return Err(Error::Config("`eps` must list one value per site".into()));
            }
            params.eps = eps.clone();
        }
        if let Some(bz) = &self.b_z {
            if bz.len() != lattice.n_sites() {
                return Err(Error::Config("`b_z` must list one value per site".into()));
            }
            for (site, &b) in bz.iter().enumerate() {
                params.b_field[site] = [0.0, 0.0, b];
            }
        }
        if let Some(cap) = self.j_max {
            if params.t_max() > cap {
                return Err(Error::Config(format!(
                    "realized hopping scale {} exceeds j_max = {cap}",
                    params.t_max()
                )));
            }
        }
        Ok(params)
    }
}

/// Twist profile placement and the strength grid.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistConfig {
    /// Profile exponent; omitted means the dimension-dependent default
    /// `5/4 - D/2`.
    pub kappa: Option<f64>,
    /// Twist center site.
    pub center: usize,
    /// Profile radius; omitted means per-use defaults (the pair distance in
    /// bound chains, the graph radius otherwise).
    pub radius: Option<usize>,
    /// Twist strengths to scan; omitted means `{0.05, 0.10, ..., 0.50}`.
    pub alpha_grid: Option<Vec<f64>>,
}

impl Default for TwistConfig {
    fn default() -> Self {
        TwistConfig { kappa: None, center: 0, radius: None, alpha_grid: None }
    }
}

impl TwistConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(grid) = &self.alpha_grid {
            if grid.is_empty() {
                return Err(Error::Config("alpha_grid must not be empty".into()));
            }
            for &a in grid {
                if !(a > 0.0 && a <= 2.0) {
                    return Err(Error::Config(format!(
                        "alpha_grid entries must lie in (0, 2], got {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        self.alpha_grid
            .clone()
            .unwrap_or_else(crate::resolvent::default_alpha_grid)
    }
}

/// Detection and quadrature thresholds.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Quasi-degeneracy width for sector detection; omitted means the
    /// detector's scale-relative default.
    pub eps_deg: Option<f64>,
    /// Smallest acceptable uniform gap.
    pub gap_min: f64,
    /// Acceptance threshold for the contour idempotence defect and node
    /// doubling.
    pub quadrature_defect: f64,
    /// Required margin as a fraction of the gap: `C4 = gap * c4_fraction`.
    pub c4_fraction: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            eps_deg: None,
            gap_min: 1e-3,
            quadrature_defect: 1e-8,
            c4_fraction: 0.125,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_min > 0.0) {
            return Err(Error::Config("gap_min must be positive".into()));
        }
        if !(self.quadrature_defect > 0.0) {
            return Err(Error::Config("quadrature_defect must be positive".into()));
        }
        if !(self.c4_fraction > 0.0 && self.c4_fraction < 0.5) {
            return Err(Error::Config("c4_fraction must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Output destinations and formats.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), formats: vec!["csv".into(), "json".into()] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Distance window and observable for decay fits.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Smallest distance entering the fit.
    pub r_min: usize,
    /// Largest distance entering the fit (e.g. below the wrap-around scale
    /// on rings); omitted means no upper cut.
    pub r_max: Option<usize>,
    /// Observable: `spin` (transverse spin correlation, both models),
    /// `single` or `pair` (fermion models).
    pub kind: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { r_min: 2, r_max: None, kind: "spin".into() }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_min < 2 {
            return Err(Error::Config("fit r_min must be at least 2".into()));
        }
        if let Some(rm) = self.r_max {
            if rm < self.r_min {
                return Err(Error::Config("fit r_max must be >= r_min".into()));
            }
        }
        match self.kind.as_str() {
            "spin" | "single" | "pair" => Ok(()),
            other => Err(Error::Config(format!("unknown fit kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    const MINIMAL: &str = r#"
[lattice]
kind = "chain"
n = 8

[model]
kind = "xxz"
sector = 0
jxy = 1.0
jz = 4.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.lattice.kind, "chain");
        assert!(!cfg.lattice.periodic);
        assert_eq!(cfg.tolerances.gap_min, 1e-3);
        assert_eq!(cfg.twist.grid().len(), 10);
        assert!(cfg.output.wants("csv") && cfg.output.wants("json"));
        let lattice = cfg.lattice.build().unwrap();
        let couplings = cfg.model_required().unwrap().xxz_couplings(&lattice, None).unwrap();
        assert_eq!(couplings.jxy.len(), 7);
    }

    #[test]
    fn alpha_grid_outside_unit_window_is_rejected() {
        let bad = format!("{MINIMAL}\n[twist]\nalpha_grid = [0.1, 2.5]\n");
        let err = parse(&bad).unwrap_err();
        assert!(err.to_string().contains("(0, 2]"), "{err}");
        let zero = format!("{MINIMAL}\n[twist]\nalpha_grid = [0.0]\n");
        assert!(parse(&zero).is_err());
    }

    #[test]
    fn random_couplings_require_consistent_ranges_and_respect_the_cap() {
        let random = r#"
[lattice]
kind = "chain"
n = 6

[model]
kind = "xxz"
sector = 0
j_max = 2.0

[model.random]
seed = 7
jxy_range = [0.5, 1.0]
jz_range = [1.0, 2.0]
"#;
        let cfg = parse(random).unwrap();
        let lattice = cfg.lattice.build().unwrap();
        let model = cfg.model_required().unwrap();
        let a = model.xxz_couplings(&lattice, None).unwrap();
        let b = model.xxz_couplings(&lattice, None).unwrap();
        assert_eq!(a.jxy, b.jxy, "identical seeds must reproduce the draw");
        let c = model.xxz_couplings(&lattice, Some(8)).unwrap();
        assert_ne!(a.jxy, c.jxy, "the seed override must change the draw");
        assert!(a.jxy_max() <= 2.0);

        let capped = random.replace("j_max = 2.0", "j_max = 0.1");
        let cfg = parse(&capped).unwrap();
        let err = cfg.model_required().unwrap().xxz_couplings(&lattice, None).unwrap_err();
        assert!(err.to_string().contains("exceeds j_max"), "{err}");
    }

    #[test]
    fn unknown_keys_and_kinds_are_parse_errors() {
        let unknown_key = format!("{MINIMAL}\nunknown_top_level = 1\n");
        assert!(parse(&unknown_key).is_err());
        let bad_kind = MINIMAL.replace("\"chain\"", "\"triangle\"");
        let err = parse(&bad_kind).unwrap_err();
        assert!(err.to_string().contains("unknown lattice kind"), "{err}");
        let bad_model = MINIMAL.replace("\"xxz\"", "\"ising\"");
        assert!(parse(&bad_model).is_err());
    }

    #[test]
    fn hubbard_block_builds_longitudinal_fields_only() {
        let text = r#"
[lattice]
kind = "chain"
n = 2

[model]
kind = "hubbard"
sector = 2
t = 1.0
u = 0.0
b_z = [0.0, 0.3]
"#;
        let cfg = parse(text).unwrap();
        let lattice = cfg.lattice.build().unwrap();
        let params = cfg.model_required().unwrap().hubbard_params(&lattice).unwrap();
        assert_eq!(params.b_field[1], [0.0, 0.0, 0.3]);
        assert_eq!(params.t, vec![1.0]);
    }
}
