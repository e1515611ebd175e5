//! Experiment configuration: one TOML file, unknown keys rejected, hashed
//! byte-for-byte so every output can name the configuration it came from.

use std::path::{Path, PathBuf};

use hyperlab::asymptotic::log_grid;
use hyperlab::oscillatory::QuadratureSpec;
use hyperlab::profiles::HyperboloidProfileSpec;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mass: f64,
    pub seed: u64,
    pub grid: Grid,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub output: Output,
    pub expand: Expand,
    pub outfield: Outfield,
    pub rates: Rates,
    pub decay: Decay,
    pub cluster: Cluster,
    pub geom: Geom,
    pub lemma: Lemma,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub spacing: f64,
    pub cutoff: f64,
    #[serde(default = "one")]
    pub n_max: usize,
}

fn one() -> usize {
    1
}

/// `points` log-spaced values from `lo` to `hi`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl LogRange {
    pub fn values(&self) -> Vec<f64> {
        log_grid(self.lo, self.hi, self.points)
    }

    fn check(&self, name: &str, errors: &mut Vec<String>) {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite() && self.points >= 2) {
            errors.push(format!("{name}: need 0 < lo < hi and at least two points"));
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandCase {
    pub profile: HyperboloidProfileSpec,
    pub v: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expand {
    pub rho: LogRange,
    pub abs_tol: f64,
    pub max_order: usize,
    pub slope_slack: f64,
    pub leading_tol: f64,
    pub runtime_budget_s: f64,
    pub cases: Vec<ExpandCase>,
    pub corrections: Corrections,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corrections {
    pub rho: LogRange,
    pub v: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outfield {
    pub profile: HyperboloidProfileSpec,
    pub plateau_margin: f64,
    pub lambda: LogRange,
    pub slope_max: f64,
    pub window_energy: f64,
    pub random_profiles: usize,
    pub vacuum_tol: f64,
    pub transfer_pairs: usize,
    pub transfer_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub grid: Grid,
    pub base_radius: f64,
    pub disjoint: Disjoint,
    pub diagonal: Diagonal,
    pub product: Product,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disjoint {
    pub f1: HyperboloidProfileSpec,
    pub f2: HyperboloidProfileSpec,
    pub lambda: LogRange,
    pub ratios: usize,
    pub slope_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagonal {
    pub pairs: Vec<[HyperboloidProfileSpec; 2]>,
    pub lambda: LogRange,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub profile: HyperboloidProfileSpec,
    pub plateau_margin: f64,
    pub kernel: [f64; 2],
    pub lambda: LogRange,
    pub eta: f64,
    pub residual_max: f64,
    pub compare_etas: [f64; 2],
    pub agreement_factor: f64,
    pub primed_slope_max: f64,
    pub window_energy: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decay {
    pub widths: [f64; 2],
    pub reach: f64,
    pub separation: LogRange,
    pub r: f64,
    pub kappas: Vec<f64>,
    pub boost_rapidity: f64,
    pub narrow_width: f64,
    pub wide_width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub bump_radius: f64,
    pub reach: f64,
    pub c1: f64,
    pub separations: Vec<f64>,
    pub y1: [f64; 4],
    pub y2: [f64; 4],
    pub time_offset: f64,
    pub fock: ClusterFock,
    pub ahr: Ahr,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterFock {
    pub grid: Grid,
    pub widths: [f64; 4],
    pub points: Vec<[[f64; 4]; 3]>,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ahr {
    pub r: f64,
    pub separations: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geom {
    pub samples: usize,
    pub nu: f64,
    pub lambda_range: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma {
    pub matrices: usize,
    pub max_dim: usize,
    pub powers: Vec<usize>,
    pub equality_tol: f64,
}

/// A parsed configuration together with the SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub path: PathBuf,
}

/// Schema and range problems, one message per line.
#[derive(Debug, Clone)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))?;
    parse(&bytes, path)
}

pub fn parse(bytes: &[u8], path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ConfigError(vec![format!("{}: not UTF-8: {e}", path.display())]))?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(vec![format!("{}: {}", path.display(), e.to_string().trim_end())]))?;
    config.validate()?;
    Ok(LoadedConfig { config, hash: sha256_hex(bytes), path: path.to_path_buf() })
}

fn positive(name: &str, x: f64, errors: &mut Vec<String>) {
    if !(x > 0.0 && x.is_finite()) {
        errors.push(format!("{name} must be positive and finite, got {x}"));
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        positive("mass", self.mass, &mut e);
        for (name, g) in [("grid", &self.grid), ("rates.grid", &self.rates.grid), ("cluster.fock.grid", &self.cluster.fock.grid)] {
            positive(&format!("{name}.spacing"), g.spacing, &mut e);
            positive(&format!("{name}.cutoff"), g.cutoff, &mut e);
        }
        if let Err(err) = self.quadrature.validate() {
            e.push(format!("quadrature: {err}"));
        }
        let x = &self.expand;
        x.rho.check("expand.rho", &mut e);
        x.corrections.rho.check("expand.corrections.rho", &mut e);
        positive("expand.abs_tol", x.abs_tol, &mut e);
        if x.cases.is_empty() {
            e.push("expand.cases must not be empty".into());
        }
        if x.max_order > 2 {
            e.push("expand.max_order is capped at 2".into());
        }
        let o = &self.outfield;
        o.lambda.check("outfield.lambda", &mut e);
        positive("outfield.plateau_margin", o.plateau_margin, &mut e);
        let r = &self.rates;
        r.disjoint.lambda.check("rates.disjoint.lambda", &mut e);
        r.diagonal.lambda.check("rates.diagonal.lambda", &mut e);
        r.product.lambda.check("rates.product.lambda", &mut e);
        positive("rates.base_radius", r.base_radius, &mut e);
        if r.diagonal.pairs.is_empty() {
            e.push("rates.diagonal.pairs must not be empty".into());
        }
        if r.disjoint.ratios == 0 {
            e.push("rates.disjoint.ratios must be at least 1".into());
        }
        let d = &self.decay;
        d.separation.check("decay.separation", &mut e);
        for (n, w) in [("decay.widths[0]", d.widths[0]), ("decay.widths[1]", d.widths[1]), ("decay.narrow_width", d.narrow_width), ("decay.wide_width", d.wide_width)] {
            positive(n, w, &mut e);
        }
        positive("decay.reach", d.reach, &mut e);
        if d.kappas.is_empty() {
            e.push("decay.kappas must not be empty".into());
        }
        let c = &self.cluster;
        positive("cluster.bump_radius", c.bump_radius, &mut e);
        positive("cluster.reach", c.reach, &mut e);
        if c.separations.is_empty() || c.ahr.separations.is_empty() {
            e.push("cluster separations must not be empty".into());
        }
        if c.fock.grid.n_max < 4 {
            e.push("cluster.fock.grid.n_max must be at least 4 for Wick squares".into());
        }
        if self.geom.samples == 0 || !(self.geom.lambda_range[0] > 0.0 && self.geom.lambda_range[1] > self.geom.lambda_range[0]) {
            e.push("geom: need samples > 0 and 0 < lambda_range[0] < lambda_range[1]".into());
        }
        positive("geom.nu", self.geom.nu, &mut e);
        let l = &self.lemma;
        if l.max_dim < 2 || l.powers.is_empty() || l.powers.contains(&0) {
            e.push("lemma: need max_dim ≥ 2 and powers ≥ 1".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(e))
        }
    }
}
