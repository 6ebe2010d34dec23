//! TOML run configuration with sections `model`, `grid`, `sweep`, `probe`
//! and `output`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::grid::{Boundary, Grid, GridMode};
use crate::model::PotentialSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Seed for every randomized probe.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Alternative home of `q1`, `q2`; a key may appear here or under
    /// `model`, not both.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<String>,
}

fn default_seed() -> u64 {
    17
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub epsilon: f64,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default)]
    pub sector: usize,
    #[serde(default = "zero_expr")]
    pub q1: String,
    #[serde(default = "zero_expr")]
    pub q2: String,
    #[serde(default = "onef")]
    pub rho: f64,
    #[serde(default)]
    pub tau: Option<f64>,
}

fn one() -> usize {
    1
}

fn onef() -> f64 {
    1.0
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_mode")]
    pub mode: GridMode,
    pub spacing: f64,
    /// Either `r_max` (alias `R_max`) or `f_max` (the radius with
    /// `f(r) = f_max`).
    #[serde(default, alias = "R_max")]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub f_max: Option<f64>,
    #[serde(default)]
    pub absorb_width: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_mode() -> GridMode {
    GridMode::Line1d
}

fn default_boundary() -> Boundary {
    Boundary::Dirichlet
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: f64,
    pub gammas: Vec<f64>,
    pub interval: [f64; 2],
    pub psi: Vec<String>,
    /// Defaults to `{0, β_c/4, β_c/2, 3β_c/4, 1.5β_c}`.
    pub betas: Option<Vec<f64>>,
    /// Weight exponent of the Hölder fit.
    pub s: f64,
    /// Real offsets `z′ − z` of the Hölder pairs.
    pub holder_shifts: Vec<f64>,
    /// `Im z` of the Hölder pairs.
    pub holder_gamma: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gammas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            interval: [0.5, 2.0],
            psi: vec!["gaussian".into(), "ring".into()],
            betas: None,
            s: 1.0,
            holder_shifts: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            holder_gamma: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub nu: usize,
    pub delta: f64,
    pub beta: f64,
    pub samples: usize,
    /// Probe grid. The dense projections limit it to a few thousand nodes.
    pub spacing: f64,
    pub r_max: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            nu: 2,
            delta: 0.5,
            beta: 0.75,
            samples: 240,
            spacing: 1.0 / 32.0,
            r_max: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "replab-out".into() }
    }
}

const TOP: &[&str] = &["seed", "model", "grid", "sweep", "probe", "output", "potential"];
const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["epsilon", "dim", "sector", "q1", "q2", "rho", "tau"]),
    ("grid", &["mode", "spacing", "r_max", "R_max", "f_max", "absorb_width", "boundary"]),
    ("potential", &["q1", "q2"]),
    (
        "sweep",
        &["lambda", "gammas", "interval", "psi", "betas", "s", "holder_shifts", "holder_gamma"],
    ),
    ("probe", &["nu", "delta", "beta", "samples", "spacing", "r_max"]),
    ("output", &["dir"]),
];

const REQUIRED: &[(&str, &str)] = &[("model", "epsilon"), ("grid", "spacing")];

fn check_keys(table: &toml::Table) -> Result<()> {
    for (k, v) in table {
        if !TOP.contains(&k.as_str()) {
            return Err(Error::Config {
                key: k.clone(),
                message: "unknown key".into(),
            });
        }
        if let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == k) {
            let Some(sub) = v.as_table() else {
                return Err(Error::Config {
                    key: k.clone(),
                    message: "expected a table".into(),
                });
            };
            for sk in sub.keys() {
                if !allowed.contains(&sk.as_str()) {
                    return Err(Error::Config {
                        key: format!("{k}.{sk}"),
                        message: "unknown key".into(),
                    });
                }
            }
        }
    }
    for key in ["q1", "q2"] {
        let has = |s: &str| table.get(s).and_then(|t| t.as_table()).is_some_and(|t| t.contains_key(key));
        if has("model") && has("potential") {
            return Err(Error::Config {
                key: format!("potential.{key}"),
                message: format!("also given as model.{key}"),
            });
        }
    }
    for (section, key) in REQUIRED {
        let Some(sub) = table.get(*section) else {
            return Err(Error::Config {
                key: (*section).into(),
                message: "missing section".into(),
            });
        };
        if sub.as_table().is_some_and(|t| !t.contains_key(*key)) {
            return Err(Error::Config {
                key: format!("{section}.{key}"),
                message: "missing key".into(),
            });
        }
    }
    Ok(())
}

/// Section and field named in a serde message, if any.
fn key_from_message(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: "<document>".into(),
            message: e.message().to_string(),
        })?;
        check_keys(&table)?;
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config {
            key: key_from_message(e.message()),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "<file>".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        match (self.grid.r_max, self.grid.f_max) {
            (Some(_), Some(_)) => return bad("grid.r_max", "give either r_max or f_max, not both"),
            (None, None) => return bad("grid.r_max", "missing (or give grid.f_max)"),
            _ => {}
        }
        if self.sweep.interval[0] >= self.sweep.interval[1] {
            return bad("sweep.interval", "must be increasing");
        }
        if self.sweep.gammas.iter().any(|g| !(0.0..1.0).contains(g)) {
            return bad("sweep.gammas", "every Γ must lie in [0, 1)");
        }
        self.spec().map_err(|e| Error::Config {
            key: "model".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn spec(&self) -> Result<PotentialSpec> {
        let m = &self.model;
        let p = self.potential.clone().unwrap_or_default();
        let q1 = p.q1.unwrap_or_else(|| m.q1.clone());
        let q2 = p.q2.unwrap_or_else(|| m.q2.clone());
        PotentialSpec::new(m.epsilon, m.dim, m.sector, &q1, &q2, m.rho, m.tau)
    }

    pub fn r_max(&self) -> f64 {
        match (self.grid.r_max, self.grid.f_max) {
            (Some(r), _) => r,
            (None, Some(f)) => geometry::flow_inverse(f, self.model.epsilon).ceil(),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::build(g.mode, self.model.dim, g.spacing, self.r_max(), g.absorb_width, g.boundary)
    }

    /// The same grid with the boundary switched (an absorbing layer is
    /// dropped for radiation ends).
    pub fn grid_with_boundary(&self, boundary: Boundary) -> Result<Grid> {
        self.grid()?.with_boundary(boundary)
    }

    /// The reference instance at `f(R_max) ≥ 64`, spacing 1/64.
    pub fn reference() -> Self {
        Self::parse(REFERENCE_TOML).expect("reference config parses")
    }
}

pub const REFERENCE_TOML: &str = r#"seed = 17

[model]
epsilon = 1.0
dim = 1
q1 = "0.3*r^epsilon/f"
q2 = "0.5*f^(-2)*sin(r)"
rho = 1.0
tau = 1.0

[grid]
mode = "line-1d"
spacing = 0.015625
f_max = 64.0
absorb_width = 16.0
boundary = "dirichlet"
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parses_to_reference_instance() {
        let c = Config::reference();
        assert_eq!(c.r_max(), 1057.0);
        let g = c.grid().unwrap();
        assert_eq!(g.spacing, 1.0 / 64.0);
        let s = c.spec().unwrap();
        assert_eq!(s.beta_c(), PotentialSpec::reference().beta_c());
        assert_eq!(c.sweep, SweepConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = REFERENCE_TOML.replace("epsilon = 1.0", "epsilonn = 1.0");
        match Config::parse(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.epsilonn"),
            other => panic!("{other:?}"),
        }
        match Config::parse(&format!("{REFERENCE_TOML}\n[plots]\nx = 1\n")) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "plots"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_invalid_values_are_reported() {
        let text = REFERENCE_TOML.replace("spacing = 0.015625\n", "");
        assert!(matches!(Config::parse(&text), Err(Error::Config { key, .. }) if key == "grid.spacing"));
        let text = REFERENCE_TOML.replace("epsilon = 1.0", "epsilon = 3.0");
        assert!(matches!(Config::parse(&text), Err(Error::Config { key, .. }) if key == "model"));
        let text = REFERENCE_TOML.replace("f_max = 64.0", "r_max = 10.0\nf_max = 64.0");
        assert!(matches!(Config::parse(&text), Err(Error::Config { key, .. }) if key == "grid.r_max"));
        assert!(matches!(Config::parse("model = 3"), Err(Error::Config { .. })));
        let text = REFERENCE_TOML.replace("f_max = 64.0", "R_max = 1057.0");
        assert_eq!(Config::parse(&text).unwrap().r_max(), 1057.0);
        let moved = REFERENCE_TOML.replace("q1 = ", "# q1 = ") + "\n[potential]\nq1 = \"0.3*r^epsilon/f\"\n";
        assert_eq!(Config::parse(&moved).unwrap().spec().unwrap(), Config::reference().spec().unwrap());
        let twice = format!("{REFERENCE_TOML}\n[potential]\nq1 = \"0\"\n");
        assert!(matches!(Config::parse(&twice), Err(Error::Config { key, .. }) if key == "potential.q1"));
        let partial = Config::parse(&format!("{REFERENCE_TOML}\n[sweep]\nlambda = 1.5\n")).unwrap();
        assert_eq!(partial.sweep.lambda, 1.5);
        assert_eq!(partial.sweep.gammas, SweepConfig::default().gammas);
    }
}
