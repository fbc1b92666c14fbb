//! Run configuration: JSON on disk, overridable from the command line.
//!
//! ```json
//! {
//!   "weights": [{"name": "polynomial", "params": [2.0]}, {"table": "w.csv"}],
//!   "kernels": [{"kind": "triangle", "half_width": 1.0}],
//!   "grid": {"L": 256.0, "h": 0.0625},
//!   "tolerances": {"rel_tol": 1e-6, "tail_tol": 1e-10, "rel_slack": 0.01, "floor": 1e-8},
//!   "n_max": 256,
//!   "t_grid": {"lo": -25.13, "hi": 25.13, "count": 2048},
//!   "line_count": 9,
//!   "out": "out"
//! }
//! ```
//!
//! Every field is optional; missing fields take the defaults shown by
//! `RunConfig::default()`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use annulus_core::multipliers::Kernel;
use annulus_core::weights::make_builtin_weight;
use annulus_core::{Grid64, Weight64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Catalogue {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    /// Two-column CSV `x, ln w(x)`.
    Table {
        table: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
}

impl WeightSpec {
    pub fn catalogue(name: &str, params: &[f64]) -> Self {
        WeightSpec::Catalogue {
            name: name.into(),
            params: params.to_vec(),
        }
    }

    pub fn build(&self) -> Result<Weight64, CliError> {
        match self {
            WeightSpec::Catalogue { name, params } => Ok(make_builtin_weight(name, params)?),
            WeightSpec::Table { table, id } => {
                let file = fs::File::open(table)
                    .map_err(|e| CliError::Config(format!("weight table {}: {e}", table.display())))?;
                let id = id.clone().unwrap_or_else(|| table.display().to_string());
                Ok(Weight64::from_table_csv(id, file)?)
            }
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

/// `name`, `name:p1,p2` or `table:path.csv`.
impl FromStr for WeightSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("table", path)) => Ok(WeightSpec::Table {
                table: path.into(),
                id: None,
            }),
            Some((name, params)) => Ok(WeightSpec::Catalogue {
                name: name.into(),
                params: parse_list(params)?,
            }),
            None if s.is_empty() => Err("empty weight spec".into()),
            None => Ok(WeightSpec::catalogue(s, &[])),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Catalogue { name, params } if params.is_empty() => write!(f, "{name}"),
            WeightSpec::Catalogue { name, params } => {
                let p: Vec<String> = params.iter().map(|v| v.to_string()).collect();
                write!(f, "{name}:{}", p.join(","))
            }
            WeightSpec::Table { table, .. } => write!(f, "table:{}", table.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Delta,
    /// Unit-mass `(1 - |x| / r) / r`.
    Triangle { half_width: f64 },
    Bump { center: f64, width: f64 },
    Indicator { lo: f64, hi: f64 },
    /// CSV in the sampled-function format.
    Table { path: PathBuf },
}

impl KernelSpec {
    pub fn build(&self, grid: Grid64) -> Result<Kernel<f64>, CliError> {
        Ok(match self {
            KernelSpec::Delta => Kernel::delta(grid),
            KernelSpec::Triangle { half_width } => Kernel::triangle(grid, *half_width)?,
            KernelSpec::Bump { center, width } => Kernel::bump(grid, *center, *width)?,
            KernelSpec::Indicator { lo, hi } => Kernel::indicator(grid, *lo, *hi)?,
            KernelSpec::Table { path } => {
                let file = fs::File::open(path)
                    .map_err(|e| CliError::Config(format!("kernel table {}: {e}", path.display())))?;
                let k = Kernel::read_csv(std::io::BufReader::new(file))?;
                if !k.grid().same_as(&grid) {
                    return Err(CliError::Config(format!(
                        "kernel table {} is sampled on a different grid",
                        path.display()
                    )));
                }
                k
            }
        })
    }
}

/// `delta`, `triangle:r`, `bump:c,w`, `indicator:lo,hi` or `table:path.csv`.
impl FromStr for KernelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let p = parse_list(rest)?;
        let arity = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(format!("kernel `{kind}` takes {n} parameters, got {}", p.len()))
            }
        };
        match kind {
            "delta" => arity(0).map(|_| KernelSpec::Delta),
            "triangle" => arity(1).map(|_| KernelSpec::Triangle { half_width: p[0] }),
            "bump" => arity(2).map(|_| KernelSpec::Bump { center: p[0], width: p[1] }),
            "indicator" => arity(2).map(|_| KernelSpec::Indicator { lo: p[0], hi: p[1] }),
            "table" => Ok(KernelSpec::Table { path: rest.into() }),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Delta => write!(f, "delta"),
            KernelSpec::Triangle { half_width } => write!(f, "triangle:{half_width}"),
            KernelSpec::Bump { center, width } => write!(f, "bump:{center},{width}"),
            KernelSpec::Indicator { lo, hi } => write!(f, "indicator:{lo},{hi}"),
            KernelSpec::Table { path } => write!(f, "table:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "h")]
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 256.0,
            step: 1.0 / 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub tail_tol: f64,
    pub rel_slack: f64,
    pub floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            tail_tol: 1e-10,
            rel_slack: 1e-2,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for TGridSpec {
    fn default() -> Self {
        let span = 8.0 * std::f64::consts::PI;
        Self {
            lo: -span,
            hi: span,
            count: 2048,
        }
    }
}

impl TGridSpec {
    pub fn points(&self) -> Vec<f64> {
        annulus_core::symbols::uniform_grid(self.lo, self.hi, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weights: Vec<WeightSpec>,
    pub kernels: Vec<KernelSpec>,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub n_max: usize,
    pub t_grid: TGridSpec,
    pub line_count: usize,
    pub out: PathBuf,
}

/// The builtin weight matrix.
pub fn builtin_weights() -> Vec<WeightSpec> {
    vec![
        WeightSpec::catalogue("constant", &[]),
        WeightSpec::catalogue("exp_linear", &[]),
        WeightSpec::catalogue("polynomial", &[2.0]),
        WeightSpec::catalogue("stretched_exp", &[1.0, 0.5]),
        WeightSpec::catalogue("exp_over_log", &[]),
        WeightSpec::catalogue("exp_poly", &[1.0]),
    ]
}

pub fn standard_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::Delta,
        KernelSpec::Triangle { half_width: 1.0 },
        KernelSpec::Bump { center: 0.0, width: 1.0 },
        KernelSpec::Indicator { lo: -0.5, hi: 0.5 },
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weights: builtin_weights(),
            kernels: standard_kernels(),
            grid: GridSpec::default(),
            tolerances: Tolerances::default(),
            n_max: annulus_core::shift_analysis::DEFAULT_N_MAX,
            t_grid: TGridSpec::default(),
            line_count: 9,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line overrides; `None` and empty lists leave the config alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub weights: Vec<WeightSpec>,
    pub kernels: Vec<KernelSpec>,
    pub half_width: Option<f64>,
    pub step: Option<f64>,
    pub n_max: Option<usize>,
    pub rel_tol: Option<f64>,
    pub line_count: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        if !o.weights.is_empty() {
            self.weights = o.weights;
        }
        if !o.kernels.is_empty() {
            self.kernels = o.kernels;
        }
        if let Some(v) = o.half_width {
            self.grid.half_width = v;
        }
        if let Some(v) = o.step {
            self.grid.step = v;
        }
        if let Some(v) = o.n_max {
            self.n_max = v;
        }
        if let Some(v) = o.rel_tol {
            self.tolerances.rel_tol = v;
        }
        if let Some(v) = o.line_count {
            self.line_count = v;
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.weights.is_empty() {
            return Err(CliError::Config("no weights configured".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("rel_tol", t.rel_tol),
            ("tail_tol", t.tail_tol),
            ("rel_slack", t.rel_slack),
            ("floor", t.floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance {name} = {v} must be > 0")));
            }
        }
        Grid64::new(self.grid.half_width, self.grid.step)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.n_max < 2 {
            return Err(CliError::Config("n_max must be at least 2".into()));
        }
        if self.line_count < 1 {
            return Err(CliError::Config("line_count must be at least 1".into()));
        }
        let g = &self.t_grid;
        if !(g.lo < g.hi) || g.count < 2 {
            return Err(CliError::Config("t_grid needs lo < hi and count >= 2".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid64 {
        Grid64::new(self.grid.half_width, self.grid.step).expect("validated grid")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse_and_print() {
        for s in ["constant", "polynomial:2", "stretched_exp:1,0.5", "table:w.csv"] {
            assert_eq!(s.parse::<WeightSpec>().unwrap().to_string(), s);
        }
        for s in ["delta", "triangle:1", "bump:0,1", "indicator:-0.5,0.5"] {
            assert_eq!(s.parse::<KernelSpec>().unwrap().to_string(), s);
        }
        assert!("triangle".parse::<KernelSpec>().is_err());
        assert!("sinc:1".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn config_round_trips() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        let partial = RunConfig::from_json(r#"{"weights": [{"name": "exp_linear"}], "grid": {"L": 64, "h": 0.125}}"#)
            .unwrap();
        assert_eq!(partial.weights, vec![WeightSpec::catalogue("exp_linear", &[])]);
        assert_eq!(partial.n_max, 256);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.weights.clear();
        assert!(c.validate().unwrap_err().to_string().contains("no weights configured"));
        let mut c = RunConfig::default();
        c.tolerances.tail_tol = 0.0;
        assert!(c.validate().is_err());
        let c = RunConfig::default().apply(Overrides {
            step: Some(0.3),
            ..Default::default()
        });
        assert!(c.validate().is_err());
    }
}
