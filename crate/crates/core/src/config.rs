//! Structured run configuration.
//!
//! One JSON document drives every CLI mode. A config describes either a cost
//! pair (`C1`, `C2`, `p`) or a potential (`matrix` or `table`), declares the
//! scale its entries live on, and optionally carries sampling parameters and
//! tolerance overrides. Matrices are row-major; words are comma-free digit
//! strings over `1..d`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{Alphabet, Word};
use crate::testfn::TestFunction;
use crate::transfer::{EigenOptions, LocallyConstantPotential};
use crate::transport::{CostPair, SolveOptions};

/// Whether table entries are logs (`c(x,i,j)`, `A(w)`) or the exponentiated
/// weights themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Exp,
    Log,
}

/// Optional overrides of the numerical tolerances; unset fields keep the
/// documented defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conic_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_margin: Option<f64>,
}

/// A parsed run configuration. Mode-specific requirements are checked by the
/// accessors, not at load time, so one document can serve several modes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Optional mode pin; when present it must match the invoked subcommand.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,

    // Cost pair (transport modes).
    #[serde(rename = "C1", skip_serializing_if = "Option::is_none")]
    pub c1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C2", skip_serializing_if = "Option::is_none")]
    pub c2: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,

    // Potential (classical modes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<BTreeMap<String, f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,

    // Sampling parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<u32>,
    /// Initial window as a word string; padded with 1s to the needed length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<String>,
    /// Initial `X`-component for plan chains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<u8>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json_str(&text)
    }

    /// Canonical single-line JSON of the resolved config, embedded in every
    /// report for auditability.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Whether the document describes a cost pair rather than a potential.
    pub fn is_cost(&self) -> bool {
        self.c1.is_some() || self.c2.is_some() || self.p.is_some()
    }

    fn scale(&self) -> Result<Scale> {
        self.scale.ok_or_else(|| {
            Error::Config("config must declare \"scale\": \"exp\" or \"log\"".into())
        })
    }

    /// The cost pair of a transport config.
    pub fn cost_pair(&self) -> Result<CostPair> {
        let scale = self.scale()?;
        let c1 = matrix2(self.c1.as_ref(), "C1")?;
        let c2 = matrix2(self.c2.as_ref(), "C2")?;
        let p = self
            .p
            .ok_or_else(|| Error::Config("cost config needs \"p\"".into()))?;
        match scale {
            Scale::Exp => CostPair::new(c1, c2, p),
            Scale::Log => CostPair::from_log(c1, c2, p),
        }
    }

    /// The potential of a classical config, on the natural log scale.
    pub fn potential(&self) -> Result<LocallyConstantPotential> {
        let scale = self.scale()?;
        match (&self.matrix, &self.table) {
            (Some(_), Some(_)) => Err(Error::Config(
                "config has both \"matrix\" and \"table\"; pick one".into(),
            )),
            (Some(rows), None) => self.potential_from_matrix(rows, scale),
            (None, Some(table)) => self.potential_from_table(table, scale),
            (None, None) => Err(Error::Config(
                "potential config needs \"matrix\" or \"table\"".into(),
            )),
        }
    }

    fn potential_from_matrix(
        &self,
        rows: &[Vec<f64>],
        scale: Scale,
    ) -> Result<LocallyConstantPotential> {
        let d = rows.len() as u8;
        if let Some(declared) = self.alphabet {
            if declared != d {
                return Err(Error::Config(format!(
                    "alphabet {declared} does not match the {d}-row matrix"
                )));
            }
        }
        if let Some(depth) = self.depth {
            if depth != 2 {
                return Err(Error::Config(
                    "matrix form encodes a depth-2 potential".into(),
                ));
            }
        }
        let alphabet = Alphabet::new(d)?;
        if rows.iter().any(|r| r.len() != d as usize) {
            return Err(Error::Config(format!("matrix must be {d}x{d}")));
        }
        match scale {
            Scale::Exp => LocallyConstantPotential::from_exp_matrix(alphabet, rows),
            Scale::Log => {
                let values: Vec<f64> = rows.iter().flatten().copied().collect();
                LocallyConstantPotential::new(alphabet, 2, values)
            }
        }
    }

    fn potential_from_table(
        &self,
        table: &BTreeMap<String, f64>,
        scale: Scale,
    ) -> Result<LocallyConstantPotential> {
        let d = self
            .alphabet
            .ok_or_else(|| Error::Config("table form needs \"alphabet\"".into()))?;
        let alphabet = Alphabet::new(d)?;
        let depth = match table.keys().next() {
            Some(k) => k.len(),
            None => return Err(Error::Config("empty potential table".into())),
        };
        if depth == 0 {
            return Err(Error::Config("potential words must be nonempty".into()));
        }
        if let Some(declared) = self.depth {
            if declared != depth {
                return Err(Error::Config(format!(
                    "declared depth {declared} does not match word length {depth}"
                )));
            }
        }
        let expected = alphabet.word_count(depth);
        if table.len() != expected {
            return Err(Error::Config(format!(
                "potential table has {} entries, expected {expected} words of length {depth}",
                table.len()
            )));
        }
        let mut values = vec![f64::NAN; expected];
        for (key, &value) in table {
            let word = Word::parse(key, alphabet)?;
            if word.len() != depth {
                return Err(Error::Config(format!(
                    "word {key:?} has length {}, expected {depth}",
                    word.len()
                )));
            }
            let entry = match scale {
                Scale::Log => value,
                Scale::Exp => {
                    if !(value.is_finite() && value > 0.0) {
                        return Err(Error::Config(format!(
                            "exp-scale entry for {key:?} must be positive, got {value}"
                        )));
                    }
                    value.ln()
                }
            };
            values[alphabet.word_index(&word)] = entry;
        }
        LocallyConstantPotential::new(alphabet, depth, values)
    }

    /// Parse the declared test functions against the given alphabet.
    pub fn test_functions(&self, alphabet: Alphabet) -> Result<Vec<TestFunction>> {
        self.functions
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|s| TestFunction::parse(s, alphabet))
            .collect()
    }

    pub fn eigen_options(&self) -> EigenOptions {
        let mut opts = EigenOptions::default();
        if let Some(t) = self.tolerances {
            if let Some(v) = t.eigen_residual {
                opts.tolerance = v;
            }
            if let Some(v) = t.eigen_max_iterations {
                opts.max_iterations = v;
            }
        }
        opts
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::default();
        if let Some(t) = self.tolerances {
            if let Some(v) = t.conic_residual {
                opts.conic_residual_tol = v;
            }
            if let Some(v) = t.spectral_margin {
                opts.spectral_tol = v;
            }
        }
        opts
    }
}

fn matrix2(rows: Option<&Vec<Vec<f64>>>, name: &str) -> Result<[[f64; 2]; 2]> {
    let rows = rows.ok_or_else(|| Error::Config(format!("cost config needs \"{name}\"")))?;
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(Error::Config(format!("\"{name}\" must be a 2x2 matrix")));
    }
    Ok([[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_config_round_trip() {
        let text = r#"{
            "C1": [[3, 5], [2, 4]],
            "C2": [[2, 1], [4, 3]],
            "p": 0.7,
            "scale": "exp",
            "functions": ["x:1", "cyl:1", "cyl:12"],
            "seed": 5,
            "steps": 1000
        }"#;
        let config = RunConfig::from_json_str(text).unwrap();
        assert!(config.is_cost());
        let costs = config.cost_pair().unwrap();
        assert_eq!(costs.weights(0)[0][1], 5.0);
        assert_eq!(costs.p(), 0.7);
        let fns = config.test_functions(Alphabet::new(2).unwrap()).unwrap();
        assert_eq!(fns.len(), 3);
    }

    #[test]
    fn log_scale_cost_is_exponentiated() {
        let text = r#"{"C1": [[0,0],[0,0]], "C2": [[0,0],[0,0]], "p": 0.5, "scale": "log"}"#;
        let costs = RunConfig::from_json_str(text).unwrap().cost_pair().unwrap();
        assert_eq!(costs.weights(0)[1][1], 1.0);
    }

    #[test]
    fn potential_from_matrix_and_from_table_agree() {
        let from_matrix =
            RunConfig::from_json_str(r#"{"scale": "exp", "matrix": [[1, 2], [3, 4]]}"#)
                .unwrap()
                .potential()
                .unwrap();
        let from_table = RunConfig::from_json_str(
            r#"{"scale": "log", "alphabet": 2,
                "table": {"11": 0.0, "12": 0.6931471805599453,
                          "21": 1.0986122886681098, "22": 1.3862943611198906}}"#,
        )
        .unwrap()
        .potential()
        .unwrap();
        for (a, b) in from_matrix.values().iter().zip(from_table.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn table_with_missing_words_is_rejected() {
        let config = RunConfig::from_json_str(
            r#"{"scale": "log", "alphabet": 2, "table": {"11": 0.0, "12": 0.0, "21": 0.0}}"#,
        )
        .unwrap();
        assert!(matches!(config.potential(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json_str(r#"{"steps": 5, "stepz": 6}"#).is_err());
    }

    #[test]
    fn missing_scale_is_rejected() {
        let config = RunConfig::from_json_str(r#"{"matrix": [[1, 2], [3, 4]]}"#).unwrap();
        assert!(matches!(config.potential(), Err(Error::Config(_))));
    }

    #[test]
    fn tolerance_overrides_apply() {
        let config = RunConfig::from_json_str(
            r#"{"tolerances": {"eigen_residual": 1e-10, "spectral_margin": 1e-7}}"#,
        )
        .unwrap();
        assert_eq!(config.eigen_options().tolerance, 1e-10);
        assert_eq!(config.solve_options().spectral_tol, 1e-7);
        assert_eq!(config.solve_options().conic_residual_tol, 1e-9);
    }

    #[test]
    fn canonical_form_is_stable() {
        let a = RunConfig::from_json_str(r#"{"seed": 3, "steps": 10}"#).unwrap();
        let b = RunConfig::from_json_str(r#"{"steps": 10, "seed": 3}"#).unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }
}
