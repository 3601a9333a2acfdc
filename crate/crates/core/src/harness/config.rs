//! Experiment configuration: a TOML tree with dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Regularizer;
use crate::trace::Metric;

fn default_repetitions() -> usize {
    10
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// File-name stem for written results.
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub nodes: usize,
    pub iterations: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub algorithm: AlgorithmKind,
    /// Fills in or pins hyperparameters; see [`super::preset`].
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub hyper: HyperSpec,
    pub problem: ProblemSpec,
    pub topology: TopologySpec,
    /// Metrics written to the CSV.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Directory for cached reference solutions.
    #[serde(default)]
    pub reference_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Proxskip,
    ProxskipDual,
    LocalDsgd,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Proxskip => "proxskip",
            AlgorithmKind::ProxskipDual => "proxskip-dual",
            AlgorithmKind::LocalDsgd => "local-dsgd",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    /// Local steps per round for local-DSGD; defaults to `round(1/p)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        dim: usize,
        varsigma2: f64,
        sigma2: f64,
    },
    Logistic {
        data: DataSource,
        regularizer: RegularizerSpec,
        sigma2: f64,
    },
}

impl ProblemSpec {
    pub fn sigma2(&self) -> f64 {
        match self {
            ProblemSpec::Quadratic { sigma2, .. } | ProblemSpec::Logistic { sigma2, .. } => *sigma2,
        }
    }

    pub fn set_sigma2(&mut self, value: f64) {
        match self {
            ProblemSpec::Quadratic { sigma2, .. } | ProblemSpec::Logistic { sigma2, .. } => *sigma2 = value,
        }
    }
}

/// `fixture` is the bundled synthetic LIBSVM file; anything else is a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Fixture,
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizerSpec {
    L2 { coef: f64 },
    /// `c = ratio · L_data`, e.g. `ratio = 0.01` for `r = (L/200)‖x‖²`.
    L2Relative { ratio: f64 },
    Nonconvex,
}

impl RegularizerSpec {
    pub fn resolve(&self, data_smoothness: f64) -> Regularizer {
        match *self {
            RegularizerSpec::L2 { coef } => Regularizer::L2 { coef },
            RegularizerSpec::L2Relative { ratio } => Regularizer::L2 { coef: ratio * data_smoothness },
            RegularizerSpec::Nonconvex => Regularizer::Nonconvex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring,
    Path,
    Complete,
    /// Random connected graph with `round(ι n(n−1)/2)` edges; the generator
    /// seed defaults to the experiment seed.
    Random {
        iota: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` and applies `key=value` overrides before validation.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut tree: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies overrides to an already-parsed config.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut tree = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.nodes == 0 {
            return bad("nodes must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.metrics.is_empty() {
            return bad("metric set is empty".into());
        }
        match &self.problem {
            ProblemSpec::Quadratic { dim, varsigma2, sigma2 } => {
                if *dim == 0 || !(*varsigma2 >= 0.0) || !(*sigma2 >= 0.0) {
                    return bad("quadratic needs dim >= 1 and nonnegative variances".into());
                }
            }
            ProblemSpec::Logistic { sigma2, regularizer, .. } => {
                if !(*sigma2 >= 0.0) {
                    return bad("sigma2 must be nonnegative".into());
                }
                match regularizer {
                    RegularizerSpec::L2 { coef: c } | RegularizerSpec::L2Relative { ratio: c } if !(*c >= 0.0) => {
                        return bad("regularizer coefficient must be nonnegative".into());
                    }
                    _ => {}
                }
            }
        }
        match self.topology {
            TopologySpec::Ring if self.nodes < 3 => return bad("a ring needs at least 3 nodes".into()),
            TopologySpec::Random { iota, .. } if !(iota > 0.0 && iota <= 1.0) => {
                return bad(format!("iota = {iota} outside (0, 1]"));
            }
            _ => {}
        }
        if let Some(name) = &self.preset {
            super::preset(name).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::problems::hash_hex(|h| {
            use sha2::Digest;
            h.update(json.as_bytes());
        })
    }
}

/// Sets `a.b.c = value` in `tree`. The value is parsed as a TOML literal and
/// falls back to a bare string. Unknown keys surface when the tree is
/// deserialized.
pub fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key {key:?}")));
    }
    let mut node = tree;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?}: {part:?} is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
seed = 7
nodes = 10
iterations = 100
algorithm = "proxskip"
preset = "lemma1"

[hyper]
alpha = 0.5
p = 0.5

[problem]
family = "quadratic"
dim = 4
varsigma2 = 1.0
sigma2 = 0.0

[topology]
kind = "ring"
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.repetitions, 10);
        assert_eq!(cfg.metrics.len(), 5);
        assert_eq!(cfg.hyper.p, Some(0.5));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let c = cfg.with_overrides(&["hyper.p=0.2".into(), "topology.kind=random".into(), "topology.iota=0.5".into()]).unwrap();
        assert_eq!(c.hyper.p, Some(0.2));
        assert_eq!(c.topology, TopologySpec::Random { iota: 0.5, seed: None });
        assert!(matches!(cfg.with_overrides(&["hyper.q=1".into()]), Err(Error::Config(_))));
        assert!(matches!(cfg.with_overrides(&["hyper.p".into()]), Err(Error::Config(_))));
        assert!(matches!(cfg.with_overrides(&["problem.rho=1".into()]), Err(Error::Config(_))));
        let named = cfg.with_overrides(&["name=ring run".into()]).unwrap();
        assert_eq!(named.name.as_deref(), Some("ring run"));
    }

    #[test]
    fn rejects_invalid() {
        for o in ["repetitions=0", "nodes=2", "preset=\"nope\"", "problem.sigma2=-1.0"] {
            let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
            assert!(cfg.with_overrides(&[o.into()]).is_err(), "{o}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let other = cfg.with_overrides(&["seed=8".into()]).unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn missing_file_is_distinct() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/cfg.toml"), &[]).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }
}
