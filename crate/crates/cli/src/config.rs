use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use evocad_core::evolve::EvoConfig;
use evocad_core::lm::{ModelRole, ModelRoleConfig, DEFAULT_IN_FLIGHT};
use evocad_core::metrics::{IcpConfig, DEFAULT_RESOLUTION};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Offline deterministic models.
    #[default]
    Mock,
    /// A chat-completions HTTP endpoint.
    Wire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// Built-in extrusion language.
    #[default]
    Csg,
    /// External runner processes executing CadQuery scripts.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WireSection {
    pub endpoint: String,
    pub generator_model: String,
    pub describer_model: String,
    pub ranker_model: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub in_flight: usize,
}

impl Default for WireSection {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            generator_model: String::new(),
            describer_model: String::new(),
            ranker_model: String::new(),
            timeout_s: 120.0,
            max_retries: 3,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }
}

impl WireSection {
    pub fn role_config(&self, role: ModelRole) -> ModelRoleConfig {
        let name = match role {
            ModelRole::Generator => &self.generator_model,
            ModelRole::Describer => &self.describer_model,
            ModelRole::Ranker => &self.ranker_model,
        };
        ModelRoleConfig {
            max_retries: self.max_retries,
            timeout: Duration::from_secs_f64(self.timeout_s),
            ..ModelRoleConfig::new(role, name.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerSection {
    /// Program and arguments starting one runner process.
    pub command: Vec<String>,
    pub processes: usize,
    pub timeout_s: f64,
    /// Directory of few-shot example scripts, one per file.
    pub corpus_dir: Option<PathBuf>,
}

impl Default for RunnerSection {
    fn default() -> Self {
        Self {
            command: Vec::new(),
            processes: evocad_core::bridge::DEFAULT_PROCESSES,
            timeout_s: evocad_core::bridge::DEFAULT_TIMEOUT.as_secs_f64(),
            corpus_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Compute PCD, HDD, IoU and DSC as well as topology.
    pub spatial: bool,
    pub resolution: usize,
    pub icp_iterations: usize,
    pub icp_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let icp = IcpConfig::default();
        Self {
            spatial: true,
            resolution: DEFAULT_RESOLUTION,
            icp_iterations: icp.max_iterations,
            icp_samples: icp.sample_count,
        }
    }
}

impl MetricsSection {
    pub fn icp(&self) -> IcpConfig {
        IcpConfig { max_iterations: self.icp_iterations, sample_count: self.icp_samples, ..IcpConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub runs: usize,
    /// Image size for gallery pictures; none when absent.
    pub gallery: Option<usize>,
    /// Samples evaluated at once; defaults to the runner process count.
    pub workers: Option<usize>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { runs: 3, gallery: None, workers: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendKind,
    pub engine: EngineKind,
    pub out: PathBuf,
    pub evolution: EvoConfig,
    pub wire: WireSection,
    pub runner: RunnerSection,
    pub metrics: MetricsSection,
    pub bench: BenchSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            engine: EngineKind::Csg,
            out: PathBuf::from("out"),
            evolution: EvoConfig::default(),
            wire: WireSection::default(),
            runner: RunnerSection::default(),
            metrics: MetricsSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub engine: Option<EngineKind>,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub few_shots: Option<usize>,
    pub mutation_prob: Option<f64>,
    pub lambda: Option<f64>,
    pub elites: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        let e = &mut self.evolution;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.backend, o.backend);
        set!(self.engine, o.engine);
        set!(e.population, o.population);
        set!(e.generations, o.generations);
        set!(e.few_shots, o.few_shots);
        set!(e.mutation_prob, o.mutation_prob);
        set!(e.lambda, o.lambda);
        set!(e.elites, o.elites);
        set!(e.seed, o.seed);
        set!(self.out, o.out);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.evolution.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.backend == BackendKind::Wire {
            let w = &self.wire;
            if !(w.timeout_s > 0.0 && w.timeout_s.is_finite()) {
                return bad("wire.timeout_s must be positive".into());
            }
            for role in ModelRole::ALL {
                let rc = w.role_config(role);
                if rc.model_name.trim().is_empty() {
                    return bad(format!("wire: no model configured for the {role}"));
                }
                rc.validate().map_err(|e| CliError::Config(format!("wire: {e}")))?;
            }
            if w.endpoint.is_empty() {
                return bad("wire.endpoint is empty".into());
            }
            if w.in_flight == 0 {
                return bad("wire.in_flight must be at least 1".into());
            }
        }
        if self.engine == EngineKind::External {
            if self.runner.command.is_empty() {
                return bad("runner.command is required for the external engine".into());
            }
            if self.runner.processes == 0 || !(self.runner.timeout_s > 0.0) {
                return bad("runner.processes and runner.timeout_s must be positive".into());
            }
            if self.runner.corpus_dir.is_none() {
                return bad("runner.corpus_dir is required for the external engine".into());
            }
        }
        if self.metrics.resolution < 2 || self.metrics.icp_samples == 0 {
            return bad("metrics.resolution must be ≥ 2 and metrics.icp_samples ≥ 1".into());
        }
        if self.bench.runs == 0 || self.bench.workers == Some(0) {
            return bad("bench.runs and bench.workers must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_file_and_overrides() {
        let mut c = Config::from_toml("backend = \"wire\"\n[evolution]\npopulation = 8\nseed = 5\n").unwrap();
        assert_eq!(c.backend, BackendKind::Wire);
        assert_eq!(c.evolution.population, 8);
        assert_eq!(c.evolution.generations, 4);
        c.apply(&Overrides { population: Some(4), backend: Some(BackendKind::Mock), ..Default::default() });
        assert_eq!((c.evolution.population, c.evolution.seed, c.backend), (4, 5, BackendKind::Mock));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("[evolution]\npopulaton = 3\n").is_err());
        assert!(Config::from_toml("engine = \"openscad\"\n").is_err());
    }

    #[test]
    fn validation_catches_missing_pieces() {
        let wire = Config { backend: BackendKind::Wire, ..Config::default() };
        assert!(wire.validate().is_err());
        let mut ok = wire.clone();
        ok.wire.generator_model = "g".into();
        ok.wire.describer_model = "d".into();
        ok.wire.ranker_model = "r".into();
        assert!(ok.validate().is_ok());
        let ext = Config { engine: EngineKind::External, ..Config::default() };
        assert!(ext.validate().is_err());
        let mut c = Config::default();
        c.evolution.mutation_prob = 2.0;
        assert!(c.validate().is_err());
    }
}
