use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Sample};
use crate::bridge::{Renderer, DEFAULT_PROCESSES};
use crate::evolve::{EvoConfig, EvolveError, Evolver, GenerationTrace, Individual};
use crate::geometry::TriMesh;
use crate::lm::{CadLanguage, Corpus, Gateway};
use crate::metrics::{full_report, topology, topology_report, IcpConfig, MetricReport, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub evo: EvoConfig,
    /// When false only the topology metrics are computed.
    pub spatial_metrics: bool,
    pub icp: IcpConfig,
    pub resolution: usize,
    /// Samples evaluated at once.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            evo: EvoConfig::default(),
            spatial_metrics: true,
            icp: IcpConfig::default(),
            resolution: DEFAULT_RESOLUTION,
            workers: DEFAULT_PROCESSES,
        }
    }
}

/// What one run needs besides the samples.
pub struct Backends<'a> {
    pub gateway: &'a Gateway,
    pub renderer: &'a Renderer,
    pub corpus: &'a Corpus,
    pub language: CadLanguage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The model endpoint could not be reached.
    Backend,
    Config,
    /// The final elite did not compile.
    Generation,
    Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

/// Topology of one generation, for the improvement curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub generation: usize,
    pub elite_t_err: Option<u64>,
    pub elite_t_corr: Option<bool>,
    /// Share of the whole population with the right topology; individuals
    /// that failed to compile count as wrong.
    pub population_t_corr: f64,
    /// Mean over the closed individuals only.
    pub population_t_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResult {
    pub id: String,
    pub seed: u64,
    pub elite_code: Option<String>,
    pub failure: Option<Failure>,
    pub metrics: MetricReport,
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub elite_mesh: Option<TriMesh>,
    #[serde(skip)]
    pub traces: Vec<GenerationTrace>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub samples: Vec<SampleResult>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RunReport {
    pub fn sample_ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    /// True when every sample failed because the model endpoint was down.
    pub fn backend_unreachable(&self) -> bool {
        !self.samples.is_empty()
            && self.samples.iter().all(|s| s.failure.as_ref().is_some_and(|f| f.kind == FailureKind::Backend))
    }
}

/// Seed for one sample of one run, stable under reordering of the dataset.
pub fn sample_seed(run_seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn curve_point(generation: usize, pop: &[Individual], gt: &TriMesh) -> CurvePoint {
    let elite = crate::evolve::elite_of(pop).and_then(|e| e.mesh.as_ref()).map(|m| topology(m, gt));
    let topo: Vec<_> = pop.iter().filter_map(|i| i.mesh.as_ref()).map(|m| topology(m, gt)).collect();
    let correct = topo.iter().filter(|t| t.t_corr == Some(true)).count();
    let errs: Vec<f64> = topo.iter().filter_map(|t| t.t_err).map(|e| e as f64).collect();
    CurvePoint {
        generation,
        elite_t_err: elite.and_then(|t| t.t_err),
        elite_t_corr: elite.and_then(|t| t.t_corr),
        population_t_corr: if pop.is_empty() { 0.0 } else { correct as f64 / pop.len() as f64 },
        population_t_err: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
    }
}

fn evaluate_sample(sample: &Sample, cfg: &RunConfig, b: &Backends, seed: u64) -> SampleResult {
    let evo = EvoConfig { seed, ..cfg.evo.clone() };
    let evolver = Evolver {
        cfg: &evo,
        gateway: b.gateway,
        renderer: b.renderer,
        corpus: b.corpus,
        language: b.language,
        prompt: &sample.prompt,
    };
    let mut result = SampleResult {
        id: sample.id.clone(),
        seed,
        elite_code: None,
        failure: None,
        metrics: MetricReport::missing_generation(&sample.ground_truth),
        curve: Vec::new(),
        elite_mesh: None,
        traces: Vec::new(),
    };
    let outcome = match evolver.run() {
        Ok(o) => o,
        Err(e) => {
            let kind = match e {
                EvolveError::Backend(_) => FailureKind::Backend,
                EvolveError::InvalidConfig(_) | EvolveError::Corpus(_) => FailureKind::Config,
            };
            log::warn!("sample {}: {e}", sample.id);
            result.failure = Some(Failure { kind, message: e.to_string() });
            return result;
        }
    };
    result.curve = outcome
        .populations
        .iter()
        .enumerate()
        .map(|(g, pop)| curve_point(g, pop, &sample.ground_truth))
        .collect();
    result.elite_code = Some(outcome.elite.code.clone());
    result.traces = outcome.traces;
    let Some(mesh) = outcome.elite.mesh else {
        let why = outcome.elite.error.unwrap_or_default();
        result.failure = Some(Failure { kind: FailureKind::Generation, message: why });
        return result;
    };
    if cfg.spatial_metrics {
        match full_report(&mesh, &sample.ground_truth, &cfg.icp, cfg.resolution, seed) {
            Ok(r) => result.metrics = r,
            Err(e) => {
                log::warn!("sample {}: metrics failed: {e}", sample.id);
                result.metrics = topology_report(&mesh, &sample.ground_truth);
                result.failure = Some(Failure { kind: FailureKind::Metrics, message: e.to_string() });
            }
        }
    } else {
        result.metrics = topology_report(&mesh, &sample.ground_truth);
    }
    result.elite_mesh = Some(mesh);
    result
}

/// Runs the evolutionary search on every sample and scores each final
/// elite against its ground truth. Failures are recorded per sample.
pub fn evaluate_run(samples: &[Sample], cfg: &RunConfig, backends: &Backends) -> Result<RunReport, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyDataset(Default::default()));
    }
    cfg.evo.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let start = Instant::now();
    let results = pool.install(|| {
        samples
            .par_iter()
            .map(|s| evaluate_sample(s, cfg, backends, sample_seed(cfg.evo.seed, &s.id)))
            .collect()
    });
    Ok(RunReport { seed: cfg.evo.seed, samples: results, elapsed: start.elapsed() })
}
