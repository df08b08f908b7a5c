//! The evolutionary loop: a population of programs is initialized from
//! few-shot prompts, evaluated by rendering, describing and ranking, and
//! bred by crossover and mutation while the best individual survives
//! unchanged.

mod selection;
mod trace;

pub use selection::{select_parent_pairs, selection_probabilities};
pub use trace::{traces_to_jsonl, GenerationTrace, IndividualSnapshot, OffspringRecord, RngPositions};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{RenderResult, Renderer};
use crate::geometry::TriMesh;
use crate::lm::{
    average_rankings, build_crossover_prompt, build_describe_prompt, build_init_prompt, build_mutation_prompt,
    build_selfdebug_prompt, extract_code, extract_description, rank_once, CadLanguage, Corpus, CorpusError,
    Gateway, LmError, ModelRole, Parent, Ranking,
};
use crate::render::{render_multiview, Image};

/// Independent rankings averaged per evaluation.
pub const RANKINGS_PER_EVALUATION: usize = 3;
pub const DEFAULT_RENDER_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoConfig {
    pub population: usize,
    pub generations: usize,
    pub few_shots: usize,
    pub mutation_prob: f64,
    pub lambda: f64,
    pub elites: usize,
    pub seed: u64,
    pub render_size: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population: 6,
            generations: 4,
            few_shots: 5,
            mutation_prob: 0.5,
            lambda: 0.5,
            elites: 1,
            seed: 0,
            render_size: DEFAULT_RENDER_SIZE,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::InvalidConfig(m.into()));
        if self.population < 2 {
            return bad("population must be ≥ 2");
        }
        if self.elites >= self.population {
            return bad("elites must be smaller than the population");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation probability must lie in [0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if self.render_size < crate::render::MIN_SIZE {
            return bad("render size too small");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("model backend failed: {0}")]
    Backend(LmError),
}

/// How an individual came to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Lineage {
    Root,
    Crossover { parents: (u64, u64) },
    CrossoverMutation { parents: (u64, u64) },
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub id: u64,
    pub code: String,
    /// Present exactly when the code compiled.
    pub mesh: Option<TriMesh>,
    pub error: Option<String>,
    pub self_debugged: bool,
    pub image: Option<Image>,
    pub description: Option<String>,
    pub avg_rank: Option<f64>,
    pub lineage: Lineage,
}

impl Individual {
    pub fn is_ok(&self) -> bool {
        self.mesh.is_some()
    }

    fn from_attempt(id: u64, attempt: Attempt, lineage: Lineage) -> Self {
        let (mesh, error) = match attempt.result {
            RenderResult::Ok { mesh, .. } => (Some(mesh), None),
            RenderResult::Failed(e) => (None, Some(e)),
        };
        Self {
            id,
            code: attempt.code,
            mesh,
            error,
            self_debugged: attempt.self_debugged,
            image: None,
            description: None,
            avg_rank: None,
            lineage,
        }
    }
}

/// Best individual by average rank; ties go to the lower id. Compiled
/// individuals always beat failed ones.
pub fn elite_of(pop: &[Individual]) -> Option<&Individual> {
    pop.iter().min_by(|a, b| {
        b.is_ok()
            .cmp(&a.is_ok())
            .then(a.avg_rank.unwrap_or(f64::INFINITY).total_cmp(&b.avg_rank.unwrap_or(f64::INFINITY)))
            .then(a.id.cmp(&b.id))
    })
}

/// Outcome of generating code and building it, with at most one repair.
struct Attempt {
    code: String,
    result: RenderResult,
    self_debugged: bool,
    backend_error: Option<LmError>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub elite: Individual,
    pub traces: Vec<GenerationTrace>,
    /// Every evaluated population, generation 0 through N.
    pub populations: Vec<Vec<Individual>>,
}

impl RunOutcome {
    /// Elite of each evaluated generation.
    pub fn generation_elites(&self) -> Vec<&Individual> {
        self.populations.iter().filter_map(|p| elite_of(p)).collect()
    }
}

const STREAM_FEW_SHOT: u64 = 1;
const STREAM_SELECTION: u64 = 2;
const STREAM_MUTATION_GATE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Everything one evolutionary run needs.
pub struct Evolver<'a> {
    pub cfg: &'a EvoConfig,
    pub gateway: &'a Gateway,
    pub renderer: &'a Renderer,
    pub corpus: &'a Corpus,
    pub language: CadLanguage,
    pub prompt: &'a str,
}

struct Rngs {
    few_shot: ChaCha8Rng,
    selection: ChaCha8Rng,
    mutation_gate: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        Self {
            few_shot: stream(seed, STREAM_FEW_SHOT),
            selection: stream(seed, STREAM_SELECTION),
            mutation_gate: stream(seed, STREAM_MUTATION_GATE),
        }
    }

    fn positions(&self) -> RngPositions {
        RngPositions {
            few_shot: self.few_shot.get_word_pos(),
            selection: self.selection.get_word_pos(),
            mutation_gate: self.mutation_gate.get_word_pos(),
        }
    }
}

struct Evaluation {
    rankings: Vec<Ranking>,
    avg_ranks: BTreeMap<u64, f64>,
}

impl Evolver<'_> {
    fn generate(&self, messages: &[crate::lm::ChatMessage]) -> Result<String, LmError> {
        let reply = self.gateway.complete(ModelRole::Generator, messages)?;
        Ok(extract_code(&reply).unwrap_or_default())
    }

    /// Builds `code`; on failure asks the generator once for a fix.
    fn build(&self, code: String) -> Attempt {
        let first = self.renderer.render(&code);
        let Some(err) = first.error().map(str::to_string) else {
            return Attempt { code, result: first, self_debugged: false, backend_error: None };
        };
        let err = if code.trim().is_empty() { "the response contained no code".to_string() } else { err };
        let msgs = build_selfdebug_prompt(&self.language, &code, &err, self.prompt);
        match self.generate(&msgs) {
            Ok(fixed) => {
                let result = self.renderer.render(&fixed);
                Attempt { code: fixed, result, self_debugged: true, backend_error: None }
            }
            Err(e) => Attempt {
                code,
                result: RenderResult::Failed(format!("{err}\nrepair request failed: {e}")),
                self_debugged: true,
                backend_error: Some(e),
            },
        }
    }

    fn build_from(&self, messages: &[crate::lm::ChatMessage]) -> Attempt {
        match self.generate(messages) {
            Ok(code) => self.build(code),
            Err(e) => Attempt {
                code: String::new(),
                result: RenderResult::Failed(format!("generator request failed: {e}")),
                self_debugged: false,
                backend_error: Some(e),
            },
        }
    }

    /// `population` individuals, each written from its own random set of
    /// few-shot examples.
    pub fn initialize(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Individual>, EvolveError> {
        let mut shots = Vec::with_capacity(self.cfg.population);
        for _ in 0..self.cfg.population {
            let idx = self.corpus.sample_indices(self.cfg.few_shots, rng)?;
            shots.push(idx.into_iter().map(|i| self.corpus.snippets()[i].clone()).collect::<Vec<_>>());
        }
        let attempts: Vec<Attempt> = shots
            .par_iter()
            .map(|s| self.build_from(&build_init_prompt(&self.language, self.prompt, s)))
            .collect();
        if let Some(e) = all_backend_failures(&attempts) {
            return Err(EvolveError::Backend(e));
        }
        Ok(attempts
            .into_iter()
            .enumerate()
            .map(|(i, a)| Individual::from_attempt(i as u64, a, Lineage::Root))
            .collect())
    }

    /// Renders, describes and ranks the population, filling in `image`,
    /// `description` and `avg_rank`.
    fn evaluate(&self, pop: &mut [Individual]) -> Result<Evaluation, EvolveError> {
        let size = self.cfg.render_size;
        let described: Vec<Option<Result<(Image, String), LmError>>> = pop
            .par_iter()
            .map(|ind| {
                let mesh = ind.mesh.as_ref()?;
                let img = match render_multiview(mesh, size) {
                    Ok(img) => img.with_provenance(ind.code.clone()),
                    Err(e) => return Some(Err(LmError::InvalidConfig(format!("render failed: {e}")))),
                };
                let reply = self.gateway.complete(ModelRole::Describer, &build_describe_prompt(&img));
                Some(reply.map(|r| (img, extract_description(&r))))
            })
            .collect();
        let mut backend_failures = 0;
        let mut attempted = 0;
        for (ind, d) in pop.iter_mut().zip(described) {
            let Some(d) = d else { continue };
            attempted += 1;
            match d {
                Ok((img, text)) => {
                    ind.image = Some(img);
                    ind.description = Some(text);
                }
                Err(LmError::InvalidConfig(msg)) => {
                    log::warn!("individual {}: {msg}", ind.id);
                    ind.mesh = None;
                    ind.error = Some(msg);
                }
                Err(e) => {
                    log::warn!("individual {}: description failed: {e}", ind.id);
                    backend_failures += e.is_backend() as usize;
                    ind.description = Some("No description is available for this object.".into());
                }
            }
        }
        if attempted > 0 && backend_failures == attempted {
            return Err(EvolveError::Backend(LmError::Transport("every description request failed".into())));
        }

        let penalty = (self.cfg.population + 1) as f64;
        let mut ok: Vec<(u64, String)> = pop
            .iter()
            .filter(|i| i.is_ok())
            .map(|i| (i.id, i.description.clone().unwrap_or_default()))
            .collect();
        ok.sort_by_key(|d| d.0);
        let mut rankings = Vec::new();
        let mut avg_ranks = BTreeMap::new();
        if ok.len() == 1 {
            avg_ranks.insert(ok[0].0, 1.0);
        } else if ok.len() >= 2 {
            let ranker = self.gateway.handle(ModelRole::Ranker);
            let cfg = self.gateway.config(ModelRole::Ranker);
            let results: Vec<Result<Ranking, LmError>> = (0..RANKINGS_PER_EVALUATION)
                .into_par_iter()
                .map(|_| rank_once(self.prompt, &ok, &ranker, cfg))
                .collect();
            let mut last_err = None;
            for r in results {
                match r {
                    Ok(r) => rankings.push(r),
                    Err(e) => {
                        log::warn!("ranking failed: {e}");
                        rankings.push(Ranking { order: ok.iter().map(|d| d.0).collect(), degraded: true, retries: 0 });
                        last_err = Some(e);
                    }
                }
            }
            if let Some(e) = last_err.filter(|_| rankings.iter().all(|r| r.degraded)) {
                return Err(EvolveError::Backend(e));
            }
            avg_ranks = average_rankings(&rankings).map_err(EvolveError::Backend)?;
        }
        for ind in pop.iter_mut() {
            let r = *avg_ranks.entry(ind.id).or_insert(penalty);
            ind.avg_rank = Some(r);
        }
        Ok(Evaluation { rankings, avg_ranks })
    }

    fn parent(ind: &Individual) -> Parent {
        let description = match (&ind.description, &ind.error) {
            (Some(d), _) => d.clone(),
            (None, Some(e)) => format!("This program failed to build: {e}"),
            (None, None) => String::new(),
        };
        Parent { code: ind.code.clone(), description }
    }

    /// One crossover child per pair, each mutated with probability `p_m`.
    fn breed(
        &self,
        pop: &[Individual],
        pairs: &[(u64, u64)],
        gates: &[bool],
        first_id: u64,
    ) -> (Vec<Individual>, Vec<OffspringRecord>) {
        let by_id: BTreeMap<u64, &Individual> = pop.iter().map(|i| (i.id, i)).collect();
        let children: Vec<(Individual, OffspringRecord)> = pairs
            .par_iter()
            .zip(gates)
            .enumerate()
            .map(|(k, (&(a, b), &mutate))| {
                let (pa, pb) = (Self::parent(by_id[&a]), Self::parent(by_id[&b]));
                let msgs = build_crossover_prompt(&self.language, self.prompt, &pa, &pb);
                let crossed = self.build_from(&msgs);
                let crossed_ok = crossed.result.mesh().is_some();
                let crossed_debugged = crossed.self_debugged;
                let (attempt, lineage) = if mutate && crossed.backend_error.is_none() {
                    let msgs = build_mutation_prompt(&self.language, &crossed.code, self.prompt);
                    (self.build_from(&msgs), Lineage::CrossoverMutation { parents: (a, b) })
                } else {
                    (crossed, Lineage::Crossover { parents: (a, b) })
                };
                let id = first_id + k as u64;
                let child = Individual::from_attempt(id, attempt, lineage);
                let record = OffspringRecord {
                    id,
                    parents: (a, b),
                    crossover_ok: crossed_ok,
                    crossover_self_debugged: crossed_debugged,
                    mutated: mutate,
                    ok: child.is_ok(),
                    self_debugged: child.self_debugged,
                };
                (child, record)
            })
            .collect();
        children.into_iter().unzip()
    }

    /// Keeps the `elites` best individuals unchanged and fills the rest of
    /// the next generation with offspring.
    pub fn update(&self, pop: &[Individual], offspring: Vec<Individual>) -> Vec<Individual> {
        let mut ranked: Vec<&Individual> = pop.iter().collect();
        ranked.sort_by(|a, b| {
            b.is_ok()
                .cmp(&a.is_ok())
                .then(a.avg_rank.unwrap_or(f64::INFINITY).total_cmp(&b.avg_rank.unwrap_or(f64::INFINITY)))
                .then(a.id.cmp(&b.id))
        });
        let mut next: Vec<Individual> = ranked
            .into_iter()
            .take(self.cfg.elites)
            .map(|e| Individual { image: None, description: None, avg_rank: None, ..e.clone() })
            .collect();
        next.extend(offspring);
        next
    }

    pub fn run(&self) -> Result<RunOutcome, EvolveError> {
        self.cfg.validate()?;
        let mut rngs = Rngs::new(self.cfg.seed);
        let mut pop = self.initialize(&mut rngs.few_shot)?;
        let mut next_id = pop.len() as u64;
        let mut traces = Vec::new();
        let mut populations = Vec::new();
        for generation in 0..=self.cfg.generations {
            let eval = self.evaluate(&mut pop)?;
            let elite_id = elite_of(&pop).expect("non-empty population").id;
            let mut trace = GenerationTrace {
                generation,
                elite_id,
                elite_reevaluated: generation > 0,
                individuals: pop.iter().map(IndividualSnapshot::of).collect(),
                rankings: eval.rankings,
                avg_ranks: eval.avg_ranks.clone(),
                parent_pairs: Vec::new(),
                offspring: Vec::new(),
                rng_positions: rngs.positions(),
            };
            populations.push(pop.clone());
            if generation == self.cfg.generations {
                traces.push(trace);
                break;
            }
            let probs = selection_probabilities(&eval.avg_ranks, self.cfg.lambda);
            let count = self.cfg.population - self.cfg.elites;
            let pairs = select_parent_pairs(&probs, &eval.avg_ranks, count, &mut rngs.selection);
            let gates: Vec<bool> = (0..count).map(|_| rngs.mutation_gate.gen_bool(self.cfg.mutation_prob)).collect();
            let (offspring, records) = self.breed(&pop, &pairs, &gates, next_id);
            next_id += count as u64;
            trace.parent_pairs = pairs;
            trace.offspring = records;
            trace.rng_positions = rngs.positions();
            traces.push(trace);
            pop = self.update(&pop, offspring);
        }
        let elite = elite_of(populations.last().expect("evaluated")).expect("non-empty").clone();
        Ok(RunOutcome { elite, traces, populations })
    }
}

fn all_backend_failures(attempts: &[Attempt]) -> Option<LmError> {
    if attempts.is_empty() || attempts.iter().any(|a| a.backend_error.is_none()) {
        return None;
    }
    attempts.iter().find_map(|a| a.backend_error.clone().filter(LmError::is_backend))
}

#[cfg(test)]
mod tests;
