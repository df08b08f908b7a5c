use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::*;
use crate::bridge::render_csg;
use crate::lm::{task_of, Backend, ChatMessage, MockBackend, ModelRoleConfig, Task, CSG};

const PROMPT: &str = "A rectangular plate with two round holes.";

struct Fixture {
    gateway: Gateway,
    renderer: Renderer,
    corpus: Corpus,
}

impl Fixture {
    fn new(backend: Arc<dyn Backend>) -> Self {
        Self { gateway: Gateway::new(backend, "m"), renderer: Renderer::Csg, corpus: Corpus::builtin_csg() }
    }

    fn mock(seed: u64) -> Self {
        Self::new(Arc::new(MockBackend::new(seed)))
    }

    fn evolver<'a>(&'a self, cfg: &'a EvoConfig) -> Evolver<'a> {
        Evolver {
            cfg,
            gateway: &self.gateway,
            renderer: &self.renderer,
            corpus: &self.corpus,
            language: CSG,
            prompt: PROMPT,
        }
    }
}

fn small(seed: u64) -> EvoConfig {
    EvoConfig { seed, render_size: 64, ..EvoConfig::default() }
}

/// Wraps the mock and rewrites generator replies per task.
struct Scripted<F: Fn(Task, usize) -> Option<String> + Send + Sync> {
    inner: MockBackend,
    script: F,
    calls: AtomicUsize,
}

impl<F: Fn(Task, usize) -> Option<String> + Send + Sync> Backend for Scripted<F> {
    fn complete(&self, messages: &[ChatMessage], cfg: &ModelRoleConfig) -> Result<String, LmError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if cfg.role == ModelRole::Generator {
            if let Some(reply) = task_of(messages).and_then(|t| (self.script)(t, n)) {
                return Ok(reply);
            }
        }
        self.inner.complete(messages, cfg)
    }

    fn identity(&self) -> String {
        "scripted".into()
    }
}

fn scripted(f: impl Fn(Task, usize) -> Option<String> + Send + Sync + 'static) -> Arc<dyn Backend> {
    Arc::new(Scripted { inner: MockBackend::new(0), script: f, calls: AtomicUsize::new(0) })
}

struct Down;

impl Backend for Down {
    fn complete(&self, _: &[ChatMessage], _: &ModelRoleConfig) -> Result<String, LmError> {
        Err(LmError::Transport("connection refused".into()))
    }

    fn identity(&self) -> String {
        "down".into()
    }
}

fn individual(id: u64, code: &str) -> Individual {
    let result = render_csg(code);
    Individual::from_attempt(
        id,
        Attempt { code: code.into(), result, self_debugged: false, backend_error: None },
        Lineage::Root,
    )
}

fn holes(ind: &Individual) -> i64 {
    (2 - ind.mesh.as_ref().unwrap().euler_characteristic()) / 2
}

#[test]
fn config_validation() {
    assert!(EvoConfig::default().validate().is_ok());
    for bad in [
        EvoConfig { population: 1, elites: 0, ..EvoConfig::default() },
        EvoConfig { elites: 6, ..EvoConfig::default() },
        EvoConfig { mutation_prob: 1.5, ..EvoConfig::default() },
        EvoConfig { lambda: 0.0, ..EvoConfig::default() },
        EvoConfig { render_size: 8, ..EvoConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(EvolveError::InvalidConfig(_))), "{bad:?}");
    }
}

#[test]
fn generator_budget_is_respected() {
    for pm in [0.0, 0.5, 1.0] {
        let f = Fixture::mock(3);
        let cfg = EvoConfig { mutation_prob: pm, ..small(3) };
        f.evolver(&cfg).run().unwrap();
        let (m, n, e) = (cfg.population as f64, cfg.generations as f64, cfg.elites as f64);
        let bound = m * 2.0 + n * (m - e) * (2.0 + pm * 2.0);
        let used = f.gateway.calls(ModelRole::Generator) as f64;
        assert!(used <= bound, "p_m {pm}: {used} > {bound}");
        assert!(used >= m + n * (m - e) * (1.0 + if pm == 1.0 { 1.0 } else { 0.0 }));
    }
}

#[test]
fn broken_generator_makes_two_calls_per_individual() {
    let f = Fixture::new(scripted(|_, _| Some("this is not code".into())));
    let cfg = small(0);
    let mut rng = stream(0, STREAM_FEW_SHOT);
    let pop = f.evolver(&cfg).initialize(&mut rng).unwrap();
    assert_eq!(f.gateway.calls(ModelRole::Generator), 12);
    assert!(pop.iter().all(|i| !i.is_ok() && i.self_debugged && i.error.is_some()));
}

#[test]
fn failed_runs_still_finish() {
    let f = Fixture::new(scripted(|_, _| Some("nope".into())));
    let out = f.evolver(&small(0)).run().unwrap();
    assert!(!out.elite.is_ok());
    assert_eq!(out.traces.len(), 5);
    assert!(out.traces.iter().all(|t| t.avg_ranks.values().all(|&r| r == 7.0)));
}

#[test]
fn self_debug_repairs_a_bad_first_try() {
    let f = Fixture::new(scripted(|t, _| (t == Task::Init).then(|| "part z 0 1 { rect 1 }".into())));
    let cfg = small(0);
    let mut rng = stream(0, STREAM_FEW_SHOT);
    let pop = f.evolver(&cfg).initialize(&mut rng).unwrap();
    assert!(pop.iter().all(|i| i.is_ok() && i.self_debugged));
}

#[test]
fn unreachable_backend_aborts() {
    let f = Fixture::new(Arc::new(Down));
    assert!(matches!(f.evolver(&small(0)).run(), Err(EvolveError::Backend(LmError::Transport(_)))));
}

#[test]
fn failed_individuals_get_the_penalty_rank() {
    let f = Fixture::mock(1);
    let cfg = small(1);
    let mut pop = vec![
        individual(0, "part z 0 0.2 { rect 4 2; hole circ 0.3 at -1 0; hole circ 0.3 at 1 0 }"),
        individual(1, "broken"),
        individual(2, "part z 0 0.2 { rect 4 2 }"),
        individual(3, "also broken"),
        individual(4, "part z 0 0.2 { rect 4 2; hole circ 0.3 at 0 0 }"),
        individual(5, "part z 0 0.2 { rect 3 2; hole circ 0.3 at -1 0; hole circ 0.3 at 1 0 }"),
    ];
    let eval = f.evolver(&cfg).evaluate(&mut pop).unwrap();
    assert_eq!(eval.rankings.len(), RANKINGS_PER_EVALUATION);
    assert_eq!(eval.avg_ranks[&1], 7.0);
    assert_eq!(eval.avg_ranks[&3], 7.0);
    // Two perfect candidates; the mock breaks the tie by id.
    assert_eq!(eval.avg_ranks[&0], 1.0);
    assert_eq!(eval.avg_ranks[&5], 2.0);
    assert_eq!(elite_of(&pop).unwrap().id, 0);
    assert!(pop.iter().filter(|i| i.is_ok()).all(|i| i.image.is_some() && i.description.is_some()));
}

#[test]
fn single_survivor_needs_no_ranker() {
    let f = Fixture::mock(1);
    let cfg = small(1);
    let mut pop = vec![individual(0, "bad"), individual(1, "part z 0 1 { rect 1 1 }")];
    let eval = f.evolver(&cfg).evaluate(&mut pop).unwrap();
    assert!(eval.rankings.is_empty());
    assert_eq!(f.gateway.calls(ModelRole::Ranker), 0);
    assert_eq!(eval.avg_ranks[&1], 1.0);
}

#[test]
fn failed_never_beats_compiled() {
    let mut a = individual(0, "bad");
    a.avg_rank = Some(1.0);
    let mut b = individual(1, "part z 0 1 { rect 1 1 }");
    b.avg_rank = Some(6.0);
    assert_eq!(elite_of(&[a, b]).unwrap().id, 1);
}

#[test]
fn update_keeps_elites_and_appends_offspring() {
    let f = Fixture::mock(0);
    let cfg = EvoConfig { elites: 2, ..small(0) };
    let mut pop: Vec<Individual> = (0..6).map(|i| individual(i, "part z 0 1 { rect 1 1 }")).collect();
    for (ind, r) in pop.iter_mut().zip([3.0, 1.5, 4.0, 1.5, 5.0, 6.0]) {
        ind.avg_rank = Some(r);
        ind.description = Some("d".into());
    }
    let offspring: Vec<Individual> = (6..10).map(|i| individual(i, "part z 0 2 { rect 1 1 }")).collect();
    let next = f.evolver(&cfg).update(&pop, offspring);
    let ids: Vec<u64> = next.iter().map(|i| i.id).collect();
    assert_eq!(ids, vec![1, 3, 6, 7, 8, 9]);
    assert!(next[..2].iter().all(|i| i.avg_rank.is_none() && i.description.is_none()));
}

fn gate_run(pm: f64, seed: u64) -> RunOutcome {
    let f = Fixture::mock(seed);
    let cfg = EvoConfig { mutation_prob: pm, generations: 1, ..small(seed) };
    f.evolver(&cfg).run().unwrap()
}

#[test]
fn mutation_gate_extremes() {
    let never = gate_run(0.0, 4);
    let recs = &never.traces[0].offspring;
    assert_eq!(recs.len(), 5);
    assert!(recs.iter().all(|r| !r.mutated));
    assert!(never.populations[1][1..].iter().all(|i| matches!(i.lineage, Lineage::Crossover { .. })));

    let always = gate_run(1.0, 4);
    assert!(always.traces[0].offspring.iter().all(|r| r.mutated));
    assert!(always.populations[1][1..].iter().all(|i| matches!(i.lineage, Lineage::CrossoverMutation { .. })));
}

#[test]
fn mutation_gate_fraction() {
    let mut stream_rng = stream(9, STREAM_MUTATION_GATE);
    let n = 20_000;
    let hits = (0..n).filter(|_| stream_rng.gen_bool(0.5)).count();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02);

    let mut mutated = 0;
    let mut total = 0;
    for seed in 0..16 {
        for r in &gate_run(0.5, seed).traces[0].offspring {
            mutated += r.mutated as usize;
            total += 1;
        }
    }
    let frac = mutated as f64 / total as f64;
    assert!((frac - 0.5).abs() < 0.15, "{frac}");
}

#[test]
fn offspring_get_fresh_ids_and_valid_parents() {
    let out = Fixture::mock(2).evolver(&small(2)).run().unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for (g, t) in out.traces.iter().enumerate() {
        let present: Vec<u64> = t.individuals.iter().map(|i| i.id).collect();
        for &(a, b) in &t.parent_pairs {
            assert_ne!(a, b);
            assert!(present.contains(&a) && present.contains(&b));
        }
        for r in &t.offspring {
            assert!(seen.insert(r.id), "id {} reused", r.id);
            assert!(r.id >= 6 + 5 * g as u64);
        }
    }
}

#[test]
fn elite_code_is_carried_verbatim() {
    for seed in 0..5 {
        let out = Fixture::mock(seed).evolver(&small(seed)).run().unwrap();
        for w in out.traces.windows(2) {
            let prev = w[0].individuals.iter().find(|i| i.id == w[0].elite_id).unwrap();
            let kept = w[1].individuals.iter().find(|i| i.id == prev.id).expect("elite survives");
            assert_eq!(kept.code, prev.code);
            assert!(w[1].elite_reevaluated);
        }
        let last = out.traces.last().unwrap();
        assert_eq!(out.elite.id, last.elite_id);
    }
}

#[test]
fn runs_are_deterministic() {
    let a = Fixture::mock(8).evolver(&small(8)).run().unwrap();
    let b = Fixture::mock(8).evolver(&small(8)).run().unwrap();
    assert_eq!(traces_to_jsonl(&a.traces), traces_to_jsonl(&b.traces));
    let c = Fixture::mock(9).evolver(&small(9)).run().unwrap();
    assert_ne!(traces_to_jsonl(&a.traces), traces_to_jsonl(&c.traces));
}

#[test]
fn evolution_finds_the_requested_hole_count() {
    let seeds = 30;
    let mut first = 0;
    let mut last = 0;
    for seed in 0..seeds {
        let out = Fixture::mock(seed).evolver(&small(seed)).run().unwrap();
        let elites = out.generation_elites();
        first += (holes(elites[0]) == 2) as usize;
        last += (holes(elites.last().unwrap()) == 2) as usize;
    }
    assert!(last >= 27, "{last}/{seeds}");
    assert!(last > first, "{first} -> {last}");
}

#[test]
fn trace_lines_parse_back() {
    let out = Fixture::mock(5).evolver(&small(5)).run().unwrap();
    let text = traces_to_jsonl(&out.traces);
    let parsed: Vec<GenerationTrace> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, out.traces);
    assert!(parsed.windows(2).all(|w| w[0].rng_positions.selection <= w[1].rng_positions.selection));
}
