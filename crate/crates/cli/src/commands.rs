use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use evocad_core::bridge::{Renderer, RunnerConfig, RunnerPool};
use evocad_core::evolve::{traces_to_jsonl, EvoConfig, EvolveError, Evolver};
use evocad_core::geometry::{load_stl, write_stl, TriMesh};
use evocad_core::harness::{self, Backends, HarnessError, RunConfig};
use evocad_core::lm::{
    Backend, CadLanguage, ChatMessage, Corpus, Gateway, MockBackend, ModelRole, WireBackend, CADQUERY, CSG,
};
use evocad_core::metrics::full_report;
use evocad_core::render::{render_multiview, write_png};
use serde_json::json;

use crate::config::{BackendKind, Config, EngineKind};
use crate::error::{io, CliError};

pub const CONFIG_ECHO: &str = "config.toml";

struct Context {
    gateway: Gateway,
    renderer: Renderer,
    corpus: Corpus,
    language: CadLanguage,
}

impl Context {
    fn backends(&self) -> Backends<'_> {
        Backends { gateway: &self.gateway, renderer: &self.renderer, corpus: &self.corpus, language: self.language }
    }

    fn evolver<'a>(&'a self, cfg: &'a EvoConfig, prompt: &'a str) -> Evolver<'a> {
        Evolver {
            cfg,
            gateway: &self.gateway,
            renderer: &self.renderer,
            corpus: &self.corpus,
            language: self.language,
            prompt,
        }
    }
}

fn gateway(cfg: &Config, mock_seed: u64) -> Gateway {
    match cfg.backend {
        BackendKind::Mock => Gateway::new(Arc::new(MockBackend::new(mock_seed)), "mock"),
        BackendKind::Wire => {
            let backend: Arc<dyn Backend> = Arc::new(WireBackend::from_env(cfg.wire.endpoint.clone()));
            ModelRole::ALL
                .into_iter()
                .fold(Gateway::new(backend.clone(), ""), |g, role| {
                    g.with_role(backend.clone(), cfg.wire.role_config(role))
                })
                .with_in_flight_cap(cfg.wire.in_flight)
        }
    }
}

fn context(cfg: &Config, mock_seed: u64) -> Result<Context, CliError> {
    let (renderer, corpus, language) = match cfg.engine {
        EngineKind::Csg => (Renderer::Csg, Corpus::builtin_csg(), CSG),
        EngineKind::External => {
            let r = &cfg.runner;
            let runner_cfg = RunnerConfig {
                command: r.command.clone(),
                processes: r.processes,
                timeout: Duration::from_secs_f64(r.timeout_s),
                out_dir: absolute(&cfg.out.join("runner"))?,
            };
            let pool = RunnerPool::new(runner_cfg).map_err(io("cannot prepare runner output directory"))?;
            let dir = r.corpus_dir.as_deref().expect("validated");
            let corpus = Corpus::from_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
            (Renderer::External(pool), corpus, CADQUERY)
        }
    };
    Ok(Context { gateway: gateway(cfg, mock_seed), renderer, corpus, language })
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    if p.is_absolute() {
        return Ok(p.to_path_buf());
    }
    Ok(std::env::current_dir().map_err(io("current directory"))?.join(p))
}

fn prepare_out(cfg: &Config) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(io(cfg.out.display()))?;
    write(&cfg.out.join(CONFIG_ECHO), cfg.to_toml().as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io(path.display()))
}

fn read_prompt(prompt: Option<String>, file: Option<PathBuf>) -> Result<String, CliError> {
    let text = match (prompt, file) {
        (Some(p), _) => p,
        (None, Some(f)) => fs::read_to_string(&f).map_err(io(format!("cannot read prompt {}", f.display())))?,
        (None, None) => return Err(CliError::Config("no prompt given".into())),
    };
    let text = text.trim().to_string();
    if text.is_empty() {
        return Err(CliError::Config("the prompt is empty".into()));
    }
    Ok(text)
}

fn evolve_error(e: EvolveError) -> CliError {
    match e {
        EvolveError::Backend(e) => CliError::Backend(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

pub fn generate(cfg: &Config, prompt: Option<String>, prompt_file: Option<PathBuf>) -> Result<(), CliError> {
    let prompt = read_prompt(prompt, prompt_file)?;
    prepare_out(cfg)?;
    let ctx = context(cfg, cfg.evolution.seed)?;
    let outcome = ctx.evolver(&cfg.evolution, &prompt).run().map_err(evolve_error)?;
    let out = &cfg.out;
    let ext = if ctx.language == CSG { "csg" } else { "py" };
    let elite = &outcome.elite;
    write(&out.join(format!("elite.{ext}")), format!("{}\n", elite.code).as_bytes())?;
    write(&out.join("trace.jsonl"), traces_to_jsonl(&outcome.traces).as_bytes())?;
    let summary = json!({
        "prompt": prompt,
        "elite_id": elite.id,
        "ok": elite.is_ok(),
        "error": elite.error,
        "chi": elite.mesh.as_ref().filter(|m| m.is_watertight()).map(TriMesh::euler_characteristic),
        "watertight": elite.mesh.as_ref().map(TriMesh::is_watertight),
        "generations": cfg.evolution.generations,
        "calls": {
            "generator": ctx.gateway.calls(ModelRole::Generator),
            "describer": ctx.gateway.calls(ModelRole::Describer),
            "ranker": ctx.gateway.calls(ModelRole::Ranker),
        },
    });
    write(&out.join("result.json"), (serde_json::to_string_pretty(&summary).expect("json") + "\n").as_bytes())?;
    let Some(mesh) = &elite.mesh else {
        let why = elite.error.clone().unwrap_or_default();
        return Err(CliError::Generation(format!("the final program does not compile: {why}")));
    };
    write(&out.join("elite.stl"), &write_stl(mesh))?;
    let img = render_multiview(mesh, cfg.evolution.render_size)
        .map_err(|e| CliError::Generation(format!("cannot render the final program: {e}")))?;
    let png = out.join("elite.png");
    write_png(&img, &png).map_err(io(png.display()))?;
    eprintln!(
        "elite #{} after {} generations, {} faces, written to {}",
        elite.id,
        cfg.evolution.generations,
        mesh.faces().len(),
        out.display()
    );
    Ok(())
}

fn harness_error(e: HarnessError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn bench(cfg: &Config, dataset: &Path) -> Result<(), CliError> {
    let ds = harness::load_dataset(dataset).map_err(harness_error)?;
    for (id, why) in &ds.skipped {
        eprintln!("warning: skipped {id}: {why}");
    }
    prepare_out(cfg)?;
    let mut runs = Vec::with_capacity(cfg.bench.runs);
    for r in 0..cfg.bench.runs {
        let seed = cfg.evolution.seed.wrapping_add(r as u64);
        let ctx = context(cfg, seed)?;
        let run_cfg = RunConfig {
            evo: EvoConfig { seed, ..cfg.evolution.clone() },
            spatial_metrics: cfg.metrics.spatial,
            icp: cfg.metrics.icp(),
            resolution: cfg.metrics.resolution,
            workers: cfg.bench.workers.unwrap_or(cfg.runner.processes),
        };
        let report = harness::evaluate_run(&ds.samples, &run_cfg, &ctx.backends()).map_err(harness_error)?;
        eprintln!("run {}/{} (seed {seed}) took {:.1?}", r + 1, cfg.bench.runs, report.elapsed);
        runs.push(report);
    }
    let agg = harness::aggregate(&runs).map_err(harness_error)?;
    harness::write_outputs(&cfg.out, &runs, &agg, cfg.bench.gallery).map_err(harness_error)?;
    let m = &agg.metrics;
    let show = |s: harness::Summary| match (s.mean, s.std) {
        (Some(a), Some(b)) => format!("{a:.4} ± {b:.4}"),
        _ => "n/a".into(),
    };
    eprintln!("{} of {} samples in the joint watertight subset", agg.subset.ids.len(), agg.samples);
    for (name, s) in [
        ("T_corr %", m.t_corr),
        ("T_err", m.t_err),
        ("PCD", m.pcd),
        ("HDD", m.hdd),
        ("IoU %", m.iou),
        ("DSC %", m.dsc),
    ] {
        eprintln!("  {name:<9}{}", show(s));
    }
    if runs.iter().all(|r| r.backend_unreachable()) {
        return Err(CliError::Backend("every sample failed to reach the model backend".into()));
    }
    Ok(())
}

fn load_mesh(path: &Path) -> Result<TriMesh, CliError> {
    let bytes = fs::read(path).map_err(io(path.display()))?;
    load_stl(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn compare(cfg: &Config, generated: &Path, reference: &Path) -> Result<(), CliError> {
    let gen = load_mesh(generated)?;
    let gt = load_mesh(reference)?;
    let report = full_report(&gen, &gt, &cfg.metrics.icp(), cfg.metrics.resolution, cfg.evolution.seed)
        .map_err(|e| CliError::Config(format!("cannot compare: {e}")))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

const CSG_PROBE: &str = "part z 0 1 { rect 1 1 }";
const CADQUERY_PROBE: &str = "import cadquery as cq\nresult = cq.Workplane(\"XY\").box(1, 1, 1)\n";

pub fn validate(cfg: &Config) -> Result<(), CliError> {
    if cfg.engine == EngineKind::External {
        fs::create_dir_all(&cfg.out).map_err(io(cfg.out.display()))?;
    }
    let ctx = context(cfg, cfg.evolution.seed)?;
    let probe = if ctx.language == CSG { CSG_PROBE } else { CADQUERY_PROBE };
    let built = ctx.renderer.render(probe);
    let engine = match built.mesh() {
        Some(m) if m.is_watertight() && m.euler_characteristic() == 2 => json!({"ok": true}),
        Some(_) => json!({"ok": false, "error": "the probe solid came back malformed"}),
        None => json!({"ok": false, "error": built.error()}),
    };
    let mut roles = serde_json::Map::new();
    let mut backend_down = None;
    for role in ModelRole::ALL {
        let reply = ctx.gateway.complete(role, &[ChatMessage::user("Reply with the single word OK.")]);
        let entry = match reply {
            Ok(_) => json!({"ok": true, "backend": ctx.gateway.identity(role)}),
            Err(e) => {
                backend_down.get_or_insert_with(|| e.to_string());
                json!({"ok": false, "backend": ctx.gateway.identity(role), "error": e.to_string()})
            }
        };
        roles.insert(role.to_string(), entry);
    }
    let engine_ok = engine["ok"] == json!(true);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({"config": "ok", "engine": engine, "models": roles})).expect("json")
    );
    if let Some(e) = backend_down {
        return Err(CliError::Backend(e));
    }
    if !engine_ok {
        return Err(CliError::Config("the CAD engine did not build the probe solid".into()));
    }
    Ok(())
}
