//! Turning program text into a mesh, either with the in-process csg
//! compiler or through a pool of external runner processes.
//!
//! Runners speak newline-delimited JSON on stdin/stdout. Each request
//! `{"id", "code", "timeout_s", "out_dir"}` gets exactly one response
//! `{"id", "ok", "stl_path"?, "error"?}`.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::csg;
use crate::geometry::{stl, TriMesh};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_PROCESSES: usize = 2;

#[derive(Debug, Clone)]
pub enum RenderResult {
    Ok { mesh: TriMesh, artifact: Option<PathBuf> },
    /// Never empty; this text is shown to the model when it retries.
    Failed(String),
}

impl RenderResult {
    pub fn mesh(&self) -> Option<&TriMesh> {
        match self {
            RenderResult::Ok { mesh, .. } => Some(mesh),
            RenderResult::Failed(_) => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match self {
            RenderResult::Ok { .. } => None,
            RenderResult::Failed(e) => Some(e),
        }
    }
}

fn failed(msg: impl Into<String>) -> RenderResult {
    let msg = msg.into();
    RenderResult::Failed(if msg.trim().is_empty() { "unknown error".into() } else { msg })
}

pub enum Renderer {
    Csg,
    External(RunnerPool),
}

impl Renderer {
    pub fn render(&self, code: &str) -> RenderResult {
        match self {
            Renderer::Csg => render_csg(code),
            Renderer::External(pool) => pool.render(code),
        }
    }
}

pub fn render_csg(code: &str) -> RenderResult {
    match csg::parse(code).and_then(|p| csg::compile(&p)) {
        Ok(mesh) => RenderResult::Ok { mesh, artifact: None },
        Err(e) => failed(e.to_string()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunnerRequest {
    pub id: u64,
    pub code: String,
    pub timeout_s: f64,
    pub out_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunnerResponse {
    pub id: u64,
    pub ok: bool,
    #[serde(default)]
    pub stl_path: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    /// Program and arguments that start one runner.
    pub command: Vec<String>,
    pub processes: usize,
    pub timeout: Duration,
    pub out_dir: PathBuf,
}

impl RunnerConfig {
    pub fn new(command: Vec<String>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            command,
            processes: DEFAULT_PROCESSES,
            timeout: DEFAULT_TIMEOUT,
            out_dir: out_dir.into(),
        }
    }
}

struct Runner {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Runner {
    fn spawn(cfg: &RunnerConfig) -> std::io::Result<Self> {
        let (program, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| std::io::Error::other("empty runner command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for RunnerPool {
    fn drop(&mut self) {
        for slot in &self.slots {
            if let Some(r) = slot.lock().ok().and_then(|mut s| s.take()) {
                r.kill();
            }
        }
    }
}

enum Exchange {
    Done(RunnerResponse),
    Timeout,
    Crashed(String),
    Protocol(String),
}

/// Long-lived runner processes; each handles one request at a time.
pub struct RunnerPool {
    cfg: RunnerConfig,
    slots: Vec<Mutex<Option<Runner>>>,
    next_slot: AtomicUsize,
    next_id: AtomicU64,
}

impl RunnerPool {
    pub fn new(cfg: RunnerConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir)?;
        let n = cfg.processes.max(1);
        Ok(Self {
            cfg,
            slots: (0..n).map(|_| Mutex::new(None)).collect(),
            next_slot: AtomicUsize::new(0),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    fn acquire(&self) -> MutexGuard<'_, Option<Runner>> {
        let start = self.next_slot.fetch_add(1, Ordering::Relaxed);
        let n = self.slots.len();
        for k in 0..n {
            if let Ok(g) = self.slots[(start + k) % n].try_lock() {
                return g;
            }
        }
        self.slots[start % n].lock().unwrap_or_else(|p| p.into_inner())
    }

    fn exchange(&self, runner: &mut Runner, req: &RunnerRequest, deadline: Instant) -> Exchange {
        let mut line = serde_json::to_string(req).expect("request serializes");
        line.push('\n');
        if let Err(e) = runner.stdin.write_all(line.as_bytes()).and_then(|_| runner.stdin.flush()) {
            return Exchange::Crashed(e.to_string());
        }
        let wait = deadline.saturating_duration_since(Instant::now());
        match runner.lines.recv_timeout(wait) {
            Ok(text) => match serde_json::from_str::<RunnerResponse>(&text) {
                Ok(resp) if resp.id == req.id => Exchange::Done(resp),
                Ok(resp) => Exchange::Protocol(format!("response id {} for request {}", resp.id, req.id)),
                Err(e) => Exchange::Protocol(format!("unreadable response {text:?}: {e}")),
            },
            Err(RecvTimeoutError::Timeout) => Exchange::Timeout,
            Err(RecvTimeoutError::Disconnected) => Exchange::Crashed("runner exited".into()),
        }
    }

    pub fn render(&self, code: &str) -> RenderResult {
        let req = RunnerRequest {
            id: self.next_id.fetch_add(1, Ordering::Relaxed),
            code: code.to_string(),
            timeout_s: self.cfg.timeout.as_secs_f64(),
            out_dir: self.cfg.out_dir.to_string_lossy().into_owned(),
        };
        let mut slot = self.acquire();
        let deadline = Instant::now() + self.cfg.timeout;
        let mut restarted = false;
        loop {
            if slot.is_none() {
                match Runner::spawn(&self.cfg) {
                    Ok(r) => *slot = Some(r),
                    Err(e) => return failed(format!("cannot start runner: {e}")),
                }
            }
            let outcome = self.exchange(slot.as_mut().expect("spawned"), &req, deadline);
            let resp = match outcome {
                Exchange::Done(resp) => resp,
                Exchange::Timeout => {
                    slot.take().expect("spawned").kill();
                    return failed("timeout");
                }
                Exchange::Protocol(msg) => {
                    slot.take().expect("spawned").kill();
                    return failed(format!("protocol error: {msg}"));
                }
                Exchange::Crashed(msg) => {
                    slot.take().expect("spawned").kill();
                    if restarted || Instant::now() >= deadline {
                        return failed(format!("runner crashed: {msg}"));
                    }
                    log::warn!("runner crashed ({msg}), restarting");
                    restarted = true;
                    continue;
                }
            };
            if !resp.ok {
                return failed(resp.error.unwrap_or_default());
            }
            let Some(path) = resp.stl_path else {
                return failed("runner reported success without an STL path");
            };
            let path = PathBuf::from(path);
            let loaded = std::fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|bytes| stl::load_stl(&bytes).map_err(|e| e.to_string()));
            return match loaded {
                Ok(mesh) => RenderResult::Ok { mesh, artifact: Some(path) },
                Err(e) => failed(format!("cannot load {}: {e}", path.display())),
            };
        }
    }
}
