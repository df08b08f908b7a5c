use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::prompts::{task_of, Task};
use super::{Backend, ChatMessage, LmError, ModelRoleConfig, Role};
use crate::csg;

const MAX_HOLES: usize = 12;
/// Chance that a fresh design already has the requested hole count.
const INIT_HIT_PROB: f64 = 0.15;
/// Chance that a mutation moves the hole count one step toward the target.
const MUTATE_TOWARD_PROB: f64 = 0.6;

/// Offline stand-in for all three models. It writes and edits plates with
/// round holes in the csg language, and reads hole counts where a real model
/// would look at pictures.
///
/// Every answer is a pure function of the seed and the full transcript.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn rng(&self, messages: &[ChatMessage]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for m in messages {
            h.update(m.role.as_str().as_bytes());
            h.update([0]);
            h.update(m.text.as_bytes());
            h.update([0]);
            for img in &m.images {
                h.update(img.provenance.as_deref().unwrap_or("").as_bytes());
                h.update([1]);
            }
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

fn number_word(w: &str) -> Option<usize> {
    let words = [
        "no", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    ];
    match w {
        "a" | "an" | "single" => Some(1),
        "without" => Some(0),
        _ => words.iter().position(|&x| x == w).or_else(|| w.parse().ok()),
    }
}

/// Number of holes a request asks for, read from phrases such as
/// "two round holes", "a hole" or "no holes". Requests that never mention
/// holes ask for none.
pub fn target_holes(request: &str) -> usize {
    static HOLE: OnceLock<Regex> = OnceLock::new();
    let hole = HOLE.get_or_init(|| Regex::new(r"(?i)\bholes?\b(?:[^-]|$)").expect("valid regex"));
    let lower = request.to_lowercase();
    let mut total = 0;
    for m in hole.find_iter(&lower) {
        let plural = lower[m.start()..].starts_with("holes");
        let before: Vec<&str> = lower[..m.start()]
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        let mut count = None;
        for w in before.iter().rev().take(4) {
            if let Some(n) = number_word(w) {
                count = Some(n);
                break;
            }
            if matches!(*w, "with" | "and" | "of" | "has" | "have") {
                break;
            }
        }
        total += count.unwrap_or(if plural { 2 } else { 1 });
    }
    total.min(MAX_HOLES)
}

/// The request embedded between `<<<` and `>>>` in the first user message.
fn request_of(messages: &[ChatMessage]) -> &str {
    let text = messages.iter().find(|m| m.role == Role::User).map_or("", |m| m.text.as_str());
    match (text.find("<<<"), text.find(">>>")) {
        (Some(a), Some(b)) if b > a => &text[a + 3..b],
        _ => "",
    }
}

/// Bodies of all fenced blocks in `text`, in order.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(nl) = after.find('\n') else { break };
        let body = &after[nl + 1..];
        let Some(close) = body.find("```") else { break };
        out.push(body[..close].trim_end());
        rest = &body[close + 3..];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Plate {
    width: f64,
    height: f64,
    thickness: f64,
    holes: usize,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl Plate {
    fn random<R: Rng>(rng: &mut R, holes: usize) -> Self {
        Self {
            width: round3(rng.gen_range(2.0..6.0)),
            height: round3(rng.gen_range(1.5..4.0)),
            thickness: round3(rng.gen_range(0.1..0.5)),
            holes,
        }
    }

    fn from_code(code: &str) -> Option<Self> {
        let program = csg::parse(code).ok()?;
        let part = program.parts.first()?;
        let outline = part.outer.shape.outline(part.outer.at);
        let span = |k: usize| {
            let lo = outline.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = outline.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            round3((hi - lo).clamp(0.5, 20.0))
        };
        Some(Self {
            width: span(0),
            height: span(1),
            thickness: round3((part.z1 - part.z0).clamp(0.05, 5.0)),
            holes: program.hole_count().min(MAX_HOLES),
        })
    }

    /// Holes evenly spaced along the long centerline.
    fn code(&self) -> String {
        let (w, h, n) = (self.width, self.height, self.holes);
        let pitch = w / (n + 1) as f64;
        let r = round3((0.25 * h).min(0.3 * pitch));
        let mut s = format!("part z 0 {} {{ rect {} {}", self.thickness, w, h);
        for i in 0..n {
            let x = round3(-w / 2.0 + (i + 1) as f64 * pitch);
            s.push_str(&format!("; hole circ {r} at {x} 0"));
        }
        s.push_str(" }");
        s
    }
}

fn hole_word(n: usize) -> &'static str {
    if n == 1 {
        "hole"
    } else {
        "holes"
    }
}

fn answer_code(code: String) -> String {
    format!("```csg\n{code}\n```")
}

fn fresh_design<R: Rng>(rng: &mut R, target: usize) -> Plate {
    let holes = if rng.gen_bool(INIT_HIT_PROB) {
        target
    } else {
        let others: Vec<usize> = (0..=4).filter(|&n| n != target).collect();
        others[rng.gen_range(0..others.len())]
    };
    Plate::random(rng, holes)
}

fn described_holes(text: &str) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"with (\d+) holes?").expect("valid regex"));
    re.captures(text)?.get(1)?.as_str().parse().ok()
}

impl Backend for MockBackend {
    fn complete(&self, messages: &[ChatMessage], _cfg: &ModelRoleConfig) -> Result<String, LmError> {
        let mut rng = self.rng(messages);
        let target = target_holes(request_of(messages));
        let user = messages.iter().find(|m| m.role == Role::User).map_or("", |m| m.text.as_str());
        let reply = match task_of(messages) {
            Some(Task::Init) | Some(Task::SelfDebug) => answer_code(fresh_design(&mut rng, target).code()),
            Some(Task::Describe) => {
                let source = messages.iter().flat_map(|m| &m.images).find_map(|i| i.provenance.as_deref());
                match source.and_then(|s| csg::parse(s).ok()) {
                    Some(p) => {
                        let n = p.hole_count();
                        format!(
                            "Step 1: the object is made of extruded parts.\nStep 2: there are {} separate parts.\n\
Step 3: I count {n} through {}.\nDescription: A solid with {n} {}.",
                            p.parts.len(),
                            hole_word(n),
                            hole_word(n)
                        )
                    }
                    None => "Step 1: the views are unclear.\nDescription: A solid of unclear shape.".into(),
                }
            }
            Some(Task::Rank) => {
                static LINE: OnceLock<Regex> = OnceLock::new();
                let line = LINE.get_or_init(|| Regex::new(r"(?m)^\[id (\d+)\] (.*)$").expect("valid regex"));
                let mut scored: Vec<(usize, u64)> = line
                    .captures_iter(user)
                    .map(|c| {
                        let id: u64 = c[1].parse().unwrap_or(u64::MAX);
                        let dist = described_holes(&c[2]).map_or(usize::MAX, |n| n.abs_diff(target));
                        (dist, id)
                    })
                    .collect();
                scored.sort();
                let ids: Vec<u64> = scored.into_iter().map(|s| s.1).collect();
                serde_json::to_string(&ids).expect("ids serialize")
            }
            Some(Task::Crossover) => {
                let blocks = fenced_blocks(user);
                let parse = |i: usize| blocks.get(i).and_then(|c| Plate::from_code(c));
                let child = match (parse(0), parse(1)) {
                    (Some(a), Some(b)) => {
                        let (keep, other) = if b.holes.abs_diff(target) < a.holes.abs_diff(target) {
                            (b, a)
                        } else {
                            (a, b)
                        };
                        Plate { thickness: other.thickness, ..keep }
                    }
                    (Some(p), None) | (None, Some(p)) => p,
                    (None, None) => fresh_design(&mut rng, target),
                };
                answer_code(child.code())
            }
            Some(Task::Mutation) => {
                let parsed = fenced_blocks(user).first().and_then(|c| Plate::from_code(c));
                let mut p = parsed.unwrap_or_else(|| fresh_design(&mut rng, target));
                if p.holes != target && rng.gen_bool(MUTATE_TOWARD_PROB) {
                    p.holes = if p.holes < target { p.holes + 1 } else { p.holes - 1 };
                } else {
                    p.width = round3((p.width * rng.gen_range(0.9..1.1)).clamp(1.5, 8.0));
                }
                answer_code(p.code())
            }
            None => "I can only help with CAD tasks.".into(),
        };
        Ok(reply)
    }

    fn identity(&self) -> String {
        format!("mock(seed={})", self.seed)
    }
}
