use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::csg;
use crate::geometry::{load_stl, write_stl, TriMesh};

pub const PROMPT_FILE: &str = "prompt.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.stl";

/// One benchmark entry: a text request and the solid it describes.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub prompt: String,
    pub ground_truth: TriMesh,
    pub source: PathBuf,
}

#[derive(Debug)]
pub struct Dataset {
    /// Sorted by id.
    pub samples: Vec<Sample>,
    /// Subdirectories that were not usable, with the reason.
    pub skipped: Vec<(String, String)>,
}

fn read_sample(dir: &Path, id: &str) -> Result<Sample, String> {
    let prompt = fs::read_to_string(dir.join(PROMPT_FILE)).map_err(|e| format!("{PROMPT_FILE}: {e}"))?;
    let prompt = prompt.trim().to_string();
    if prompt.is_empty() {
        return Err(format!("{PROMPT_FILE} is empty"));
    }
    let bytes = fs::read(dir.join(GROUND_TRUTH_FILE)).map_err(|e| format!("{GROUND_TRUTH_FILE}: {e}"))?;
    let ground_truth = load_stl(&bytes).map_err(|e| format!("{GROUND_TRUTH_FILE}: {e}"))?;
    if ground_truth.is_empty() {
        return Err(format!("{GROUND_TRUTH_FILE} has no faces"));
    }
    Ok(Sample { id: id.to_string(), prompt, ground_truth, source: dir.to_path_buf() })
}

/// Reads every `<root>/<id>/{prompt.txt, ground_truth.stl}` pair.
pub fn load_dataset(root: &Path) -> Result<Dataset, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", root.display()));
    let mut dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root).map_err(io)? {
        let entry = entry.map_err(io)?;
        if entry.file_type().map_err(io)?.is_dir() {
            dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    dirs.sort();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (id, dir) in dirs {
        match read_sample(&dir, &id) {
            Ok(s) => samples.push(s),
            Err(reason) => {
                log::warn!("skipping sample {id}: {reason}");
                skipped.push((id, reason));
            }
        }
    }
    if samples.is_empty() {
        return Err(HarnessError::EmptyDataset(root.to_path_buf()));
    }
    Ok(Dataset { samples, skipped })
}

/// A synthetic benchmark entry built from csg source.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTarget {
    pub id: String,
    pub prompt: String,
    pub code: String,
    pub holes: usize,
}

const HOLE_PHRASES: [&str; 4] = ["with no holes", "with one round hole", "with two round holes", "with three round holes"];

/// `count` plate-like targets cycling through 0–3 through-holes and a few
/// outline shapes.
pub fn fixture_targets(count: usize) -> Vec<FixtureTarget> {
    (0..count)
        .map(|i| {
            let holes = i % 4;
            let (noun, outline) = match (i / 4) % 3 {
                0 => ("rectangular plate", "rect 6 2.5".to_string()),
                1 => ("round disc", "circ 2.5".to_string()),
                _ => ("hexagonal plate", hexagon(2.8)),
            };
            let mut code = format!("part z 0 0.4 {{ {outline}");
            for k in 0..holes {
                let x = -1.2 + 1.2 * k as f64 + if holes == 1 { 1.2 } else if holes == 2 { 0.6 } else { 0.0 };
                code.push_str(&format!("; hole circ 0.35 at {x} 0"));
            }
            code.push_str(" }");
            FixtureTarget {
                id: format!("target_{i:02}"),
                prompt: format!("A {noun} {}.", HOLE_PHRASES[holes]),
                code,
                holes,
            }
        })
        .collect()
}

fn hexagon(r: f64) -> String {
    let pts: Vec<String> = (0..6)
        .map(|k| {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            format!("{:.4} {:.4}", r * a.cos(), r * a.sin())
        })
        .collect();
    format!("poly {}", pts.join(" "))
}

/// Writes `targets` in the dataset layout under `root`.
pub fn write_fixture_dataset(root: &Path, targets: &[FixtureTarget]) -> Result<(), HarnessError> {
    for t in targets {
        let program = csg::parse(&t.code).map_err(|e| HarnessError::Fixture(format!("{}: {e}", t.id)))?;
        let mesh = csg::compile(&program).map_err(|e| HarnessError::Fixture(format!("{}: {e}", t.id)))?;
        let dir = root.join(&t.id);
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(&dir).map_err(io)?;
        fs::write(dir.join(PROMPT_FILE), format!("{}\n", t.prompt)).map_err(io)?;
        fs::write(dir.join(GROUND_TRUTH_FILE), write_stl(&mesh)).map_err(io)?;
    }
    Ok(())
}
