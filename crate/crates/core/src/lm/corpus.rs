use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

const BUILTIN_CSG: &str = include_str!("corpus_csg.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corpus {0} has no snippets")]
    Empty(PathBuf),
    #[error("need {wanted} few-shot samples but the corpus has {available}")]
    TooSmall { wanted: usize, available: usize },
}

/// Example programs the generator is shown before writing its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    snippets: Vec<String>,
}

impl Corpus {
    pub fn new(snippets: Vec<String>) -> Self {
        Self { snippets }
    }

    /// The 40 csg examples shipped with the crate.
    pub fn builtin_csg() -> Self {
        Self::new(
            BUILTIN_CSG
                .split("\n---\n")
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    /// One snippet per regular file in `dir`, ordered by file name.
    pub fn from_dir(dir: &Path) -> Result<Self, CorpusError> {
        let io = |source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        let mut snippets = Vec::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|source| CorpusError::Io {
                path: p.clone(),
                source,
            })?;
            if !text.trim().is_empty() {
                snippets.push(text.trim().to_string());
            }
        }
        if snippets.is_empty() {
            return Err(CorpusError::Empty(dir.to_path_buf()));
        }
        Ok(Self::new(snippets))
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn snippets(&self) -> &[String] {
        &self.snippets
    }

    /// `k` distinct snippet indices drawn without replacement.
    pub fn sample_indices<R: Rng>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>, CorpusError> {
        if k > self.snippets.len() {
            return Err(CorpusError::TooSmall {
                wanted: k,
                available: self.snippets.len(),
            });
        }
        Ok(index::sample(rng, self.snippets.len(), k).into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_has_forty_valid_programs() {
        let c = Corpus::builtin_csg();
        assert_eq!(c.len(), 40);
        for s in c.snippets() {
            let p = csg::parse(s).unwrap_or_else(|e| panic!("{s}\n{e}"));
            let mesh = csg::compile(&p).unwrap();
            assert_eq!(mesh.euler_characteristic(), csg::expected_chi(&p), "{s}");
        }
    }

    #[test]
    fn sampling_is_without_replacement() {
        let c = Corpus::builtin_csg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut idx = c.sample_indices(5, &mut rng).unwrap();
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), 5);
        }
        assert!(matches!(c.sample_indices(41, &mut rng), Err(CorpusError::TooSmall { .. })));
    }

    #[test]
    fn loads_directory_sorted() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "second").unwrap();
        std::fs::write(dir.path().join("a.txt"), "first\n").unwrap();
        std::fs::write(dir.path().join("c.txt"), "  ").unwrap();
        let c = Corpus::from_dir(dir.path()).unwrap();
        assert_eq!(c.snippets(), ["first", "second"]);

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(Corpus::from_dir(empty.path()), Err(CorpusError::Empty(_))));
    }
}
