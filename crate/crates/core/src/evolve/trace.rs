use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Individual, Lineage};
use crate::lm::Ranking;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualSnapshot {
    pub id: u64,
    pub code: String,
    pub ok: bool,
    pub error: Option<String>,
    pub self_debugged: bool,
    pub description: Option<String>,
    pub avg_rank: Option<f64>,
    pub lineage: Lineage,
}

impl IndividualSnapshot {
    pub fn of(ind: &Individual) -> Self {
        Self {
            id: ind.id,
            code: ind.code.clone(),
            ok: ind.is_ok(),
            error: ind.error.clone(),
            self_debugged: ind.self_debugged,
            description: ind.description.clone(),
            avg_rank: ind.avg_rank,
            lineage: ind.lineage.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffspringRecord {
    pub id: u64,
    pub parents: (u64, u64),
    pub crossover_ok: bool,
    pub crossover_self_debugged: bool,
    pub mutated: bool,
    pub ok: bool,
    pub self_debugged: bool,
}

/// Word positions of each random stream, so a run can be resumed or audited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPositions {
    pub few_shot: u128,
    pub selection: u128,
    pub mutation_gate: u128,
}

/// Everything that happened in one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub elite_id: u64,
    /// The surviving elite was described and ranked again alongside the
    /// new offspring.
    pub elite_reevaluated: bool,
    pub individuals: Vec<IndividualSnapshot>,
    pub rankings: Vec<Ranking>,
    pub avg_ranks: BTreeMap<u64, f64>,
    pub parent_pairs: Vec<(u64, u64)>,
    pub offspring: Vec<OffspringRecord>,
    pub rng_positions: RngPositions,
}

pub fn traces_to_jsonl(traces: &[GenerationTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).expect("trace serializes"));
        out.push('\n');
    }
    out
}
