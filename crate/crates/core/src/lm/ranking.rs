use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::prompts::build_rank_prompt;
use super::{Backend, ChatMessage, LmError, ModelRoleConfig};

/// Ids ordered from best to worst.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<u64>,
    /// The ranker never produced a usable answer; `order` is the input order.
    pub degraded: bool,
    pub retries: u32,
}

/// Reads a JSON array of ids from `text` and checks it is a permutation of
/// `ids`. The last bracketed array in the text wins, so short reasoning
/// before the answer is tolerated.
pub fn parse_ranking(text: &str, ids: &[u64]) -> Option<Vec<u64>> {
    let trimmed = text.trim();
    let candidates = std::iter::once(trimmed).chain(
        trimmed
            .rmatch_indices('[')
            .filter_map(|(i, _)| trimmed[i..].find(']').map(|j| &trimmed[i..=i + j])),
    );
    for c in candidates {
        if let Ok(order) = serde_json::from_str::<Vec<u64>>(c) {
            let want: BTreeSet<u64> = ids.iter().copied().collect();
            let got: BTreeSet<u64> = order.iter().copied().collect();
            if order.len() == ids.len() && got == want {
                return Some(order);
            }
            return None;
        }
    }
    None
}

/// Asks the ranker once, re-asks once if the answer is unusable, then falls
/// back to the given order flagged as degraded.
pub fn rank_once(
    user_prompt: &str,
    descriptions: &[(u64, String)],
    backend: &dyn Backend,
    cfg: &ModelRoleConfig,
) -> Result<Ranking, LmError> {
    let ids: Vec<u64> = descriptions.iter().map(|d| d.0).collect();
    let mut messages = build_rank_prompt(user_prompt, descriptions);
    let first = backend.complete(&messages, cfg)?;
    if let Some(order) = parse_ranking(&first, &ids) {
        return Ok(Ranking { order, degraded: false, retries: 0 });
    }
    log::debug!("unusable ranking {first:?}, asking again");
    messages.push(ChatMessage::assistant(first));
    messages.push(ChatMessage::user(format!(
        "That answer was not a JSON array listing each of these ids exactly once: {}. Reply with only the array.",
        serde_json::to_string(&ids).expect("ids serialize")
    )));
    let second = backend.complete(&messages, cfg)?;
    if let Some(order) = parse_ranking(&second, &ids) {
        return Ok(Ranking { order, degraded: false, retries: 1 });
    }
    log::warn!("ranker failed twice, keeping input order");
    Ok(Ranking { order: ids, degraded: true, retries: 1 })
}

/// Mean 1-based position of every id across `rankings`.
pub fn average_rankings(rankings: &[Ranking]) -> Result<BTreeMap<u64, f64>, LmError> {
    let Some(first) = rankings.first() else {
        return Err(LmError::MismatchedIds);
    };
    let ids: BTreeSet<u64> = first.order.iter().copied().collect();
    let mut sums: BTreeMap<u64, f64> = ids.iter().map(|&i| (i, 0.0)).collect();
    for r in rankings {
        let set: BTreeSet<u64> = r.order.iter().copied().collect();
        if set != ids || r.order.len() != ids.len() {
            return Err(LmError::MismatchedIds);
        }
        for (pos, id) in r.order.iter().enumerate() {
            *sums.get_mut(id).expect("checked") += (pos + 1) as f64;
        }
    }
    let n = rankings.len() as f64;
    Ok(sums.into_iter().map(|(id, s)| (id, s / n)).collect())
}
