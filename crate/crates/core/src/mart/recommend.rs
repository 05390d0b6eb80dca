use std::cmp::Reverse;
use std::collections::BTreeSet;

use crate::user::Profile;
use crate::warehouse::Warehouse;

/// Top `n` documents for `profile` that are not in `history`, best first.
/// Ties fall back to the warehouse default order (newest first, then doc_id).
pub fn select_recommendations(
    warehouse: &Warehouse,
    profile: &Profile,
    history: &BTreeSet<String>,
    n: usize,
) -> Vec<String> {
    let docs = warehouse.documents();
    let mut candidates: Vec<(i64, usize, usize)> = warehouse
        .default_order()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, pos)| !history.contains(&docs[pos].doc_id))
        .map(|(rank, pos)| (profile.rank_key(&docs[pos]), rank, pos))
        .collect();
    candidates.sort_by_key(|&(key, rank, _)| (Reverse(key), rank));
    candidates
        .into_iter()
        .take(n)
        .map(|(_, _, pos)| docs[pos].doc_id.clone())
        .collect()
}
