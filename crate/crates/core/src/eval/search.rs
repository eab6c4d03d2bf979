use serde::Serialize;

use crate::codes::{hamming_words, BinaryCode, CodeDatabase};
use crate::error::{Result, ZshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hit {
    /// Position in the database.
    pub index: usize,
    pub distance: u32,
}

/// Database items ordered by Hamming distance, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RankedRetrieval {
    pub hits: Vec<Hit>,
}

impl RankedRetrieval {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.hits.iter().map(|h| h.index)
    }
}

fn check_len(query: &BinaryCode, db: &CodeDatabase) -> Result<()> {
    if query.len() != db.bits() {
        return Err(ZshError::Dimension(format!(
            "{}-bit query against a {}-bit database",
            query.len(),
            db.bits()
        )));
    }
    Ok(())
}

pub fn distances(query: &BinaryCode, db: &CodeDatabase) -> Result<Vec<u32>> {
    check_len(query, db)?;
    Ok((0..db.len()).map(|j| hamming_words(query.words(), db.words(j))).collect())
}

/// Stable counting sort of item indices by distance, truncated to `k`.
pub(crate) fn rank_by_distance(dist: &[u32], bits: usize, k: usize) -> RankedRetrieval {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bits + 1];
    for (j, &d) in dist.iter().enumerate() {
        buckets[d as usize].push(j);
    }
    let hits = buckets
        .into_iter()
        .enumerate()
        .flat_map(|(d, items)| items.into_iter().map(move |index| Hit { index, distance: d as u32 }))
        .take(k)
        .collect();
    RankedRetrieval { hits }
}

/// Exact top-`k` linear scan.
pub fn search_topk(query: &BinaryCode, db: &CodeDatabase, k: usize) -> Result<RankedRetrieval> {
    if k == 0 {
        return Err(ZshError::param("k", "must be >= 1"));
    }
    let dist = distances(query, db)?;
    Ok(rank_by_distance(&dist, db.bits(), k))
}

/// Indices (ascending) of items within Hamming distance `radius`.
pub fn search_radius(query: &BinaryCode, db: &CodeDatabase, radius: u32) -> Result<Vec<usize>> {
    let dist = distances(query, db)?;
    Ok(dist
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= radius)
        .map(|(j, _)| j)
        .collect())
}
