//! Cluster indexes over stance pools.
//!
//! A pool is clustered on `1 - similarity` distances, each cluster elects the
//! member with the smallest mean distance to its fellow members as its head,
//! and every pair of heads is scored to form the head graph used by the
//! graph-pruned retrieval strategy.

mod agglomerative;
mod index;

use thiserror::Error;

use crate::corpus::StancePool;
use crate::exec::Exec;
use crate::similarity::{ScoreError, Scorer, SimilarityMatrix};

pub use agglomerative::{agglomerative_cluster, Linkage};
pub use index::{
    build_index, build_index_with, Cluster, ClusterIndex, ClusterSummary, HeadEdge, IndexOptions, IndexSet,
    IndexSummary, DEFAULT_K,
};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cluster count {k} is invalid for {n} items (need 1 <= k <= n)")]
    InvalidK { k: usize, n: usize },
    #[error("cannot cluster an empty pool")]
    EmptyPool,
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("index file {path}: {reason}")]
    BadIndex { path: String, reason: String },
    #[error("no index files found in {0}")]
    NoIndexes(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `1 - similarity` for every pair of pool texts.
pub fn build_distance_matrix(
    pool: &StancePool,
    scorer: &dyn Scorer,
    exec: Exec,
) -> Result<SimilarityMatrix, ClusterError> {
    if pool.is_empty() {
        return Err(ClusterError::EmptyPool);
    }
    let sim = scorer.score_matrix(&pool.texts(), exec)?;
    Ok(sim.map(|s| 1.0 - s))
}

/// The member whose mean distance to all members (itself included) is
/// smallest. Ties go to the lowest index, which is the lowest record id
/// for pools in id order.
pub fn select_head(members: &[usize], distances: &SimilarityMatrix) -> usize {
    assert!(!members.is_empty(), "select_head on an empty cluster");
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let mut best = sorted[0];
    let mut best_mean = f64::INFINITY;
    for &m in &sorted {
        let total: f64 = sorted.iter().map(|&o| distances.get(m, o)).sum();
        let mean = total / sorted.len() as f64;
        if mean < best_mean {
            best = m;
            best_mean = mean;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ArgumentRecord, Stance};
    use crate::similarity::LexicalScorer;

    fn pool(texts: &[&str]) -> StancePool {
        StancePool {
            topic: "t".into(),
            stance: Stance::Pro,
            records: texts
                .iter()
                .enumerate()
                .map(|(i, t)| ArgumentRecord {
                    id: format!("r{i}"),
                    topic: "t".into(),
                    stance: Stance::Pro,
                    text: t.to_string(),
                    aq: 0.9,
                })
                .collect(),
        }
    }

    #[test]
    fn distance_matrix_cases() {
        let d = build_distance_matrix(&pool(&["same words", "same words"]), &LexicalScorer, Exec::Sequential).unwrap();
        assert_eq!(d, SimilarityMatrix::filled(2, 0.0));
        let d = build_distance_matrix(&pool(&["guns kill", "marriage equality"]), &LexicalScorer, Exec::Sequential)
            .unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 0), 0.0);

        let texts = ["the death penalty is wrong", "the death penalty is immoral", "guns kill people"];
        let d = build_distance_matrix(&pool(&texts), &LexicalScorer, Exec::Sequential).unwrap();
        let sim = crate::similarity::score_matrix(&LexicalScorer, &texts).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), 1.0 - sim.get(i, j));
            }
        }
        assert!(matches!(
            build_distance_matrix(&pool(&[]), &LexicalScorer, Exec::Sequential),
            Err(ClusterError::EmptyPool)
        ));
    }

    #[test]
    fn head_cases() {
        let d = SimilarityMatrix::filled(1, 0.0);
        assert_eq!(select_head(&[0], &d), 0);

        // d(a,b)=0.2, d(a,c)=0.4, d(b,c)=0.8: means a 0.2, b 0.333, c 0.4
        let mut d = SimilarityMatrix::filled(3, 0.0);
        for (i, j, v) in [(0, 1, 0.2), (0, 2, 0.4), (1, 2, 0.8)] {
            d.set(i, j, v);
            d.set(j, i, v);
        }
        assert_eq!(select_head(&[2, 1, 0], &d), 0);
        assert_eq!(select_head(&[1, 2], &d), 1);
    }
}
