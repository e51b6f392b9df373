use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::similarity::SimilarityMatrix;

/// Inter-cluster distance criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Mean of all cross-cluster pair distances.
    #[default]
    Average,
    /// Largest cross-cluster pair distance.
    Complete,
    /// Smallest cross-cluster pair distance.
    Single,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        })
    }
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(format!("unknown linkage {other:?}")),
        }
    }
}

/// Candidate merge, ordered by linkage distance, then by the least
/// (smallest member, largest member) of the merged union, then by the
/// smallest member of the cluster not holding the union's minimum.
#[derive(Debug, Clone, Copy)]
struct MergeKey {
    distance: f64,
    lo: usize,
    hi: usize,
    other_min: usize,
}

impl MergeKey {
    fn cmp(&self, other: &MergeKey) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
            .then(self.other_min.cmp(&other.other_min))
    }
}

struct Group {
    members: Vec<usize>,
    min: usize,
    max: usize,
}

struct State {
    linkage: Linkage,
    n: usize,
    /// Per slot pair: distance sum (average) or extremal distance (single/complete).
    raw: Vec<f64>,
    groups: Vec<Option<Group>>,
    nearest: Vec<Option<(MergeKey, usize)>>,
}

impl State {
    fn group(&self, slot: usize) -> &Group {
        self.groups[slot].as_ref().expect("active slot")
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let raw = self.raw[a * self.n + b];
        match self.linkage {
            Linkage::Average => raw / (self.group(a).members.len() as f64 * self.group(b).members.len() as f64),
            Linkage::Complete | Linkage::Single => raw,
        }
    }

    fn key(&self, a: usize, b: usize) -> MergeKey {
        let (ga, gb) = (self.group(a), self.group(b));
        let (lo, other_min) = if ga.min < gb.min { (ga.min, gb.min) } else { (gb.min, ga.min) };
        MergeKey { distance: self.distance(a, b), lo, hi: ga.max.max(gb.max), other_min }
    }

    fn recompute_nearest(&mut self, a: usize) {
        let mut best: Option<(MergeKey, usize)> = None;
        for b in 0..self.n {
            if b == a || self.groups[b].is_none() {
                continue;
            }
            let k = self.key(a, b);
            if best.as_ref().is_none_or(|(bk, _)| k.cmp(bk) == Ordering::Less) {
                best = Some((k, b));
            }
        }
        self.nearest[a] = best;
    }

    fn merge(&mut self, a: usize, b: usize) {
        let gb = self.groups[b].take().expect("active slot");
        self.nearest[b] = None;
        for c in 0..self.n {
            if c == a || self.groups[c].is_none() {
                continue;
            }
            let (ac, bc) = (self.raw[a * self.n + c], self.raw[b * self.n + c]);
            let merged = match self.linkage {
                Linkage::Average => ac + bc,
                Linkage::Complete => ac.max(bc),
                Linkage::Single => ac.min(bc),
            };
            self.raw[a * self.n + c] = merged;
            self.raw[c * self.n + a] = merged;
        }
        let ga = self.groups[a].as_mut().expect("active slot");
        ga.members.extend(gb.members);
        ga.members.sort_unstable();
        ga.min = ga.min.min(gb.min);
        ga.max = ga.max.max(gb.max);

        self.recompute_nearest(a);
        for c in 0..self.n {
            if c == a || self.groups[c].is_none() {
                continue;
            }
            match self.nearest[c] {
                Some((_, target)) if target == a || target == b => self.recompute_nearest(c),
                Some((current, _)) => {
                    let candidate = self.key(c, a);
                    if candidate.cmp(&current) == Ordering::Less {
                        self.nearest[c] = Some((candidate, a));
                    }
                }
                None => self.recompute_nearest(c),
            }
        }
    }
}

/// Bottom-up clustering of `distances` into exactly `k` clusters.
///
/// Clusters are returned with ascending member indices, ordered by their
/// smallest member.
pub fn agglomerative_cluster(
    distances: &SimilarityMatrix,
    k: usize,
    linkage: Linkage,
) -> Result<Vec<Vec<usize>>, ClusterError> {
    let n = distances.len();
    if k < 1 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let mut raw = Vec::with_capacity(n * n);
    for i in 0..n {
        raw.extend_from_slice(distances.row(i));
    }
    let mut state = State {
        linkage,
        n,
        raw,
        groups: (0..n).map(|i| Some(Group { members: vec![i], min: i, max: i })).collect(),
        nearest: vec![None; n],
    };
    for i in 0..n {
        state.recompute_nearest(i);
    }

    let mut active = n;
    while active > k {
        let (a, b) = state
            .nearest
            .iter()
            .enumerate()
            .filter_map(|(slot, best)| best.map(|(key, other)| (key, slot, other)))
            .min_by(|x, y| x.0.cmp(&y.0))
            .map(|(_, a, b)| (a.min(b), a.max(b)))
            .expect("at least two active clusters");
        state.merge(a, b);
        active -= 1;
    }

    let mut clusters: Vec<Vec<usize>> = state.groups.into_iter().flatten().map(|g| g.members).collect();
    clusters.sort_by_key(|m| m[0]);
    Ok(clusters)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// (distance, smallest member, largest member, other cluster's smallest)
    type MergeKey = (f64, usize, usize, usize);

    /// Reference implementation: recompute every cluster-pair linkage from
    /// the original matrix at every step.
    pub(crate) fn naive_cluster(d: &SimilarityMatrix, k: usize, linkage: Linkage) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best: Option<(MergeKey, usize, usize)> = None;
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let pairs: Vec<f64> =
                        clusters[x].iter().flat_map(|&i| clusters[y].iter().map(move |&j| d.get(i, j))).collect();
                    let dist = match linkage {
                        Linkage::Average => pairs.iter().sum::<f64>() / pairs.len() as f64,
                        Linkage::Complete => pairs.iter().cloned().fold(f64::MIN, f64::max),
                        Linkage::Single => pairs.iter().cloned().fold(f64::MAX, f64::min),
                    };
                    let (mx, my) = (clusters[x][0], clusters[y][0]);
                    let lo = mx.min(my);
                    let hi = *clusters[x].last().unwrap().max(clusters[y].last().unwrap());
                    let key = (dist, lo, hi, mx.max(my));
                    let better = match &best {
                        None => true,
                        Some((bk, _, _)) => {
                            key.0 < bk.0 || (key.0 == bk.0 && (key.1, key.2, key.3) < (bk.1, bk.2, bk.3))
                        }
                    };
                    if better {
                        best = Some((key, x, y));
                    }
                }
            }
            let (_, x, y) = best.unwrap();
            let moved = clusters.remove(y);
            clusters[x].extend(moved);
            clusters[x].sort_unstable();
        }
        clusters.sort_by_key(|c| c[0]);
        clusters
    }

    /// Symmetric matrix with dyadic entries (exact float sums) and zero diagonal.
    pub(crate) fn arb_distances(max_n: usize) -> impl Strategy<Value = SimilarityMatrix> {
        (1..=max_n).prop_flat_map(|n| {
            prop::collection::vec(0u32..=8, n * n).prop_map(move |cells| {
                SimilarityMatrix::from_fn(n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        let (a, b) = (i.min(j), i.max(j));
                        cells[a * n + b] as f64 / 8.0
                    }
                })
            })
        })
    }

    #[test]
    fn degenerate_cases() {
        let one = SimilarityMatrix::filled(1, 0.0);
        assert_eq!(agglomerative_cluster(&one, 1, Linkage::Average).unwrap(), vec![vec![0]]);
        let d = SimilarityMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { 0.5 });
        assert_eq!(agglomerative_cluster(&d, 4, Linkage::Average).unwrap(), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert!(agglomerative_cluster(&d, 5, Linkage::Average).is_err());
        assert!(agglomerative_cluster(&d, 0, Linkage::Average).is_err());
    }

    fn two_pairs() -> SimilarityMatrix {
        // {0, 2} and {1, 3}: within-pair 0.1, across 0.9
        SimilarityMatrix::from_fn(4, |i, j| {
            if i == j {
                0.0
            } else if i % 2 == j % 2 {
                0.1
            } else {
                0.9
            }
        })
    }

    /// Brute force over every 2-partition: minimise the larger within-cluster
    /// average pair distance.
    fn best_two_partition(d: &SimilarityMatrix) -> Vec<Vec<usize>> {
        let n = d.len();
        let cost = |c: &[usize]| {
            let mut total = 0.0;
            let mut count = 0;
            for (x, &i) in c.iter().enumerate() {
                for &j in &c[x + 1..] {
                    total += d.get(i, j);
                    count += 1;
                }
            }
            if count == 0 {
                0.0
            } else {
                total / count as f64
            }
        };
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        for mask in 1..(1u32 << n) - 1 {
            if mask & 1 == 0 {
                continue;
            }
            let a: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let c = cost(&a).max(cost(&b));
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, vec![a, b]));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn separates_two_pairs() {
        let d = two_pairs();
        let expected = best_two_partition(&d);
        assert_eq!(expected, vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(agglomerative_cluster(&d, 2, Linkage::Average).unwrap(), expected);
    }

    #[test]
    fn equal_distances_merge_lowest_pair_first() {
        let d = SimilarityMatrix::from_fn(5, |i, j| if i == j { 0.0 } else { 1.0 });
        // (0,1) first, then {0,1} with 2 ties on distance; least (lo, hi) is (0,2).
        assert_eq!(agglomerative_cluster(&d, 3, Linkage::Average).unwrap(), vec![vec![0, 1, 2], vec![3], vec![4]]);
        assert_eq!(agglomerative_cluster(&d, 3, Linkage::Average).unwrap(), naive_cluster(&d, 3, Linkage::Average));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_naive_reference(d in arb_distances(9), k_seed in 0usize..100, l in 0usize..3) {
            let k = 1 + k_seed % d.len();
            let linkage = [Linkage::Average, Linkage::Complete, Linkage::Single][l];
            let fast = agglomerative_cluster(&d, k, linkage).unwrap();
            prop_assert_eq!(fast.len(), k);
            prop_assert_eq!(&fast, &naive_cluster(&d, k, linkage));
            let mut all: Vec<usize> = fast.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
        }
    }
}
