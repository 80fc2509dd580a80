//! Neighbor-expanded training batches and heuristic negative hyperedges.

mod negatives;

use std::collections::HashMap;

use log::warn;
use rand::Rng as _;

pub use negatives::{
    load_negatives, mix_counts, mns_trace, sample_negatives, sample_negatives_from, save_negatives, NegSpec,
    NegStrategy, MAX_CONSECUTIVE_FAILURES,
};

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;
use crate::nnkit::Dense;
use crate::seed;

/// Where a candidate hyperedge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Positive,
    Heuristic(NegStrategy),
    Generated,
}

impl Provenance {
    pub fn label(self) -> f64 {
        match self {
            Provenance::Positive => 1.0,
            _ => 0.0,
        }
    }
}

/// A node set to be scored, with its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateHyperedge {
    /// Sorted global node IDs.
    pub nodes: Vec<usize>,
    pub provenance: Provenance,
    /// Index of the positive hyperedge this candidate was derived from, if any.
    pub source: Option<usize>,
    /// Set on generated candidates that coincide with an observed hyperedge.
    pub observed: bool,
}

impl CandidateHyperedge {
    pub fn positive(g: &Hypergraph, j: usize) -> Self {
        CandidateHyperedge {
            nodes: g.hyperedge(j).to_vec(),
            provenance: Provenance::Positive,
            source: Some(j),
            observed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// A batch: a set of structure hyperedges and the nodes they (plus any extra
/// nodes) induce, with local indexing for encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SubHypergraph {
    hyperedges: Vec<usize>,
    nodes: Vec<usize>,
    local: HashMap<usize, usize>,
    local_edges: Vec<Vec<usize>>,
    local_incidence: Vec<Vec<usize>>,
}

impl SubHypergraph {
    /// Induce a sub-hypergraph from hyperedge indices of `g`, optionally adding
    /// `extra_nodes` that need an embedding even if they sit in no listed hyperedge.
    pub fn from_hyperedges(g: &Hypergraph, hyperedges: Vec<usize>, extra_nodes: &[usize]) -> Self {
        let mut nodes: Vec<usize> =
            hyperedges.iter().flat_map(|&j| g.hyperedge(j).iter().copied()).chain(extra_nodes.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &v)| (v, l)).collect();
        let local_edges: Vec<Vec<usize>> =
            hyperedges.iter().map(|&j| g.hyperedge(j).iter().map(|v| local[v]).collect()).collect();
        let mut local_incidence = vec![Vec::new(); nodes.len()];
        for (k, e) in local_edges.iter().enumerate() {
            for &l in e {
                local_incidence[l].push(k);
            }
        }
        SubHypergraph { hyperedges, nodes, local, local_edges, local_incidence }
    }

    /// Global indices of the member hyperedges, in sampling order.
    pub fn hyperedge_indices(&self) -> &[usize] {
        &self.hyperedges
    }

    /// Sorted global node IDs.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.local.get(&global).copied()
    }

    pub fn global_of(&self, local: usize) -> usize {
        self.nodes[local]
    }

    /// Member hyperedges over local node indices.
    pub fn local_edges(&self) -> &[Vec<usize>] {
        &self.local_edges
    }

    /// Member hyperedges (positions in `local_edges`) containing local node `l`.
    pub fn local_incident(&self, l: usize) -> &[usize] {
        &self.local_incidence[l]
    }

    /// Feature rows of the induced nodes, in local order.
    pub fn features(&self, g: &Hypergraph) -> Dense {
        g.features().select_rows(&self.nodes)
    }
}

/// Grow a batch from a random training hyperedge by repeatedly adding a uniformly
/// chosen unvisited training hyperedge that shares a node with the batch so far.
/// When no such hyperedge is left, restart from a fresh random one.
pub fn sample_sub_hypergraph(g: &Hypergraph, train: &[usize], batch_size: usize, seed: u64) -> Result<SubHypergraph> {
    let mut rng = seed::rng(seed);
    sample_sub_hypergraph_with(g, train, batch_size, &mut rng)
}

pub fn sample_sub_hypergraph_with(
    g: &Hypergraph,
    train: &[usize],
    batch_size: usize,
    rng: &mut seed::Rng,
) -> Result<SubHypergraph> {
    if train.is_empty() {
        return Err(Error::Empty("training hyperedge list".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let m = g.hyperedge_count();
    let mut in_train = vec![false; m];
    for &j in train {
        if j >= m {
            return Err(Error::InvalidArgument(format!("training index {j} out of range")));
        }
        in_train[j] = true;
    }
    let distinct = in_train.iter().filter(|&&b| b).count();
    let target = if batch_size > distinct {
        warn!("batch_size {batch_size} exceeds {distinct} training hyperedges; clamping");
        distinct
    } else {
        batch_size
    };

    let mut visited = vec![false; m];
    let mut queued = vec![false; m];
    let mut frontier: Vec<usize> = Vec::new();
    let mut chosen = Vec::with_capacity(target);
    while chosen.len() < target {
        let j = if frontier.is_empty() {
            let pool: Vec<usize> = train.iter().copied().filter(|&j| !visited[j]).collect();
            let mut j = pool[rng.random_range(0..pool.len())];
            // train may list an index twice; visited filtering already handles it
            while visited[j] {
                j = pool[rng.random_range(0..pool.len())];
            }
            j
        } else {
            frontier.swap_remove(rng.random_range(0..frontier.len()))
        };
        visited[j] = true;
        chosen.push(j);
        for &v in g.hyperedge(j) {
            for &jj in g.incident(v) {
                if in_train[jj] && !visited[jj] && !queued[jj] {
                    queued[jj] = true;
                    frontier.push(jj);
                }
            }
        }
    }
    Ok(SubHypergraph::from_hyperedges(g, chosen, &[]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::synth_hypergraph;

    fn g3() -> Hypergraph {
        Hypergraph::with_degree_features(5, vec![vec![0, 1], vec![1, 2], vec![3, 4]]).unwrap()
    }

    #[test]
    fn expansion_follows_the_only_neighbor() {
        let g = g3();
        for s in 0..50 {
            let sub = sample_sub_hypergraph(&g, &[0, 1, 2], 2, s).unwrap();
            let mut e = sub.hyperedge_indices().to_vec();
            if e[0] != 2 {
                e.sort_unstable();
                assert_eq!(e, vec![0, 1]);
            }
        }
    }

    #[test]
    fn batch_of_one_is_the_seed_hyperedge() {
        let g = g3();
        let sub = sample_sub_hypergraph(&g, &[2], 1, 4).unwrap();
        assert_eq!(sub.hyperedge_indices(), &[2]);
        assert_eq!(sub.nodes(), &[3, 4]);
        assert_eq!(sub.local_edges(), &[vec![0, 1]]);
    }

    #[test]
    fn oversized_batch_is_clamped() {
        let g = g3();
        let sub = sample_sub_hypergraph(&g, &[0, 2], 10, 1).unwrap();
        let mut e = sub.hyperedge_indices().to_vec();
        e.sort_unstable();
        assert_eq!(e, vec![0, 2]);
        assert!(sample_sub_hypergraph(&g, &[], 1, 1).is_err());
    }

    #[test]
    fn consecutive_members_touch_the_batch_so_far() {
        let g = synth_hypergraph(100, 60, (3, 5), 4, 2).unwrap();
        let train: Vec<usize> = (0..60).collect();
        for s in 0..20 {
            let sub = sample_sub_hypergraph(&g, &train, 16, s).unwrap();
            let idx = sub.hyperedge_indices();
            assert_eq!(idx.len(), 16);
            for k in 1..idx.len() {
                let touches = idx[..k].iter().any(|&a| g.hyperedge(a).iter().any(|v| g.hyperedge(idx[k]).contains(v)));
                // a restart happens only when nothing unvisited touches the batch
                if !touches {
                    let frontier_empty = train.iter().filter(|j| !idx[..k].contains(j)).all(|&j| {
                        !idx[..k].iter().any(|&a| g.hyperedge(a).iter().any(|v| g.hyperedge(j).contains(v)))
                    });
                    assert!(frontier_empty);
                }
            }
            let mut induced: Vec<usize> = idx.iter().flat_map(|&j| g.hyperedge(j).to_vec()).collect();
            induced.sort_unstable();
            induced.dedup();
            assert_eq!(sub.nodes(), &induced[..]);
        }
    }

    #[test]
    fn local_incidence_is_consistent() {
        let g = synth_hypergraph(60, 40, (2, 4), 3, 9).unwrap();
        let sub = SubHypergraph::from_hyperedges(&g, vec![0, 5, 7], &[59, 0]);
        for (k, e) in sub.local_edges().iter().enumerate() {
            let global: Vec<usize> = e.iter().map(|&l| sub.global_of(l)).collect();
            assert_eq!(global, g.hyperedge(sub.hyperedge_indices()[k]));
            for &l in e {
                assert!(sub.local_incident(l).contains(&k));
            }
        }
        assert!(sub.local_of(59).is_some());
    }

    #[test]
    fn fixed_seed_fixed_batch() {
        let g = synth_hypergraph(100, 60, (3, 5), 4, 2).unwrap();
        let train: Vec<usize> = (0..40).collect();
        assert_eq!(sample_sub_hypergraph(&g, &train, 8, 3).unwrap(), sample_sub_hypergraph(&g, &train, 8, 3).unwrap());
    }
}
