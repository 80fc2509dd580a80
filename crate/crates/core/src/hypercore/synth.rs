use std::collections::HashSet;

use rand::Rng as _;

use super::Hypergraph;
use crate::error::{Error, Result};
use crate::nnkit::Dense;
use crate::seed;

/// Probability that each node of a planted hyperedge comes from its home community.
pub const INTRA_COMMUNITY_PROB: f64 = 0.9;
/// Feature noise is drawn from `U[0, NOISE_SCALE)`.
pub const NOISE_SCALE: f64 = 0.1;

/// Parameters of [`synth_hypergraph`], bundled for config files and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub nodes: usize,
    pub hyperedges: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub communities: usize,
    pub seed: u64,
}

impl SynthParams {
    pub fn build(&self) -> Result<Hypergraph> {
        synth_hypergraph(self.nodes, self.hyperedges, (self.min_size, self.max_size), self.communities, self.seed)
    }
}

/// Community of node `i` when `n` nodes are cut into `c` contiguous blocks.
pub fn community_of(i: usize, n: usize, c: usize) -> usize {
    i * c / n
}

/// Planted-community hypergraph.
///
/// Nodes are cut into `communities` contiguous blocks. Each hyperedge picks a home
/// community and a size in `size_range`; every member is drawn from the home block
/// with probability [`INTRA_COMMUNITY_PROB`] and from all nodes otherwise (always
/// without repeats). Duplicate hyperedges are redrawn. Features are the community
/// one-hot plus `U[0, NOISE_SCALE)` noise.
pub fn synth_hypergraph(
    n: usize,
    m: usize,
    size_range: (usize, usize),
    communities: usize,
    seed: u64,
) -> Result<Hypergraph> {
    let (kmin, kmax) = size_range;
    if !(kmin >= 2 && kmax >= kmin && n >= kmax) {
        return Err(Error::InvalidArgument(format!(
            "synthetic sizes need n >= kmax >= kmin >= 2, got n={n}, sizes {kmin}-{kmax}"
        )));
    }
    if communities == 0 || communities > n {
        return Err(Error::InvalidArgument(format!("communities must be in [1, {n}], got {communities}")));
    }
    let blocks: Vec<Vec<usize>> = {
        let mut b = vec![Vec::new(); communities];
        for i in 0..n {
            b[community_of(i, n, communities)].push(i);
        }
        b
    };

    let mut rng = seed::named_rng(seed, "synth-edges", 0);
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    let budget = 1000 + 100 * m;
    let mut attempts = 0;
    while edges.len() < m {
        attempts += 1;
        if attempts > budget {
            return Err(Error::InvalidArgument(format!(
                "could not draw {m} distinct hyperedges of size {kmin}-{kmax} over {n} nodes"
            )));
        }
        let home = &blocks[rng.random_range(0..communities)];
        let k = rng.random_range(kmin..=kmax);
        let mut e: Vec<usize> = Vec::with_capacity(k);
        while e.len() < k {
            let intra = rng.random_bool(INTRA_COMMUNITY_PROB);
            let free_in_home = home.iter().filter(|v| !e.contains(v)).count();
            let v = if intra && free_in_home > 0 {
                let r = rng.random_range(0..free_in_home);
                *home.iter().filter(|v| !e.contains(v)).nth(r).expect("index below count")
            } else {
                loop {
                    let v = rng.random_range(0..n);
                    if !e.contains(&v) {
                        break v;
                    }
                }
            };
            e.push(v);
        }
        e.sort_unstable();
        if seen.insert(e.clone()) {
            edges.push(e);
        }
    }

    let mut frng = seed::named_rng(seed, "synth-features", 0);
    let mut features = Dense::zeros(n, communities);
    for i in 0..n {
        for c in 0..communities {
            let one = if community_of(i, n, communities) == c { 1.0 } else { 0.0 };
            features.set(i, c, one + NOISE_SCALE * frng.random::<f64>());
        }
    }
    Hypergraph::new(n, edges, features)
}
