//! Hypergraph storage, bipartite view and train/validation/test splitting.

mod io;
mod synth;

use std::collections::HashSet;

use rand::seq::SliceRandom;

pub use io::{
    build_hypergraph, hyperedges_to_text, load_features, load_hypergraph, parse_feature_text, parse_hyperedge_text,
    save_features, save_hyperedges, save_hypergraph, write_remap, LoadReport, ParsedHyperedges,
};
pub use synth::{community_of, synth_hypergraph, SynthParams, INTRA_COMMUNITY_PROB, NOISE_SCALE};

use crate::error::{Error, Result};
use crate::nnkit::Dense;
use crate::seed;

/// Number of log-degree buckets used for default one-hot features.
pub const DEGREE_BUCKETS: usize = 16;

/// Immutable hypergraph with node features and both incidence directions.
///
/// Hyperedges are stored as sorted node-ID lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    node_count: usize,
    hyperedges: Vec<Vec<usize>>,
    features: Dense,
    node_edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(node_count: usize, hyperedges: Vec<Vec<usize>>, features: Dense) -> Result<Self> {
        if features.rows() != node_count {
            return Err(Error::InvalidHypergraph(format!(
                "{} feature rows for {node_count} nodes",
                features.rows()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("node features".into()));
        }
        let mut node_edges = vec![Vec::new(); node_count];
        let mut edges = Vec::with_capacity(hyperedges.len());
        for (j, mut e) in hyperedges.into_iter().enumerate() {
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidHypergraph(format!("hyperedge {j} repeats a node")));
            }
            if e.len() < 2 {
                return Err(Error::InvalidHypergraph(format!("hyperedge {j} has size {}", e.len())));
            }
            if let Some(&bad) = e.iter().find(|&&v| v >= node_count) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {j} has node {bad} outside [0, {node_count})"
                )));
            }
            for &v in &e {
                node_edges[v].push(j);
            }
            edges.push(e);
        }
        Ok(Hypergraph { node_count, hyperedges: edges, features, node_edges })
    }

    /// Build with one-hot log-degree bucket features.
    pub fn with_degree_features(node_count: usize, hyperedges: Vec<Vec<usize>>) -> Result<Self> {
        let mut degree = vec![0usize; node_count];
        for e in &hyperedges {
            for &v in e {
                if v < node_count {
                    degree[v] += 1;
                }
            }
        }
        let mut features = Dense::zeros(node_count, DEGREE_BUCKETS);
        for (i, &d) in degree.iter().enumerate() {
            features.set(i, degree_bucket(d), 1.0);
        }
        Self::new(node_count, hyperedges, features)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Dense {
        &self.features
    }

    pub fn hyperedge(&self, j: usize) -> &[usize] {
        &self.hyperedges[j]
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    /// Hyperedges containing node `i`, ascending.
    pub fn incident(&self, i: usize) -> &[usize] {
        &self.node_edges[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.node_edges[i].len()
    }

    pub fn incidence_count(&self) -> usize {
        self.hyperedges.iter().map(Vec::len).sum()
    }

    pub fn mean_hyperedge_size(&self) -> f64 {
        if self.hyperedges.is_empty() {
            0.0
        } else {
            self.incidence_count() as f64 / self.hyperedges.len() as f64
        }
    }

    /// Every observed hyperedge as a sorted node list, for exact-match lookups.
    pub fn edge_set(&self) -> HashSet<Vec<usize>> {
        self.hyperedges.iter().cloned().collect()
    }

    pub fn to_bipartite(&self) -> BipartiteView {
        let edges = self
            .hyperedges
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().map(move |&i| (i, j)))
            .collect();
        BipartiteView { left_count: self.node_count, right_count: self.hyperedges.len(), edges }
    }

    /// Dense incidence matrix `A` (n × m). Only sensible for small graphs.
    pub fn incidence_matrix(&self) -> Dense {
        let mut a = Dense::zeros(self.node_count, self.hyperedges.len());
        for (j, e) in self.hyperedges.iter().enumerate() {
            for &i in e {
                a.set(i, j, 1.0);
            }
        }
        a
    }
}

pub(crate) fn degree_bucket(degree: usize) -> usize {
    // floor(log2(d + 1)), capped
    let b = (usize::BITS - (degree + 1).leading_zeros() - 1) as usize;
    b.min(DEGREE_BUCKETS - 1)
}

/// Nodes on the left, hyperedges on the right, one undirected edge per incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteView {
    pub left_count: usize,
    pub right_count: usize,
    /// `(node, hyperedge)` pairs.
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteView {
    pub fn left_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.left_count];
        for &(i, _) in &self.edges {
            d[i] += 1;
        }
        d
    }

    pub fn right_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.right_count];
        for &(_, j) in &self.edges {
            d[j] += 1;
        }
        d
    }
}

/// Disjoint hyperedge-index lists covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle hyperedge indices with `seed` and cut 60/20/20 (rounded to nearest).
pub fn split_dataset(g: &Hypergraph, seed: u64) -> Result<Split> {
    let m = g.hyperedge_count();
    if m < 5 {
        return Err(Error::TooFewHyperedges(m));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n_train = (6 * m + 5) / 10;
    let n_val = (2 * m + 5) / 10;
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Ok(Split { train: idx, validation, test })
}

impl Split {
    pub fn to_text(&self) -> String {
        let line = |name: &str, v: &[usize]| {
            let mut s = name.to_string();
            for i in v {
                s.push(' ');
                s.push_str(&i.to_string());
            }
            s.push('\n');
            s
        };
        line("train", &self.train) + &line("validation", &self.validation) + &line("test", &self.test)
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut split = Split { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
        let mut seen = [false; 3];
        for (ln, line) in text.lines().enumerate() {
            let mut toks = line.split_ascii_whitespace();
            let Some(head) = toks.next() else { continue };
            let (slot, k) = match head {
                "train" => (&mut split.train, 0),
                "validation" => (&mut split.validation, 1),
                "test" => (&mut split.test, 2),
                other => {
                    return Err(Error::Parse {
                        file: file.into(),
                        line: ln + 1,
                        msg: format!("unknown split section {other:?}"),
                    })
                }
            };
            seen[k] = true;
            for t in toks {
                slot.push(t.parse().map_err(|_| Error::Parse {
                    file: file.into(),
                    line: ln + 1,
                    msg: format!("bad index {t:?}"),
                })?);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse { file: file.into(), line: 0, msg: "missing split section".into() });
        }
        Ok(split)
    }

    /// Check disjointness and coverage of `0..m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        let mut seen = vec![false; m];
        for &j in self.train.iter().chain(&self.validation).chain(&self.test) {
            if j >= m || seen[j] {
                return Err(Error::InvalidHypergraph(format!("split index {j} out of range or repeated")));
            }
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidHypergraph("split does not cover every hyperedge".into()));
        }
        Ok(())
    }
}
