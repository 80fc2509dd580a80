use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{CandidateHyperedge, Provenance};
use crate::error::{Error, Result};
use crate::hypercore::{hyperedges_to_text, parse_hyperedge_text, Hypergraph};
use crate::seed;

pub const MAX_CONSECUTIVE_FAILURES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NegStrategy {
    #[serde(rename = "SNS")]
    Sns,
    #[serde(rename = "MNS")]
    Mns,
    #[serde(rename = "CNS")]
    Cns,
    #[serde(rename = "MIX")]
    Mix,
}

impl NegStrategy {
    pub const ALL: [NegStrategy; 4] = [NegStrategy::Sns, NegStrategy::Mns, NegStrategy::Cns, NegStrategy::Mix];

    pub fn name(self) -> &'static str {
        match self {
            NegStrategy::Sns => "SNS",
            NegStrategy::Mns => "MNS",
            NegStrategy::Cns => "CNS",
            NegStrategy::Mix => "MIX",
        }
    }

    /// Parse a comma-separated list such as `SNS,CNS`.
    pub fn parse_list(s: &str) -> Result<Vec<NegStrategy>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for NegStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NegStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SNS" => Ok(NegStrategy::Sns),
            "MNS" => Ok(NegStrategy::Mns),
            "CNS" => Ok(NegStrategy::Cns),
            "MIX" => Ok(NegStrategy::Mix),
            _ => Err(Error::InvalidArgument(format!("unknown negative strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegSpec {
    pub strategy: NegStrategy,
    pub count: usize,
    pub seed: u64,
}

/// Per-strategy counts `(SNS, MNS, CNS)` for a MIX set of `count`.
pub fn mix_counts(count: usize) -> [usize; 3] {
    let (q, r) = (count / 3, count % 3);
    [q + usize::from(r > 0), q + usize::from(r > 1), q]
}

/// Negatives drawn from every observed hyperedge of `g`.
pub fn sample_negatives(g: &Hypergraph, spec: NegSpec, forbidden: &HashSet<Vec<usize>>) -> Result<Vec<CandidateHyperedge>> {
    let all: Vec<usize> = (0..g.hyperedge_count()).collect();
    sample_negatives_from(g, &all, spec, forbidden)
}

/// Negatives whose sizes (SNS, MNS) and seed hyperedges (MNS, CNS) come from
/// `sources`; adjacency always uses the whole of `g`.
pub fn sample_negatives_from(
    g: &Hypergraph,
    sources: &[usize],
    spec: NegSpec,
    forbidden: &HashSet<Vec<usize>>,
) -> Result<Vec<CandidateHyperedge>> {
    if spec.count == 0 {
        return Err(Error::InvalidArgument("negative count must be at least 1".into()));
    }
    if sources.is_empty() {
        return Err(Error::Empty("source hyperedges for negative sampling".into()));
    }
    let single = |s: NegStrategy, count: usize| -> Result<Vec<CandidateHyperedge>> {
        let mut rng = seed::named_rng(spec.seed, s.name(), 0);
        let mut out = Vec::with_capacity(count);
        let mut failures = 0;
        while out.len() < count {
            match draw(g, sources, s, &mut rng, forbidden) {
                Some(c) => {
                    failures = 0;
                    out.push(c);
                }
                None => {
                    failures += 1;
                    if failures >= MAX_CONSECUTIVE_FAILURES {
                        return Err(Error::SamplingExhausted { strategy: s.name().into(), attempts: failures });
                    }
                }
            }
        }
        Ok(out)
    };
    match spec.strategy {
        NegStrategy::Mix => {
            let mut out = Vec::with_capacity(spec.count);
            for (s, c) in [NegStrategy::Sns, NegStrategy::Mns, NegStrategy::Cns].into_iter().zip(mix_counts(spec.count)) {
                if c > 0 {
                    out.extend(single(s, c)?);
                }
            }
            Ok(out)
        }
        s => single(s, spec.count),
    }
}

fn draw(
    g: &Hypergraph,
    sources: &[usize],
    s: NegStrategy,
    rng: &mut seed::Rng,
    forbidden: &HashSet<Vec<usize>>,
) -> Option<CandidateHyperedge> {
    let (nodes, source) = match s {
        NegStrategy::Sns => (sns(g, sources, rng)?, None),
        NegStrategy::Mns => {
            let (pre, _, src) = mns_pre_drop(g, sources, rng)?;
            (drop_surplus(pre.0, pre.1, rng), Some(src))
        }
        NegStrategy::Cns => {
            let (nodes, src) = cns(g, sources, rng)?;
            (nodes, Some(src))
        }
        NegStrategy::Mix => unreachable!("MIX is split before drawing"),
    };
    if forbidden.contains(&nodes) {
        return None;
    }
    Some(CandidateHyperedge { nodes, provenance: Provenance::Heuristic(s), source, observed: false })
}

fn sns(g: &Hypergraph, sources: &[usize], rng: &mut seed::Rng) -> Option<Vec<usize>> {
    let k = g.hyperedge(sources[rng.random_range(0..sources.len())]).len();
    if k > g.node_count() {
        return None;
    }
    let mut nodes = sample(rng, g.node_count(), k).into_vec();
    nodes.sort_unstable();
    Some(nodes)
}

/// MNS before the surplus drop: `((nodes, k), merged hyperedges, seed hyperedge)`.
#[allow(clippy::type_complexity)]
fn mns_pre_drop(g: &Hypergraph, sources: &[usize], rng: &mut seed::Rng) -> Option<((Vec<usize>, usize), Vec<usize>, usize)> {
    let k = g.hyperedge(sources[rng.random_range(0..sources.len())]).len();
    let start = sources[rng.random_range(0..sources.len())];
    let mut set: BTreeSet<usize> = g.hyperedge(start).iter().copied().collect();
    let mut used = vec![start];
    while set.len() < k {
        let mut incident: Vec<usize> = set.iter().flat_map(|&v| g.incident(v).iter().copied()).collect();
        incident.sort_unstable();
        incident.dedup();
        incident.retain(|j| !used.contains(j));
        if incident.is_empty() {
            return None;
        }
        let j = incident[rng.random_range(0..incident.len())];
        used.push(j);
        set.extend(g.hyperedge(j).iter().copied());
    }
    Some(((set.into_iter().collect(), k), used, start))
}

fn drop_surplus(nodes: Vec<usize>, k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut keep: Vec<usize> = sample(rng, nodes.len(), k).into_iter().map(|i| nodes[i]).collect();
    keep.sort_unstable();
    keep
}

/// Draw one MNS candidate and also return its pre-drop node set and the merged
/// hyperedges, for checking the connectivity invariant.
pub fn mns_trace(g: &Hypergraph, sources: &[usize], seed: u64) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mut rng = seed::rng(seed);
    let ((pre, k), merged, _) = mns_pre_drop(g, sources, &mut rng)?;
    let out = drop_surplus(pre.clone(), k, &mut rng);
    Some((out, pre, merged))
}

fn cns(g: &Hypergraph, sources: &[usize], rng: &mut seed::Rng) -> Option<(Vec<usize>, usize)> {
    let src = sources[rng.random_range(0..sources.len())];
    let e = g.hyperedge(src);
    let v = e[rng.random_range(0..e.len())];
    let mut eligible: Vec<usize> = e
        .iter()
        .filter(|&&w| w != v)
        .flat_map(|&w| g.incident(w).iter().flat_map(|&j| g.hyperedge(j).iter().copied()))
        .filter(|u| !e.contains(u))
        .collect();
    eligible.sort_unstable();
    eligible.dedup();
    if eligible.is_empty() {
        return None;
    }
    let u = eligible[rng.random_range(0..eligible.len())];
    let mut nodes: Vec<usize> = e.iter().copied().filter(|&w| w != v).chain([u]).collect();
    nodes.sort_unstable();
    Some((nodes, src))
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    spec: NegSpec,
    count: usize,
    per_strategy: Vec<(NegStrategy, usize)>,
    /// Strategy of each line, in file order.
    lines: Vec<NegStrategy>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write negatives in the hyperedge text format plus a `<path>.meta.json` sidecar.
pub fn save_negatives(path: &Path, spec: NegSpec, negs: &[CandidateHyperedge]) -> Result<()> {
    std::fs::write(path, hyperedges_to_text(negs.iter().map(|c| c.nodes.as_slice()))).map_err(|e| Error::io(path, e))?;
    let lines: Vec<NegStrategy> = negs
        .iter()
        .map(|c| match c.provenance {
            Provenance::Heuristic(s) => s,
            _ => spec.strategy,
        })
        .collect();
    let mut per_strategy = Vec::new();
    for s in [NegStrategy::Sns, NegStrategy::Mns, NegStrategy::Cns] {
        let c = lines.iter().filter(|&&l| l == s).count();
        if c > 0 {
            per_strategy.push((s, c));
        }
    }
    let meta = Sidecar { spec, count: negs.len(), per_strategy, lines };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serialises");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

pub fn load_negatives(path: &Path) -> Result<(NegSpec, Vec<CandidateHyperedge>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_hyperedge_text(&text, &path.display().to_string())?;
    let side = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        file: side.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if parsed.hyperedges.len() != meta.count || meta.lines.len() != meta.count || parsed.rejected_small > 0 {
        return Err(Error::Parse {
            file: path.display().to_string(),
            line: 0,
            msg: format!("sidecar lists {} negatives, file has {}", meta.count, parsed.hyperedges.len()),
        });
    }
    let negs = parsed
        .hyperedges
        .into_iter()
        .zip(meta.lines)
        .map(|(nodes, s)| CandidateHyperedge { nodes, provenance: Provenance::Heuristic(s), source: None, observed: false })
        .collect();
    Ok((meta.spec, negs))
}
