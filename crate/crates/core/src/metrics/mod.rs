//! AUROC, precision and per-strategy evaluation over held-out hyperedges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::discriminator::{local_rows, CandidateHyperedge, Discriminator};
use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;
use crate::sampler::{sample_negatives_from, NegSpec, NegStrategy, SubHypergraph};
use crate::seed;

pub const PRECISION_THRESHOLD: f64 = 0.5;

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}

/// Mann–Whitney AUROC with ties counted one half, via average ranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// `TP / (TP + FP)` among scores at or above `threshold`.
pub fn precision(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if s >= threshold {
            if l {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if tp + fp == 0 {
        return Err(Error::NoPositivePredictions(threshold));
    }
    Ok(tp as f64 / (tp + fp) as f64)
}

/// Held-out positives and one negative per positive for a single strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub strategy: NegStrategy,
    pub positives: Vec<CandidateHyperedge>,
    pub negatives: Vec<CandidateHyperedge>,
}

/// One set per strategy. Negatives are seeded from the held-out hyperedges
/// themselves (sizes and sources), avoid every observed hyperedge, and are 1:1
/// with the positives.
pub fn build_eval_sets(g: &Hypergraph, held_out: &[usize], strategies: &[NegStrategy], root: u64) -> Result<Vec<EvalSet>> {
    if held_out.is_empty() {
        return Err(Error::Empty("held-out hyperedges".into()));
    }
    let forbidden = g.edge_set();
    let positives: Vec<CandidateHyperedge> = held_out.iter().map(|&j| CandidateHyperedge::positive(g, j)).collect();
    strategies
        .iter()
        .map(|&s| {
            let spec = NegSpec { strategy: s, count: held_out.len(), seed: seed::derive(root, "eval-negatives", s as u64) };
            Ok(EvalSet { strategy: s, positives: positives.clone(), negatives: sample_negatives_from(g, held_out, spec, &forbidden)? })
        })
        .collect()
}

/// Encoding context for held-out candidates: every training hyperedge touching a
/// candidate node, plus the candidate nodes themselves.
pub fn eval_context(g: &Hypergraph, train_mask: &[bool], candidates: &[&CandidateHyperedge]) -> SubHypergraph {
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for c in candidates {
        for &v in &c.nodes {
            nodes.insert(v);
            edges.extend(g.incident(v).iter().copied().filter(|&j| train_mask[j]));
        }
    }
    let nodes: Vec<usize> = nodes.into_iter().collect();
    SubHypergraph::from_hyperedges(g, edges.into_iter().collect(), &nodes)
}

pub fn train_mask(g: &Hypergraph, train: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; g.hyperedge_count()];
    for &j in train {
        mask[j] = true;
    }
    mask
}

/// Score positives and negatives of `set` in chunks of `batch_size` positives;
/// negative `i` is encoded together with positive `i`.
pub fn score_eval_set(
    d: &Discriminator,
    g: &Hypergraph,
    train: &[usize],
    set: &EvalSet,
    batch_size: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mask = train_mask(g, train);
    let bs = batch_size.max(1);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (pc, nc) in set.positives.chunks(bs).zip(set.negatives.chunks(bs)) {
        let cands: Vec<&CandidateHyperedge> = pc.iter().chain(nc).collect();
        let sub = eval_context(g, &mask, &cands);
        let v = d.encode(g, &sub)?;
        let rows = cands.iter().enumerate().map(|(i, c)| local_rows(&sub, &c.nodes, i)).collect::<Result<Vec<_>>>()?;
        let s = d.score_rows(&v, &rows)?;
        pos.extend_from_slice(&s[..pc.len()]);
        neg.extend_from_slice(&s[pc.len()..]);
    }
    Ok((pos, neg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub strategy: NegStrategy,
    pub auroc: f64,
    /// Zero when no candidate reaches the threshold.
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<StrategyResult>,
}

impl EvalTable {
    pub fn ave_auroc(&self) -> f64 {
        self.rows.iter().map(|r| r.auroc).sum::<f64>() / self.rows.len() as f64
    }

    pub fn ave_precision(&self) -> f64 {
        self.rows.iter().map(|r| r.precision).sum::<f64>() / self.rows.len() as f64
    }

    pub fn get(&self, s: NegStrategy) -> Option<&StrategyResult> {
        self.rows.iter().find(|r| r.strategy == s)
    }

    /// Metric rows by strategy columns plus AVE, then `#`-prefixed metadata lines.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::from("metric");
        for r in &self.rows {
            let _ = write!(out, ",{}", r.strategy);
        }
        out.push_str(",AVE\n");
        for (name, f) in [("AUROC", (|r: &StrategyResult| r.auroc) as fn(&StrategyResult) -> f64), ("Precision", |r| r.precision)] {
            out.push_str(name);
            for r in &self.rows {
                let _ = write!(out, ",{:.6}", f(r));
            }
            let ave = if name == "AUROC" { self.ave_auroc() } else { self.ave_precision() };
            let _ = writeln!(out, ",{ave:.6}");
        }
        for (k, v) in metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

pub fn evaluate_sets(d: &Discriminator, g: &Hypergraph, train: &[usize], sets: &[EvalSet], batch_size: usize) -> Result<EvalTable> {
    let rows = sets
        .iter()
        .map(|set| {
            let (pos, neg) = score_eval_set(d, g, train, set, batch_size)?;
            let labels: Vec<bool> = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
            let scores: Vec<f64> = pos.into_iter().chain(neg).collect();
            let precision = match precision(&scores, &labels, PRECISION_THRESHOLD) {
                Ok(p) => p,
                Err(Error::NoPositivePredictions(_)) => 0.0,
                Err(e) => return Err(e),
            };
            Ok(StrategyResult { strategy: set.strategy, auroc: auroc(&scores, &labels)?, precision })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Empty("strategy list".into()));
    }
    Ok(EvalTable { rows })
}

/// Build fresh sets for `held_out` and evaluate them.
pub fn evaluate(
    d: &Discriminator,
    g: &Hypergraph,
    train: &[usize],
    held_out: &[usize],
    strategies: &[NegStrategy],
    root: u64,
    batch_size: usize,
) -> Result<EvalTable> {
    let sets = build_eval_sets(g, held_out, strategies, root)?;
    evaluate_sets(d, g, train, &sets, batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::{split_dataset, synth_hypergraph};
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let mut acc = 0.0;
        let mut n = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    n += 1.0;
                    acc += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                }
            }
        }
        acc / n
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[true, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(auroc(&[0.7, 0.7, 0.3], &[true, false, false]).unwrap(), 0.75);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision(&[0.9, 0.6, 0.4], &[true, false, false], 0.5).unwrap(), 0.5);
        assert_eq!(precision(&[0.9, 0.8, 0.1], &[true, true, false], 0.5).unwrap(), 1.0);
        assert!(matches!(precision(&[0.4, 0.4], &[true, false], 0.5), Err(Error::NoPositivePredictions(_))));
    }

    fn scored_sets() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..=50).prop_flat_map(|n| {
            (
                proptest::collection::vec(prop_oneof![(0u8..6).prop_map(|k| k as f64 / 5.0), -1.0f64..1.0], n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn rank_auroc_equals_brute_force((s, l) in scored_sets()) {
            prop_assert!((auroc(&s, &l).unwrap() - brute(&s, &l)).abs() <= 1e-12);
        }

        #[test]
        fn monotone_maps_preserve_auroc((s, l) in scored_sets(), a in 0.1f64..5.0, b in -2.0f64..2.0) {
            let t: Vec<f64> = s.iter().map(|x| (a * x + b).exp()).collect();
            prop_assert_eq!(auroc(&t, &l).unwrap(), auroc(&s, &l).unwrap());
        }

        #[test]
        fn flipping_labels_complements((s, l) in scored_sets()) {
            let f: Vec<bool> = l.iter().map(|x| !x).collect();
            prop_assert!((auroc(&s, &l).unwrap() + auroc(&s, &f).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_models_score_exactly_half() {
        let g = synth_hypergraph(200, 160, (3, 5), 4, 1).unwrap();
        let split = split_dataset(&g, 2).unwrap();
        let d = Discriminator::zeros(4, 8, 2);
        let t = evaluate(&d, &g, &split.train, &split.test, &NegStrategy::ALL, 3, 16).unwrap();
        for r in &t.rows {
            assert_eq!(r.auroc, 0.5);
            assert_eq!(r.precision, 0.5);
        }
        let mean = t.rows.iter().map(|r| r.auroc).sum::<f64>() / 4.0;
        assert_eq!(t.ave_auroc(), mean);
    }

    #[test]
    fn eval_sets_are_balanced_and_collision_free() {
        let g = synth_hypergraph(200, 160, (3, 5), 4, 1).unwrap();
        let split = split_dataset(&g, 2).unwrap();
        let observed = g.edge_set();
        for set in build_eval_sets(&g, &split.test, &NegStrategy::ALL, 5).unwrap() {
            assert_eq!(set.positives.len(), set.negatives.len());
            assert!(set.negatives.iter().all(|c| !observed.contains(&c.nodes)));
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let g = synth_hypergraph(150, 120, (3, 5), 4, 4).unwrap();
        let split = split_dataset(&g, 1).unwrap();
        let d = Discriminator::new(4, 8, 2, &mut seed::rng(2));
        let a = evaluate(&d, &g, &split.train, &split.validation, &NegStrategy::ALL, 7, 16).unwrap();
        assert_eq!(a, evaluate(&d, &g, &split.train, &split.validation, &NegStrategy::ALL, 7, 16).unwrap());
        let csv = a.to_csv(&[("variant".into(), "SEHP".into())]);
        assert!(csv.starts_with("metric,SNS,MNS,CNS,MIX,AVE\nAUROC,"));
        assert!(csv.ends_with("# variant=SEHP\n"));
    }

    #[test]
    fn eval_context_never_contains_held_out_hyperedges() {
        let g = synth_hypergraph(150, 120, (3, 5), 4, 4).unwrap();
        let split = split_dataset(&g, 1).unwrap();
        let mask = train_mask(&g, &split.train);
        let cands: Vec<CandidateHyperedge> = split.test.iter().map(|&j| CandidateHyperedge::positive(&g, j)).collect();
        let sub = eval_context(&g, &mask, &cands.iter().collect::<Vec<_>>());
        assert!(sub.hyperedge_indices().iter().all(|&j| mask[j]));
        assert!(cands.iter().all(|c| c.nodes.iter().all(|&v| sub.local_of(v).is_some())));
    }
}
