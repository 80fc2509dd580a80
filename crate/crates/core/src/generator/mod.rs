//! Conditional residual denoising of hyperedge latents and node-ID extraction.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::discriminator::{local_rows, maxmin, CandidateHyperedge, Provenance};
use crate::error::{Error, Result};
use crate::nnkit::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
use crate::sampler::SubHypergraph;

/// Columnwise mean of the node embeddings.
pub fn readout_condition(v: &Dense) -> Result<Vec<f64>> {
    if v.rows() == 0 {
        return Err(Error::Empty("node embeddings for readout".into()));
    }
    let inv = 1.0 / v.rows() as f64;
    Ok(v.col_sums().into_iter().map(|s| s * inv).collect())
}

/// Residual step network `2h → 2h (LeakyReLU) → h`, shared across steps. With
/// `time_embedding` the input also carries `t / T` as one extra column.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub mlp: Mlp,
    pub time_embedding: bool,
}

impl Denoiser {
    pub fn new<R: Rng + ?Sized>(hidden: usize, time_embedding: bool, rng: &mut R) -> Self {
        let input = 2 * hidden + usize::from(time_embedding);
        Denoiser {
            mlp: Mlp::new(&[input, 2 * hidden, hidden], &[Activation::LeakyRelu, Activation::Identity], rng),
            time_embedding,
        }
    }

    pub fn zeros(hidden: usize, time_embedding: bool) -> Self {
        let input = 2 * hidden + usize::from(time_embedding);
        Denoiser {
            mlp: Mlp::zeros(&[input, 2 * hidden, hidden], &[Activation::LeakyRelu, Activation::Identity]),
            time_embedding,
        }
    }

    pub fn hidden(&self) -> usize {
        self.mlp.output_dim()
    }

    fn input(&self, prev: &Dense, cond: &[f64], t: usize, steps: usize) -> Dense {
        let h = prev.cols();
        let w = 2 * h + usize::from(self.time_embedding);
        let mut z = Dense::zeros(prev.rows(), w);
        for r in 0..prev.rows() {
            let row = z.row_mut(r);
            row[..h].copy_from_slice(prev.row(r));
            row[h..2 * h].copy_from_slice(cond);
            if self.time_embedding {
                row[2 * h] = t as f64 / steps as f64;
            }
        }
        z
    }
}

/// States `h^0..h^T` of a batch of chains (one row per chain).
#[derive(Debug, Clone)]
pub struct ChainForward {
    pub states: Vec<Dense>,
    caches: Vec<ForwardCache>,
}

impl ChainForward {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &Dense {
        &self.states[self.states.len() - 1]
    }
}

/// Run `h^t = h^{t−1} + D([h^{t−1} ‖ cond])` for `t = 1..=steps` on every row of `h0`.
pub fn denoise_forward(d: &Denoiser, h0: Dense, cond: &[f64], steps: usize) -> Result<ChainForward> {
    if steps == 0 {
        return Err(Error::InvalidArgument("denoising needs T >= 1".into()));
    }
    if cond.len() != h0.cols() || h0.cols() != d.hidden() {
        return Err(Error::Shape(format!(
            "chain width {} / condition {} / denoiser {}",
            h0.cols(),
            cond.len(),
            d.hidden()
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut caches = Vec::with_capacity(steps);
    states.push(h0);
    for t in 1..=steps {
        let prev = &states[t - 1];
        let (r, cache) = d.mlp.forward_cached(&d.input(prev, cond, t, steps))?;
        let mut next = prev.clone();
        next.add_assign(&r);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("denoising state at step {t}")));
        }
        caches.push(cache);
        states.push(next);
    }
    Ok(ChainForward { states, caches })
}

/// Backpropagate external gradients on each state (`dstates[t]` for `h^t`).
/// Returns denoiser gradients and the gradient reaching `h^0`.
pub fn denoise_backward(d: &Denoiser, chain: &ChainForward, dstates: &[Dense]) -> Result<(MlpGrads, Dense)> {
    if dstates.len() != chain.states.len() || chain.caches.len() + 1 != chain.states.len() {
        return Err(Error::MissingForward);
    }
    let h = d.hidden();
    let mut grads = MlpGrads::zeros_like(&d.mlp);
    let mut g = dstates[chain.steps()].clone();
    for t in (1..=chain.steps()).rev() {
        let (gd, dz) = d.mlp.backward(&chain.caches[t - 1], &g)?;
        grads.add_assign(&gd);
        let (dprev, _) = dz.split_cols(h);
        g.add_assign(&dprev);
        g.add_assign(&dstates[t - 1]);
    }
    Ok((grads, g))
}

/// A generated latent chain with the classifier score of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNegative {
    pub states: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub source: Option<usize>,
}

/// Denoise one positive of the batch and score every state with `classifier`.
pub fn denoise_chain(
    d: &Denoiser,
    source: &CandidateHyperedge,
    v: &Dense,
    sub: &SubHypergraph,
    cond: &[f64],
    steps: usize,
    classifier: &Mlp,
) -> Result<LatentNegative> {
    let rows = local_rows(sub, &source.nodes, 0)?;
    let h0 = Dense::row_vector(&maxmin(v, &rows)?)?;
    let chain = denoise_forward(d, h0, cond, steps)?;
    let mut scores = Vec::with_capacity(steps + 1);
    for s in &chain.states {
        scores.push(classifier.forward(s)?.get(0, 0));
    }
    Ok(LatentNegative {
        states: chain.states.iter().map(|s| s.row(0).to_vec()).collect(),
        scores,
        source: source.source,
    })
}

/// Membership scorer `[latent ‖ v_i] → h (ReLU) → 1 (sigmoid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extractor {
    pub mlp: Mlp,
}

impl Extractor {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Extractor { mlp: Mlp::new(&[2 * hidden, hidden, 1], &[Activation::Relu, Activation::Sigmoid], rng) }
    }

    pub fn zeros(hidden: usize) -> Self {
        Extractor { mlp: Mlp::zeros(&[2 * hidden, hidden, 1], &[Activation::Relu, Activation::Sigmoid]) }
    }

    /// `p_i` for every row of `v`. Without `query` the node half of the input is zero.
    pub fn probabilities(&self, latent: &[f64], v: &Dense, query: bool) -> Result<Vec<f64>> {
        let h = latent.len();
        if v.cols() != h || self.mlp.input_dim() != 2 * h {
            return Err(Error::Shape(format!(
                "extractor input {} for latent {h} and embeddings {}",
                self.mlp.input_dim(),
                v.cols()
            )));
        }
        let mut z = Dense::zeros(v.rows(), 2 * h);
        for r in 0..v.rows() {
            let row = z.row_mut(r);
            row[..h].copy_from_slice(latent);
            if query {
                row[h..].copy_from_slice(v.row(r));
            }
        }
        Ok(self.mlp.forward(&z)?.into_vec())
    }
}

/// Indices of the `k` largest values, ties to the lower index, returned ascending.
pub fn top_k(p: &[f64], k: usize) -> Result<Vec<usize>> {
    if k < 2 || k > p.len() {
        return Err(Error::InvalidArgument(format!("top-k with k={k} over {} nodes", p.len())));
    }
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}

/// Pick the `k` sub-hypergraph nodes the extractor rates most likely members of `latent`.
pub fn extract_node_ids(
    x: &Extractor,
    latent: &[f64],
    v: &Dense,
    sub: &SubHypergraph,
    k: usize,
    query: bool,
) -> Result<CandidateHyperedge> {
    let p = x.probabilities(latent, v, query)?;
    // local order is ascending global ID, so the index tie rule is the ID tie rule
    let nodes = top_k(&p, k)?.into_iter().map(|l| sub.global_of(l)).collect();
    Ok(CandidateHyperedge { nodes, provenance: Provenance::Generated, source: None, observed: false })
}

/// Noise-to-latent MLP `h → 2h (LeakyReLU) → h` used in place of the chain by the
/// generic-generator ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGenerator {
    pub mlp: Mlp,
}

impl NoiseGenerator {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        NoiseGenerator {
            mlp: Mlp::new(&[hidden, 2 * hidden, hidden], &[Activation::LeakyRelu, Activation::Identity], rng),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        NoiseGenerator { mlp: Mlp::zeros(&[hidden, 2 * hidden, hidden], &[Activation::LeakyRelu, Activation::Identity]) }
    }

    /// `rows` standard-normal noise vectors.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Dense {
        let h = self.mlp.input_dim();
        let data = (0..rows * h).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Dense::from_vec(rows, h, data).expect("normal samples are finite")
    }
}

/// How negatives leave the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    /// Extract discrete node sets from `h^T`.
    NodeId,
    /// Use `h^T` itself as the negative hyperedge embedding.
    Latent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedNegative {
    Discrete(CandidateHyperedge),
    Latent(Vec<f64>),
}

/// One negative per batch positive: run the chain from each positive's
/// aggregation, then either extract node sets (`k` = positive size) or return the
/// final latents. Discrete results equal to an observed hyperedge are flagged.
#[allow(clippy::too_many_arguments)]
pub fn generate_negatives(
    mode: GenMode,
    positives: &[CandidateHyperedge],
    v: &Dense,
    sub: &SubHypergraph,
    denoiser: &Denoiser,
    extractor: &Extractor,
    steps: usize,
    condition: bool,
    query: bool,
    observed: &HashSet<Vec<usize>>,
) -> Result<Vec<GeneratedNegative>> {
    if positives.is_empty() {
        return Ok(Vec::new());
    }
    let h = v.cols();
    let mut h0 = Dense::zeros(positives.len(), h);
    for (i, p) in positives.iter().enumerate() {
        h0.row_mut(i).copy_from_slice(&maxmin(v, &local_rows(sub, &p.nodes, i)?)?);
    }
    let cond = if condition { readout_condition(v)? } else { vec![0.0; h] };
    let chain = denoise_forward(denoiser, h0, &cond, steps)?;
    let last = chain.last();
    positives
        .iter()
        .enumerate()
        .map(|(i, p)| match mode {
            GenMode::Latent => Ok(GeneratedNegative::Latent(last.row(i).to_vec())),
            GenMode::NodeId => {
                let mut c = extract_node_ids(extractor, last.row(i), v, sub, p.len(), query)?;
                c.source = p.source;
                c.observed = observed.contains(&c.nodes);
                Ok(GeneratedNegative::Discrete(c))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::Discriminator;
    use crate::hypercore::{synth_hypergraph, Hypergraph};
    use crate::nnkit::{gradcheck, Layer};
    use crate::sampler::sample_sub_hypergraph;
    use crate::seed;

    #[test]
    fn readout_examples() {
        let v = Dense::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(readout_condition(&v).unwrap(), vec![2.0, 2.0]);
        let one = Dense::from_rows(&[vec![0.25, -4.0]]).unwrap();
        assert_eq!(readout_condition(&one).unwrap(), vec![0.25, -4.0]);
        assert!(readout_condition(&Dense::zeros(0, 2)).is_err());
    }

    #[test]
    fn readout_matches_summation() {
        let mut rng = seed::rng(4);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..7).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let got = readout_condition(&Dense::from_rows(&rows).unwrap()).unwrap();
        for c in 0..7 {
            let mut s = 0.0;
            for r in &rows {
                s += r[c];
            }
            assert!((got[c] - s / 50.0).abs() <= 1e-12);
        }
    }

    fn setup() -> (Hypergraph, SubHypergraph, Dense, Discriminator) {
        let g = synth_hypergraph(60, 50, (3, 5), 3, 2).unwrap();
        let sub = sample_sub_hypergraph(&g, &(0..50).collect::<Vec<_>>(), 8, 1).unwrap();
        let d = Discriminator::new(3, 6, 2, &mut seed::rng(1));
        let v = d.encode(&g, &sub).unwrap();
        (g, sub, v, d)
    }

    #[test]
    fn zero_denoiser_is_identity() {
        let (g, sub, v, d) = setup();
        let src = CandidateHyperedge::positive(&g, sub.hyperedge_indices()[0]);
        let cond = readout_condition(&v).unwrap();
        let lat = denoise_chain(&Denoiser::zeros(6, false), &src, &v, &sub, &cond, 5, &d.classifier).unwrap();
        let h0 = maxmin(&v, &local_rows(&sub, &src.nodes, 0).unwrap()).unwrap();
        assert_eq!(lat.states.len(), 6);
        assert!(lat.states.iter().all(|s| s == &h0));
        assert!(lat.scores.iter().all(|&s| s == lat.scores[0]));
    }

    #[test]
    fn one_step_chain() {
        let (g, sub, v, d) = setup();
        let src = CandidateHyperedge::positive(&g, sub.hyperedge_indices()[1]);
        let cond = readout_condition(&v).unwrap();
        let den = Denoiser::new(6, false, &mut seed::rng(2));
        let lat = denoise_chain(&den, &src, &v, &sub, &cond, 1, &d.classifier).unwrap();
        assert_eq!((lat.states.len(), lat.scores.len()), (2, 2));
        assert!(denoise_forward(&den, Dense::zeros(1, 6), &cond, 0).is_err());
    }

    #[test]
    fn chain_matches_unrolled_recomputation() {
        let (g, sub, v, d) = setup();
        let src = CandidateHyperedge::positive(&g, sub.hyperedge_indices()[2]);
        let cond = readout_condition(&v).unwrap();
        let den = Denoiser::new(6, false, &mut seed::rng(3));
        let lat = denoise_chain(&den, &src, &v, &sub, &cond, 3, &d.classifier).unwrap();
        // independent scalar loops over the raw weights
        let layer = |l: &Layer, x: &[f64]| -> Vec<f64> {
            (0..l.out_dim())
                .map(|o| {
                    let z: f64 = l.bias[o] + (0..l.in_dim()).map(|i| l.weight.get(o, i) * x[i]).sum::<f64>();
                    match l.activation {
                        Activation::LeakyRelu => if z > 0.0 { z } else { 0.01 * z },
                        Activation::Identity => z,
                        _ => unreachable!(),
                    }
                })
                .collect()
        };
        let mut h = maxmin(&v, &local_rows(&sub, &src.nodes, 0).unwrap()).unwrap();
        for t in 1..=3 {
            let z: Vec<f64> = h.iter().chain(&cond).copied().collect();
            let r = layer(&den.mlp.layers()[1], &layer(&den.mlp.layers()[0], &z));
            for (a, b) in h.iter_mut().zip(r) {
                *a += b;
            }
            for (a, b) in h.iter().zip(&lat.states[t]) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn chain_backward_matches_finite_differences() {
        let mut rng = seed::rng(5);
        for time_embedding in [false, true] {
            let den = Denoiser::new(4, time_embedding, &mut rng);
            let h0 = Dense::from_vec(3, 4, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let cond: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let weights: Vec<Dense> =
                (0..=4).map(|_| Dense::from_vec(3, 4, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()).collect();
            let objective = |d: &Denoiser, h0: &Dense| -> f64 {
                let c = denoise_forward(d, h0.clone(), &cond, 4).unwrap();
                c.states.iter().zip(&weights).map(|(s, w)| s.as_slice().iter().zip(w.as_slice()).map(|(a, b)| (a * b).sin()).sum::<f64>()).sum()
            };
            let chain = denoise_forward(&den, h0.clone(), &cond, 4).unwrap();
            let dstates: Vec<Dense> = chain
                .states
                .iter()
                .zip(&weights)
                .map(|(s, w)| {
                    let g = s.as_slice().iter().zip(w.as_slice()).map(|(a, b)| b * (a * b).cos()).collect();
                    Dense::from_vec(3, 4, g).unwrap()
                })
                .collect();
            let (grads, dh0) = denoise_backward(&den, &chain, &dstates).unwrap();
            let mut probe = den.clone();
            let f = |p: &[f64]| {
                probe.mlp.set_params_flat(p);
                objective(&probe, &h0)
            };
            let r = gradcheck::check_probes(f, &den.mlp.params_flat(), &grads.flat(), 30, 1e-4, 1);
            assert!(r.max_rel_error <= 1e-4, "{r:?}");
            let f = |x: &[f64]| objective(&den, &Dense::from_vec(3, 4, x.to_vec()).unwrap());
            let r = gradcheck::check_all(f, h0.as_slice(), dh0.as_slice(), 1e-4);
            assert!(r.max_rel_error <= 1e-4, "{r:?}");
        }
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k(&[0.9, 0.1, 0.8, 0.5], 2).unwrap(), vec![0, 2]);
        assert_eq!(top_k(&[0.3; 4], 2).unwrap(), vec![0, 1]);
        assert!(top_k(&[0.3; 4], 5).is_err());
        assert!(top_k(&[0.3; 4], 1).is_err());
    }

    #[test]
    fn extraction_matches_full_sort() {
        let g = synth_hypergraph(120, 80, (3, 5), 3, 4).unwrap();
        let mut sub = sample_sub_hypergraph(&g, &(0..80).collect::<Vec<_>>(), 6, 2).unwrap();
        let mut extra = 0;
        while sub.node_count() < 30 {
            extra += 1;
            sub = sample_sub_hypergraph(&g, &(0..80).collect::<Vec<_>>(), 6 + extra, 2).unwrap();
        }
        let d = Discriminator::new(3, 6, 2, &mut seed::rng(8));
        let v = d.encode(&g, &sub).unwrap();
        let x = Extractor::new(6, &mut seed::rng(9));
        let latent = vec![0.2, -0.1, 0.4, 0.0, 0.3, 0.1];
        let p = x.probabilities(&latent, &v, true).unwrap();
        let c = extract_node_ids(&x, &latent, &v, &sub, 4, true).unwrap();
        let mut all: Vec<(f64, usize)> = p.iter().enumerate().map(|(l, &pv)| (pv, sub.global_of(l))).collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut want: Vec<usize> = all[..4].iter().map(|x| x.1).collect();
        want.sort_unstable();
        assert_eq!(c.nodes, want);
        assert_eq!(c.provenance, Provenance::Generated);
    }

    #[test]
    fn membership_extractor_reproduces_source_and_flags_it() {
        // v_i carries a membership indicator in column 0; the extractor reads only it
        let h = 2;
        let n = 6;
        let edges = vec![vec![0, 2, 4], vec![1, 3], vec![3, 5]];
        let g = Hypergraph::new(n, edges, Dense::zeros(n, 1)).unwrap();
        let sub = SubHypergraph::from_hyperedges(&g, vec![0, 1, 2], &[]);
        let mut v = Dense::zeros(n, h);
        for &i in g.hyperedge(0) {
            v.set(i, 0, 1.0);
        }
        let mut ext = Extractor::zeros(h);
        {
            let layers = ext.mlp.layers_mut();
            layers[0].weight.set(0, h, 1.0);
            layers[1].weight.set(0, 0, 5.0);
        }
        let pos = vec![CandidateHyperedge::positive(&g, 0)];
        let out = generate_negatives(GenMode::NodeId, &pos, &v, &sub, &Denoiser::zeros(h, false), &ext, 3, true, true, &g.edge_set())
            .unwrap();
        match &out[0] {
            GeneratedNegative::Discrete(c) => {
                assert_eq!(c.nodes, vec![0, 2, 4]);
                assert!(c.observed);
                assert_eq!(c.source, Some(0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn latent_mode_shapes_and_shared_chain() {
        let (g, sub, v, d) = setup();
        let pos: Vec<CandidateHyperedge> = sub.hyperedge_indices().iter().map(|&j| CandidateHyperedge::positive(&g, j)).collect();
        let den = Denoiser::new(6, false, &mut seed::rng(6));
        let ext = Extractor::new(6, &mut seed::rng(7));
        let lat = generate_negatives(GenMode::Latent, &pos, &v, &sub, &den, &ext, 5, true, true, &g.edge_set()).unwrap();
        assert_eq!(lat.len(), pos.len());
        let cond = readout_condition(&v).unwrap();
        for (p, o) in pos.iter().zip(&lat) {
            let GeneratedNegative::Latent(x) = o else { panic!() };
            assert_eq!(x.len(), 6);
            let chain = denoise_chain(&den, p, &v, &sub, &cond, 5, &d.classifier).unwrap();
            assert_eq!(&chain.states[5], x);
        }
        let again = generate_negatives(GenMode::Latent, &pos, &v, &sub, &den, &ext, 5, true, true, &g.edge_set()).unwrap();
        assert_eq!(lat, again);
    }

    #[test]
    fn extraction_ignores_enumeration_order() {
        let (g, sub, v, _) = setup();
        let x = Extractor::new(6, &mut seed::rng(3));
        let latent = vec![0.1; 6];
        let c = extract_node_ids(&x, &latent, &v, &sub, 3, true).unwrap();
        // rebuild the same sub-hypergraph from a reversed hyperedge order
        let mut rev = sub.hyperedge_indices().to_vec();
        rev.reverse();
        let sub2 = SubHypergraph::from_hyperedges(&g, rev, &[]);
        let perm: Vec<usize> = sub2.nodes().iter().map(|&gid| sub.local_of(gid).unwrap()).collect();
        let v2 = v.select_rows(&perm);
        assert_eq!(extract_node_ids(&x, &latent, &v2, &sub2, 3, true).unwrap(), c);
    }

    #[test]
    fn noise_generator_is_seeded() {
        let ng = NoiseGenerator::new(5, &mut seed::rng(1));
        let a = ng.sample_noise(3, &mut seed::rng(2));
        assert_eq!(a, ng.sample_noise(3, &mut seed::rng(2)));
        assert_eq!(ng.mlp.forward(&a).unwrap().cols(), 5);
    }
}
