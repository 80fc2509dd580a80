//! Encoder, max-min aggregation and classifier.

mod encoder;

use rand::Rng;

pub use encoder::{neighbour_means, Encoder, EncoderCache, EncoderGrads};
pub use crate::sampler::{CandidateHyperedge, Provenance};

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;
use crate::nnkit::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
use crate::sampler::SubHypergraph;

/// Columnwise `max − min` over the given rows of `v`.
pub fn maxmin(v: &Dense, rows: &[usize]) -> Result<Vec<f64>> {
    Ok(maxmin_arg(v, rows)?.0)
}

/// [`maxmin`] plus, per column, the rows that attained the max and the min.
pub fn maxmin_arg(v: &Dense, rows: &[usize]) -> Result<(Vec<f64>, Vec<(usize, usize)>)> {
    let Some(&first) = rows.first() else {
        return Err(Error::Empty("candidate hyperedge".into()));
    };
    let mut hi: Vec<(f64, usize)> = v.row(first).iter().map(|&x| (x, first)).collect();
    let mut lo = hi.clone();
    for &r in &rows[1..] {
        for (c, &x) in v.row(r).iter().enumerate() {
            if x > hi[c].0 {
                hi[c] = (x, r);
            }
            if x < lo[c].0 {
                lo[c] = (x, r);
            }
        }
    }
    let out = hi.iter().zip(&lo).map(|(h, l)| h.0 - l.0).collect();
    let arg = hi.iter().zip(&lo).map(|(h, l)| (h.1, l.1)).collect();
    Ok((out, arg))
}

/// Scatter the gradient of one aggregated row back onto `dv`.
pub fn maxmin_backward(arg: &[(usize, usize)], upstream: &[f64], dv: &mut Dense) {
    for (c, (&(hi, lo), &g)) in arg.iter().zip(upstream).enumerate() {
        let a = dv.get(hi, c);
        dv.set(hi, c, a + g);
        let b = dv.get(lo, c);
        dv.set(lo, c, b - g);
    }
}

/// Local row indices of a candidate's nodes in `sub`.
pub fn local_rows(sub: &SubHypergraph, candidate: &[usize], index: usize) -> Result<Vec<usize>> {
    candidate
        .iter()
        .map(|&v| sub.local_of(v).ok_or(Error::NodeOutsideBatch { index, node: v }))
        .collect()
}

/// `h → h/2 (ReLU) → 1 (sigmoid)`.
pub fn classifier_widths(hidden: usize) -> ([usize; 3], [Activation; 2]) {
    ([hidden, (hidden / 2).max(1), 1], [Activation::Relu, Activation::Sigmoid])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub encoder: Encoder,
    pub classifier: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorGrads {
    pub encoder: EncoderGrads,
    pub classifier: MlpGrads,
}

impl DiscriminatorGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.encoder.iter().flat_map(MlpGrads::flat).collect();
        out.extend(self.classifier.flat());
        out
    }
}

/// Everything [`Discriminator::backward`] needs from a batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// Node embeddings of the sub-hypergraph.
    pub embeddings: Dense,
    /// Classifier inputs: discrete candidates first, then latent rows.
    pub inputs: Dense,
    pub scores: Vec<f64>,
    encoder_cache: EncoderCache,
    args: Vec<Vec<(usize, usize)>>,
    classifier_cache: ForwardCache,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, depth: usize, rng: &mut R) -> Self {
        let encoder = Encoder::new(input_dim, hidden, depth, rng);
        let (w, a) = classifier_widths(hidden);
        Discriminator { encoder, classifier: Mlp::new(&w, &a, rng) }
    }

    pub fn zeros(input_dim: usize, hidden: usize, depth: usize) -> Self {
        let (w, a) = classifier_widths(hidden);
        Discriminator { encoder: Encoder::zeros(input_dim, hidden, depth), classifier: Mlp::zeros(&w, &a) }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, g: &Hypergraph, sub: &SubHypergraph) -> Result<Dense> {
        self.encoder.forward(sub, &sub.features(g))
    }

    /// Score hyperedge embeddings (rows of `e`).
    pub fn classify(&self, e: &Dense) -> Result<Vec<f64>> {
        Ok(self.classifier.forward(e)?.into_vec())
    }

    /// Score candidates against one encoding of `sub`, in input order.
    pub fn score_candidates(&self, g: &Hypergraph, sub: &SubHypergraph, candidates: &[CandidateHyperedge]) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let v = self.encode(g, sub)?;
        let rows = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| local_rows(sub, &c.nodes, i))
            .collect::<Result<Vec<_>>>()?;
        self.score_rows(&v, &rows)
    }

    /// Score candidates given as local row lists into precomputed embeddings.
    pub fn score_rows(&self, v: &Dense, rows: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut e = Dense::zeros(rows.len(), v.cols());
        for (i, r) in rows.iter().enumerate() {
            e.row_mut(i).copy_from_slice(&maxmin(v, r)?);
        }
        self.classify(&e)
    }

    /// Full differentiable pass: encode `sub`, aggregate each candidate (local
    /// rows), append `latents` as extra classifier inputs, classify.
    pub fn forward_batch(
        &self,
        sub: &SubHypergraph,
        features: &Dense,
        candidates: &[Vec<usize>],
        latents: Option<&Dense>,
    ) -> Result<BatchForward> {
        let (v, encoder_cache) = self.encoder.forward_cached(sub, features)?;
        let extra = latents.map_or(0, Dense::rows);
        let mut inputs = Dense::zeros(candidates.len() + extra, v.cols());
        let mut args = Vec::with_capacity(candidates.len());
        for (i, rows) in candidates.iter().enumerate() {
            let (e, a) = maxmin_arg(&v, rows)?;
            inputs.row_mut(i).copy_from_slice(&e);
            args.push(a);
        }
        if let Some(lat) = latents {
            if lat.cols() != v.cols() {
                return Err(Error::Shape(format!("latent width {} vs embedding width {}", lat.cols(), v.cols())));
            }
            for r in 0..extra {
                inputs.row_mut(candidates.len() + r).copy_from_slice(lat.row(r));
            }
        }
        let (out, classifier_cache) = self.classifier.forward_cached(&inputs)?;
        Ok(BatchForward { embeddings: v, inputs, scores: out.into_vec(), encoder_cache, args, classifier_cache })
    }

    /// Gradients of a loss given `dscores` (its gradient w.r.t. each score).
    /// Also returns the gradient w.r.t. the latent rows.
    pub fn backward(&self, sub: &SubHypergraph, fwd: &BatchForward, dscores: &[f64]) -> Result<(DiscriminatorGrads, Dense)> {
        if dscores.len() != fwd.scores.len() {
            return Err(Error::Shape(format!("{} score gradients for {} scores", dscores.len(), fwd.scores.len())));
        }
        let up = Dense::from_vec(dscores.len(), 1, dscores.to_vec())?;
        let (classifier, dinputs) = self.classifier.backward(&fwd.classifier_cache, &up)?;
        let mut dv = Dense::zeros(fwd.embeddings.rows(), fwd.embeddings.cols());
        for (i, a) in fwd.args.iter().enumerate() {
            maxmin_backward(a, dinputs.row(i), &mut dv);
        }
        let (encoder, _) = self.encoder.backward(sub, &fwd.encoder_cache, &dv)?;
        let n = fwd.args.len();
        let dlat = dinputs.select_rows(&(n..dinputs.rows()).collect::<Vec<_>>());
        Ok((DiscriminatorGrads { encoder, classifier }, dlat))
    }

    pub fn mlps(&self) -> Vec<&Mlp> {
        self.encoder.layers().iter().chain([&self.classifier]).collect()
    }

    pub fn mlps_mut(&mut self) -> Vec<&mut Mlp> {
        let Discriminator { encoder, classifier } = self;
        encoder.layers_mut().iter_mut().chain([classifier]).collect()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.mlps().iter().flat_map(|m| m.params_flat()).collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for m in self.mlps_mut() {
            let n = m.num_params();
            m.set_params_flat(&flat[off..off + n]);
            off += n;
        }
        assert_eq!(off, flat.len());
    }
}
