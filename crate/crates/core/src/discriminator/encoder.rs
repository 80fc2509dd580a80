use rand::Rng;

use crate::error::{Error, Result};
use crate::nnkit::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
use crate::sampler::SubHypergraph;

/// Two-stage bipartite mean passing followed by `ReLU(W [self ‖ neighbour] + b)`,
/// stacked `L` times.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    layers: Vec<Mlp>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    mlp: Vec<ForwardCache>,
    input_widths: Vec<usize>,
}

/// Per-layer parameter gradients.
pub type EncoderGrads = Vec<MlpGrads>;

impl Encoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, depth: usize, rng: &mut R) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let din = if l == 0 { input_dim } else { hidden };
                Mlp::new(&[2 * din, hidden], &[Activation::Relu], rng)
            })
            .collect();
        Encoder { layers }
    }

    pub fn zeros(input_dim: usize, hidden: usize, depth: usize) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let din = if l == 0 { input_dim } else { hidden };
                Mlp::zeros(&[2 * din, hidden], &[Activation::Relu])
            })
            .collect();
        Encoder { layers }
    }

    pub fn from_layers(layers: Vec<Mlp>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one layer".into()));
        }
        for (l, mlp) in layers.iter().enumerate() {
            if mlp.layers().len() != 1 || mlp.input_dim() % 2 != 0 {
                return Err(Error::Shape(format!("encoder layer {l} must be a single [2·in, h] layer")));
            }
            if l > 0 && mlp.input_dim() != 2 * layers[l - 1].output_dim() {
                return Err(Error::LayerShape {
                    layer: l,
                    expected: 2 * layers[l - 1].output_dim(),
                    got: mlp.input_dim(),
                });
            }
        }
        Ok(Encoder { layers })
    }

    pub fn layers(&self) -> &[Mlp] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Mlp] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim() / 2
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, sub: &SubHypergraph, features: &Dense) -> Result<Dense> {
        Ok(self.forward_cached(sub, features)?.0)
    }

    pub fn forward_cached(&self, sub: &SubHypergraph, features: &Dense) -> Result<(Dense, EncoderCache)> {
        if features.rows() != sub.node_count() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} sub-hypergraph nodes",
                features.rows(),
                sub.node_count()
            )));
        }
        let mut cache = EncoderCache { mlp: Vec::with_capacity(self.layers.len()), input_widths: Vec::new() };
        let mut x = features.clone();
        for (l, mlp) in self.layers.iter().enumerate() {
            if 2 * x.cols() != mlp.input_dim() {
                return Err(Error::LayerShape { layer: l, expected: mlp.input_dim() / 2, got: x.cols() });
            }
            let nbr = neighbour_means(sub, &x);
            let z = x.hconcat(&nbr)?;
            cache.input_widths.push(x.cols());
            let (y, c) = mlp.forward_cached(&z)?;
            cache.mlp.push(c);
            x = y;
        }
        Ok((x, cache))
    }

    /// Backpropagate `upstream` (gradient w.r.t. the final embeddings). Returns the
    /// parameter gradients and the gradient w.r.t. the input features.
    pub fn backward(&self, sub: &SubHypergraph, cache: &EncoderCache, upstream: &Dense) -> Result<(EncoderGrads, Dense)> {
        if cache.mlp.len() != self.layers.len() {
            return Err(Error::MissingForward);
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (l, mlp) in self.layers.iter().enumerate().rev() {
            let (g, dz) = mlp.backward(&cache.mlp[l], &delta)?;
            grads.push(g);
            let (dself, dnbr) = dz.split_cols(cache.input_widths[l]);
            delta = dself;
            neighbour_means_backward(sub, &dnbr, &mut delta);
        }
        grads.reverse();
        Ok((grads, delta))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Mlp::num_params).sum()
    }
}

/// Hyperedge means of node rows, then node means of incident hyperedge rows
/// (zero for nodes in no member hyperedge).
pub fn neighbour_means(sub: &SubHypergraph, x: &Dense) -> Dense {
    let w = x.cols();
    let edges = sub.local_edges();
    let mut e = Dense::zeros(edges.len(), w);
    for (k, members) in edges.iter().enumerate() {
        let row = e.row_mut(k);
        for &l in members {
            for (r, v) in row.iter_mut().zip(x.row(l)) {
                *r += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        row.iter_mut().for_each(|r| *r *= inv);
    }
    let mut out = Dense::zeros(x.rows(), w);
    for l in 0..x.rows() {
        let inc = sub.local_incident(l);
        if inc.is_empty() {
            continue;
        }
        let inv = 1.0 / inc.len() as f64;
        let row = out.row_mut(l);
        for &k in inc {
            for (r, v) in row.iter_mut().zip(e.row(k)) {
                *r += v * inv;
            }
        }
    }
    out
}

/// Adds the gradient of [`neighbour_means`] w.r.t. `x`, given `dout`, into `dx`.
fn neighbour_means_backward(sub: &SubHypergraph, dout: &Dense, dx: &mut Dense) {
    let w = dout.cols();
    let edges = sub.local_edges();
    let mut de = Dense::zeros(edges.len(), w);
    for l in 0..dout.rows() {
        let inc = sub.local_incident(l);
        if inc.is_empty() {
            continue;
        }
        let inv = 1.0 / inc.len() as f64;
        for &k in inc {
            for (r, v) in de.row_mut(k).iter_mut().zip(dout.row(l)) {
                *r += v * inv;
            }
        }
    }
    for (k, members) in edges.iter().enumerate() {
        let inv = 1.0 / members.len() as f64;
        for &l in members {
            for (r, v) in dx.row_mut(l).iter_mut().zip(de.row(k)) {
                *r += v * inv;
            }
        }
    }
}
