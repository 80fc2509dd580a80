use rand::Rng;

use super::dense::Dense;
use super::{sigmoid, LEAKY_SLOPE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    /// Leaky ReLU with slope [`LEAKY_SLOPE`] on the negative side.
    LeakyRelu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if y > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "leaky_relu" => Some(Activation::LeakyRelu),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Affine map followed by an activation. `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Dense,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer inputs and outputs recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    inputs: Vec<Dense>,
    outputs: Vec<Dense>,
}

impl ForwardCache {
    pub fn output(&self) -> Option<&Dense> {
        self.outputs.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Dense>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            weights: mlp.layers.iter().map(|l| Dense::zeros(l.out_dim(), l.in_dim())).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_assign(b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Gradient slices in the same order as [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl Mlp {
    /// Validate consecutive widths and finiteness.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("mlp needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape(format!("layer {i}: bias length {}", l.bias.len())));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::LayerShape {
                    layer: i,
                    expected: layers[i - 1].out_dim(),
                    got: l.in_dim(),
                });
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Mlp { layers })
    }

    /// Uniform fan-in initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let mut weight = Dense::zeros(fan_out, fan_in);
                for v in weight.as_mut_slice() {
                    *v = rng.random_range(-bound..bound);
                }
                let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                Layer { weight, bias, activation }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(widths: &[usize], activations: &[Activation]) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Layer {
                weight: Dense::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
                activation,
            })
            .collect();
        Mlp { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(Layer::out_dim));
        w
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.out_dim() * (l.in_dim() + 1)).sum()
    }

    fn layer_forward(layer: &Layer, x: &Dense) -> Dense {
        let mut z = x.matmul_t(&layer.weight);
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                *v = layer.activation.apply(*v + b);
            }
        }
        z
    }

    fn check_input(&self, x: &Dense) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::LayerShape { layer: 0, expected: self.input_dim(), got: x.cols() });
        }
        Ok(())
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward(&self, x: &Dense) -> Result<Dense> {
        self.check_input(x)?;
        let mut h = Self::layer_forward(&self.layers[0], x);
        for layer in &self.layers[1..] {
            h = Self::layer_forward(layer, &h);
        }
        Ok(h)
    }

    /// Forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, x: &Dense) -> Result<(Dense, ForwardCache)> {
        self.check_input(x)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        for layer in &self.layers {
            let y = Self::layer_forward(layer, &h);
            cache.inputs.push(h);
            h = y.clone();
            cache.outputs.push(y);
        }
        Ok((h, cache))
    }

    /// Backpropagate `upstream` (gradient w.r.t. the output) through the cached pass.
    ///
    /// Returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Dense) -> Result<(MlpGrads, Dense)> {
        if cache.outputs.len() != self.layers.len() {
            return Err(Error::MissingForward);
        }
        let out = &cache.outputs[self.layers.len() - 1];
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::Shape(format!(
                "upstream {}x{} vs output {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = upstream.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.outputs[li];
            let x = &cache.inputs[li];
            if y.rows() != delta.rows() || x.cols() != layer.in_dim() {
                return Err(Error::MissingForward);
            }
            // dL/dz
            for (d, &yv) in delta.as_mut_slice().iter_mut().zip(y.as_slice()) {
                *d *= layer.activation.derivative_from_output(yv);
            }
            grads.weights[li] = delta.t_matmul(x);
            grads.biases[li] = delta.col_sums();
            delta = delta.matmul(&layer.weight);
        }
        Ok((grads, delta))
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::gradcheck;
    use crate::seed;

    #[test]
    fn zero_net_with_sigmoid_outputs_half() {
        let m = Mlp::zeros(&[3, 4, 1], &[Activation::Relu, Activation::Sigmoid]);
        let x = Dense::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let y = m.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_layer_is_identity() {
        let mut m = Mlp::zeros(&[2, 2], &[Activation::Identity]);
        m.layers_mut()[0].weight = Dense::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x = Dense::from_rows(&[vec![0.25, -7.0]]).unwrap();
        assert_eq!(m.forward(&x).unwrap(), x);
    }

    #[test]
    fn two_layer_matches_hand_computation() {
        // h = relu(W1 x + b1), y = sigmoid(W2 h + b2)
        let layers = vec![
            Layer {
                weight: Dense::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap(),
                bias: vec![0.1, -0.2],
                activation: Activation::Relu,
            },
            Layer {
                weight: Dense::from_rows(&[vec![1.5, -0.5]]).unwrap(),
                bias: vec![0.3],
                activation: Activation::Sigmoid,
            },
        ];
        let m = Mlp::from_layers(layers).unwrap();
        let x = Dense::from_rows(&[vec![1.0, 2.0]]).unwrap();
        // W1 x + b1 = [0.5-2+0.1, 2+0.5-0.2] = [-1.4, 2.3] -> relu [0, 2.3]
        // W2 h + b2 = -1.15 + 0.3 = -0.85
        let expected = 1.0 / (1.0 + 0.85f64.exp());
        let y = m.forward(&x).unwrap();
        assert!((y.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn width_mismatch_names_layer() {
        let m = Mlp::zeros(&[3, 2], &[Activation::Identity]);
        let x = Dense::zeros(1, 4);
        match m.forward(&x) {
            Err(Error::LayerShape { layer: 0, expected: 3, got: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad = vec![
            Layer { weight: Dense::zeros(2, 3), bias: vec![0.0; 2], activation: Activation::Relu },
            Layer { weight: Dense::zeros(1, 5), bias: vec![0.0], activation: Activation::Relu },
        ];
        assert!(matches!(Mlp::from_layers(bad), Err(Error::LayerShape { layer: 1, .. })));
    }

    #[test]
    fn backward_without_forward_errors() {
        let m = Mlp::zeros(&[2, 1], &[Activation::Identity]);
        let err = m.backward(&ForwardCache::default(), &Dense::zeros(1, 1)).unwrap_err();
        assert!(matches!(err, Error::MissingForward));
    }

    #[test]
    fn linear_weight_gradient_is_upstream_t_x() {
        let mut rng = seed::rng(5);
        let m = Mlp::new(&[3, 2], &[Activation::Identity], &mut rng);
        let x = Dense::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        let up = Dense::from_rows(&[vec![0.5, -1.0], vec![2.0, 1.0]]).unwrap();
        let (_, cache) = m.forward_cached(&x).unwrap();
        let (g, dx) = m.backward(&cache, &up).unwrap();
        assert_eq!(g.weights[0], up.t_matmul(&x));
        assert_eq!(g.biases[0], vec![2.5, 0.0]);
        assert_eq!(dx, up.matmul(&m.layers()[0].weight));
    }

    #[test]
    fn bias_path_of_constant_function_matches_finite_differences() {
        // zero weights + identity: output equals the bias regardless of input
        let m = Mlp::zeros(&[3, 2], &[Activation::Identity]);
        let x = Dense::from_rows(&[vec![0.3, -0.1, 2.0]]).unwrap();
        let up = Dense::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let (_, cache) = m.forward_cached(&x).unwrap();
        let (g, _) = m.backward(&cache, &up).unwrap();
        let loss = |p: &[f64]| {
            let mut mm = m.clone();
            mm.set_params_flat(p);
            let y = mm.forward(&x).unwrap();
            y.get(0, 0) - 2.0 * y.get(0, 1)
        };
        let report = gradcheck::check_all(loss, &m.params_flat(), &g.flat(), 1e-4);
        assert!(report.max_rel_error <= 1e-5, "{report:?}");
    }

    #[test]
    fn three_layer_random_net_passes_gradient_check() {
        let mut rng = seed::rng(11);
        let m = Mlp::new(
            &[4, 6, 5, 2],
            &[Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid],
            &mut rng,
        );
        let x = Dense::from_rows(&[vec![0.3, -0.7, 1.1, 0.2], vec![-0.4, 0.9, 0.05, -1.3]]).unwrap();
        let w = Dense::from_rows(&[vec![1.0, -0.5], vec![0.25, 2.0]]).unwrap();
        let (_, cache) = m.forward_cached(&x).unwrap();
        let (g, _) = m.backward(&cache, &w).unwrap();
        let loss = |p: &[f64]| {
            let mut mm = m.clone();
            mm.set_params_flat(p);
            let y = mm.forward(&x).unwrap();
            y.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
        };
        let report = gradcheck::check_probes(loss, &m.params_flat(), &g.flat(), 20, 1e-4, 3);
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }
}
