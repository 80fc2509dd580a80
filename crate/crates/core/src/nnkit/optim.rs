use crate::error::{Error, Result};

/// Adaptive-moment optimiser state (first/second moments, bias correction).
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: Vec::new(), v: Vec::new(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. Fails without touching anything if a gradient is non-finite
    /// or the shapes disagree with earlier calls.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} parameter tensors, {} gradients", params.len(), grads.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!("tensor {i}: {} params, {} grads", p.len(), g.len())));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {i}")));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::Shape("optimizer moments do not match parameters".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        if params.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(())
    }

    /// Moments flattened for checkpointing: `(m, v)`.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        (self.m.concat(), self.v.concat())
    }

    pub(crate) fn moment_shapes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }

    pub(crate) fn restore(&mut self, shapes: &[usize], m: &[f64], v: &[f64], step: u64) -> Result<()> {
        let total: usize = shapes.iter().sum();
        if m.len() != total || v.len() != total {
            return Err(Error::Checkpoint("optimizer moment length mismatch".into()));
        }
        let mut off = 0;
        self.m.clear();
        self.v.clear();
        for &n in shapes {
            self.m.push(m[off..off + n].to_vec());
            self.v.push(v[off..off + n].to_vec());
            off += n;
        }
        self.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut opt = Adam::new(1e-3);
        let mut p = vec![1.0, -2.0, 3.0];
        let before = p.clone();
        opt.step(&mut [p.as_mut_slice()], &[&[0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // f(w) = w², grad 2w
        let mut opt = Adam::new(1e-3);
        let mut w = vec![1.0];
        let mut prev = 1.0f64;
        for i in 0..100 {
            let g = [2.0 * w[0]];
            opt.step(&mut [w.as_mut_slice()], &[&g]).unwrap();
            assert!(w[0].abs() < prev, "step {i}: {} !< {prev}", w[0].abs());
            prev = w[0].abs();
            assert_eq!(opt.step_count(), i as u64 + 1);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut opt = Adam::new(1e-3);
        let mut p = vec![1.0];
        let err = opt.step(&mut [p.as_mut_slice()], &[&[f64::INFINITY]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p, vec![1.0]);
        assert_eq!(opt.step_count(), 0);
    }
}
