//! The full set of learned components with their optimiser state, and
//! checkpoint (de)serialisation.

use crate::discriminator::{Discriminator, Encoder};
use crate::error::{Error, Result};
use crate::generator::{Denoiser, Extractor, NoiseGenerator};
use crate::nnkit::{Adam, Checkpoint, Mlp};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub discriminator: Discriminator,
    pub denoiser: Denoiser,
    pub extractor: Extractor,
    pub noise: NoiseGenerator,
}

impl Models {
    /// Fan-in uniform initialisation, one named stream per component.
    pub fn new(input_dim: usize, hidden: usize, depth: usize, time_embedding: bool, root: u64) -> Self {
        Models {
            discriminator: Discriminator::new(input_dim, hidden, depth, &mut seed::named_rng(root, "init-discriminator", 0)),
            denoiser: Denoiser::new(hidden, time_embedding, &mut seed::named_rng(root, "init-denoiser", 0)),
            extractor: Extractor::new(hidden, &mut seed::named_rng(root, "init-extractor", 0)),
            noise: NoiseGenerator::new(hidden, &mut seed::named_rng(root, "init-noise", 0)),
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize, depth: usize, time_embedding: bool) -> Self {
        Models {
            discriminator: Discriminator::zeros(input_dim, hidden, depth),
            denoiser: Denoiser::zeros(hidden, time_embedding),
            extractor: Extractor::zeros(hidden),
            noise: NoiseGenerator::zeros(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.discriminator.hidden()
    }

    /// Parameters updated by the generator optimiser.
    pub fn generator_params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.denoiser.mlp.param_slices_mut();
        out.extend(self.noise.mlp.param_slices_mut());
        out
    }

    pub fn generator_params_flat(&self) -> Vec<f64> {
        let mut out = self.denoiser.mlp.params_flat();
        out.extend(self.noise.mlp.params_flat());
        out.extend(self.extractor.mlp.params_flat());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.discriminator.mlps().iter().all(|m| m.is_finite())
            && self.denoiser.mlp.is_finite()
            && self.extractor.mlp.is_finite()
            && self.noise.mlp.is_finite()
    }

    pub fn write_checkpoint(&self, ck: &mut Checkpoint) {
        for (l, m) in self.discriminator.encoder.layers().iter().enumerate() {
            ck.mlps.insert(format!("encoder.{l}"), m.clone());
        }
        ck.mlps.insert("classifier".into(), self.discriminator.classifier.clone());
        ck.mlps.insert("denoiser".into(), self.denoiser.mlp.clone());
        ck.mlps.insert("extractor".into(), self.extractor.mlp.clone());
        ck.mlps.insert("noise".into(), self.noise.mlp.clone());
        ck.meta.insert("encoder_layers".into(), self.discriminator.encoder.layers().len().to_string());
        ck.meta.insert("time_embedding".into(), self.denoiser.time_embedding.to_string());
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let depth: usize = ck
            .meta_value("encoder_layers")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad encoder_layers".into()))?;
        let layers = (0..depth).map(|l| ck.mlp(&format!("encoder.{l}")).cloned()).collect::<Result<Vec<Mlp>>>()?;
        let encoder = Encoder::from_layers(layers)?;
        let time_embedding = ck.meta_value("time_embedding")? == "true";
        let models = Models {
            discriminator: Discriminator { encoder, classifier: ck.mlp("classifier")?.clone() },
            denoiser: Denoiser { mlp: ck.mlp("denoiser")?.clone(), time_embedding },
            extractor: Extractor { mlp: ck.mlp("extractor")?.clone() },
            noise: NoiseGenerator { mlp: ck.mlp("noise")?.clone() },
        };
        let h = models.hidden();
        let consistent = models.discriminator.classifier.input_dim() == h
            && models.denoiser.hidden() == h
            && models.extractor.mlp.input_dim() == 2 * h
            && models.noise.mlp.output_dim() == h;
        if !consistent {
            return Err(Error::Checkpoint("component widths disagree".into()));
        }
        Ok(models)
    }
}

pub(crate) fn write_adam(ck: &mut Checkpoint, name: &str, opt: &Adam) {
    let (m, v) = opt.moments();
    ck.vectors.insert(format!("{name}.m"), m);
    ck.vectors.insert(format!("{name}.v"), v);
    ck.vectors.insert(format!("{name}.shapes"), opt.moment_shapes().into_iter().map(|s| s as f64).collect());
    ck.meta.insert(format!("{name}.step"), opt.step_count().to_string());
    ck.meta.insert(format!("{name}.lr"), format!("{:e}", opt.lr));
}

pub(crate) fn read_adam(ck: &Checkpoint, name: &str) -> Result<Adam> {
    let num = |key: &str| -> Result<f64> {
        ck.meta_value(key)?.parse().map_err(|_| Error::Checkpoint(format!("bad {key}")))
    };
    let mut opt = Adam::new(num(&format!("{name}.lr"))?);
    let shapes: Vec<usize> = ck.vector(&format!("{name}.shapes"))?.iter().map(|&s| s as usize).collect();
    let step = num(&format!("{name}.step"))? as u64;
    opt.restore(&shapes, ck.vector(&format!("{name}.m"))?, ck.vector(&format!("{name}.v"))?, step)?;
    Ok(opt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let m = Models::new(5, 8, 2, true, 3);
        let mut ck = Checkpoint::default();
        m.write_checkpoint(&mut ck);
        let mut opt = Adam::new(2e-3);
        let mut p = vec![1.0, 2.0];
        opt.step(&mut [p.as_mut_slice()], &[&[0.5, -0.1]]).unwrap();
        write_adam(&mut ck, "opt", &opt);
        let back = Checkpoint::parse(&ck.to_text()).unwrap();
        assert_eq!(Models::from_checkpoint(&back).unwrap(), m);
        assert_eq!(read_adam(&back, "opt").unwrap(), opt);
    }

    #[test]
    fn same_root_same_init() {
        assert_eq!(Models::new(4, 6, 2, false, 9), Models::new(4, 6, 2, false, 9));
        assert_ne!(Models::new(4, 6, 2, false, 9), Models::new(4, 6, 2, false, 10));
    }
}
