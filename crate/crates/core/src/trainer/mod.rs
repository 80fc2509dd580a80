//! Losses, alternating discriminator/generator optimisation and the ablation variants.

mod config;
mod losses;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::seq::index::sample;

pub use config::{TrainConfig, Variant};
pub use losses::{
    boundary_loss, boundary_loss_grad, discriminator_loss, discriminator_loss_grad, generator_adversarial_loss,
    generator_adversarial_loss_grad, generator_total_loss, SCORE_EPS,
};

use crate::discriminator::{maxmin, CandidateHyperedge, DiscriminatorGrads};
use crate::error::{Error, Result};
use crate::generator::{denoise_backward, denoise_forward, readout_condition, top_k, ChainForward, GenMode};
use crate::hypercore::{Hypergraph, Split};
use crate::metrics::{build_eval_sets, eval_context, evaluate_sets, train_mask, EvalSet, EvalTable};
use crate::model::{read_adam, write_adam, Models};
use crate::nnkit::{Adam, Checkpoint, Dense, MlpGrads};
use crate::sampler::{sample_sub_hypergraph_with, SubHypergraph};
use crate::seed;

/// Losses of one alternation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub dis: f64,
    pub neg: f64,
    pub diff: f64,
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: u64,
    pub dis: f64,
    pub neg: f64,
    pub diff: f64,
    pub validation: EvalTable,
    pub wall_seconds: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,step,L_dis,L_neg,L_diff");
    if let Some(first) = rows.first() {
        for r in &first.validation.rows {
            let _ = write!(out, ",val_AUROC_{}", r.strategy);
        }
        for r in &first.validation.rows {
            let _ = write!(out, ",val_Precision_{}", r.strategy);
        }
    }
    out.push_str(",wall_seconds\n");
    for h in rows {
        let _ = write!(out, "{},{},{:.6},{:.6},{:.6}", h.epoch, h.step, h.dis, h.neg, h.diff);
        for r in &h.validation.rows {
            let _ = write!(out, ",{:.6}", r.auroc);
        }
        for r in &h.validation.rows {
            let _ = write!(out, ",{:.6}", r.precision);
        }
        let _ = writeln!(out, ",{:.3}", h.wall_seconds);
    }
    out
}

/// Models, optimiser state and the step counter. Every step draws its batch
/// from `seed::derive(cfg.seed, "batch", step)`, so a restored trainer continues
/// exactly where the saved one stopped.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    g: &'a Hypergraph,
    split: &'a Split,
    pub cfg: TrainConfig,
    pub models: Models,
    opt_dis: Adam,
    opt_gen: Adam,
    step: u64,
    epoch: usize,
    observed: HashSet<Vec<usize>>,
    train_mask: Vec<bool>,
}

/// A training batch: the encoding structure, its features, and the positives to
/// score as local node rows.
#[derive(Debug, Clone)]
pub struct Batch {
    pub sub: SubHypergraph,
    pub features: Dense,
    pub positives: Vec<Vec<usize>>,
}

impl Batch {
    /// Positives are the sampled hyperedges and also form the whole structure.
    pub fn inline(g: &Hypergraph, sampled: SubHypergraph) -> Self {
        let positives = sampled.local_edges().to_vec();
        Batch { features: sampled.features(g), sub: sampled, positives }
    }

    /// Positives are the sampled hyperedges; the structure is every other
    /// training hyperedge touching their nodes, as at evaluation time.
    pub fn held_out(g: &Hypergraph, train_mask: &[bool], sampled: SubHypergraph) -> Self {
        let mut mask = train_mask.to_vec();
        for &j in sampled.hyperedge_indices() {
            mask[j] = false;
        }
        let targets: Vec<CandidateHyperedge> =
            sampled.hyperedge_indices().iter().map(|&j| CandidateHyperedge::positive(g, j)).collect();
        let sub = eval_context(g, &mask, &targets.iter().collect::<Vec<_>>());
        let positives = targets
            .iter()
            .map(|c| c.nodes.iter().map(|&v| sub.local_of(v).expect("targets are context nodes")).collect())
            .collect();
        Batch { features: sub.features(g), sub, positives }
    }
}

/// Final generator latents for a batch, plus what the generator step needs to
/// backpropagate through them.
enum Latents {
    Chain(ChainForward),
    Noise { out: Dense, cache: crate::nnkit::ForwardCache },
}

impl Latents {
    fn last(&self) -> &Dense {
        match self {
            Latents::Chain(c) => c.last(),
            Latents::Noise { out, .. } => out,
        }
    }
}

impl<'a> Trainer<'a> {
    pub fn new(g: &'a Hypergraph, split: &'a Split, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        split.validate(g.hyperedge_count())?;
        if split.train.is_empty() {
            return Err(Error::Empty("training split".into()));
        }
        let models = Models::new(g.feature_dim(), cfg.hidden, cfg.layers, cfg.time_embedding, cfg.seed);
        Ok(Trainer {
            g,
            split,
            opt_dis: Adam::new(cfg.lr_dis),
            opt_gen: Adam::new(cfg.lr_gen),
            cfg,
            models,
            step: 0,
            epoch: 0,
            observed: g.edge_set(),
            train_mask: train_mask(g, &split.train),
        })
    }

    /// Continue from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(g: &'a Hypergraph, split: &'a Split, cfg: TrainConfig, ck: &Checkpoint) -> Result<Self> {
        let mut t = Trainer::new(g, split, cfg)?;
        t.models = Models::from_checkpoint(ck)?;
        if t.models.discriminator.encoder.input_dim() != g.feature_dim() || t.models.hidden() != t.cfg.hidden {
            return Err(Error::Checkpoint("checkpoint does not match dataset/config widths".into()));
        }
        t.opt_dis = read_adam(ck, "opt_dis")?;
        t.opt_gen = read_adam(ck, "opt_gen")?;
        let num = |k: &str| -> Result<u64> { ck.meta_value(k)?.parse().map_err(|_| Error::Checkpoint(format!("bad {k}"))) };
        t.step = num("step")?;
        t.epoch = num("epoch")? as usize;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        self.models.write_checkpoint(&mut ck);
        write_adam(&mut ck, "opt_dis", &self.opt_dis);
        write_adam(&mut ck, "opt_gen", &self.opt_gen);
        ck.meta.insert("step".into(), self.step.to_string());
        ck.meta.insert("epoch".into(), self.epoch.to_string());
        ck.meta.insert("variant".into(), self.cfg.variant.to_string());
        ck
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps_per_epoch(&self) -> usize {
        if self.cfg.steps_per_epoch > 0 {
            self.cfg.steps_per_epoch
        } else {
            self.split.train.len().div_ceil(self.cfg.batch_size)
        }
    }

    /// Draw the batch for `step` and the random stream for the rest of the step.
    pub fn batch(&self, step: u64) -> Result<(Batch, seed::Rng)> {
        let mut rng = seed::named_rng(self.cfg.seed, "batch", step);
        let sampled = sample_sub_hypergraph_with(self.g, &self.split.train, self.cfg.batch_size, &mut rng)?;
        let batch = if self.cfg.holdout_targets { Batch::held_out(self.g, &self.train_mask, sampled) } else { Batch::inline(self.g, sampled) };
        Ok((batch, rng))
    }

    fn latents(&self, batch: &Batch, v: &Dense, rng: &mut seed::Rng) -> Result<Latents> {
        let variant = self.cfg.variant;
        let n = batch.positives.len();
        if variant.uses_noise_generator() {
            let noise = self.models.noise.sample_noise(n, rng);
            let (out, cache) = self.models.noise.mlp.forward_cached(&noise)?;
            return Ok(Latents::Noise { out, cache });
        }
        let mut h0 = Dense::zeros(n, v.cols());
        for (i, rows) in batch.positives.iter().enumerate() {
            h0.row_mut(i).copy_from_slice(&maxmin(v, rows)?);
        }
        let cond = if variant.uses_condition() { readout_condition(v)? } else { vec![0.0; v.cols()] };
        Ok(Latents::Chain(denoise_forward(&self.models.denoiser, h0, &cond, self.cfg.steps)?))
    }

    /// Local node rows of the extracted negative for each batch positive.
    fn extract(&self, batch: &Batch, v: &Dense, latents: &Dense) -> Result<Vec<Vec<usize>>> {
        let query = self.cfg.variant.queries_nodes();
        batch
            .positives
            .iter()
            .enumerate()
            .map(|(i, pos)| {
                let p = self.models.extractor.probabilities(latents.row(i), v, query)?;
                top_k(&p, pos.len())
            })
            .collect()
    }

    /// Uniform node sets from the batch, size-matched to each positive.
    fn batch_sns(&self, batch: &Batch, rng: &mut seed::Rng) -> Vec<Vec<usize>> {
        let sub = &batch.sub;
        let mut out = Vec::new();
        for pos in &batch.positives {
            for _ in 0..100 {
                let mut rows = sample(rng, sub.node_count(), pos.len()).into_vec();
                rows.sort_unstable();
                let global: Vec<usize> = rows.iter().map(|&l| sub.global_of(l)).collect();
                if !self.observed.contains(&global) {
                    out.push(rows);
                    break;
                }
            }
        }
        out
    }

    fn discriminator_step(&mut self, batch: &Batch, rng: &mut seed::Rng) -> Result<f64> {
        let (sub, feats) = (&batch.sub, &batch.features);
        let v = self.models.discriminator.encoder.forward(sub, feats)?;
        let latents = self.latents(batch, &v, rng)?;
        let positives = &batch.positives;
        let mut cands: Vec<Vec<usize>> = positives.to_vec();
        let mut latent_rows = None;
        if self.cfg.variant.mode() == GenMode::Latent {
            latent_rows = Some(latents.last().clone());
        } else {
            cands.extend(self.extract(batch, &v, latents.last())?);
        }
        if self.cfg.extra_sns_negatives {
            cands.extend(self.batch_sns(batch, rng));
        }
        let negatives = cands.len() - positives.len() + latent_rows.as_ref().map_or(0, Dense::rows);
        let labels: Vec<f64> = std::iter::repeat_n(1.0, positives.len()).chain(std::iter::repeat_n(0.0, negatives)).collect();
        let fwd = self.models.discriminator.forward_batch(sub, feats, &cands, latent_rows.as_ref())?;
        let loss = discriminator_loss(&fwd.scores, &labels)?;
        let dscores = discriminator_loss_grad(&fwd.scores, &labels)?;
        let (grads, _) = self.models.discriminator.backward(sub, &fwd, &dscores)?;
        apply_discriminator(&mut self.opt_dis, &mut self.models, &grads)?;
        Ok(loss)
    }

    fn generator_step(&mut self, batch: &Batch, rng: &mut seed::Rng) -> Result<(f64, f64)> {
        let v = self.models.discriminator.encoder.forward(&batch.sub, &batch.features)?;
        let latents = self.latents(batch, &v, rng)?;
        let clf = &self.models.discriminator.classifier;
        let mut den_grads = MlpGrads::zeros_like(&self.models.denoiser.mlp);
        let mut noise_grads = MlpGrads::zeros_like(&self.models.noise.mlp);
        let (neg, diff) = match &latents {
            Latents::Noise { out, cache } => {
                let (s, ccache) = clf.forward_cached(out)?;
                let s = s.into_vec();
                let ds = generator_adversarial_loss_grad(&s)?;
                let (_, dlat) = clf.backward(&ccache, &Dense::from_vec(ds.len(), 1, ds)?)?;
                noise_grads = self.models.noise.mlp.backward(cache, &dlat)?.0;
                (generator_adversarial_loss(&s)?, 0.0)
            }
            Latents::Chain(chain) => {
                let n = chain.last().rows();
                let mut caches = Vec::with_capacity(chain.states.len());
                let mut chains = vec![Vec::with_capacity(chain.states.len()); n];
                for state in &chain.states {
                    let (s, c) = clf.forward_cached(state)?;
                    for (i, &x) in s.as_slice().iter().enumerate() {
                        chains[i].push(x);
                    }
                    caches.push(c);
                }
                let last: Vec<f64> = chains.iter().map(|c| c[c.len() - 1]).collect();
                let neg = generator_adversarial_loss(&last)?;
                let diff = boundary_loss(&chains)?;
                let dneg = generator_adversarial_loss_grad(&last)?;
                let ddiff = boundary_loss_grad(&chains)?;
                let steps = chain.steps();
                let mut dstates = Vec::with_capacity(steps + 1);
                for (t, cache) in caches.iter().enumerate() {
                    let ds: Vec<f64> =
                        (0..n).map(|i| ddiff[i][t] + if t == steps { dneg[i] } else { 0.0 }).collect();
                    dstates.push(clf.backward(cache, &Dense::from_vec(n, 1, ds)?)?.1);
                }
                den_grads = denoise_backward(&self.models.denoiser, chain, &dstates)?.0;
                (neg, diff)
            }
        };
        let mut grads = den_grads.slices();
        grads.extend(noise_grads.slices());
        self.opt_gen.step(&mut self.models.generator_params_mut(), &grads)?;
        Ok((neg, diff))
    }

    /// One alternation: sample a batch, update the discriminator, then the generator.
    pub fn train_step(&mut self) -> Result<StepLosses> {
        let step = self.step;
        let (batch, mut rng) = self.batch(step)?;
        let mut losses = StepLosses { dis: 0.0, neg: 0.0, diff: 0.0 };
        let diverged = |e: Error| Error::Diverged { step: step as usize, msg: e.to_string() };
        for _ in 0..self.cfg.dis_steps {
            losses.dis = self.discriminator_step(&batch, &mut rng).map_err(diverged)?;
        }
        for _ in 0..self.cfg.gen_steps {
            (losses.neg, losses.diff) = self.generator_step(&batch, &mut rng).map_err(diverged)?;
        }
        if !(losses.dis.is_finite() && losses.neg.is_finite() && losses.diff.is_finite()) {
            return Err(Error::Diverged { step: step as usize, msg: format!("{losses:?}") });
        }
        self.step += 1;
        Ok(losses)
    }

    /// Run one epoch of steps and return the mean losses.
    pub fn train_epoch(&mut self) -> Result<StepLosses> {
        let n = self.steps_per_epoch();
        let mut acc = StepLosses { dis: 0.0, neg: 0.0, diff: 0.0 };
        for _ in 0..n {
            let l = self.train_step()?;
            acc.dis += l.dis;
            acc.neg += l.neg;
            acc.diff += l.diff;
        }
        self.epoch += 1;
        let k = n as f64;
        Ok(StepLosses { dis: acc.dis / k, neg: acc.neg / k, diff: acc.diff / k })
    }

    pub fn validation_sets(&self) -> Result<Vec<EvalSet>> {
        let held = if self.split.validation.is_empty() { &self.split.test } else { &self.split.validation };
        build_eval_sets(self.g, held, &self.cfg.val_strategies, seed::derive(self.cfg.seed, "validation", 0))
    }

    pub fn evaluate(&self, sets: &[EvalSet]) -> Result<EvalTable> {
        evaluate_sets(&self.models.discriminator, self.g, &self.split.train, sets, self.cfg.batch_size)
    }
}

fn apply_discriminator(opt: &mut Adam, models: &mut Models, grads: &DiscriminatorGrads) -> Result<()> {
    let mut gs: Vec<&[f64]> = grads.encoder.iter().flat_map(MlpGrads::slices).collect();
    gs.extend(grads.classifier.slices());
    let mut ps: Vec<&mut [f64]> = models.discriminator.mlps_mut().into_iter().flat_map(|m| m.param_slices_mut()).collect();
    opt.step(&mut ps, &gs)
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Models with the highest mean validation AUROC.
    pub best: Models,
    pub best_epoch: usize,
    pub best_auroc: f64,
    pub last: Models,
    pub history: Vec<HistoryRow>,
}

/// Train for `cfg.epochs` epochs, evaluating on validation at `cfg.eval_every`.
///
/// With `out`, writes `history.csv`, `best.ckpt` and `last.ckpt` there as it goes;
/// on divergence the last good state is saved before the error is returned.
pub fn train(g: &Hypergraph, split: &Split, cfg: TrainConfig, out: Option<&Path>) -> Result<TrainOutcome> {
    let trainer = Trainer::new(g, split, cfg)?;
    train_from(trainer, out)
}

pub fn train_from(mut trainer: Trainer<'_>, out: Option<&Path>) -> Result<TrainOutcome> {
    let sets = trainer.validation_sets()?;
    let mut history = Vec::new();
    let mut best = (trainer.models.clone(), trainer.epoch(), f64::NEG_INFINITY);
    let mut wall = 0.0;
    let save = |name: &str, ck: &Checkpoint| -> Result<()> {
        match out {
            Some(dir) => ck.save(&dir.join(name)),
            None => Ok(()),
        }
    };
    let mut last_good = trainer.checkpoint();
    while trainer.epoch() < trainer.cfg.epochs {
        let t0 = Instant::now();
        let losses = match trainer.train_epoch() {
            Ok(l) => l,
            Err(e) => {
                warn!("training aborted: {e}");
                save("last.ckpt", &last_good)?;
                return Err(e);
            }
        };
        wall += t0.elapsed().as_secs_f64();
        last_good = trainer.checkpoint();
        let epoch = trainer.epoch();
        if epoch % trainer.cfg.eval_every == 0 || epoch == trainer.cfg.epochs {
            let table = trainer.evaluate(&sets)?;
            let ave = table.ave_auroc();
            info!(
                "{} epoch {epoch}: L_dis {:.4} L_neg {:.4} L_diff {:.4} val AUROC {:.4}",
                trainer.cfg.variant, losses.dis, losses.neg, losses.diff, ave
            );
            if ave > best.2 {
                best = (trainer.models.clone(), epoch, ave);
                let mut ck = Checkpoint::default();
                best.0.write_checkpoint(&mut ck);
                ck.meta.insert("epoch".into(), epoch.to_string());
                ck.meta.insert("variant".into(), trainer.cfg.variant.to_string());
                save("best.ckpt", &ck)?;
            }
            history.push(HistoryRow {
                epoch,
                step: trainer.step_index(),
                dis: losses.dis,
                neg: losses.neg,
                diff: losses.diff,
                validation: table,
                wall_seconds: wall,
            });
            if let Some(dir) = out {
                let p = dir.join("history.csv");
                std::fs::write(&p, history_csv(&history)).map_err(|e| Error::io(p, e))?;
            }
        }
        save("last.ckpt", &last_good)?;
    }
    Ok(TrainOutcome { best: best.0, best_epoch: best.1, best_auroc: best.2, last: trainer.models, history })
}

/// Per-epoch wall-clock seconds of the training loop alone (no evaluation, no
/// I/O): `warmup` untimed epochs, then `timed` timed ones.
pub fn bench_epochs(g: &Hypergraph, split: &Split, cfg: TrainConfig, warmup: usize, timed: usize) -> Result<Vec<f64>> {
    let mut t = Trainer::new(g, split, cfg)?;
    for _ in 0..warmup {
        t.train_epoch()?;
    }
    (0..timed)
        .map(|_| {
            let t0 = Instant::now();
            t.train_epoch()?;
            Ok(t0.elapsed().as_secs_f64())
        })
        .collect()
}

/// Batch-mean classifier score of every chain state, `[mean s^0, …, mean s^T]`,
/// for `batches` sub-hypergraphs drawn from `edges`.
pub fn boundary_trace(
    models: &Models,
    g: &Hypergraph,
    edges: &[usize],
    cfg: &TrainConfig,
    batches: usize,
    root: u64,
) -> Result<Vec<Vec<f64>>> {
    if cfg.variant.uses_noise_generator() {
        return Err(Error::InvalidArgument("the noise generator has no denoising chain".into()));
    }
    let mask = train_mask(g, edges);
    (0..batches)
        .map(|b| {
            let mut rng = seed::named_rng(root, "trace", b as u64);
            let sampled = sample_sub_hypergraph_with(g, edges, cfg.batch_size, &mut rng)?;
            let batch = if cfg.holdout_targets { Batch::held_out(g, &mask, sampled) } else { Batch::inline(g, sampled) };
            let v = models.discriminator.encoder.forward(&batch.sub, &batch.features)?;
            let n = batch.positives.len();
            let mut h0 = Dense::zeros(n, v.cols());
            for (i, rows) in batch.positives.iter().enumerate() {
                h0.row_mut(i).copy_from_slice(&maxmin(&v, rows)?);
            }
            let cond = if cfg.variant.uses_condition() { readout_condition(&v)? } else { vec![0.0; v.cols()] };
            let chain = denoise_forward(&models.denoiser, h0, &cond, cfg.steps)?;
            chain
                .states
                .iter()
                .map(|s| Ok(models.discriminator.classify(s)?.iter().sum::<f64>() / n as f64))
                .collect()
        })
        .collect()
}

/// Fraction of traces whose entries never decrease.
pub fn non_decreasing_fraction(traces: &[Vec<f64>]) -> f64 {
    let ok = traces.iter().filter(|t| t.windows(2).all(|w| w[1] >= w[0])).count();
    ok as f64 / traces.len().max(1) as f64
}
