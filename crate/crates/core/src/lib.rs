//! Hyperedge prediction with generated negative hyperedges.
//!
//! The crate is organised bottom-up:
//!
//! * [`hypercore`]: hypergraph storage, text I/O, splits and a planted-community generator.
//! * [`sampler`]: neighbor-expanded training batches and heuristic negatives (SNS/MNS/CNS/MIX).
//! * [`nnkit`]: dense matrices, MLPs with hand-written backward passes, Adam, gradient checking.
//! * [`discriminator`]: bipartite mean-passing encoder, max-min aggregation, MLP classifier.
//! * [`generator`]: conditional residual denoising chain, node-ID extraction, latent mode.
//! * [`trainer`]: losses, alternating optimisation and the ablation variants.
//! * [`metrics`]: AUROC, precision and per-strategy evaluation tables.

pub mod discriminator;
pub mod error;
pub mod generator;
pub mod hypercore;
pub mod metrics;
pub mod model;
pub mod nnkit;
pub mod sampler;
pub mod seed;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
