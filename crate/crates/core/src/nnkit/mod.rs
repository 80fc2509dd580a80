//! Minimal dense numerical stack used by every learned component.
//!
//! Everything is `f64`. Networks are fixed-architecture MLPs with explicit
//! forward caches and hand-derived backward passes; there is no tape.

mod checkpoint;
mod dense;
pub mod gradcheck;
mod mlp;
mod optim;

pub use checkpoint::Checkpoint;
pub use dense::Dense;
pub use mlp::{Activation, ForwardCache, Layer, Mlp, MlpGrads};
pub use optim::Adam;

pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
