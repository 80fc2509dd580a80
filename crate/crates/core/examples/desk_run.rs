//! Train one variant on the desk-scale synthetic task and print test metrics.
//!
//! `cargo run --release --example desk_run -- [key=value ...]`

use std::time::Instant;

use hyperneg::hypercore::{split_dataset, synth_hypergraph};
use hyperneg::metrics::evaluate;
use hyperneg::sampler::NegStrategy;
use hyperneg::trainer::{boundary_trace, non_decreasing_fraction, train, TrainConfig};

fn main() -> hyperneg::Result<()> {
    env_logger::init();
    let mut cfg = TrainConfig::default();
    let mut data_seed = 0u64;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("key=value");
        if k == "data_seed" {
            data_seed = v.parse().expect("integer");
        } else {
            cfg.set(k, v)?;
        }
    }
    let g = synth_hypergraph(500, 400, (3, 6), 8, data_seed)?;
    let split = split_dataset(&g, data_seed)?;
    let t0 = Instant::now();
    let out = train(&g, &split, cfg.clone(), None)?;
    let secs = t0.elapsed().as_secs_f64();
    let table = evaluate(&out.best.discriminator, &g, &split.train, &split.test, &NegStrategy::ALL, 99, cfg.batch_size)?;
    let traces = boundary_trace(&out.best, &g, &split.train, &cfg, 100, 7).unwrap_or_default();
    print!("{} seed {} best epoch {} ({secs:.1}s):", cfg.variant, cfg.seed, out.best_epoch);
    for r in &table.rows {
        print!(" {} {:.3}", r.strategy, r.auroc);
    }
    println!(" trend {:.2}", non_decreasing_fraction(&traces));
    Ok(())
}
