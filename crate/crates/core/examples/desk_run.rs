//! Desk-scale synthetic run of the full train → prune loop.
//!
//! `cargo run --release --example desk_run -- [seed]`

use siamprune::dataio::synthetic::{generate_synthetic_stream, SyntheticConfig};
use siamprune::pipeline::{arch_specs, Seeds, DEFAULT_ARCH};
use siamprune::trainer::{train, TrainConfig};
use siamprune::{adaptive_loop, Activation, Dataset32, LoopConfig, Network32};

fn main() -> siamprune::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let seeds = Seeds::derive(seed);
    let cfg = SyntheticConfig::default();
    let train_ds: Dataset32 = generate_synthetic_stream(seeds.data, 0, &cfg)?;
    let val_ds: Dataset32 = generate_synthetic_stream(seeds.data, 1, &cfg)?;
    let net = Network32::init(&arch_specs(&DEFAULT_ARCH, Activation::Relu), seeds.init)?;
    let tcfg = TrainConfig {
        learning_rate: std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(0.01),
        epochs: 20,
        batch_size: 32,
        momentum: std::env::var("MOM").ok().and_then(|s| s.parse().ok()).unwrap_or(0.9),
        shuffle_seed: seeds.shuffle,
        ..TrainConfig::default()
    };
    let pairs = train_ds.labeled_pairs();
    let val = val_ds.labeled_pairs();
    let (net, rec) = train(net, &pairs, &tcfg)?;
    println!("train losses {:?} ({:.1}s)", rec.epoch_losses, rec.wall_clock_secs);
    let lcfg = LoopConfig {
        retrain: TrainConfig { epochs: 5, ..tcfg },
        ..LoopConfig::default()
    };
    let start = std::time::Instant::now();
    let out = adaptive_loop(net.clone(), &pairs, &val, &lcfg)?;
    println!("baseline {:.2}%", out.baseline.error_percent());
    for (p, e) in out.prune_reports.iter().zip(&out.eval_reports) {
        print!("{}", p.to_text());
        println!("error {:.2}%", e.error_percent());
    }
    println!(
        "stop {:?}; neurons {} -> {}; final {:.2}% ({:.1}s)",
        out.stop,
        net.neuron_count(),
        out.network.neuron_count(),
        out.final_eval().error_percent(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
