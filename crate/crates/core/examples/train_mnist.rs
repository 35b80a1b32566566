//! Trains the three-conv MNIST network and reports test accuracy.
//!
//! `cargo run --release --example train_mnist -- [activation] [epochs] [train-limit] [checkpoint]`
//!
//! With a fourth argument the trained model is saved there, ready for the
//! `robustness_eval` example or `lprelu eval --ckpt`.

use std::time::Instant;

use lprelu::config::RunConfig;
use lprelu::train::{load_data, train};

fn main() -> lprelu::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::default();
    cfg.activation.kind = args.first().map(|s| s.parse()).transpose()?.unwrap_or(cfg.activation.kind);
    cfg.optim.epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    cfg.data.train_limit = Some(args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10_000));
    cfg.optim.schedule = vec![(cfg.optim.epochs * 3 / 4, 0.2)];
    cfg.optim.lr = 0.05;
    let data = load_data(&cfg)?;
    let start = Instant::now();
    let out = train(&cfg, &data, |row| {
        println!(
            "epoch {:>3} {:<5} loss {:.4} top1 {:.4} lr {:.4}  [{:.1}s]",
            row.epoch,
            row.split,
            row.loss,
            row.top1,
            row.lr,
            start.elapsed().as_secs_f64()
        )
    })?;
    println!("test top1 {:.4}", out.test_top1);
    if let Some(path) = args.get(3) {
        out.model.save(path)?;
        println!("saved {path}");
    }
    Ok(())
}
