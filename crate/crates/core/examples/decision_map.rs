//! Trains the two-unit bottleneck network and maps its decision space:
//! rings of points around an origin, classified by the head alone, with a
//! straight line fitted to each class boundary.
//!
//! `cargo run --release --example decision_map -- [epochs] [out.svg]`

use lprelu::config::RunConfig;
use lprelu::decision_map::{build_fc2_net, compactness, fc2_features, fit_boundaries, render_map, sweep_features, Origin};
use lprelu::train::{load_data, train};

fn main() -> lprelu::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::default();
    cfg.net.preset = "conv3_fc2".into();
    cfg.optim.epochs = args.first().and_then(|s| s.parse().ok()).unwrap_or(10);
    cfg.optim.lr = 0.05;
    cfg.optim.schedule = vec![(cfg.optim.epochs * 3 / 4, 0.2)];
    cfg.data.train_limit = Some(10_000);
    let out = args.get(1).cloned().unwrap_or_else(|| "decision_map.svg".into());

    let data = load_data(&cfg)?;
    let trained = train(&cfg, &data, |_| {})?;
    println!("bottleneck net test top1 {:.4}", trained.test_top1);
    let head = build_fc2_net(&trained.model.net)?;
    let feats = fc2_features(&trained.model, &head, &data.test.images)?;
    println!("99% of test features within {:.2} of their centroid", compactness(&feats));

    for origin in [Origin::Zero, Origin::Centroid, Origin::Concurrence] {
        let map = sweep_features(&head, &feats, 50, 0.01, origin)?;
        let fits = fit_boundaries(&map);
        let worst = fits.iter().map(|f| f.max_residual).fold(0.0, f64::max);
        println!(
            "{origin:?}: origin ({:.2}, {:.2}), {} boundaries, worst line residual {:.3} of R, rays changing class {:.2}%, score r=1 {:.3} r=50 {:.3}",
            map.origin[0],
            map.origin[1],
            fits.len(),
            worst / map.radius(),
            100.0 * map.ray_violations(),
            map.mean_score(1),
            map.mean_score(50)
        );
        if origin == Origin::Centroid {
            let svg = render_map(&map, &fits, Some((&feats, &data.test.labels)));
            std::fs::write(&out, svg).map_err(|e| lprelu::Error::io(&out, e))?;
        }
    }
    println!("wrote {out}");
    Ok(())
}
