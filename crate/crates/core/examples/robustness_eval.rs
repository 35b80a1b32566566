//! Runs the robustness suite on saved checkpoints and writes one CSV
//! directory per model: accuracy under corruption, flip probability, feature
//! shift and activation histograms.
//!
//! `cargo run --release --example robustness_eval -- relu.lprl lp.lprl`
//!
//! Make checkpoints with `train_mnist` or `lprelu train`.

use std::path::Path;

use lprelu::corruptions::{CorruptionKind, SeverityTable};
use lprelu::data::load_mnist;
use lprelu::eval::{evaluate, Suite};
use lprelu::model::Model;

fn main() -> lprelu::Result<()> {
    let ckpts: Vec<String> = std::env::args().skip(1).collect();
    if ckpts.is_empty() {
        eprintln!("usage: robustness_eval CKPT...");
        std::process::exit(1);
    }
    let data = load_mnist(lprelu::data::data_root().join("mnist"))?;
    let suite = Suite {
        kinds: vec![CorruptionKind::GaussianNoise, CorruptionKind::GaussianBlur, CorruptionKind::Contrast],
        ..Suite::default()
    };
    let table = SeverityTable::builtin();
    for path in &ckpts {
        let model = Model::load(path)?;
        let r = evaluate(&model, &data.test, &suite, &table)?;
        println!("== {path}");
        println!("clean top1 {:.4}", r.clean_top1().unwrap_or(f64::NAN));
        for kind in &suite.kinds {
            let row: Vec<String> = (1..=5).map(|s| format!("{:.3}", r.top1(*kind, s).unwrap_or(f64::NAN))).collect();
            println!("{:<15} {}", kind.name(), row.join(" "));
        }
        for (kind, fp) in &r.flips.per_kind {
            println!("FP {kind:<15} {fp:.5}");
        }
        println!("mFP {:.5}", r.flips.mfp);
        let cs: Vec<String> = r.shift.per_severity.iter().map(|c| format!("{c:.4}")).collect();
        println!("CS by level {}", cs.join(" "));
        let m = &r.hist.mean_magnitude;
        println!("mean activation clean {:.4} LFc {:.4} HFc {:.4}", m[0], m[1], m[2]);
        let stem = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        let dir = Path::new("eval").join(stem);
        r.write_dir(&dir)?;
        println!("csv in {}", dir.display());
    }
    Ok(())
}
