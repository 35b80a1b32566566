//! Renders comparison charts from evaluation directories written by
//! `robustness_eval` or `lprelu eval`.
//!
//! `cargo run --release --example plot_results -- eval/relu eval/lp`

use std::path::{Path, PathBuf};

use lprelu::plot::{render, Input, PlotKind};

fn main() -> lprelu::Result<()> {
    let dirs: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if dirs.is_empty() {
        eprintln!("usage: plot_results EVAL_DIR...");
        std::process::exit(1);
    }
    let out = Path::new("plots");
    std::fs::create_dir_all(out).map_err(|e| lprelu::Error::io(out, e))?;
    let charts = [
        (PlotKind::Accuracy, "metrics.csv", "accuracy"),
        (PlotKind::Fp, "fp.csv", "fp"),
        (PlotKind::Shift, "shift.csv", "shift"),
        (PlotKind::Depth, "shift.csv", "depth"),
        (PlotKind::Hist, "hist.csv", "hist"),
    ];
    for (kind, csv, name) in charts {
        let inputs: Vec<Input> = dirs
            .iter()
            .map(|d| Input {
                label: d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                path: d.join(csv),
            })
            .collect();
        let svg = render(kind, &inputs, Some(out))?;
        let path = out.join(format!("{name}.svg"));
        std::fs::write(&path, svg).map_err(|e| lprelu::Error::io(&path, e))?;
        println!("{}", path.display());
    }
    Ok(())
}
