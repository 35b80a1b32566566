//! Command-line front end: `train`, `eval`, `corrupt`, `augment`,
//! `map-decisions` and `plot`.
//!
//! Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 non-finite values.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::activations::ActivationKind;
use crate::config::{DatasetKind, RunConfig};
use crate::corruptions::{apply, item_rng, CorruptionKind, SeverityTable};
use crate::data::{self, Dataset};
use crate::dct::{augment_with_threshold, AugmentPolicy};
use crate::decision_map::{self, fc2_features, fit_boundaries, render_map, Origin};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Suite};
use crate::metrics::ShiftMode;
use crate::model::Model;
use crate::plot::{self, Input, PlotKind};
use crate::tensor::Tensor;
use crate::train::{self, load_data};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lprelu", version, about = "Low-pass ReLU robustness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write config.toml, model.lprl and train_log.csv.
    Train(TrainArgs),
    /// Accuracy, flip probability, feature shift and histograms of a checkpoint.
    Eval(EvalArgs),
    /// Write corrupted copies of images.
    Corrupt(CorruptArgs),
    /// Write DCT-augmented copies of images.
    Augment(AugmentArgs),
    /// Polar sweep of the two-unit bottleneck head of a checkpoint.
    MapDecisions(MapArgs),
    /// Render an SVG from CSV outputs.
    Plot(PlotArgs),
}

fn parse_af(s: &str) -> std::result::Result<ActivationKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<CorruptionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Comma-separated corruption kinds, or `all`.
#[derive(Debug, Clone)]
struct KindList(Vec<CorruptionKind>);

fn parse_kinds(s: &str) -> std::result::Result<KindList, String> {
    if s.trim() == "all" {
        return Ok(KindList(CorruptionKind::ALL.to_vec()));
    }
    s.split(',').filter(|k| !k.trim().is_empty()).map(parse_kind).collect::<std::result::Result<_, _>>().map(KindList)
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML run config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<DatasetKind>,
    /// Dataset directory, overriding the default under the data root.
    #[arg(long)]
    data_dir: Option<String>,
    /// `conv3`, `conv3_fc2` or `mlp`.
    #[arg(long)]
    net: Option<String>,
    #[arg(long, value_parser = parse_af)]
    af: Option<ActivationKind>,
    /// Activation parameters as `k=v,...`, e.g. `A=5,B=8.1,learn=all`.
    #[arg(long)]
    af_params: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Enable DCT augmentation.
    #[arg(long)]
    dct: bool,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

impl TrainArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.dataset {
            cfg.data.dataset = v;
        }
        if let Some(v) = &self.data_dir {
            cfg.data.root = v.clone();
        }
        if let Some(v) = &self.net {
            cfg.net.preset = v.clone();
        }
        if let Some(v) = self.af {
            cfg.activation.kind = v;
        }
        if let Some(v) = &self.af_params {
            cfg.activation.params = v.clone();
        }
        if let Some(v) = self.epochs {
            cfg.optim.epochs = v;
            cfg.optim.schedule.retain(|&(e, _)| e < v);
        }
        if let Some(v) = self.lr {
            cfg.optim.lr = v;
        }
        if let Some(v) = self.batch {
            cfg.optim.batch = v;
        }
        if self.train_limit.is_some() {
            cfg.data.train_limit = self.train_limit;
        }
        if self.test_limit.is_some() {
            cfg.data.test_limit = self.test_limit;
        }
        if let Some(v) = self.val_fraction {
            cfg.data.val_fraction = v;
        }
        cfg.augment.dct |= self.dct;
        if let Some(v) = self.t_min {
            cfg.augment.t_min = v;
        }
        if let Some(v) = self.t_max {
            cfg.augment.t_max = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if cfg.out.is_empty() {
            cfg.out = format!("runs/{}", cfg.activation.kind);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where evaluation images come from.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_parser = parse_dataset, default_value = "mnist")]
    dataset: DatasetKind,
    /// Dataset directory, overriding the default under the data root.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Use only the first N test images.
    #[arg(long)]
    test_limit: Option<usize>,
}

impl DataArgs {
    fn test_set(&self) -> Result<Dataset> {
        let mut cfg = RunConfig::default();
        cfg.data.dataset = self.dataset;
        if let Some(d) = &self.data_dir {
            cfg.data.root = d.to_string_lossy().into_owned();
        }
        cfg.data.test_limit = self.test_limit;
        Ok(load_data(&cfg)?.test)
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Kinds for the accuracy table, comma separated, or `all`.
    #[arg(long, value_parser = parse_kinds, default_value = "all")]
    kinds: KindList,
    #[arg(long, value_parser = parse_kinds, default_value = "gaussian_noise,shot_noise,motion_blur,zoom_blur,brightness")]
    fp_kinds: KindList,
    #[arg(long, default_value_t = 200)]
    clips: usize,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, value_parser = parse_kind, default_value = "gaussian_noise")]
    shift_kind: CorruptionKind,
    #[arg(long, default_value_t = 1000)]
    shift_images: usize,
    /// Compare all layers concatenated instead of layer by layer.
    #[arg(long)]
    concat: bool,
    #[arg(long, default_value_t = 1000)]
    hist_images: usize,
    #[arg(long, default_value_t = 3)]
    hist_severity: u8,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Severity table overriding the built-in one.
    #[arg(long)]
    severity_table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "eval")]
    out: PathBuf,
}

fn severity_table(path: &Option<PathBuf>) -> Result<SeverityTable> {
    match path {
        Some(p) => SeverityTable::from_path(p),
        None => Ok(SeverityTable::builtin()),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let test = a.data.test_set()?;
    let suite = Suite {
        seed: a.seed,
        kinds: a.kinds.0.clone(),
        fp_kinds: a.fp_kinds.0.clone(),
        clips: a.clips,
        frames: a.frames,
        shift_kind: a.shift_kind,
        shift_images: a.shift_images,
        shift_mode: if a.concat { ShiftMode::Concatenated } else { ShiftMode::PerLayer },
        hist_severity: a.hist_severity,
        hist_images: a.hist_images,
        bins: a.bins,
        ..Suite::default()
    };
    let report = evaluate(&model, &test, &suite, &severity_table(&a.severity_table)?)?;
    report.write_dir(&a.out)?;
    if let Some(c) = report.clean_top1() {
        println!("clean top1 {c:.4}");
    }
    println!("mFP {:.4}", report.flips.mfp);
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Images to transform: PNGs from a directory, or the test split of a
/// dataset directory.
#[derive(Debug, Args)]
struct ImageSource {
    /// Directory of PNG files or of dataset files.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_dataset, default_value = "mnist")]
    dataset: DatasetKind,
    /// Maximum number of images.
    #[arg(long, default_value_t = 16)]
    limit: usize,
}

impl ImageSource {
    /// `(name, C×H×W image)` pairs in name order.
    fn load(&self) -> Result<Vec<(String, Tensor)>> {
        let dir = match &self.input {
            Some(d) => d.clone(),
            None => {
                let mut cfg = RunConfig::default();
                cfg.data.dataset = self.dataset;
                cfg.data.dir()
            }
        };
        let read = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut pngs: Vec<PathBuf> = read
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        pngs.sort();
        if !pngs.is_empty() {
            return pngs
                .into_iter()
                .take(self.limit)
                .map(|p| {
                    let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
                    Ok((name, data::read_png(&p)?))
                })
                .collect();
        }
        let sets = match self.dataset {
            DatasetKind::Mnist => data::load_mnist(&dir)?,
            DatasetKind::Cifar10 => data::load_cifar10(&dir)?,
        };
        let test = sets.test.limit(Some(self.limit));
        (0..test.len())
            .map(|i| {
                let shape = test.images.shape()[1..].to_vec();
                Ok((format!("{i:05}.png"), Tensor::new(shape, test.images.item(i).to_vec())?))
            })
            .collect()
    }
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: CorruptionKind,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    severity: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    source: ImageSource,
    #[arg(long)]
    severity_table: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_corrupt(a: &CorruptArgs) -> Result<()> {
    let table = severity_table(&a.severity_table)?;
    let m = table.magnitude(a.kind, a.severity)?;
    let images = a.source.load()?;
    create_dir(&a.out)?;
    let path = a.out.join("corrupt.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["index", "file", "kind", "severity", "magnitude"])?;
    for (i, (name, img)) in images.iter().enumerate() {
        let out = apply(img, a.kind, m, &mut item_rng(a.seed, i))?;
        data::write_png(&out, &a.out.join(name))?;
        w.write_record([i.to_string(), name.clone(), a.kind.name().into(), a.severity.to_string(), format!("{m}")])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("wrote {} images to {}", images.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// DCT coefficient dropping, the only augmentation available.
    #[arg(long, required = true)]
    dct: bool,
    #[arg(long, default_value_t = 0.0)]
    t_min: f64,
    #[arg(long, default_value_t = 0.5)]
    t_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epoch whose random thresholds are reproduced.
    #[arg(long, default_value_t = 0)]
    epoch: usize,
    /// Instead of random draws, write every image at this many evenly
    /// spaced thresholds from t_min to t_max.
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    source: ImageSource,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_augment(a: &AugmentArgs) -> Result<()> {
    let policy = AugmentPolicy {
        t_min: a.t_min,
        t_max: a.t_max,
        seed: a.seed,
    };
    policy.validate()?;
    if a.steps == Some(0) {
        return Err(Error::InvalidArgument("--steps must be positive".into()));
    }
    let images = a.source.load()?;
    create_dir(&a.out)?;
    let path = a.out.join("augment.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["index", "t", "file"])?;
    let mut written = 0;
    for (i, (name, img)) in images.iter().enumerate() {
        let stem = name.trim_end_matches(".png");
        let ts: Vec<f64> = match a.steps {
            Some(1) => vec![a.t_min],
            Some(k) => (0..k).map(|j| a.t_min + (a.t_max - a.t_min) * j as f64 / (k - 1) as f64).collect(),
            None => vec![policy.draw(&mut policy.rng_for(a.epoch, i))],
        };
        for (j, &t) in ts.iter().enumerate() {
            let file = if a.steps.is_some() { format!("{stem}_{j:02}.png") } else { format!("{stem}.png") };
            data::write_png(&augment_with_threshold(img, t, true)?, &a.out.join(&file))?;
            w.write_record([i.to_string(), format!("{t:.6}"), file])?;
            written += 1;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("wrote {written} images to {}", a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
struct MapArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Number of rings.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = decision_map::DEFAULT_DTHETA)]
    dtheta: f64,
    /// Ring spacing in feature units, or `auto` to reach the 99th-percentile
    /// feature radius at ring n.
    #[arg(long, default_value = "1")]
    unit: String,
    /// `zero`, `centroid` or `concurrence`.
    #[arg(long, default_value = "zero")]
    origin: String,
    /// Overlay bottleneck features of this many test images.
    #[arg(long, default_value_t = 0)]
    scatter: usize,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "map.svg")]
    out: PathBuf,
    #[arg(long, default_value = "map.csv")]
    csv: PathBuf,
    /// Optional CSV of fitted boundary lines.
    #[arg(long)]
    fits: Option<PathBuf>,
}

fn cmd_map(a: &MapArgs) -> Result<()> {
    let origin: Origin = a.origin.parse()?;
    let auto = a.unit == "auto";
    let unit = if auto {
        None
    } else {
        Some(
            a.unit
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("--unit `{}` is neither a number nor auto", a.unit)))?,
        )
    };
    let model = Model::load(&a.ckpt)?;
    let head = decision_map::build_fc2_net(&model.net)?;
    let needs_data = auto || origin != Origin::Zero || a.scatter > 0;
    let test = if needs_data {
        let mut t = a.data.test_set()?;
        if a.scatter > 0 && a.data.test_limit.is_none() {
            t = t.limit(Some(a.scatter.max(1000)));
        }
        Some(t)
    } else {
        None
    };
    let feats = match &test {
        Some(t) => Some(fc2_features(&model, &head, &t.images)?),
        None => None,
    };
    let map = match (&feats, unit, origin) {
        (_, Some(u), Origin::Zero) => decision_map::sweep(&head, a.n, a.dtheta, [0.0, 0.0], u)?,
        (Some(f), None, o) => decision_map::sweep_features(&head, f, a.n, a.dtheta, o)?,
        (Some(f), Some(u), o) => {
            let c = decision_map::centroid(f);
            let first = decision_map::sweep(&head, a.n, a.dtheta, c, u)?;
            let center = match o {
                Origin::Concurrence => decision_map::concurrence_point(&fit_boundaries(&first)).unwrap_or(c),
                _ => c,
            };
            decision_map::sweep(&head, a.n, a.dtheta, center, u)?
        }
        (None, _, _) => unreachable!("features are loaded whenever the sweep needs them"),
    };
    let fits = fit_boundaries(&map);
    let scatter = match (&feats, &test) {
        (Some(f), Some(t)) if a.scatter > 0 => {
            let k = a.scatter.min(f.batch());
            let idx: Vec<usize> = (0..k).collect();
            Some((f.select(&idx), t.labels[..k].to_vec()))
        }
        _ => None,
    };
    let svg = render_map(&map, &fits, scatter.as_ref().map(|(f, l)| (f, l.as_slice())));
    for p in [&a.out, &a.csv] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
    }
    std::fs::write(&a.out, svg).map_err(|e| Error::io(&a.out, e))?;
    let file = std::fs::File::create(&a.csv).map_err(|e| Error::io(&a.csv, e))?;
    map.write_csv(std::io::BufWriter::new(file))?;
    if let Some(p) = &a.fits {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["class_a", "class_b", "points", "px", "py", "dx", "dy", "max_residual"])?;
        for f in &fits {
            w.write_record([
                f.class_a.to_string(),
                f.class_b.to_string(),
                f.points.to_string(),
                format!("{:.9}", f.point[0]),
                format!("{:.9}", f.point[1]),
                format!("{:.9}", f.direction[0]),
                format!("{:.9}", f.direction[1]),
                format!("{:.9}", f.max_residual),
            ])?;
        }
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    println!(
        "rings {} radius {:.3} ray violations {:.4} boundaries {}",
        map.n,
        map.radius(),
        map.ray_violations(),
        fits.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// hist, accuracy, sweep, shift, depth, fp, map or contact.
    #[arg(long)]
    kind: String,
    /// Input CSV; repeat to overlay several runs.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Legend label per input, in the same order.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let kind: PlotKind = a.kind.parse()?;
    if !a.labels.is_empty() && a.labels.len() != a.inputs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} inputs",
            a.labels.len(),
            a.inputs.len()
        )));
    }
    let inputs: Vec<Input> = a
        .inputs
        .iter()
        .enumerate()
        .map(|(i, p)| Input {
            label: a.labels.get(i).cloned().unwrap_or_else(|| {
                p.parent()
                    .and_then(|d| d.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            }),
            path: p.clone(),
        })
        .collect();
    let out_dir = a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let svg = plot::render(kind, &inputs, Some(out_dir))?;
    create_dir(out_dir)?;
    std::fs::write(&a.out, svg).map_err(|e| Error::io(&a.out, e))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.config()?;
    let data = load_data(&cfg)?;
    let outcome = train::train(&cfg, &data, |r| {
        eprintln!("epoch {:>3} {:<5} loss {:.4} top1 {:.4} lr {:.5}", r.epoch, r.split, r.loss, r.top1, r.lr)
    })?;
    let dir = PathBuf::from(&cfg.out);
    train::save_run(&dir, &cfg, &outcome)?;
    println!("test top1 {:.4}", outcome.test_top1);
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_) => EXIT_NUMERIC,
        Error::Unknown { .. } | Error::InvalidArgument(_) | Error::Config(_) | Error::InvalidActivation { .. } => {
            EXIT_USAGE
        }
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Augment(a) => cmd_augment(a),
        Command::MapDecisions(a) => cmd_map(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_activation_is_a_usage_error() {
        assert_eq!(run(["lprelu", "train", "--af", "foo"]), EXIT_USAGE);
        assert_eq!(run(["lprelu", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["lprelu", "corrupt", "--kind", "gaussian_noise", "--severity", "9", "--out", "x"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run(["lprelu", "--help"]), EXIT_OK);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 4\n[optim]\nepochs = 9\nlr = 0.2\n").unwrap();
        let cli = Cli::try_parse_from([
            "lprelu",
            "train",
            "--config",
            p.to_str().unwrap(),
            "--epochs",
            "3",
            "--af",
            "lp_relu2",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let cfg = a.config().unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.optim.epochs, 3);
        assert_eq!(cfg.optim.lr, 0.2);
        assert_eq!(cfg.activation.kind, ActivationKind::LpRelu2);
        assert!(cfg.optim.schedule.iter().all(|&(e, _)| e < 3));
    }

    #[test]
    fn missing_data_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("none.lprl");
        assert_eq!(run(["lprelu", "eval", "--ckpt", ckpt.to_str().unwrap()]), EXIT_DATA);
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::NonFinite("x".into())), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Empty("x")), EXIT_DATA);
    }
}
