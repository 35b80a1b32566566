//! Robustness evaluation of a trained model: accuracy under corruption,
//! flip probability on perturbation clips, feature shift and activation
//! histograms, with their CSV tables.

use std::io::Write;
use std::path::Path;

use crate::corruptions::{
    apply, corrupt_batch, item_rng, make_sequence, CorruptionKind, CorruptionSpec, SeverityTable, SEVERITY_LEVELS,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, activation_histogram, feature_shift, flip_probability, FlipReport, Histogram, ShiftMode, ShiftReport};
use crate::model::Model;
use crate::tensor::Tensor;

/// Which analyses to run and on how much data.
#[derive(Debug, Clone)]
pub struct Suite {
    pub seed: u64,
    /// Kinds for the accuracy table, each at every severity.
    pub kinds: Vec<CorruptionKind>,
    pub fp_kinds: Vec<CorruptionKind>,
    pub clips: usize,
    pub frames: usize,
    pub shift_kind: CorruptionKind,
    pub shift_images: usize,
    pub shift_mode: ShiftMode,
    pub hist_lfc: Vec<CorruptionKind>,
    pub hist_hfc: Vec<CorruptionKind>,
    pub hist_severity: u8,
    pub hist_images: usize,
    pub bins: usize,
}

impl Default for Suite {
    fn default() -> Self {
        use CorruptionKind::*;
        Self {
            seed: 0,
            kinds: CorruptionKind::ALL.to_vec(),
            fp_kinds: vec![GaussianNoise, ShotNoise, MotionBlur, ZoomBlur, Brightness],
            clips: 200,
            frames: 30,
            shift_kind: GaussianNoise,
            shift_images: 1000,
            shift_mode: ShiftMode::PerLayer,
            hist_lfc: vec![GaussianBlur, DefocusBlur, MotionBlur, ZoomBlur],
            hist_hfc: vec![GaussianNoise, ShotNoise, ImpulseNoise, SpeckleNoise],
            hist_severity: 3,
            hist_images: 1000,
            bins: 100,
        }
    }
}

impl Suite {
    pub fn validate(&self) -> Result<()> {
        if self.fp_kinds.is_empty() || self.hist_lfc.is_empty() || self.hist_hfc.is_empty() {
            return Err(Error::InvalidArgument("suite needs FP kinds and both histogram sets".into()));
        }
        if self.clips == 0 || self.frames < 2 || self.shift_images == 0 || self.hist_images == 0 || self.bins == 0 {
            return Err(Error::InvalidArgument(
                "clips, shift and histogram images and bins must be positive, frames at least 2".into(),
            ));
        }
        if !(1..=SEVERITY_LEVELS as u8).contains(&self.hist_severity) {
            return Err(Error::InvalidArgument(format!("histogram severity {} outside 1..=5", self.hist_severity)));
        }
        Ok(())
    }

    // Separate streams per analysis so changing one never moves another.
    fn seed_for(&self, tag: u64, kind: CorruptionKind) -> u64 {
        let k = CorruptionKind::ALL.iter().position(|&c| c == kind).unwrap_or(0) as u64;
        self.seed ^ (tag << 40) ^ (k << 32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    /// `None` for the clean test set.
    pub kind: Option<CorruptionKind>,
    /// 0 for the clean row.
    pub severity: u8,
    pub top1: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub accuracy: Vec<AccuracyRow>,
    pub flips: FlipReport,
    pub shift: ShiftReport,
    pub hist: Histogram,
}

impl Report {
    pub fn top1(&self, kind: CorruptionKind, severity: u8) -> Option<f64> {
        self.accuracy
            .iter()
            .find(|r| r.kind == Some(kind) && r.severity == severity)
            .map(|r| r.top1)
    }

    pub fn clean_top1(&self) -> Option<f64> {
        self.accuracy.iter().find(|r| r.kind.is_none()).map(|r| r.top1)
    }

    /// Writes `metrics.csv`, `fp.csv`, `shift.csv`, `hist.csv` and
    /// `magnitude.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files: [(&str, fn(&Report, &mut dyn Write) -> Result<()>); 5] = [
            ("metrics.csv", |r, w| r.write_metrics(w)),
            ("fp.csv", |r, w| r.write_fp(w)),
            ("shift.csv", |r, w| r.write_shift(w)),
            ("hist.csv", |r, w| r.write_hist(w)),
            ("magnitude.csv", |r, w| r.write_magnitude(w)),
        ];
        for (name, write) in files {
            let path = dir.join(name);
            let mut buf = Vec::new();
            write(self, &mut buf)?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn write_metrics(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "severity", "top1"])?;
        for r in &self.accuracy {
            let kind = r.kind.map_or("clean", |k| k.name());
            w.write_record([kind.to_string(), r.severity.to_string(), format!("{:.6}", r.top1)])?;
        }
        w.flush().map_err(|e| Error::io("metrics.csv", e))
    }

    pub fn write_fp(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "FP", "mFP"])?;
        for (kind, fp) in &self.flips.per_kind {
            w.write_record([kind.clone(), format!("{fp:.6}"), format!("{:.6}", self.flips.mfp)])?;
        }
        w.flush().map_err(|e| Error::io("fp.csv", e))
    }

    /// One row per level with `depth` = `all`, then one per depth group.
    pub fn write_shift(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "depth", "CS"])?;
        for (level, cs) in self.shift.per_severity.iter().enumerate() {
            w.write_record([(level + 1).to_string(), "all".into(), format!("{cs:.6}")])?;
        }
        for (level, groups) in self.shift.per_depth.iter().enumerate() {
            for (g, cs) in groups.iter().enumerate() {
                w.write_record([(level + 1).to_string(), (g + 1).to_string(), format!("{cs:.6}")])?;
            }
        }
        w.flush().map_err(|e| Error::io("shift.csv", e))
    }

    pub fn write_hist(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count_clean", "count_lfc", "count_hfc"])?;
        let h = &self.hist;
        for b in 0..h.edges.len() - 1 {
            w.write_record([
                format!("{:.6}", h.edges[b]),
                format!("{:.6}", h.edges[b + 1]),
                format!("{:.3}", h.counts[0][b]),
                format!("{:.3}", h.counts[1][b]),
                format!("{:.3}", h.counts[2][b]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("hist.csv", e))
    }

    pub fn write_magnitude(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["set", "mean_magnitude"])?;
        for (set, m) in ["clean", "lfc", "hfc"].iter().zip(&self.hist.mean_magnitude) {
            w.write_record([set.to_string(), format!("{m:.6}")])?;
        }
        w.flush().map_err(|e| Error::io("magnitude.csv", e))
    }
}

/// Top-1 on the clean set, then on every `kind` at severities 1..=5.
pub fn accuracy_table(
    model: &Model,
    test: &Dataset,
    kinds: &[CorruptionKind],
    table: &SeverityTable,
    seed: u64,
) -> Result<Vec<AccuracyRow>> {
    let mut rows = vec![AccuracyRow {
        kind: None,
        severity: 0,
        top1: accuracy(&model.predict(&test.images)?, &test.labels)?,
    }];
    for &kind in kinds {
        for severity in 1..=SEVERITY_LEVELS as u8 {
            let x = corrupt_batch(&test.images, &CorruptionSpec::new(kind, severity, seed)?, table)?;
            rows.push(AccuracyRow {
                kind: Some(kind),
                severity,
                top1: accuracy(&model.predict(&x)?, &test.labels)?,
            });
        }
    }
    Ok(rows)
}

/// Flip probability per kind over `clips` clips of `frames` frames made
/// from the first test images.
pub fn flip_report(
    model: &Model,
    images: &Tensor,
    kinds: &[(CorruptionKind, u64)],
    clips: usize,
    frames: usize,
    table: &SeverityTable,
) -> Result<FlipReport> {
    let clips = clips.min(images.batch());
    let mut per_kind = Vec::new();
    for &(kind, seed) in kinds {
        let seqs = (0..clips)
            .map(|i| {
                let img = Tensor::new(images.shape()[1..].to_vec(), images.item(i).to_vec())?;
                make_sequence(&img, kind, frames, table, seed.wrapping_add(i as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        per_kind.push((kind.name().to_string(), flip_probability(&seqs, |x| model.predict(x))?));
    }
    FlipReport::new(per_kind)
}

/// Image `i` gets `kinds[i % kinds.len()]` at `severity`.
pub fn mixed_corruption(
    images: &Tensor,
    kinds: &[CorruptionKind],
    severity: u8,
    table: &SeverityTable,
    seed: u64,
) -> Result<Tensor> {
    if kinds.is_empty() {
        return Err(Error::Empty("corruption kinds"));
    }
    let s = images.shape();
    let mut out = Vec::with_capacity(images.len());
    for i in 0..images.batch() {
        let kind = kinds[i % kinds.len()];
        let img = Tensor::new(s[1..].to_vec(), images.item(i).to_vec())?;
        let m = table.magnitude(kind, severity)?;
        out.extend(apply(&img, kind, m, &mut item_rng(seed, i))?.into_data());
    }
    Tensor::new(s.to_vec(), out)
}

fn head(images: &Tensor, n: usize) -> Tensor {
    let idx: Vec<usize> = (0..n.min(images.batch())).collect();
    images.select(&idx)
}

/// Runs every analysis of `suite` on `test`.
pub fn evaluate(model: &Model, test: &Dataset, suite: &Suite, table: &SeverityTable) -> Result<Report> {
    suite.validate()?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let accuracy = accuracy_table(model, test, &suite.kinds, table, suite.seed)?;
    if accuracy.iter().any(|r| !r.top1.is_finite()) {
        return Err(Error::NonFinite("accuracy".into()));
    }

    let fp_kinds: Vec<(CorruptionKind, u64)> = suite.fp_kinds.iter().map(|&k| (k, suite.seed_for(1, k))).collect();
    let flips = flip_report(model, &test.images, &fp_kinds, suite.clips, suite.frames, table)?;

    let clean = head(&test.images, suite.shift_images);
    let corrupted = (1..=SEVERITY_LEVELS as u8)
        .map(|s| {
            let spec = CorruptionSpec::new(suite.shift_kind, s, suite.seed_for(2, suite.shift_kind))?;
            corrupt_batch(&clean, &spec, table)
        })
        .collect::<Result<Vec<_>>>()?;
    let shift = feature_shift(model, &clean, &corrupted, suite.shift_mode)?;
    if shift.per_severity.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature shift".into()));
    }

    let clean = head(&test.images, suite.hist_images);
    let lfc = mixed_corruption(&clean, &suite.hist_lfc, suite.hist_severity, table, suite.seed ^ (3 << 40))?;
    let hfc = mixed_corruption(&clean, &suite.hist_hfc, suite.hist_severity, table, suite.seed ^ (4 << 40))?;
    let hist = activation_histogram(model, &[&clean, &lfc, &hfc], suite.bins)?;

    Ok(Report {
        accuracy,
        flips,
        shift,
        hist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{ActivationKind, ActivationSpec};
    use crate::data::Split;
    use crate::network::{Network, Preset, Widths};

    fn tiny() -> (Model, Dataset) {
        let net = Network::preset(
            Preset::Conv3,
            ActivationSpec::init(ActivationKind::Relu),
            [1, 28, 28],
            10,
            Widths {
                conv: [2, 2, 2],
                hidden: 4,
            },
            5,
        )
        .unwrap();
        let model = Model::new(net, Tensor::from_vec(vec![0.1])).unwrap();
        let n = 12;
        let data: Vec<f64> = (0..n * 784).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let images = Tensor::new([n, 1, 28, 28], data).unwrap();
        let ds = Dataset::new(images, (0..n).map(|i| i % 10).collect(), 10, Split::Test).unwrap();
        (model, ds)
    }

    fn small_suite() -> Suite {
        Suite {
            kinds: vec![CorruptionKind::GaussianNoise],
            fp_kinds: vec![CorruptionKind::GaussianNoise, CorruptionKind::Contrast],
            clips: 3,
            frames: 4,
            shift_images: 5,
            hist_images: 6,
            bins: 8,
            ..Suite::default()
        }
    }

    #[test]
    fn report_tables_have_expected_shape() {
        let (model, ds) = tiny();
        let r = evaluate(&model, &ds, &small_suite(), &SeverityTable::builtin()).unwrap();
        assert_eq!(r.accuracy.len(), 6);
        assert_eq!(r.shift.per_severity.len(), 6);
        assert_eq!(r.shift.per_severity[0], 1.0);
        assert_eq!(r.flips.per_kind.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        r.write_dir(dir.path()).unwrap();
        let hist = std::fs::read_to_string(dir.path().join("hist.csv")).unwrap();
        assert_eq!(hist.lines().count(), 9);
        assert!(hist.starts_with("bin_lo,bin_hi,count_clean,count_lfc,count_hfc\n"));
        let shift = std::fs::read_to_string(dir.path().join("shift.csv")).unwrap();
        assert!(shift.contains("\n1,all,1.000000\n"));
    }

    #[test]
    fn evaluation_is_repeatable() {
        let (model, ds) = tiny();
        let suite = small_suite();
        let table = SeverityTable::builtin();
        let a = evaluate(&model, &ds, &suite, &table).unwrap();
        let b = evaluate(&model, &ds, &suite, &table).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_metrics(&mut ba).unwrap();
        a.write_fp(&mut ba).unwrap();
        a.write_shift(&mut ba).unwrap();
        b.write_metrics(&mut bb).unwrap();
        b.write_fp(&mut bb).unwrap();
        b.write_shift(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn mixed_corruption_cycles_kinds() {
        let (_, ds) = tiny();
        let table = SeverityTable::builtin();
        let kinds = [CorruptionKind::Brightness, CorruptionKind::Contrast];
        let x = mixed_corruption(&ds.images, &kinds, 2, &table, 1).unwrap();
        let img = Tensor::new([1, 28, 28], ds.images.item(2).to_vec()).unwrap();
        let want = apply(&img, kinds[0], table.magnitude(kinds[0], 2).unwrap(), &mut item_rng(1, 2)).unwrap();
        assert_eq!(x.item(2), want.data());
    }
}
