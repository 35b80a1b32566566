//! SVG figures rendered from the CSV tables written by evaluation, decision
//! mapping and augmentation. Nothing here touches a model.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::decision_map::{fit_boundaries, render_map, DecisionMap, Sample, TripPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `hist.csv`: activation magnitude histograms.
    Hist,
    /// `metrics.csv`: top-1 against severity per kind.
    Accuracy,
    /// Several `metrics.csv`, one per parameter value given as its label.
    Sweep,
    /// `shift.csv`: CS against severity level.
    Shift,
    /// `shift.csv`: CS against depth group at the highest level.
    Depth,
    /// `fp.csv`: FP bars per kind plus mFP.
    Fp,
    /// `map.csv` from a decision sweep.
    Map,
    /// `augment.csv`: grid of augmented images.
    Contact,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "hist" | "histogram" => PlotKind::Hist,
            "accuracy" | "metrics" => PlotKind::Accuracy,
            "sweep" => PlotKind::Sweep,
            "shift" | "cs" => PlotKind::Shift,
            "depth" => PlotKind::Depth,
            "fp" | "mfp" => PlotKind::Fp,
            "map" => PlotKind::Map,
            "contact" | "augment" => PlotKind::Contact,
            _ => {
                return Err(Error::Unknown {
                    what: "plot kind",
                    name: s.to_string(),
                })
            }
        })
    }
}

/// One CSV input and the legend label of its series.
#[derive(Debug, Clone)]
pub struct Input {
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    path: PathBuf,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, 0, format!("{other:?}")),
        })?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self {
            header,
            rows,
            path: path.to_path_buf(),
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(&self.path, 0, format!("missing column `{name}`")))
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        let s = &self.rows[row][col];
        s.parse()
            .map_err(|_| Error::format(&self.path, row as u64 + 2, format!("`{s}` is not a number")))
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    w: f64,
    h: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if (b - a).abs() < 1e-12 { (a - 0.5, b + 0.5) } else { (a, b) };
        Self {
            w: 640.0,
            h: 420.0,
            left: 70.0,
            right: 160.0,
            top: 40.0,
            bottom: 55.0,
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * (self.w - self.left - self.right)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - self.bottom - (y - self.y.0) / (self.y.1 - self.y.0) * (self.h - self.top - self.bottom)
    }

    fn open(&self, title: &str, xlabel: &str, ylabel: &str, xticks: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.w,
            h = self.h
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (self.left + self.w - self.right) / 2.0,
            esc(title)
        );
        let (x0, x1, y0, y1) = (self.left, self.w - self.right, self.h - self.bottom, self.top);
        let _ = writeln!(s, r#"<g stroke="black" fill="none"><path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}"/></g>"#);
        for t in ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        if xticks {
            for t in ticks(self.x.0, self.x.1) {
                let x = self.px(t);
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    y0 + 4.0,
                    y0 + 18.0,
                    fmt_tick(t)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            self.h - 12.0,
            esc(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            esc(ylabel)
        );
        s
    }

    fn legend(&self, s: &mut String, labels: &[String]) {
        let x = self.w - self.right + 14.0;
        for (i, l) in labels.iter().enumerate() {
            let y = self.top + 10.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<g class="legend-entry"><rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
                y - 10.0,
                PALETTE[i % PALETTE.len()],
                x + 18.0,
                y,
                esc(l)
            );
        }
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    ((x0, x1), (y0, y1))
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], y_from_zero: bool) -> String {
    let (xr, (mut y0, y1)) = bounds(series);
    if y_from_zero {
        y0 = y0.min(0.0);
    }
    let margin = 0.05 * (y1 - y0).max(1e-9);
    let f = Frame::new(xr, (if y_from_zero { y0 } else { y0 - margin }, y1 + margin));
    let mut s = f.open(title, xlabel, ylabel, true);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = ser
            .points
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| format!("{}{:.2},{:.2}", if k == 0 { 'M' } else { 'L' }, f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, d.join(" "));
        for &(x, y) in &ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
    }
    f.legend(&mut s, &series.iter().map(|x| x.label.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

fn bar_chart(title: &str, ylabel: &str, categories: &[String], series: &[Series]) -> String {
    let ymax = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(0.0, f64::max);
    let f = Frame::new((0.0, categories.len() as f64), (0.0, ymax * 1.1));
    let mut s = f.open(title, "", ylabel, false);
    let group = 0.8 / series.len().max(1) as f64;
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in &ser.points {
            let xl = f.px(x + 0.1 + group * i as f64);
            let xr = f.px(x + 0.1 + group * (i + 1) as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{xl:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                f.py(y),
                xr - xl,
                f.py(0.0) - f.py(y)
            );
        }
    }
    for (k, c) in categories.iter().enumerate() {
        let x = f.px(k as f64 + 0.5);
        let y = f.h - f.bottom + 14.0;
        let _ = writeln!(
            s,
            r#"<text transform="translate({x:.1},{y:.1}) rotate(-25)" text-anchor="end" font-size="10">{}</text>"#,
            esc(c)
        );
    }
    f.legend(&mut s, &series.iter().map(|x| x.label.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

fn hist(inputs: &[Input]) -> Result<String> {
    let mut series = Vec::new();
    for inp in inputs {
        let t = Table::read(&inp.path)?;
        let (lo, hi) = (t.col("bin_lo")?, t.col("bin_hi")?);
        for (set, name) in [("count_clean", "clean"), ("count_lfc", "LFc"), ("count_hfc", "HFc")] {
            let c = t.col(set)?;
            let points = (0..t.rows.len())
                .map(|r| Ok((0.5 * (t.num(r, lo)? + t.num(r, hi)?), t.num(r, c)?)))
                .collect::<Result<Vec<_>>>()?;
            series.push(Series {
                label: prefixed(&inp.label, name, inputs.len()),
                points,
            });
        }
    }
    Ok(line_chart("Activation magnitude", "magnitude", "count per layer", &series, true))
}

fn prefixed(label: &str, name: &str, inputs: usize) -> String {
    if inputs > 1 || !label.is_empty() {
        format!("{label} {name}").trim().to_string()
    } else {
        name.to_string()
    }
}

/// `kind -> [(severity, top1)]` in file order, the clean row as severity 0
/// of every kind.
fn metrics_by_kind(t: &Table) -> Result<BTreeMap<String, Vec<(f64, f64)>>> {
    let (k, s, a) = (t.col("kind")?, t.col("severity")?, t.col("top1")?);
    let mut clean = None;
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let (sev, top1) = (t.num(r, s)?, t.num(r, a)?);
        if t.rows[r][k] == "clean" {
            clean = Some(top1);
        } else {
            out.entry(t.rows[r][k].clone()).or_default().push((sev, top1));
        }
    }
    if let Some(c) = clean {
        for v in out.values_mut() {
            v.insert(0, (0.0, c));
        }
    }
    Ok(out)
}

fn accuracy(inputs: &[Input]) -> Result<String> {
    let mut series = Vec::new();
    for inp in inputs {
        for (kind, points) in metrics_by_kind(&Table::read(&inp.path)?)? {
            series.push(Series {
                label: prefixed(&inp.label, &kind, inputs.len()),
                points,
            });
        }
    }
    Ok(line_chart("Top-1 under corruption", "severity", "top-1", &series, false))
}

/// Clean and mean corrupted top-1 against the numeric input labels.
fn sweep(inputs: &[Input]) -> Result<String> {
    let mut clean = Vec::new();
    let mut corrupted = Vec::new();
    for inp in inputs {
        let x: f64 = inp
            .label
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("sweep label `{}` is not a number", inp.label)))?;
        let t = Table::read(&inp.path)?;
        let (k, a) = (t.col("kind")?, t.col("top1")?);
        let mut acc = Vec::new();
        for r in 0..t.rows.len() {
            if t.rows[r][k] == "clean" {
                clean.push((x, t.num(r, a)?));
            } else {
                acc.push(t.num(r, a)?);
            }
        }
        if !acc.is_empty() {
            corrupted.push((x, acc.iter().sum::<f64>() / acc.len() as f64));
        }
    }
    let by_x = |v: &mut Vec<(f64, f64)>| v.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_x(&mut clean);
    by_x(&mut corrupted);
    let series = [
        Series {
            label: "clean".into(),
            points: clean,
        },
        Series {
            label: "corrupted".into(),
            points: corrupted,
        },
    ];
    Ok(line_chart("Parameter sweep", "parameter value", "top-1", &series, false))
}

fn shift_rows(t: &Table) -> Result<Vec<(usize, String, f64)>> {
    let (l, d, c) = (t.col("level")?, t.col("depth")?, t.col("CS")?);
    (0..t.rows.len())
        .map(|r| Ok((t.num(r, l)? as usize, t.rows[r][d].clone(), t.num(r, c)?)))
        .collect()
}

fn shift(inputs: &[Input]) -> Result<String> {
    let mut series = Vec::new();
    for inp in inputs {
        let points = shift_rows(&Table::read(&inp.path)?)?
            .into_iter()
            .filter(|r| r.1 == "all")
            .map(|(l, _, cs)| (l as f64, cs))
            .collect();
        series.push(Series {
            label: inp.label.clone(),
            points,
        });
    }
    Ok(line_chart("Feature similarity", "severity level", "cosine similarity", &series, false))
}

fn depth(inputs: &[Input]) -> Result<String> {
    let mut series = Vec::new();
    for inp in inputs {
        let rows = shift_rows(&Table::read(&inp.path)?)?;
        let top = rows.iter().map(|r| r.0).max().unwrap_or(1);
        let points = rows
            .into_iter()
            .filter(|r| r.0 == top && r.1 != "all")
            .map(|(_, d, cs)| Ok((d.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("depth `{d}`")))?, cs)))
            .collect::<Result<Vec<_>>>()?;
        series.push(Series {
            label: inp.label.clone(),
            points,
        });
    }
    Ok(line_chart("Feature similarity by depth", "depth group", "cosine similarity", &series, false))
}

fn fp(inputs: &[Input]) -> Result<String> {
    let mut categories: Vec<String> = Vec::new();
    let mut tables = Vec::new();
    for inp in inputs {
        let t = Table::read(&inp.path)?;
        let (k, f, m) = (t.col("kind")?, t.col("FP")?, t.col("mFP")?);
        let mut vals = BTreeMap::new();
        for r in 0..t.rows.len() {
            vals.insert(t.rows[r][k].clone(), t.num(r, f)?);
            vals.insert("mFP".to_string(), t.num(r, m)?);
            if !categories.contains(&t.rows[r][k]) {
                categories.push(t.rows[r][k].clone());
            }
        }
        tables.push((inp.label.clone(), vals));
    }
    categories.push("mFP".into());
    let series: Vec<Series> = tables
        .into_iter()
        .map(|(label, vals)| Series {
            label,
            points: categories
                .iter()
                .enumerate()
                .filter_map(|(i, c)| vals.get(c).map(|&v| (i as f64, v)))
                .collect(),
        })
        .collect();
    Ok(bar_chart("Flip probability", "FP", &categories, &series))
}

/// Rebuilds a map from its CSV. Trip points are placed halfway between
/// neighbouring samples of different class on the same ring.
pub fn map_from_csv(path: &Path) -> Result<DecisionMap> {
    let t = Table::read(path)?;
    let cols = ["r", "theta", "x", "y", "class", "score"].map(|c| t.col(c));
    let [r, th, x, y, c, sc] = cols;
    let (r, th, x, y, c, sc) = (r?, th?, x?, y?, c?, sc?);
    let mut radii: Vec<f64> = Vec::new();
    let mut samples = Vec::with_capacity(t.rows.len());
    for row in 0..t.rows.len() {
        let rv = t.num(row, r)?;
        if radii.last() != Some(&rv) {
            radii.push(rv);
        }
        samples.push(Sample {
            ring: radii.len(),
            r: rv,
            theta: t.num(row, th)?,
            x: t.num(row, x)?,
            y: t.num(row, y)?,
            class: t.num(row, c)? as usize,
            score: t.num(row, sc)?,
        });
    }
    let n = radii.len();
    if n == 0 || samples.len() % n != 0 {
        return Err(Error::format(path, 0, "rings of unequal length"));
    }
    let per = samples.len() / n;
    let dtheta = if per > 1 { samples[1].theta - samples[0].theta } else { TAU };
    let unit = radii[0];
    // Origin from any sample: x = ox + r cos θ.
    let s0 = samples[0];
    let origin = [s0.x - s0.r * s0.theta.cos(), s0.y - s0.r * s0.theta.sin()];
    let mut trip_points = Vec::new();
    for ring in samples.chunks(per) {
        for k in 0..per {
            let (a, b) = (ring[k], ring[(k + 1) % per]);
            if a.class != b.class {
                trip_points.push(TripPoint {
                    x: 0.5 * (a.x + b.x),
                    y: 0.5 * (a.y + b.y),
                    class_a: a.class.min(b.class),
                    class_b: a.class.max(b.class),
                    ring: a.ring,
                });
            }
        }
    }
    let classes = samples.iter().map(|s| s.class).max().map_or(0, |m| m + 1);
    Ok(DecisionMap {
        origin,
        unit,
        n,
        dtheta,
        classes,
        samples,
        trip_points,
    })
}

fn map(inputs: &[Input]) -> Result<String> {
    let [inp] = inputs else {
        return Err(Error::InvalidArgument("map plot takes exactly one CSV".into()));
    };
    let m = map_from_csv(&inp.path)?;
    Ok(render_map(&m, &fit_boundaries(&m), None))
}

/// Grid of the images listed in `augment.csv` (`index,t,file`), file paths
/// relative to the CSV.
fn contact(inputs: &[Input], out_dir: Option<&Path>) -> Result<String> {
    let mut cells = Vec::new();
    for inp in inputs {
        let t = Table::read(&inp.path)?;
        let (tc, fc) = (t.col("t")?, t.col("file")?);
        let base = inp.path.parent().unwrap_or(Path::new("."));
        for r in 0..t.rows.len() {
            let file = base.join(&t.rows[r][fc]);
            let href = match out_dir {
                Some(d) => relative(&file, d),
                None => file.to_string_lossy().into_owned(),
            };
            cells.push((href, t.num(r, tc)?));
        }
    }
    let cols = (cells.len() as f64).sqrt().ceil().max(1.0) as usize;
    let cell = 96.0;
    let rows = cells.len().div_ceil(cols).max(1);
    let (w, h) = (cols as f64 * cell, rows as f64 * (cell + 16.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (href, t)) in cells.iter().enumerate() {
        let (cx, cy) = ((i % cols) as f64 * cell, (i / cols) as f64 * (cell + 16.0));
        let _ = writeln!(
            s,
            r#"<image x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" href="{}" style="image-rendering:pixelated"/><text x="{:.1}" y="{:.1}" text-anchor="middle">t={t:.3}</text>"#,
            cx + 4.0,
            cy + 4.0,
            cell - 8.0,
            cell - 8.0,
            esc(href),
            cx + cell / 2.0,
            cy + cell + 10.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

// Path of `file` as seen from `dir`, when both are relative to the same root.
fn relative(file: &Path, dir: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (f, d) = (abs(file), abs(dir));
    let fc: Vec<_> = f.components().collect();
    let dc: Vec<_> = d.components().collect();
    let common = fc.iter().zip(&dc).take_while(|(a, b)| a == b).count();
    let mut p = PathBuf::new();
    for _ in common..dc.len() {
        p.push("..");
    }
    for c in &fc[common..] {
        p.push(c);
    }
    p.to_string_lossy().replace('\\', "/")
}

/// Renders `kind` from `inputs`. `out_dir` is where the SVG will be written,
/// used to make image links relative.
pub fn render(kind: PlotKind, inputs: &[Input], out_dir: Option<&Path>) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("plot needs at least one CSV".into()));
    }
    match kind {
        PlotKind::Hist => hist(inputs),
        PlotKind::Accuracy => accuracy(inputs),
        PlotKind::Sweep => sweep(inputs),
        PlotKind::Shift => shift(inputs),
        PlotKind::Depth => depth(inputs),
        PlotKind::Fp => fp(inputs),
        PlotKind::Map => map(inputs),
        PlotKind::Contact => contact(inputs, out_dir),
    }
}
