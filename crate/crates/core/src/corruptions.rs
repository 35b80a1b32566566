//! Seeded image corruptions at five severity levels, progressive
//! perturbation sequences and radial frequency profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dct::DctPlan;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SEVERITY_LEVELS: usize = 5;

const BUILTIN_TABLE: &str = include_str!("../config/severity.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    GaussianBlur,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    Contrast,
    Brightness,
    Pixelate,
    JpegLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqClass {
    #[serde(rename = "HFc")]
    High,
    #[serde(rename = "LFc")]
    Low,
    #[serde(rename = "mixed")]
    Mixed,
}

impl fmt::Display for FreqClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqClass::High => "HFc",
            FreqClass::Low => "LFc",
            FreqClass::Mixed => "mixed",
        })
    }
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 12] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::SpeckleNoise,
        CorruptionKind::GaussianBlur,
        CorruptionKind::DefocusBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Contrast,
        CorruptionKind::Brightness,
        CorruptionKind::Pixelate,
        CorruptionKind::JpegLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::SpeckleNoise => "speckle_noise",
            CorruptionKind::GaussianBlur => "gaussian_blur",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::JpegLike => "jpeg_like",
        }
    }

    pub fn freq_class(self) -> FreqClass {
        use CorruptionKind::*;
        match self {
            GaussianNoise | ShotNoise | ImpulseNoise | SpeckleNoise => FreqClass::High,
            GaussianBlur | DefocusBlur | MotionBlur | ZoomBlur | Contrast | Brightness => FreqClass::Low,
            Pixelate | JpegLike => FreqClass::Mixed,
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Unknown {
                what: "corruption",
                name: s.to_string(),
            })
    }
}

/// Parameter values per kind and severity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityTable {
    #[serde(flatten)]
    entries: BTreeMap<CorruptionKind, [f64; SEVERITY_LEVELS]>,
}

impl SeverityTable {
    /// The table shipped in `config/severity.toml`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("shipped severity table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: SeverityTable = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        for kind in CorruptionKind::ALL {
            let levels = self
                .entries
                .get(&kind)
                .ok_or_else(|| Error::Config(format!("severity table lacks {kind}")))?;
            if levels.iter().any(|v| !v.is_finite() || *v < 0.0) || levels.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(format!("{kind}: levels must be nonnegative and nondecreasing")));
            }
            let bounded = matches!(
                kind,
                CorruptionKind::ImpulseNoise | CorruptionKind::Contrast | CorruptionKind::Pixelate
            );
            if bounded && levels.iter().any(|v| *v >= 1.0) {
                return Err(Error::Config(format!("{kind}: levels must stay below 1")));
            }
        }
        Ok(())
    }

    /// Parameter for `severity` in `1..=5`.
    pub fn magnitude(&self, kind: CorruptionKind, severity: u8) -> Result<f64> {
        check_severity(severity)?;
        Ok(self.entries[&kind][severity as usize - 1])
    }

    pub fn levels(&self, kind: CorruptionKind) -> [f64; SEVERITY_LEVELS] {
        self.entries[&kind]
    }
}

impl Default for SeverityTable {
    fn default() -> Self {
        Self::builtin()
    }
}

fn check_severity(severity: u8) -> Result<()> {
    if !(1..=SEVERITY_LEVELS as u8).contains(&severity) {
        return Err(Error::InvalidArgument(format!("severity {severity} outside 1..=5")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<Self> {
        check_severity(severity)?;
        Ok(Self { kind, severity, seed })
    }

    pub fn freq_class(&self) -> FreqClass {
        self.kind.freq_class()
    }
}

/// Random stream for item `index` of a batch corrupted with `seed`.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn image_dims(image: &Tensor) -> Result<(usize, usize, usize)> {
    match image.shape() {
        [h, w] if h * w > 0 => Ok((1, *h, *w)),
        [c, h, w] if c * h * w > 0 => Ok((*c, *h, *w)),
        s => Err(Error::Shape(format!("expected a non-empty H×W or C×H×W image, got {s:?}"))),
    }
}

/// Corrupts one `C×H×W` image at the severity of `spec`.
pub fn corrupt(image: &Tensor, spec: &CorruptionSpec, table: &SeverityTable) -> Result<Tensor> {
    let m = table.magnitude(spec.kind, spec.severity)?;
    apply(image, spec.kind, m, &mut item_rng(spec.seed, 0))
}

/// Corrupts every item of an `N×C×H×W` batch; item `i` draws from stream `i`.
pub fn corrupt_batch(batch: &Tensor, spec: &CorruptionSpec, table: &SeverityTable) -> Result<Tensor> {
    let m = table.magnitude(spec.kind, spec.severity)?;
    map_items(batch, |i, img| apply(img, spec.kind, m, &mut item_rng(spec.seed, i)))
}

pub(crate) fn map_items(batch: &Tensor, f: impl Fn(usize, &Tensor) -> Result<Tensor>) -> Result<Tensor> {
    let s = batch.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("expected N×C×H×W, got {s:?}")));
    }
    let mut out = Vec::with_capacity(batch.len());
    for i in 0..s[0] {
        let img = Tensor::new(s[1..].to_vec(), batch.item(i).to_vec())?;
        out.extend(f(i, &img)?.into_data());
    }
    Tensor::new(s.to_vec(), out)
}

/// Applies `kind` with raw parameter `magnitude`. Zero magnitude returns the
/// input unchanged. The draws taken from `rng` do not depend on `magnitude`,
/// so one seed yields nested corruptions across magnitudes.
pub fn apply(image: &Tensor, kind: CorruptionKind, magnitude: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let (_, h, w) = image_dims(image)?;
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("magnitude {magnitude} must be finite and nonnegative")));
    }
    if magnitude == 0.0 {
        return Ok(image.clone());
    }
    let m = magnitude;
    let mut out = image.clone();
    let data = out.data_mut();
    use CorruptionKind::*;
    match kind {
        GaussianNoise => {
            for v in data.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += m * z;
            }
        }
        SpeckleNoise => {
            for v in data.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += *v * m * z;
            }
        }
        ShotNoise => {
            for v in data.iter_mut() {
                // one uniform per pixel keeps the stream aligned across magnitudes
                let u: f64 = rng.random();
                let lambda = v.max(0.0) / m;
                *v = if lambda > 0.0 {
                    let mut local = ChaCha8Rng::seed_from_u64(u.to_bits());
                    Poisson::new(lambda).expect("positive rate").sample(&mut local) * m
                } else {
                    0.0
                };
            }
        }
        ImpulseNoise => {
            for v in data.iter_mut() {
                let u: f64 = rng.random();
                let salt: bool = rng.random();
                if u < m {
                    *v = if salt { 1.0 } else { 0.0 };
                }
            }
        }
        Contrast => {
            for plane in data.chunks_mut(h * w) {
                let mean = plane.iter().sum::<f64>() / plane.len() as f64;
                for v in plane.iter_mut() {
                    *v = mean + (*v - mean) * (1.0 - m);
                }
            }
        }
        Brightness => {
            for v in data.iter_mut() {
                *v = (*v + m).clamp(0.0, 1.0);
            }
        }
        GaussianBlur => {
            let k = gaussian_kernel(m);
            for plane in data.chunks_mut(h * w) {
                let tmp = convolve_separable(plane, h, w, &k);
                plane.copy_from_slice(&tmp);
            }
        }
        DefocusBlur => {
            let (kernel, r) = disk_kernel(m);
            for plane in data.chunks_mut(h * w) {
                let tmp = convolve2d(plane, h, w, &kernel, r);
                plane.copy_from_slice(&tmp);
            }
        }
        MotionBlur => {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let (dy, dx) = angle.sin_cos();
            let steps = 2 * m.ceil() as usize + 1;
            let src = image.data();
            for (ci, plane) in data.chunks_mut(h * w).enumerate() {
                let orig = &src[ci * h * w..(ci + 1) * h * w];
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for s in 0..steps {
                            let t = m * (s as f64 / (steps - 1) as f64 - 0.5);
                            acc += bilinear(orig, h, w, y as f64 + t * dy, x as f64 + t * dx);
                        }
                        plane[y * w + x] = acc / steps as f64;
                    }
                }
            }
        }
        ZoomBlur => {
            let zooms = 8;
            let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
            let src = image.data();
            for (ci, plane) in data.chunks_mut(h * w).enumerate() {
                let orig = &src[ci * h * w..(ci + 1) * h * w];
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for z in 0..=zooms {
                            let f = 1.0 + m * z as f64 / zooms as f64;
                            acc += bilinear(orig, h, w, cy + (y as f64 - cy) / f, cx + (x as f64 - cx) / f);
                        }
                        plane[y * w + x] = acc / (zooms + 1) as f64;
                    }
                }
            }
        }
        Pixelate => {
            let sh = ((h as f64 * (1.0 - m)).round() as usize).clamp(1, h);
            let sw = ((w as f64 * (1.0 - m)).round() as usize).clamp(1, w);
            for plane in data.chunks_mut(h * w) {
                let mut sums = vec![0.0; sh * sw];
                let mut counts = vec![0usize; sh * sw];
                let block = |y: usize, x: usize| (y * sh / h) * sw + x * sw / w;
                for y in 0..h {
                    for x in 0..w {
                        sums[block(y, x)] += plane[y * w + x];
                        counts[block(y, x)] += 1;
                    }
                }
                for y in 0..h {
                    for x in 0..w {
                        let b = block(y, x);
                        plane[y * w + x] = sums[b] / counts[b] as f64;
                    }
                }
            }
        }
        JpegLike => {
            for plane in data.chunks_mut(h * w) {
                let tmp = jpeg_like(plane, h, w, m)?;
                plane.copy_from_slice(&tmp);
            }
        }
    }
    Ok(out)
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let at = |yy: f64, xx: f64| plane[clamp_index(yy as isize, h) * w + clamp_index(xx as isize, w)];
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1.0))
        + fy * ((1.0 - fx) * at(y0 + 1.0, x0) + fx * at(y0 + 1.0, x0 + 1.0))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn convolve_separable(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * plane[y * w + clamp_index(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * rows[clamp_index(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Anti-aliased disk of radius `radius`, normalised to unit sum.
fn disk_kernel(radius: f64) -> (Vec<f64>, usize) {
    let r = radius.ceil() as usize;
    let size = 2 * r + 1;
    let mut k = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let d = ((y as f64 - r as f64).powi(2) + (x as f64 - r as f64).powi(2)).sqrt();
            k[y * size + x] = (radius + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    (k, r)
}

fn convolve2d(plane: &[f64], h: usize, w: usize, k: &[f64], r: usize) -> Vec<f64> {
    let size = 2 * r + 1;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..size {
                let yy = clamp_index(y as isize + ky as isize - r as isize, h);
                for kx in 0..size {
                    let xx = clamp_index(x as isize + kx as isize - r as isize, w);
                    acc += k[ky * size + kx] * plane[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Luminance quantisation table, scaled so its DC entry is 1.
const JPEG_TABLE: [f64; 64] = [
    16., 11., 10., 16., 24., 40., 51., 61., 12., 12., 14., 19., 26., 58., 60., 55., 14., 13., 16., 24., 40., 57.,
    69., 56., 14., 17., 22., 29., 51., 87., 80., 62., 18., 22., 37., 56., 68., 109., 103., 77., 24., 35., 55., 64.,
    81., 104., 113., 92., 49., 64., 78., 87., 103., 121., 120., 101., 72., 92., 95., 98., 112., 100., 103., 99.,
];

/// 8×8 block DCT quantisation with step `q · table / 16`, edge-replicated
/// to whole blocks and cropped back.
fn jpeg_like(plane: &[f64], h: usize, w: usize, q: f64) -> Result<Vec<f64>> {
    const B: usize = 8;
    let plan = DctPlan::new(B, B)?;
    let mut out = vec![0.0; h * w];
    let mut block = vec![0.0; B * B];
    for by in (0..h).step_by(B) {
        for bx in (0..w).step_by(B) {
            for y in 0..B {
                for x in 0..B {
                    block[y * B + x] = plane[(by + y).min(h - 1) * w + (bx + x).min(w - 1)];
                }
            }
            let mut c = plan.forward(&block)?;
            for (v, t) in c.iter_mut().zip(JPEG_TABLE) {
                let step = q * t / 16.0;
                *v = (*v / step).round() * step;
            }
            let rec = plan.inverse(&c)?;
            for y in 0..B.min(h - by) {
                for x in 0..B.min(w - bx) {
                    out[(by + y) * w + bx + x] = rec[y * B + x];
                }
            }
        }
    }
    Ok(out)
}

/// Frames `x₁..x_v` of one clip with magnitudes rising linearly from zero to
/// the severity-5 value; `x₁` is the clean image.
#[derive(Debug, Clone)]
pub struct PerturbationSequence {
    pub kind: CorruptionKind,
    pub magnitudes: Vec<f64>,
    pub frames: Vec<Tensor>,
}

impl PerturbationSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames stacked as an `v×C×H×W` batch.
    pub fn as_batch(&self) -> Result<Tensor> {
        let mut shape = vec![self.frames.len()];
        shape.extend_from_slice(self.frames[0].shape());
        let data = self.frames.iter().flat_map(|f| f.data().iter().copied()).collect();
        Tensor::new(shape, data)
    }
}

/// Every frame reuses the same random stream, so the noise field of frame
/// `j` is a scaled copy of the last frame's.
pub fn make_sequence(
    image: &Tensor,
    kind: CorruptionKind,
    v: usize,
    table: &SeverityTable,
    seed: u64,
) -> Result<PerturbationSequence> {
    if v < 2 {
        return Err(Error::InvalidArgument(format!("a sequence needs at least 2 frames, got {v}")));
    }
    let top = table.magnitude(kind, SEVERITY_LEVELS as u8)?;
    let magnitudes: Vec<f64> = (0..v).map(|j| top * j as f64 / (v - 1) as f64).collect();
    let frames = magnitudes
        .iter()
        .map(|&m| apply(image, kind, m, &mut item_rng(seed, 0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationSequence {
        kind,
        magnitudes,
        frames,
    })
}

/// Mean power per radial frequency band; band edges span `[0, 1]` of the
/// largest radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub band_edges: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Spectrum {
    /// Summed energy of the upper quarter of the bands.
    pub fn top_quartile(&self) -> f64 {
        let n = self.energy.len();
        self.energy[n - n.div_ceil(4)..].iter().sum()
    }
}

/// Radial power spectrum averaged over an `N×C×H×W` set. Powers use the
/// unitary DFT, so band energies sum to the mean image energy.
pub fn freq_profile(images: &Tensor, bands: usize) -> Result<Spectrum> {
    let s = images.shape();
    if s.len() != 4 || s[0] == 0 {
        return Err(Error::Empty("image set"));
    }
    if bands == 0 {
        return Err(Error::InvalidArgument("need at least one band".into()));
    }
    let (h, w) = (s[2], s[3]);
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let norm = (h * w) as f64;
    let fy = |k: usize| k.min(h - k) as f64 / h as f64;
    let fx = |k: usize| k.min(w - k) as f64 / w as f64;
    let rmax = (fy(h / 2).powi(2) + fx(w / 2).powi(2)).sqrt().max(f64::MIN_POSITIVE);
    let band_of: Vec<usize> = (0..h * w)
        .map(|i| {
            let r = (fy(i / w).powi(2) + fx(i % w).powi(2)).sqrt() / rmax;
            ((r * bands as f64) as usize).min(bands - 1)
        })
        .collect();

    let mut energy = vec![0.0; bands];
    let mut buf = vec![Complex::new(0.0, 0.0); h * w];
    let mut col = vec![Complex::new(0.0, 0.0); h];
    let planes = images.len() / (h * w);
    for plane in images.data().chunks(h * w) {
        for (b, &v) in buf.iter_mut().zip(plane) {
            *b = Complex::new(v, 0.0);
        }
        for row in buf.chunks_mut(w) {
            row_fft.process(row);
        }
        for x in 0..w {
            for y in 0..h {
                col[y] = buf[y * w + x];
            }
            col_fft.process(&mut col);
            for y in 0..h {
                buf[y * w + x] = col[y];
            }
        }
        for (c, &b) in buf.iter().zip(&band_of) {
            energy[b] += c.norm_sqr() / norm;
        }
    }
    let count = (planes / s[1]) as f64;
    energy.iter_mut().for_each(|e| *e /= count);
    let band_edges = (0..=bands).map(|i| i as f64 / bands as f64).collect();
    Ok(Spectrum { band_edges, energy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digit_like(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cy, cx) = (rng.random_range(10.0..18.0), rng.random_range(10.0..18.0));
        let r = rng.random_range(4.0..8.0);
        let data = (0..784)
            .map(|i| {
                let (y, x) = ((i / 28) as f64, (i % 28) as f64);
                let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
                if (d - r).abs() < 1.5 { 1.0 } else { 0.0 }
            })
            .collect();
        Tensor::new([1, 28, 28], data).unwrap()
    }

    fn set(n: usize) -> Tensor {
        let data = (0..n).flat_map(|i| digit_like(i as u64).into_data()).collect();
        Tensor::new([n, 1, 28, 28], data).unwrap()
    }

    #[test]
    fn builtin_table_covers_every_kind() {
        let t = SeverityTable::builtin();
        for k in CorruptionKind::ALL {
            assert_eq!(t.levels(k).len(), 5);
        }
        assert!(SeverityTable::parse("gaussian_noise = [0.1, 0.2, 0.3, 0.4, 0.5]").is_err());
        assert!(t.magnitude(CorruptionKind::Contrast, 0).is_err());
        assert!(t.magnitude(CorruptionKind::Contrast, 6).is_err());
    }

    #[test]
    fn unknown_kind_is_an_error() {
        assert!("fog".parse::<CorruptionKind>().is_err());
        assert_eq!("Gaussian-Noise".parse::<CorruptionKind>().unwrap(), CorruptionKind::GaussianNoise);
    }

    #[test]
    fn gaussian_noise_sigma_matches_table() {
        let table = SeverityTable::builtin();
        let img = set(160);
        for severity in 1..=5 {
            let spec = CorruptionSpec::new(CorruptionKind::GaussianNoise, severity, 7).unwrap();
            let noisy = corrupt_batch(&img, &spec, &table).unwrap();
            let diffs: Vec<f64> = noisy.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
            assert!(diffs.len() >= 100_000);
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
            let want = table.magnitude(CorruptionKind::GaussianNoise, severity).unwrap();
            assert!((var.sqrt() - want).abs() < 0.05 * want, "severity {severity}");
        }
    }

    #[test]
    fn contrast_fixes_constant_image() {
        let gray = Tensor::new([1, 8, 8], vec![0.5; 64]).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::Contrast, 5, 0).unwrap();
        assert_eq!(corrupt(&gray, &spec, &SeverityTable::builtin()).unwrap(), gray);
    }

    #[test]
    fn tiny_blur_is_identity() {
        let img = digit_like(3);
        let out = apply(&img, CorruptionKind::GaussianBlur, 1e-4, &mut item_rng(0, 0)).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn reproducible_bytes() {
        let table = SeverityTable::builtin();
        let img = digit_like(1);
        for kind in CorruptionKind::ALL {
            let spec = CorruptionSpec::new(kind, 3, 42).unwrap();
            assert_eq!(corrupt(&img, &spec, &table).unwrap(), corrupt(&img, &spec, &table).unwrap(), "{kind}");
        }
    }

    #[test]
    fn severity_is_monotone_in_distance() {
        let table = SeverityTable::builtin();
        let imgs = set(100);
        for kind in CorruptionKind::ALL {
            let mut last = 0.0;
            for severity in 1..=5 {
                let spec = CorruptionSpec::new(kind, severity, 5).unwrap();
                let out = corrupt_batch(&imgs, &spec, &table).unwrap();
                let d: f64 = (0..100)
                    .map(|i| {
                        out.item(i).iter().zip(imgs.item(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                    })
                    .sum::<f64>()
                    / 100.0;
                assert!(d >= last - 1e-12, "{kind} severity {severity}: {d} < {last}");
                last = d;
            }
        }
    }

    #[test]
    fn sequence_grid_and_clean_first_frame() {
        let table = SeverityTable::builtin();
        let img = digit_like(2);
        let seq = make_sequence(&img, CorruptionKind::GaussianNoise, 3, &table, 1).unwrap();
        let m = table.magnitude(CorruptionKind::GaussianNoise, 5).unwrap();
        assert_eq!(seq.magnitudes, vec![0.0, m / 2.0, m]);
        assert_eq!(seq.frames[0], img);
        assert!(make_sequence(&img, CorruptionKind::GaussianNoise, 1, &table, 1).is_err());
    }

    #[test]
    fn noise_sequences_gain_high_frequency_energy() {
        let table = SeverityTable::builtin();
        for kind in [CorruptionKind::GaussianNoise, CorruptionKind::ImpulseNoise, CorruptionKind::SpeckleNoise] {
            let mut totals = vec![0.0; 10];
            for i in 0..30 {
                let seq = make_sequence(&digit_like(i), kind, 10, &table, i).unwrap();
                for (j, f) in seq.frames.iter().enumerate() {
                    let b = Tensor::new([1, 1, 28, 28], f.data().to_vec()).unwrap();
                    totals[j] += freq_profile(&b, 16).unwrap().top_quartile();
                }
            }
            assert!(totals.windows(2).all(|w| w[1] >= w[0]), "{kind}: {totals:?}");
        }
    }

    #[test]
    fn frequency_classes_confirmed() {
        let table = SeverityTable::builtin();
        let clean = set(40);
        let base = freq_profile(&clean, 16).unwrap();
        let again = freq_profile(&clean, 16).unwrap();
        assert_eq!(base, again);
        let total: f64 = base.energy.iter().sum();
        let direct = clean.data().iter().map(|v| v * v).sum::<f64>() / 40.0;
        assert!((total - direct).abs() < 1e-9 * direct);
        for kind in CorruptionKind::ALL {
            let spec = CorruptionSpec::new(kind, 3, 9).unwrap();
            let out = corrupt_batch(&clean, &spec, &table).unwrap();
            let top = freq_profile(&out, 16).unwrap().top_quartile();
            match kind.freq_class() {
                FreqClass::High => assert!(top > base.top_quartile(), "{kind}"),
                FreqClass::Low => assert!(top < base.top_quartile(), "{kind}"),
                FreqClass::Mixed => {}
            }
        }
    }
}
