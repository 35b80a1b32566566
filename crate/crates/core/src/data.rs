//! Dataset loaders (MNIST IDX, CIFAR-10 binary), validation splitting,
//! normalisation and PNG helpers.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Environment variable naming the directory that holds the datasets.
pub const DATA_DIR_ENV: &str = "LPRELU_DATA";

/// Default validation fraction of the training split.
pub const VALIDATION_FRACTION: f64 = 0.15;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
const CIFAR_PER_BATCH: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Images `N×C×H×W` in `[0, 1]` with one class id per image.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::Shape(format!("images must be N×C×H×W, got {:?}", images.shape())));
        }
        if images.batch() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} >= {classes} classes")));
        }
        Ok(Self {
            images,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[C, H, W]` of one image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    /// First `n` images (all of them when `n` is `None` or too large).
    pub fn limit(&self, n: Option<usize>) -> Dataset {
        match n {
            Some(n) if n < self.len() => self.subset(&(0..n).collect::<Vec<_>>()),
            _ => self.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Dataset root: `$LPRELU_DATA`, else `data/` of the workspace.
pub fn data_root() -> PathBuf {
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        return PathBuf::from(dir);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find_file(dir: &Path, stems: &[&str]) -> Result<PathBuf> {
    for stem in stems {
        for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::io(
        dir.join(stems[0]),
        std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
    ))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, offset as u64, "truncated header"))
}

/// Parses an IDX3 image file into `N×1×H×W` scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!(
                "declared {n}×{rows}×{cols} needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let data = bytes[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Tensor::new([n, 1, rows, cols], data)
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    if bytes.len() != 8 + n {
        return Err(Error::format(
            path,
            bytes.len().min(8 + n) as u64,
            format!("declared {n} labels, file has {}", bytes.len().saturating_sub(8)),
        ));
    }
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

fn load_idx_pair(dir: &Path, images: &[&str], labels: &[&str], split: Split) -> Result<Dataset> {
    let ipath = find_file(dir, images)?;
    let lpath = find_file(dir, labels)?;
    let imgs = parse_idx_images(&read_maybe_gz(&ipath)?, &ipath)?;
    let labs = parse_idx_labels(&read_maybe_gz(&lpath)?, &lpath)?;
    if imgs.batch() != labs.len() {
        return Err(Error::format(
            &lpath,
            4,
            format!("{} labels for {} images", labs.len(), imgs.batch()),
        ));
    }
    if let Some(pos) = labs.iter().position(|&l| l >= 10) {
        return Err(Error::format(&lpath, 8 + pos as u64, "label outside 0..10"));
    }
    Dataset::new(imgs, labs, 10, split)
}

/// Loads the four MNIST IDX files (optionally gzip-compressed) from `dir`.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<TrainTest> {
    let dir = dir.as_ref();
    let train = load_idx_pair(
        dir,
        &["train-images-idx3-ubyte", "train-images.idx3-ubyte"],
        &["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"],
        Split::Train,
    )?;
    let test = load_idx_pair(
        dir,
        &["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"],
        &["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"],
        Split::Test,
    )?;
    Ok(TrainTest { train, test })
}

/// Parses concatenated CIFAR-10 records (1 label byte + 3072 pixel bytes).
pub fn parse_cifar_batch(
    bytes: &[u8],
    path: &Path,
    expected_records: Option<usize>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if bytes.len() % CIFAR_RECORD != 0 {
        let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(Error::format(
            path,
            whole as u64,
            format!("{} bytes is not a multiple of the {CIFAR_RECORD}-byte record", bytes.len()),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD;
    if let Some(exp) = expected_records {
        if n != exp {
            return Err(Error::format(path, 0, format!("{n} records, expected {exp}")));
        }
    }
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        let label = rec[0] as usize;
        if label >= 10 {
            return Err(Error::format(path, (i * CIFAR_RECORD) as u64, format!("label {label} outside 0..10")));
        }
        labels.push(label);
        pixels.extend(rec[1..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok((pixels, labels))
}

/// Loads CIFAR-10 binary batches from `dir` (or `dir/cifar-10-batches-bin`).
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<TrainTest> {
    load_cifar10_with(dir, Some(CIFAR_PER_BATCH))
}

/// As [`load_cifar10`], with a configurable per-file record count.
pub fn load_cifar10_with(dir: impl AsRef<Path>, per_batch: Option<usize>) -> Result<TrainTest> {
    let mut dir = dir.as_ref().to_path_buf();
    if !dir.join("data_batch_1.bin").exists() && dir.join("cifar-10-batches-bin").is_dir() {
        dir = dir.join("cifar-10-batches-bin");
    }
    let load = |names: &[String], split: Split| -> Result<Dataset> {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for name in names {
            let path = dir.join(name);
            let bytes = read_maybe_gz(&path)?;
            let (p, l) = parse_cifar_batch(&bytes, &path, per_batch)?;
            pixels.extend(p);
            labels.extend(l);
        }
        let images = Tensor::new([labels.len(), 3, 32, 32], pixels)?;
        Dataset::new(images, labels, 10, split)
    };
    let train_names: Vec<String> = (1..=5).map(|i| format!("data_batch_{i}.bin")).collect();
    Ok(TrainTest {
        train: load(&train_names, Split::Train)?,
        test: load(&["test_batch.bin".to_string()], Split::Test)?,
    })
}

/// Stratified split of `ds` into `(train, val)` with `round(N·fraction)`
/// validation images, allocated per class by largest remainder.
pub fn split_validation(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("validation fraction {fraction} outside (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let total = (ds.len() as f64 * fraction).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|c| c.len() as f64 * fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ds.classes).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = total.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(ds.classes * 2) {
        if missing == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::with_capacity(ds.len() - total);
    let mut val_idx = Vec::with_capacity(total);
    for (members, q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        val_idx.extend_from_slice(&members[..*q]);
        train_idx.extend_from_slice(&members[*q..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    let mut val = ds.subset(&val_idx);
    val.split = Split::Val;
    Ok((ds.subset(&train_idx), val))
}

/// Per-channel mean over all images of `images` (`N×C×…`).
pub fn channel_mean(images: &Tensor) -> Tensor {
    let c = images.shape().get(1).copied().unwrap_or(1).max(1);
    let per = images.item_len() / c;
    let mut sums = vec![0.0; c];
    for i in 0..images.batch() {
        for (ch, chunk) in images.item(i).chunks(per).enumerate() {
            sums[ch] += chunk.iter().sum::<f64>();
        }
    }
    let count = (images.batch() * per) as f64;
    Tensor::from_vec(sums.into_iter().map(|s| s / count).collect())
}

/// Subtracts a per-channel mean; the values of each item are split into
/// `mean.len()` contiguous channel blocks.
pub fn zero_center_normalize(batch: &Tensor, mean: &Tensor) -> Result<Tensor> {
    let c = mean.len();
    let item = batch.item_len();
    let channel_axis_ok = c == 1 || batch.shape().get(1) == Some(&c);
    if c == 0 || item % c != 0 || !channel_axis_ok {
        return Err(Error::Shape(format!(
            "mean of {c} channels does not fit batch {:?}",
            batch.shape()
        )));
    }
    let per = item / c;
    let mut out = batch.clone();
    for (k, v) in out.data_mut().iter_mut().enumerate() {
        *v -= mean.data()[(k % item) / per];
    }
    Ok(out)
}

/// Reads a PNG as a `C×H×W` tensor in `[0, 1]` (grayscale or RGB).
pub fn read_png(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let mut data = vec![0.0; 3 * h * w];
        for (x, y, p) in rgb.enumerate_pixels() {
            for ch in 0..3 {
                data[ch * h * w + y as usize * w + x as usize] = f64::from(p[ch]) / 255.0;
            }
        }
        Tensor::new([3, h, w], data)
    } else {
        let gray = img.to_luma8();
        let data = gray.pixels().map(|p| f64::from(p[0]) / 255.0).collect();
        Tensor::new([1, h, w], data)
    }
}

/// Writes a `C×H×W` tensor (C = 1 or 3) as PNG, clamping to `[0, 1]`.
pub fn write_png(image: &Tensor, path: &Path) -> Result<()> {
    let s = image.shape();
    let (c, h, w) = match s {
        [c, h, w] => (*c, *h, *w),
        [1, c, h, w] => (*c, *h, *w),
        _ => return Err(Error::Shape(format!("cannot write {s:?} as an image"))),
    };
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let d = image.data();
    match c {
        1 => {
            let buf = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
                image::Luma([to_u8(d[y as usize * w + x as usize])])
            });
            buf.save(path)?;
        }
        3 => {
            let buf = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
                let i = y as usize * w + x as usize;
                image::Rgb([to_u8(d[i]), to_u8(d[h * w + i]), to_u8(d[2 * h * w + i])])
            });
            buf.save(path)?;
        }
        _ => return Err(Error::Shape(format!("{c} channels cannot be written as PNG"))),
    }
    Ok(())
}
