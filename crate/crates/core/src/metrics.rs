//! Top-1 accuracy, flip probability, cosine-similarity feature shift and
//! activation-magnitude histograms.

use crate::activations::CutoffStats;
use crate::corruptions::PerturbationSequence;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::network::argmax;
use crate::tensor::Tensor;

/// Number of depth groups in the per-depth feature-shift analysis.
pub const DEPTH_GROUPS: usize = 4;

/// Fraction of rows whose largest logit is at the label.
pub fn top1(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if logits.shape().len() != 2 || logits.batch() != labels.len() {
        return Err(Error::Shape(format!(
            "logits {:?} for {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let hits = (0..labels.len()).filter(|&i| argmax(logits.item(i)) == labels[i]).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mismatches between consecutive predictions over all sequences, divided
/// by the number of consecutive pairs, `k·(v−1)` for `k` clips of `v` frames.
pub fn flip_rate(predictions: &[Vec<usize>]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("sequence set"));
    }
    let mut flips = 0usize;
    let mut pairs = 0usize;
    for seq in predictions {
        if seq.len() < 2 {
            return Err(Error::InvalidArgument(format!("sequence of {} frames, need at least 2", seq.len())));
        }
        flips += seq.windows(2).filter(|w| w[0] != w[1]).count();
        pairs += seq.len() - 1;
    }
    Ok(flips as f64 / pairs as f64)
}

/// Flip probability of `classify` over sequences of one corruption kind.
pub fn flip_probability(
    sequences: &[PerturbationSequence],
    mut classify: impl FnMut(&Tensor) -> Result<Vec<usize>>,
) -> Result<f64> {
    let Some(first) = sequences.first() else {
        return Err(Error::Empty("sequence set"));
    };
    if sequences.iter().any(|s| s.kind != first.kind) {
        return Err(Error::InvalidArgument("flip probability mixes corruption kinds".into()));
    }
    let mut preds = Vec::with_capacity(sequences.len());
    for seq in sequences {
        if seq.len() < 2 {
            return Err(Error::InvalidArgument(format!("sequence of {} frames, need at least 2", seq.len())));
        }
        preds.push(classify(&seq.as_batch()?)?);
    }
    flip_rate(&preds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipReport {
    pub per_kind: Vec<(String, f64)>,
    pub mfp: f64,
}

impl FlipReport {
    pub fn new(per_kind: Vec<(String, f64)>) -> Result<Self> {
        if per_kind.is_empty() {
            return Err(Error::Empty("flip report"));
        }
        let mfp = per_kind.iter().map(|(_, fp)| fp).sum::<f64>() / per_kind.len() as f64;
        Ok(Self { per_kind, mfp })
    }
}

/// Cosine similarity. Two zero vectors count as identical, a zero vector
/// against a nonzero one as orthogonal.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    match (na > 0.0, nb > 0.0) {
        (false, false) => 1.0,
        (true, true) => (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

/// How per-image features are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftMode {
    /// Similarity per activation layer, then averaged over layers.
    #[default]
    PerLayer,
    /// One similarity over all activation layers concatenated.
    Concatenated,
}

/// Similarity between clean and corrupted features. Level 1 is the clean set
/// against itself; level `s + 1` is severity `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub per_severity: Vec<f64>,
    /// `[level][depth group]`.
    pub per_depth: Vec<Vec<f64>>,
}

/// Per-image, per-layer similarities between two sets: `[layer][image]`.
fn layer_similarities(model: &Model, clean: &Tensor, other: &Tensor) -> Result<Vec<Vec<f64>>> {
    if clean.shape() != other.shape() {
        return Err(Error::Shape(format!(
            "clean set {:?} vs corrupted set {:?}",
            clean.shape(),
            other.shape()
        )));
    }
    let mut other_acts = Vec::new();
    model.for_each_activation_batch(other, |_, acts| {
        other_acts.push(acts.to_vec());
        Ok(())
    })?;
    let mut sims: Vec<Vec<f64>> = Vec::new();
    let mut chunk = 0;
    model.for_each_activation_batch(clean, |_, acts| {
        let theirs = &other_acts[chunk];
        chunk += 1;
        if sims.is_empty() {
            sims = vec![Vec::new(); acts.len()];
        }
        for (l, (a, b)) in acts.iter().zip(theirs).enumerate() {
            for i in 0..a.batch() {
                sims[l].push(cosine(a.item(i), b.item(i)));
            }
        }
        Ok(())
    })?;
    Ok(sims)
}

/// Concatenated-feature similarity per image.
fn concatenated_similarities(model: &Model, clean: &Tensor, other: &Tensor) -> Result<Vec<f64>> {
    let mut other_acts = Vec::new();
    model.for_each_activation_batch(other, |_, acts| {
        other_acts.push(acts.to_vec());
        Ok(())
    })?;
    let mut out = Vec::new();
    let mut chunk = 0;
    model.for_each_activation_batch(clean, |_, acts| {
        let theirs = &other_acts[chunk];
        chunk += 1;
        for i in 0..acts[0].batch() {
            let a: Vec<f64> = acts.iter().flat_map(|t| t.item(i).iter().copied()).collect();
            let b: Vec<f64> = theirs.iter().flat_map(|t| t.item(i).iter().copied()).collect();
            out.push(cosine(&a, &b));
        }
        Ok(())
    })?;
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Splits `n` layers into `groups` contiguous, nearly equal groups.
pub fn depth_groups(n: usize, groups: usize) -> Vec<std::ops::Range<usize>> {
    (0..groups)
        .map(|g| (g * n / groups)..((g + 1) * n / groups))
        .collect()
}

/// Feature shift between `clean` and each severity-indexed corruption of it.
pub fn feature_shift(model: &Model, clean: &Tensor, corrupted: &[Tensor], mode: ShiftMode) -> Result<ShiftReport> {
    for c in corrupted {
        if c.batch() != clean.batch() {
            return Err(Error::Shape(format!(
                "{} clean images but {} corrupted",
                clean.batch(),
                c.batch()
            )));
        }
    }
    let mut per_severity = vec![1.0];
    let mut per_depth = Vec::new();
    let layers = model.net.activation_specs().len();
    let groups = depth_groups(layers, DEPTH_GROUPS.min(layers.max(1)));
    per_depth.push(vec![1.0; groups.len()]);
    for other in corrupted {
        let sims = layer_similarities(model, clean, other)?;
        let layer_means: Vec<f64> = sims.iter().map(|s| mean(s)).collect();
        per_depth.push(groups.iter().map(|g| mean(&layer_means[g.clone()])).collect());
        per_severity.push(match mode {
            ShiftMode::PerLayer => mean(&layer_means),
            ShiftMode::Concatenated => mean(&concatenated_similarities(model, clean, other)?),
        });
    }
    Ok(ShiftReport { per_severity, per_depth })
}

/// Pooled post-activation magnitude histograms for several image sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges; the last bin also holds everything above its edge.
    pub edges: Vec<f64>,
    /// `[set][bin]`, counts summed over layers and divided by the layer count.
    pub counts: Vec<Vec<f64>>,
    /// Mean magnitude per set, averaged over layers.
    pub mean_magnitude: Vec<f64>,
}

impl Histogram {
    /// Cut-off statistics from sets ordered clean, LFc, HFc.
    pub fn cutoff_stats(&self) -> Result<CutoffStats> {
        if self.counts.len() != 3 {
            return Err(Error::InvalidArgument("cut-off statistics need clean, LFc and HFc sets".into()));
        }
        Ok(CutoffStats {
            bin_edges: self.edges[1..].to_vec(),
            clean: self.counts[0].clone(),
            lfc: self.counts[1].clone(),
            hfc: self.counts[2].clone(),
        })
    }
}

const FINE_BINS: usize = 100_000;

/// Histogram of `|activation|` pooled over every activation layer.
///
/// The range is `[0, p99.9]` of the first set, the percentile read off a
/// 10⁵-bin histogram over `[0, max]`.
pub fn activation_histogram(model: &Model, sets: &[&Tensor], bins: usize) -> Result<Histogram> {
    if sets.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("need at least one set and one bin".into()));
    }
    let layers = model.net.activation_specs().len();
    if layers == 0 {
        return Err(Error::InvalidArgument("network has no activation layers".into()));
    }

    let mut max = 0.0f64;
    model.for_each_activation_batch(sets[0], |_, acts| {
        for a in acts {
            max = a.data().iter().fold(max, |m, v| m.max(v.abs()));
        }
        Ok(())
    })?;
    let mut fine = vec![0u64; FINE_BINS];
    let scale = if max > 0.0 { FINE_BINS as f64 / max } else { 0.0 };
    model.for_each_activation_batch(sets[0], |_, acts| {
        for a in acts {
            for v in a.data() {
                fine[((v.abs() * scale) as usize).min(FINE_BINS - 1)] += 1;
            }
        }
        Ok(())
    })?;
    let total: u64 = fine.iter().sum();
    let mut acc = 0u64;
    let mut hi = max;
    for (i, c) in fine.iter().enumerate() {
        acc += c;
        if acc as f64 >= 0.999 * total as f64 {
            hi = (i + 1) as f64 / scale.max(f64::MIN_POSITIVE);
            break;
        }
    }
    if !(hi > 0.0) {
        hi = 1.0;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();

    let mut counts = Vec::with_capacity(sets.len());
    let mut means = Vec::with_capacity(sets.len());
    for set in sets {
        let mut c = vec![0.0; bins];
        let mut sums = vec![0.0; layers];
        let mut lens = vec![0usize; layers];
        model.for_each_activation_batch(set, |_, acts| {
            for (l, a) in acts.iter().enumerate() {
                for v in a.data() {
                    let m = v.abs();
                    c[((m / hi * bins as f64) as usize).min(bins - 1)] += 1.0;
                    sums[l] += m;
                }
                lens[l] += a.len();
            }
            Ok(())
        })?;
        c.iter_mut().for_each(|v| *v /= layers as f64);
        counts.push(c);
        let per_layer: Vec<f64> = sums.iter().zip(&lens).map(|(s, &n)| s / n.max(1) as f64).collect();
        means.push(mean(&per_layer));
    }
    Ok(Histogram {
        edges,
        counts,
        mean_magnitude: means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{ActivationKind, ActivationSpec};
    use crate::network::{Network, Preset, Widths};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn top1_examples() {
        let logits = Tensor::new([2, 2], vec![2., 1., 0., 3.]).unwrap();
        assert_eq!(top1(&logits, &[0, 1]).unwrap(), 1.0);
        assert_eq!(top1(&logits, &[1, 0]).unwrap(), 0.0);
        assert!(top1(&Tensor::zeros([0, 2]), &[]).is_err());
    }

    #[test]
    fn chance_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let logits = Tensor::new([n, 10], (0..n * 10).map(|_| rng.random::<f64>()).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..10)).collect();
        assert!((top1(&logits, &labels).unwrap() - 0.1).abs() < 0.01);
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip_rate(&[vec![1, 1, 1]]).unwrap(), 0.0);
        assert_eq!(flip_rate(&[vec![1, 2, 1]]).unwrap(), 1.0);
        assert_eq!(flip_rate(&[vec![1, 2, 2], vec![0, 0, 0]]).unwrap(), 0.25);
        assert!(flip_rate(&[vec![1]]).is_err());
        let r = FlipReport::new(vec![("a".into(), 0.2), ("b".into(), 0.4)]).unwrap();
        assert!((r.mfp - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]), 0.0);
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0], &[0.0]), 1.0);
    }

    #[test]
    fn depth_groups_cover_layers() {
        assert_eq!(depth_groups(4, 4), vec![0..1, 1..2, 2..3, 3..4]);
        assert_eq!(depth_groups(8, 4), vec![0..2, 2..4, 4..6, 6..8]);
    }

    fn tiny_model(kind: ActivationKind) -> Model {
        let w = Widths { conv: [2, 3, 4], hidden: 6 };
        let net = Network::preset(Preset::Conv3, ActivationSpec::init(kind), [1, 28, 28], 10, w, 5).unwrap();
        Model::new(net, Tensor::from_vec(vec![0.0])).unwrap()
    }

    fn images(n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new([n, 1, 28, 28], (0..n * 784).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn clean_shift_is_one() {
        let model = tiny_model(ActivationKind::Relu);
        let x = images(6, 1);
        let r = feature_shift(&model, &x, &[x.clone(), images(6, 2)], ShiftMode::PerLayer).unwrap();
        assert_eq!(r.per_severity[0], 1.0);
        assert!((r.per_severity[1] - 1.0).abs() < 1e-12);
        assert!(r.per_severity[2] < 1.0);
        assert_eq!(r.per_depth.len(), 3);
        assert_eq!(r.per_depth[1].len(), DEPTH_GROUPS);
        assert!(feature_shift(&model, &x, &[images(5, 2)], ShiftMode::PerLayer).is_err());
        let c = feature_shift(&model, &x, &[x.clone()], ShiftMode::Concatenated).unwrap();
        assert!((c.per_severity[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_input_fills_bin_zero() {
        let mut model = tiny_model(ActivationKind::Relu);
        model.net.visit_params(&mut |p| {
            if p.name.ends_with("bias") {
                p.value.iter_mut().for_each(|v| *v = 0.0);
            }
        });
        let zeros = Tensor::zeros([4, 1, 28, 28]);
        let h = activation_histogram(&model, &[&zeros], 100).unwrap();
        let total: f64 = h.counts[0].iter().sum();
        assert!(total > 0.0);
        assert_eq!(h.counts[0][0], total);
        assert_eq!(h.mean_magnitude[0], 0.0);
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(v in prop::collection::vec(-5.0f64..5.0, 2..20), s in 0.01f64..100.0, t in 0.01f64..100.0) {
            let w: Vec<f64> = v.iter().rev().copied().collect();
            let a: Vec<f64> = v.iter().map(|x| x * s).collect();
            let b: Vec<f64> = w.iter().map(|x| x * t).collect();
            prop_assert!((cosine(&v, &w) - cosine(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn flip_rate_relabeling_invariant(seqs in prop::collection::vec(prop::collection::vec(0usize..5, 2..8), 1..6)) {
            let perm = [3usize, 0, 4, 1, 2];
            let relabeled: Vec<Vec<usize>> = seqs.iter().map(|s| s.iter().map(|&p| perm[p]).collect()).collect();
            prop_assert_eq!(flip_rate(&seqs).unwrap(), flip_rate(&relabeled).unwrap());
            let constant: Vec<Vec<usize>> = seqs.iter().map(|s| vec![7; s.len()]).collect();
            prop_assert_eq!(flip_rate(&constant).unwrap(), 0.0);
            let fp = flip_rate(&seqs).unwrap();
            prop_assert!((0.0..=1.0).contains(&fp));
        }
    }
}
