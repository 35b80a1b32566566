//! Property tests for the structural invariants of the public types.

use lprelu::activations::{ActivationKind, ActivationSpec};
use lprelu::config::RunConfig;
use lprelu::corruptions::{
    corrupt, corrupt_batch, make_sequence, CorruptionKind, CorruptionSpec, FreqClass, SeverityTable,
};
use lprelu::data::{split_validation, Dataset, Split};
use lprelu::dct::AugmentPolicy;
use lprelu::decision_map::{build_fc2_net, sweep};
use lprelu::metrics::{flip_rate, FlipReport};
use lprelu::network::{softmax_cross_entropy, Network, Preset, Widths};
use lprelu::optim::Schedule;
use lprelu::tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn image(seed: u64, c: usize, side: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new([c, side, side], (0..c * side * side).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn arb_kind() -> impl Strategy<Value = CorruptionKind> {
    (0..CorruptionKind::ALL.len()).prop_map(|i| CorruptionKind::ALL[i])
}

fn small_fc2(seed: u64, act: ActivationKind) -> Network {
    let widths = Widths {
        conv: [2, 3, 4],
        hidden: 5,
    };
    Network::preset(Preset::Conv3Fc2, ActivationSpec::init(act), [1, 28, 28], 4, widths, seed).unwrap()
}

#[test]
fn noise_and_blur_classes_are_fixed() {
    for kind in CorruptionKind::ALL {
        let name = kind.name();
        if name.ends_with("_noise") {
            assert_eq!(kind.freq_class(), FreqClass::High, "{name}");
        }
        if name.ends_with("_blur") {
            assert_eq!(kind.freq_class(), FreqClass::Low, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn severity_outside_range_is_rejected(kind in arb_kind(), sev in 6u8..=255, seed in any::<u64>()) {
        prop_assert!(CorruptionSpec::new(kind, 0, seed).is_err());
        prop_assert!(CorruptionSpec::new(kind, sev, seed).is_err());
        prop_assert!(CorruptionSpec::new(kind, 1 + sev % 5, seed).is_ok());
    }

    #[test]
    fn corruption_is_seeded_and_shape_preserving(kind in arb_kind(), sev in 1u8..=5, seed in any::<u64>(), c in prop::sample::select(vec![1usize, 3])) {
        let table = SeverityTable::builtin();
        let img = image(seed, c, 12);
        let spec = CorruptionSpec::new(kind, sev, seed).unwrap();
        let a = corrupt(&img, &spec, &table).unwrap();
        let b = corrupt(&img, &spec, &table).unwrap();
        prop_assert_eq!(a.shape(), img.shape());
        prop_assert_eq!(a.data(), b.data());
        prop_assert!(a.all_finite());
    }

    #[test]
    fn batch_items_match_single_corruption_of_first(kind in arb_kind(), seed in any::<u64>()) {
        let table = SeverityTable::builtin();
        let img = image(seed, 1, 10);
        let batch = Tensor::new([2, 1, 10, 10], [img.data(), img.data()].concat()).unwrap();
        let spec = CorruptionSpec::new(kind, 3, seed).unwrap();
        let out = corrupt_batch(&batch, &spec, &table).unwrap();
        let single = corrupt(&img, &spec, &table).unwrap();
        prop_assert_eq!(out.item(0), single.data());
    }

    #[test]
    fn sequence_starts_clean_and_never_weakens(kind in arb_kind(), v in 2usize..12, seed in any::<u64>()) {
        let table = SeverityTable::builtin();
        let img = image(seed, 1, 10);
        let seq = make_sequence(&img, kind, v, &table, seed).unwrap();
        prop_assert_eq!(seq.len(), v);
        prop_assert_eq!(seq.frames[0].data(), img.data());
        prop_assert!(seq.magnitudes.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn flip_probability_is_bounded_and_mfp_is_mean(
        seqs in prop::collection::vec(prop::collection::vec(0usize..10, 2..12), 1..8),
        other in 0.0f64..=1.0,
    ) {
        let fp = flip_rate(&seqs).unwrap();
        prop_assert!((0.0..=1.0).contains(&fp));
        let r = FlipReport::new(vec![("a".into(), fp), ("b".into(), other)]).unwrap();
        prop_assert!((r.mfp - (fp + other) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_factor_applies_each_multiplier_once(m in prop::collection::vec((1usize..50, 0.05f64..0.95), 0..4), epoch in 0usize..60) {
        let s = Schedule { milestones: m.clone() };
        let expect: f64 = m.iter().filter(|(e, _)| *e <= epoch).map(|(_, f)| f).product();
        prop_assert!((s.factor(epoch) - expect).abs() < 1e-15);
        prop_assert!((s.factor(epoch + 1000) - m.iter().map(|(_, f)| f).product::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn validation_split_is_stratified_partition(n in 20usize..200, classes in 2usize..6, seed in any::<u64>()) {
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % classes).collect();
        let ds = Dataset::new(Tensor::zeros([n, 1, 2, 2]), labels, classes, Split::Train).unwrap();
        let (train, val) = split_validation(&ds, 0.15, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), n);
        prop_assert_eq!(val.len(), (n as f64 * 0.15).round() as usize);
        prop_assert!(train.labels.iter().chain(&val.labels).all(|&l| l < classes));
    }

    #[test]
    fn augment_draws_stay_in_range(lo in 0.0f64..=1.0, hi in 0.0f64..=1.0, seed in any::<u64>()) {
        let (t_min, t_max) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let p = AugmentPolicy { t_min, t_max, seed };
        prop_assert!(p.validate().is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let t = p.draw(&mut rng);
            prop_assert!(t >= t_min && t <= t_max);
        }
        let bad = AugmentPolicy { t_min: t_max + 0.1, t_max, seed };
        prop_assert!(bad.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml(seed in any::<u32>(), epochs in 1usize..300, lr in 0.001f64..1.0, dct in any::<bool>()) {
        let mut cfg = RunConfig::default();
        cfg.seed = u64::from(seed);
        cfg.optim.epochs = epochs;
        cfg.optim.lr = lr;
        cfg.augment.dct = dct;
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forward_backward_stays_finite_with_matching_grads(seed in any::<u64>(), k in 0usize..ActivationKind::ALL.len()) {
        let mut net = small_fc2(seed, ActivationKind::ALL[k]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::new([3, 1, 28, 28], (0..3 * 784).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let logits = net.forward(&x).unwrap();
        prop_assert!(logits.all_finite());
        let loss = softmax_cross_entropy(&logits, &[0, 1, 3]).unwrap();
        net.backward(&loss).unwrap();
        let mut ok = true;
        net.visit_params(&mut |p| {
            let grad = p.grad.expect("gradient after backward");
            ok &= grad.len() == p.value.len() && grad.iter().chain(p.value.iter()).all(|v| v.is_finite());
        });
        prop_assert!(ok);
    }

    #[test]
    fn sweep_samples_respect_polar_ranges(seed in any::<u64>(), n in 1usize..6, unit in 0.1f64..3.0) {
        let net = small_fc2(seed, ActivationKind::Relu);
        let head = build_fc2_net(&net).unwrap();
        let map = sweep(&head, n, 0.05, [0.3, -0.2], unit).unwrap();
        prop_assert_eq!(map.samples.len() % n, 0);
        for s in &map.samples {
            prop_assert!(s.ring >= 1 && s.ring <= n);
            prop_assert!((s.r - s.ring as f64 * unit).abs() < 1e-12);
            prop_assert!(s.theta >= 0.0 && s.theta < std::f64::consts::TAU);
            prop_assert!(s.class < 4);
            prop_assert!(s.score >= 0.25 - 1e-12 && s.score <= 1.0);
        }
    }
}
