//! DCT low-pass augmentation: energy kept and pixel change as the threshold
//! grows, plus a PNG strip of one digit at t = 0, 0.1, ..., 0.9.
//!
//! `cargo run --release --example dct_augment -- [out.png]`

use lprelu::data::{load_mnist, write_png};
use lprelu::dct::{augment, augment_with_threshold, dct2, energy, idct2, AugmentPolicy};
use lprelu::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lprelu::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "dct_strip.png".into());
    let data = load_mnist(lprelu::data::data_root().join("mnist"))?;
    let img = Tensor::new([1, 28, 28], data.test.images.item(0).to_vec())?;

    let back = idct2(&dct2(&img)?)?;
    let err = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip max error {err:.2e}");

    let e0 = energy(img.data());
    println!("{:>4} {:>8} {:>10}", "t", "energy", "max |dx|");
    let mut frames = Vec::new();
    for k in 0..10 {
        let t = k as f64 / 10.0;
        let y = augment_with_threshold(&img, t, true)?;
        let dx = img.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{t:>4.1} {:>8.4} {dx:>10.4}", energy(y.data()) / e0);
        frames.extend_from_slice(y.data());
    }
    // Frames side by side.
    let mut strip = vec![0.0; 28 * 280];
    for k in 0..10 {
        for y in 0..28 {
            for x in 0..28 {
                strip[y * 280 + k * 28 + x] = frames[k * 784 + y * 28 + x];
            }
        }
    }
    write_png(&Tensor::new([1, 28, 280], strip)?, std::path::Path::new(&out))?;
    println!("wrote {out}");

    // Thresholds drawn by the training-time policy.
    let policy = AugmentPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let kept: Vec<String> = (0..8)
        .map(|_| format!("{:.3}", energy(augment(&img, &policy, &mut rng).unwrap().data()) / e0))
        .collect();
    println!("policy t in [{}, {}], energy kept: {}", policy.t_min, policy.t_max, kept.join(" "));
    Ok(())
}
