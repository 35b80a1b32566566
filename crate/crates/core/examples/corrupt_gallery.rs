//! Applies every corruption at every severity to a few MNIST test digits,
//! writes one PNG strip per kind and prints how much energy each corruption
//! moves into the upper DCT band.
//!
//! `cargo run --release --example corrupt_gallery -- [out-dir]`
//!
//! Falls back to a synthetic stroke image when MNIST is not available.

use std::path::PathBuf;

use lprelu::corruptions::{corrupt, CorruptionKind, CorruptionSpec, SeverityTable};
use lprelu::data::{load_mnist, write_png};
use lprelu::dct::high_band_fraction;
use lprelu::tensor::Tensor;

fn samples() -> Vec<Tensor> {
    match load_mnist(lprelu::data::data_root().join("mnist")) {
        Ok(d) => (0..4).map(|i| Tensor::new([1, 28, 28], d.test.images.item(i).to_vec()).unwrap()).collect(),
        Err(e) => {
            eprintln!("{e}; using a synthetic digit");
            let data = (0..784)
                .map(|i| {
                    let (y, x) = ((i / 28) as f64, (i % 28) as f64);
                    let r = ((y - 14.0).powi(2) + (x - 14.0).powi(2)).sqrt();
                    if (r - 8.0).abs() < 2.0 { 1.0 } else { 0.0 }
                })
                .collect();
            vec![Tensor::new([1, 28, 28], data).unwrap()]
        }
    }
}

// Side by side: clean, then severities 1..5.
fn strip(images: &[Tensor]) -> Tensor {
    let w = 28 * images.len();
    let mut data = vec![0.0; 28 * w];
    for (k, img) in images.iter().enumerate() {
        for y in 0..28 {
            for x in 0..28 {
                data[y * w + k * 28 + x] = img.data()[y * 28 + x];
            }
        }
    }
    Tensor::new([1, 28, w], data).unwrap()
}

fn main() -> lprelu::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gallery".into()));
    std::fs::create_dir_all(&out).map_err(|e| lprelu::Error::io(&out, e))?;
    let table = SeverityTable::builtin();
    let images = samples();
    let clean_hf: f64 = images.iter().map(|i| high_band_fraction(i).unwrap()).sum::<f64>() / images.len() as f64;
    println!("clean upper-band energy {clean_hf:.4}");
    println!("{:<16} {:>6}  upper-band energy at severity 1..5", "kind", "class");
    for kind in CorruptionKind::ALL {
        let mut row = vec![images[0].clone()];
        let mut hf = Vec::new();
        for sev in 1..=5 {
            let spec = CorruptionSpec::new(kind, sev, 7)?;
            let mut sum = 0.0;
            for (i, img) in images.iter().enumerate() {
                let c = corrupt(img, &spec, &table)?;
                sum += high_band_fraction(&c)?;
                if i == 0 {
                    row.push(c);
                }
            }
            hf.push(format!("{:.4}", sum / images.len() as f64));
        }
        write_png(&strip(&row), &out.join(format!("{}.png", kind.name())))?;
        println!("{:<16} {:>6}  {}", kind.name(), format!("{:?}", kind.freq_class()), hf.join(" "));
    }
    println!("strips written to {}", out.display());
    Ok(())
}
