//! Tabulates every activation, its slope and its parameter gradients, then
//! checks the analytic gradients against central differences.
//!
//! `cargo run --release --example activations`

use lprelu::activations::{ActivationKind, ActivationSpec, Param};

fn main() {
    let xs = [-2.0, -0.5, 0.0, 0.5, 1.0, 3.0, 5.5, 6.5, 9.0];
    for kind in ActivationKind::ALL {
        let spec = ActivationSpec::init(kind);
        println!("{spec}");
        println!("  {:>6} {:>9} {:>7}", "x", "f(x)", "f'(x)");
        for x in xs {
            println!("  {x:>6.2} {:>9.4} {:>7.3}", spec.value(x), spec.slope(x));
        }
    }

    // Finite differences away from the kinks.
    let h = 1e-5;
    println!("\nworst relative gradient error over x in [-3, 10]:");
    for kind in ActivationKind::ALL {
        let spec = ActivationSpec::init(kind);
        let kinks = spec.breakpoints();
        let mut worst = 0.0f64;
        for i in 0..1300 {
            let x = -3.0 + i as f64 * 0.01 + 0.003;
            if kinks.iter().any(|b| (x - b).abs() < 1e-3) {
                continue;
            }
            let fd = (spec.value(x + h) - spec.value(x - h)) / (2.0 * h);
            worst = worst.max(rel(spec.slope(x), fd));
            let grads = spec.param_grads(x);
            for &p in kind.params() {
                let (mut up, mut dn) = (spec.clone(), spec.clone());
                up.set(p, spec.get(p) + h);
                dn.set(p, spec.get(p) - h);
                if up.breakpoints().iter().chain(&dn.breakpoints()).any(|b| (x - b).abs() < 1e-3) {
                    continue;
                }
                let fd = (up.value(x) - dn.value(x)) / (2.0 * h);
                worst = worst.max(rel(grads[p.index()], fd));
            }
        }
        let params: Vec<&str> = kind.params().iter().map(|p: &Param| p.name()).collect();
        println!("  {:<14} {worst:.2e}  params {params:?}", kind.name());
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
