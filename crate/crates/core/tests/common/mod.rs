//! Finite-difference helpers shared by the integration tests.
#![allow(dead_code)]

use lprelu::activations::{ActivationKind, ActivationSpec, Param};
use rand::Rng;

/// Central-difference step for activation checks.
pub const FD_STEP: f64 = 1e-4;
/// Inputs closer than this to a breakpoint are skipped.
pub const KINK_GUARD: f64 = 1e-3;
/// Denominator floor of the relative error, so two derivatives that both
/// vanish compare as equal.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Parameters away from their defaults so every branch has a distinct slope.
pub fn test_spec(kind: ActivationKind) -> ActivationSpec {
    let params = match kind {
        ActivationKind::LeakyRelu => "alpha=0.1",
        ActivationKind::PRelu => "alpha=0.25",
        ActivationKind::ClippedRelu | ActivationKind::LogTailedRelu => "A=3",
        ActivationKind::Tent => "delta=2",
        ActivationKind::Swish => "beta=1.5",
        ActivationKind::LpRelu1 => "A=4,alpha=0.2",
        ActivationKind::LpRelu2 => "A=3,B=6,alpha=0.3,beta=0.05",
        ActivationKind::Relu | ActivationKind::Tanh => "",
    };
    ActivationSpec::init(kind).with_overrides(params).expect("valid test parameters")
}

pub fn near_kink(spec: &ActivationSpec, x: f64) -> bool {
    spec.breakpoints().iter().any(|b| (x - b).abs() < KINK_GUARD)
}

/// Worst relative error of `slope` and of every parameter gradient against
/// central differences, over `n` inputs drawn from `[-lo, lo]` away from
/// breakpoints. Returns `(worst, points checked)`.
pub fn activation_fd(spec: &ActivationSpec, n: usize, lo: f64, rng: &mut impl Rng) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < n {
        let x = rng.random_range(-lo..lo);
        if near_kink(spec, x) {
            continue;
        }
        let h = FD_STEP;
        let num = (spec.value(x + h) - spec.value(x - h)) / (2.0 * h);
        worst = worst.max(rel_err(spec.slope(x), num));
        let pg = spec.param_grads(x);
        for &p in spec.kind.params() {
            let at = |v: f64| {
                let mut s = *spec;
                s.set(p, v);
                s.value(x)
            };
            let v0 = spec.get(p);
            // A parameter step can move a breakpoint across x.
            if moves_kink(spec, p, x) {
                continue;
            }
            let num = (at(v0 + h) - at(v0 - h)) / (2.0 * h);
            worst = worst.max(rel_err(pg[p.index()], num));
        }
        checked += 1;
    }
    (worst, checked)
}

fn moves_kink(spec: &ActivationSpec, p: Param, x: f64) -> bool {
    let h = FD_STEP;
    [spec.get(p) - h, spec.get(p) + h].iter().any(|&v| {
        let mut s = *spec;
        s.set(p, v);
        near_kink(&s, x)
    })
}
