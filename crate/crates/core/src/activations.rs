//! Piecewise activation functions, including the low-pass ReLU variants.
//!
//! Every kind exposes its forward value, the derivative with respect to the
//! input and the derivatives with respect to each of its scalar parameters.
//! At breakpoints (x equal to 0, A, B or ±δ) the derivative of the region to
//! the right of the breakpoint is returned.
//!
//! LP-ReLU₁ passes its input through unchanged on `(0, A]` and attenuates it
//! by the filtering factor α beyond the cut-off `A`. LP-ReLU₂ adds a second
//! cut-off `B` after which the slope drops to β, with `A < B` and `α > β`:
//!
//! ```text
//!            0                              x <= 0
//! F(x) =     x                              0 < x <= A
//!            A + α(x - A)                   A < x <= B
//!            A + α(B - A) + β(x - B)        x > B
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Minimum distance kept between the two cut-offs of LP-ReLU₂.
pub const CUTOFF_BUFFER: f64 = 0.1;

/// Margin used when clamping filtering factors away from their open bounds.
pub const FACTOR_EPS: f64 = 1e-3;

/// Number of scalar parameters carried by an [`ActivationSpec`].
pub const PARAM_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
    PRelu,
    ClippedRelu,
    Tent,
    LogTailedRelu,
    Tanh,
    Swish,
    LpRelu1,
    LpRelu2,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 10] = [
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
        ActivationKind::PRelu,
        ActivationKind::ClippedRelu,
        ActivationKind::Tent,
        ActivationKind::LogTailedRelu,
        ActivationKind::Tanh,
        ActivationKind::Swish,
        ActivationKind::LpRelu1,
        ActivationKind::LpRelu2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu => "leaky_relu",
            ActivationKind::PRelu => "p_relu",
            ActivationKind::ClippedRelu => "clipped_relu",
            ActivationKind::Tent => "tent",
            ActivationKind::LogTailedRelu => "log_tailed_relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Swish => "swish",
            ActivationKind::LpRelu1 => "lp_relu1",
            ActivationKind::LpRelu2 => "lp_relu2",
        }
    }

    /// Nondecreasing in x for nonnegative filtering factors.
    pub fn is_monotone(self) -> bool {
        !matches!(self, ActivationKind::Tent | ActivationKind::Swish)
    }

    /// Parameters the function actually reads.
    pub fn params(self) -> &'static [Param] {
        use Param::*;
        match self {
            ActivationKind::Relu | ActivationKind::Tanh => &[],
            ActivationKind::LeakyRelu | ActivationKind::PRelu => &[Alpha],
            ActivationKind::ClippedRelu | ActivationKind::LogTailedRelu => &[A],
            ActivationKind::Tent => &[Delta],
            ActivationKind::Swish => &[Beta],
            ActivationKind::LpRelu1 => &[A, Alpha],
            ActivationKind::LpRelu2 => &[A, B, Alpha, Beta],
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "leaky" => Some(ActivationKind::LeakyRelu),
                "prelu" => Some(ActivationKind::PRelu),
                "clipped" | "c_relu" | "relu6" => Some(ActivationKind::ClippedRelu),
                "log_tailed" => Some(ActivationKind::LogTailedRelu),
                "lp1" | "lprelu1" => Some(ActivationKind::LpRelu1),
                "lp2" | "lprelu2" => Some(ActivationKind::LpRelu2),
                _ => None,
            })
            .ok_or_else(|| Error::Unknown {
                what: "activation",
                name: s.to_string(),
            })
    }
}

/// Scalar parameter slots of an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    A,
    B,
    Alpha,
    Beta,
    Delta,
}

impl Param {
    pub const ALL: [Param; PARAM_COUNT] = [Param::A, Param::B, Param::Alpha, Param::Beta, Param::Delta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::A => "A",
            Param::B => "B",
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::Delta => "delta",
        }
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Param::A),
            "B" | "b" => Ok(Param::B),
            "alpha" | "α" => Ok(Param::Alpha),
            "beta" | "β" => Ok(Param::Beta),
            "delta" | "δ" => Ok(Param::Delta),
            other => Err(Error::Unknown {
                what: "activation parameter",
                name: other.to_string(),
            }),
        }
    }
}

/// One activation kind together with its (possibly learnable) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    /// First cut-off (clipped, log-tailed, LP-ReLU₁/₂).
    pub a: f64,
    /// Second cut-off (LP-ReLU₂).
    pub b: f64,
    /// Negative slope (leaky, P-ReLU) or phase-1 filtering factor (LP-ReLU).
    pub alpha: f64,
    /// Phase-2 filtering factor (LP-ReLU₂) or Swish shape.
    pub beta: f64,
    /// Tent half-width.
    pub delta: f64,
    /// Which of `[A, B, alpha, beta, delta]` the optimizer may update.
    pub learnable: [bool; PARAM_COUNT],
}

/// Summary of clean / low-frequency / high-frequency activation magnitudes
/// used to place the LP-ReLU cut-offs.
#[derive(Debug, Clone)]
pub struct CutoffStats {
    /// Upper bin edges shared by the three histograms.
    pub bin_edges: Vec<f64>,
    pub clean: Vec<f64>,
    pub lfc: Vec<f64>,
    pub hfc: Vec<f64>,
}

impl CutoffStats {
    fn quantile(&self, counts: &[f64], q: f64) -> f64 {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (c, edge) in counts.iter().zip(&self.bin_edges) {
            acc += c;
            if acc >= q * total {
                return *edge;
            }
        }
        *self.bin_edges.last().unwrap_or(&0.0)
    }
}

impl ActivationSpec {
    /// Default initialisation for `kind`.
    ///
    /// LP-ReLU₁ starts at `A = 6, α = 0.05`; LP-ReLU₂ at `A = 5, B = 8.1,
    /// α = 0.05, β = α/3`. All LP-ReLU parameters are learnable by default.
    pub fn init(kind: ActivationKind) -> Self {
        let mut spec = ActivationSpec {
            kind,
            a: 6.0,
            b: 8.1,
            alpha: 0.05,
            beta: 1.0,
            delta: 1.0,
            learnable: [false; PARAM_COUNT],
        };
        match kind {
            ActivationKind::Relu | ActivationKind::Tanh => {}
            ActivationKind::LeakyRelu => spec.alpha = 0.01,
            ActivationKind::PRelu => {
                spec.alpha = 0.25;
                spec.set_learnable(Param::Alpha, true);
            }
            ActivationKind::ClippedRelu | ActivationKind::LogTailedRelu => spec.a = 6.0,
            ActivationKind::Tent => {
                spec.delta = 1.0;
                spec.set_learnable(Param::Delta, true);
            }
            ActivationKind::Swish => spec.beta = 1.0,
            ActivationKind::LpRelu1 => {
                spec.a = 6.0;
                spec.alpha = 0.05;
                spec.set_learnable(Param::A, true);
                spec.set_learnable(Param::Alpha, true);
            }
            ActivationKind::LpRelu2 => {
                spec.a = 5.0;
                spec.b = 8.1;
                spec.alpha = 0.05;
                spec.beta = spec.alpha / 3.0;
                for p in [Param::A, Param::B, Param::Alpha, Param::Beta] {
                    spec.set_learnable(p, true);
                }
            }
        }
        spec
    }

    /// Initialisation with optional activation statistics.
    ///
    /// When statistics are supplied for an LP-ReLU kind, `A` is placed where
    /// 99% of the low-frequency-corrupted activations have accumulated and
    /// `B` where 99.9% of the clean activations have; output beyond `B` is
    /// then dominated by high-frequency responses.
    pub fn init_with_stats(kind: ActivationKind, stats: Option<&CutoffStats>) -> Self {
        let mut spec = Self::init(kind);
        let Some(stats) = stats else { return spec };
        match kind {
            ActivationKind::LpRelu1 => {
                let a = stats.quantile(&stats.clean, 0.999);
                if a > 0.0 {
                    spec.a = a;
                }
            }
            ActivationKind::LpRelu2 => {
                let a = stats.quantile(&stats.lfc, 0.99);
                let b = stats.quantile(&stats.clean, 0.999);
                if a > 0.0 {
                    spec.a = a;
                    spec.b = b.max(a + CUTOFF_BUFFER);
                }
            }
            _ => {}
        }
        spec
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::A => self.a,
            Param::B => self.b,
            Param::Alpha => self.alpha,
            Param::Beta => self.beta,
            Param::Delta => self.delta,
        }
    }

    pub fn get_mut(&mut self, p: Param) -> &mut f64 {
        match p {
            Param::A => &mut self.a,
            Param::B => &mut self.b,
            Param::Alpha => &mut self.alpha,
            Param::Beta => &mut self.beta,
            Param::Delta => &mut self.delta,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        *self.get_mut(p) = v;
    }

    pub fn is_learnable(&self, p: Param) -> bool {
        self.learnable[p.index()] && self.kind.params().contains(&p)
    }

    pub fn set_learnable(&mut self, p: Param, on: bool) {
        self.learnable[p.index()] = on;
    }

    pub fn values(&self) -> [f64; PARAM_COUNT] {
        [self.a, self.b, self.alpha, self.beta, self.delta]
    }

    /// Applies `k=v,...` overrides, e.g. `A=5,B=8.1,alpha=0.05,learn=A+B`.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("activation parameter `{item}` is not k=v"))
            })?;
            let k = k.trim();
            let v = v.trim();
            if k == "learn" || k == "learnable" {
                self.learnable = [false; PARAM_COUNT];
                match v {
                    "none" | "" => {}
                    "all" => {
                        for &p in self.kind.params() {
                            self.set_learnable(p, true);
                        }
                    }
                    list => {
                        for name in list.split('+') {
                            self.set_learnable(name.parse()?, true);
                        }
                    }
                }
                continue;
            }
            let p: Param = k.parse()?;
            let value: f64 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{v}` is not a number for {k}")))?;
            self.set(p, value);
        }
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameter invariants of the kind.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind.name();
        let fail = |reason: String| Err(Error::InvalidActivation { kind, reason });
        for &p in self.kind.params() {
            if !self.get(p).is_finite() {
                return fail(format!("{} is not finite", p.name()));
            }
        }
        match self.kind {
            ActivationKind::ClippedRelu | ActivationKind::LogTailedRelu if self.a <= 0.0 => {
                fail(format!("A = {} must be positive", self.a))
            }
            ActivationKind::Tent if self.delta <= 0.0 => {
                fail(format!("delta = {} must be positive", self.delta))
            }
            ActivationKind::LpRelu1 | ActivationKind::LpRelu2 if self.a <= 0.0 => {
                fail(format!("A = {} must be positive", self.a))
            }
            ActivationKind::LpRelu1 | ActivationKind::LpRelu2
                if !(0.0..=1.0).contains(&self.alpha) =>
            {
                fail(format!("alpha = {} outside [0, 1]", self.alpha))
            }
            ActivationKind::LpRelu2 if self.a >= self.b => {
                fail(format!("A = {} must be below B = {}", self.a, self.b))
            }
            ActivationKind::LpRelu2 if self.beta < 0.0 || self.beta >= self.alpha => {
                fail(format!(
                    "need alpha > beta >= 0, got alpha = {}, beta = {}",
                    self.alpha, self.beta
                ))
            }
            _ => Ok(()),
        }
    }

    /// Validated forward evaluation.
    pub fn forward(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.value(x))
    }

    /// Validated derivative with respect to the input.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.slope(x))
    }

    /// Forward value without re-checking invariants.
    pub fn value(&self, x: f64) -> f64 {
        let (a, b, alpha, beta, delta) = (self.a, self.b, self.alpha, self.beta, self.delta);
        match self.kind {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu | ActivationKind::PRelu => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            ActivationKind::ClippedRelu => x.clamp(0.0, a),
            ActivationKind::Tent => (delta - x.abs()).max(0.0),
            ActivationKind::LogTailedRelu => {
                if x <= 0.0 {
                    0.0
                } else if x <= a {
                    x
                } else {
                    a + (x - a).ln_1p()
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Swish => x * sigmoid(beta * x),
            ActivationKind::LpRelu1 => {
                if x <= 0.0 {
                    0.0
                } else if x <= a {
                    x
                } else {
                    a + alpha * (x - a)
                }
            }
            ActivationKind::LpRelu2 => {
                if x <= 0.0 {
                    0.0
                } else if x <= a {
                    x
                } else if x <= b {
                    a + alpha * (x - a)
                } else {
                    a + alpha * (b - a) + beta * (x - b)
                }
            }
        }
    }

    /// dF/dx, right-hand at breakpoints.
    pub fn slope(&self, x: f64) -> f64 {
        let (a, b, alpha, beta, delta) = (self.a, self.b, self.alpha, self.beta, self.delta);
        match self.kind {
            ActivationKind::Relu => step(x >= 0.0),
            ActivationKind::LeakyRelu | ActivationKind::PRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            ActivationKind::ClippedRelu => step(x >= 0.0 && x < a),
            ActivationKind::Tent => {
                if x < -delta || x >= delta {
                    0.0
                } else if x < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            ActivationKind::LogTailedRelu => {
                if x < 0.0 {
                    0.0
                } else if x < a {
                    1.0
                } else {
                    1.0 / (1.0 + x - a)
                }
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Swish => {
                let s = sigmoid(beta * x);
                s + beta * x * s * (1.0 - s)
            }
            ActivationKind::LpRelu1 => {
                if x < 0.0 {
                    0.0
                } else if x < a {
                    1.0
                } else {
                    alpha
                }
            }
            ActivationKind::LpRelu2 => {
                if x < 0.0 {
                    0.0
                } else if x < a {
                    1.0
                } else if x < b {
                    alpha
                } else {
                    beta
                }
            }
        }
    }

    /// dF/dθ for every parameter slot, right-hand at breakpoints. Slots the
    /// kind does not use are zero.
    pub fn param_grads(&self, x: f64) -> [f64; PARAM_COUNT] {
        let (a, b, alpha, beta, delta) = (self.a, self.b, self.alpha, self.beta, self.delta);
        let mut g = [0.0; PARAM_COUNT];
        match self.kind {
            ActivationKind::Relu | ActivationKind::Tanh => {}
            ActivationKind::LeakyRelu | ActivationKind::PRelu => {
                if x < 0.0 {
                    g[Param::Alpha.index()] = x;
                }
            }
            ActivationKind::ClippedRelu => {
                if x >= a {
                    g[Param::A.index()] = 1.0;
                }
            }
            ActivationKind::Tent => {
                if x >= -delta && x < delta {
                    g[Param::Delta.index()] = 1.0;
                }
            }
            ActivationKind::LogTailedRelu => {
                if x >= a {
                    g[Param::A.index()] = 1.0 - 1.0 / (1.0 + x - a);
                }
            }
            ActivationKind::Swish => {
                let s = sigmoid(beta * x);
                g[Param::Beta.index()] = x * x * s * (1.0 - s);
            }
            ActivationKind::LpRelu1 => {
                if x >= a {
                    g[Param::A.index()] = 1.0 - alpha;
                    g[Param::Alpha.index()] = x - a;
                }
            }
            ActivationKind::LpRelu2 => {
                if x >= a && x < b {
                    g[Param::A.index()] = 1.0 - alpha;
                    g[Param::Alpha.index()] = x - a;
                } else if x >= b {
                    g[Param::A.index()] = 1.0 - alpha;
                    g[Param::B.index()] = alpha - beta;
                    g[Param::Alpha.index()] = b - a;
                    g[Param::Beta.index()] = x - b;
                }
            }
        }
        g
    }

    /// Input values at which the piecewise definition switches branch.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ActivationKind::Relu | ActivationKind::LeakyRelu | ActivationKind::PRelu => vec![0.0],
            ActivationKind::ClippedRelu
            | ActivationKind::LogTailedRelu
            | ActivationKind::LpRelu1 => vec![0.0, self.a],
            ActivationKind::Tent => vec![-self.delta, 0.0, self.delta],
            ActivationKind::Tanh | ActivationKind::Swish => vec![],
            ActivationKind::LpRelu2 => vec![0.0, self.a, self.b],
        }
    }

    /// Upper bound on |dF/dx|.
    pub fn max_slope(&self) -> f64 {
        match self.kind {
            ActivationKind::LeakyRelu | ActivationKind::PRelu => self.alpha.abs().max(1.0),
            ActivationKind::Swish => 1.1 * self.beta.abs().max(1.0),
            _ => 1.0,
        }
    }

    /// Clamps learnable parameters back into the feasible region.
    ///
    /// LP-ReLU₂ keeps `B >= A + CUTOFF_BUFFER` and `1 - ε >= α > β >= 0`;
    /// LP-ReLU₁ keeps `0 <= α <= 1 - ε`. Cut-offs and the tent width stay
    /// strictly positive. The map is idempotent.
    pub fn project(&self) -> Self {
        let mut s = *self;
        match s.kind {
            ActivationKind::ClippedRelu | ActivationKind::LogTailedRelu => s.a = s.a.max(FACTOR_EPS),
            ActivationKind::Tent => s.delta = s.delta.max(FACTOR_EPS),
            ActivationKind::LpRelu1 => {
                s.a = s.a.max(FACTOR_EPS);
                s.alpha = s.alpha.clamp(0.0, 1.0 - FACTOR_EPS);
            }
            ActivationKind::LpRelu2 => {
                s.a = s.a.max(FACTOR_EPS);
                if s.b < s.a + CUTOFF_BUFFER {
                    s.b = s.a + CUTOFF_BUFFER;
                }
                s.alpha = s.alpha.clamp(2.0 * FACTOR_EPS, 1.0 - FACTOR_EPS);
                s.beta = s.beta.clamp(0.0, s.alpha - FACTOR_EPS);
            }
            _ => {}
        }
        s
    }

    /// Elementwise forward over a tensor.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        x.map(|v| self.value(v))
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        let params = self.kind.params();
        if !params.is_empty() {
            let parts: Vec<String> = params
                .iter()
                .map(|p| format!("{}={}", p.name(), self.get(*p)))
                .collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn step(on: bool) -> f64 {
    if on {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: ActivationKind) -> ActivationSpec {
        ActivationSpec::init(kind)
    }

    #[test]
    fn lp_relu1_forward_values() {
        let s = spec(ActivationKind::LpRelu1);
        assert_eq!(s.forward(3.0).unwrap(), 3.0);
        assert!((s.forward(10.0).unwrap() - 6.2).abs() < 1e-12);
    }

    #[test]
    fn lp_relu2_tail_is_continuous_form() {
        let s = spec(ActivationKind::LpRelu2);
        // f3(B) = 5 + 0.05 * 3.1 = 5.155, then slope alpha / 3 for 1.9
        let expected = 5.155 + (0.05 / 3.0) * 1.9;
        assert!((s.forward(10.0).unwrap() - expected).abs() < 1e-12);
        assert!((s.forward(10.0).unwrap() - 5.18667).abs() < 1e-5);
    }

    #[test]
    fn reference_kinds() {
        assert_eq!(spec(ActivationKind::ClippedRelu).value(8.0), 6.0);
        assert_eq!(spec(ActivationKind::Tent).value(0.0), 1.0);
        assert_eq!(spec(ActivationKind::Relu).value(-1.0), 0.0);
        assert_eq!(spec(ActivationKind::Relu).value(3.0), 3.0);
        let mut swish = spec(ActivationKind::Swish);
        swish.beta = 0.0;
        assert_eq!(swish.value(4.0), 2.0);
        let log = spec(ActivationKind::LogTailedRelu);
        assert_eq!(log.value(6.0), 6.0);
        assert!((log.value(6.0 + 1e-9) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn lp_derivative_tables() {
        let s1 = spec(ActivationKind::LpRelu1);
        assert_eq!(s1.derivative(3.0).unwrap(), 1.0);
        assert_eq!(s1.derivative(10.0).unwrap(), 0.05);
        let s2 = spec(ActivationKind::LpRelu2);
        assert_eq!(s2.slope(-1.0), 0.0);
        assert_eq!(s2.slope(2.0), 1.0);
        assert_eq!(s2.slope(6.0), s2.alpha);
        assert_eq!(s2.slope(9.0), s2.beta);
    }

    #[test]
    fn right_hand_convention_at_breakpoints() {
        for kind in ActivationKind::ALL {
            let s = spec(kind);
            for bp in s.breakpoints() {
                let right = s.slope(bp + 1e-9);
                let left = s.slope(bp - 1e-9);
                assert!((s.slope(bp) - right).abs() < 1e-6, "{kind} at {bp}");
                if (left - right).abs() > 1e-3 {
                    assert!((s.slope(bp) - left).abs() > 1e-3, "{kind} at {bp}");
                }
            }
        }
    }

    #[test]
    fn init_values() {
        let s = spec(ActivationKind::LpRelu2);
        assert_eq!((s.a, s.b, s.alpha), (5.0, 8.1, 0.05));
        assert!((s.beta - 0.016667).abs() < 1e-6);
        let s = spec(ActivationKind::LpRelu1);
        assert_eq!((s.a, s.alpha), (6.0, 0.05));
        assert_eq!(spec(ActivationKind::LeakyRelu).alpha, 0.01);
        assert!(s.is_learnable(Param::A) && s.is_learnable(Param::Alpha));
        assert!(!s.is_learnable(Param::B));
        assert!(!spec(ActivationKind::Swish).is_learnable(Param::Beta));
    }

    #[test]
    fn init_from_histogram_orders_cutoffs() {
        let edges: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let clean: Vec<f64> = (0..100).map(|i| if i < 80 { 1.0 } else { 0.0 }).collect();
        let lfc: Vec<f64> = (0..100).map(|i| if i < 40 { 1.0 } else { 0.0 }).collect();
        let hfc = vec![1.0; 100];
        let stats = CutoffStats {
            bin_edges: edges,
            clean,
            lfc,
            hfc,
        };
        let s = ActivationSpec::init_with_stats(ActivationKind::LpRelu2, Some(&stats));
        assert!(s.a < s.b);
        assert!((s.a - 4.0).abs() < 1e-9);
        assert!((s.b - 8.0).abs() < 1e-9);
        s.validate().unwrap();
    }

    #[test]
    fn projection_examples() {
        let mut s = spec(ActivationKind::LpRelu2);
        s.a = 8.0;
        s.b = 7.9;
        let p = s.project();
        assert_eq!(p.a, 8.0);
        assert!((p.b - (8.0 + CUTOFF_BUFFER)).abs() < 1e-12);

        let mut s = spec(ActivationKind::LpRelu1);
        s.alpha = 1.2;
        assert_eq!(s.project().alpha, 1.0 - FACTOR_EPS);

        let s = spec(ActivationKind::LpRelu2);
        assert_eq!(s.project(), s);

        let mut s = spec(ActivationKind::LpRelu2);
        s.beta = 0.2;
        let p = s.project();
        assert!(p.alpha > p.beta && p.beta >= 0.0);
        p.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = spec(ActivationKind::LpRelu2);
        s.b = 4.0;
        assert!(s.forward(1.0).is_err());
        let mut s = spec(ActivationKind::LpRelu2);
        s.beta = 0.06;
        assert!(s.derivative(1.0).is_err());
        let mut s = spec(ActivationKind::Tent);
        s.delta = 0.0;
        assert!(s.validate().is_err());
        let mut s = spec(ActivationKind::LpRelu1);
        s.alpha = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn parse_kind_and_overrides() {
        assert_eq!("lp_relu2".parse::<ActivationKind>().unwrap(), ActivationKind::LpRelu2);
        assert_eq!("LP-ReLU1".parse::<ActivationKind>().unwrap(), ActivationKind::LpRelu1);
        assert!("foo".parse::<ActivationKind>().is_err());
        let s = spec(ActivationKind::LpRelu2)
            .with_overrides("A=4, B=9, alpha=0.1, beta=0.02, learn=A+B")
            .unwrap();
        assert_eq!((s.a, s.b, s.alpha, s.beta), (4.0, 9.0, 0.1, 0.02));
        assert!(s.is_learnable(Param::A) && !s.is_learnable(Param::Alpha));
        assert!(spec(ActivationKind::LpRelu2).with_overrides("A=9").is_err());
        assert!(spec(ActivationKind::LpRelu2).with_overrides("gamma=1").is_err());
    }

    fn arb_lp2() -> impl Strategy<Value = ActivationSpec> {
        (-5.0..20.0f64, -5.0..20.0f64, -0.5..1.5f64, -0.5..1.5f64).prop_map(|(a, b, al, be)| {
            let mut s = ActivationSpec::init(ActivationKind::LpRelu2);
            s.a = a;
            s.b = b;
            s.alpha = al;
            s.beta = be;
            s
        })
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_feasible(s in arb_lp2()) {
            let p = s.project();
            prop_assert_eq!(p.project(), p);
            prop_assert!(p.validate().is_ok());
            prop_assert!(p.b - p.a >= CUTOFF_BUFFER - 1e-12);
        }

        #[test]
        fn lp_relu2_tail_bounded(x in 8.1f64..1e4) {
            let s = ActivationSpec::init(ActivationKind::LpRelu2);
            let fb = s.value(s.b);
            prop_assert!(s.value(x) <= fb + s.beta * (x - s.b) + 1e-9);
        }

        #[test]
        fn monotone_kinds_nondecreasing(x in -50.0f64..50.0, dx in 0.0f64..5.0) {
            for kind in ActivationKind::ALL.into_iter().filter(|k| k.is_monotone()) {
                let s = ActivationSpec::init(kind);
                prop_assert!(s.value(x + dx) >= s.value(x) - 1e-12, "{}", kind);
            }
        }
    }
}
