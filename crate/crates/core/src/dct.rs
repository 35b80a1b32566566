//! Full-image orthonormal 2-D DCT-II and the coefficient-dropping
//! augmentation built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::gemm;
use crate::tensor::Tensor;

/// Cached DCT-II bases for one `height × width` plane.
#[derive(Debug, Clone)]
pub struct DctPlan {
    height: usize,
    width: usize,
    basis_h: Vec<f64>,
    basis_w: Vec<f64>,
}

/// Orthonormal DCT-II matrix `M[k][n] = s_k cos(pi (2n+1) k / 2N)`.
fn basis(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            m[k * n + i] = s * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    m
}

impl DctPlan {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty("image"));
        }
        Ok(Self {
            height,
            width,
            basis_h: basis(height),
            basis_w: basis(width),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn check(&self, plane: &[f64]) -> Result<()> {
        if plane.len() != self.height * self.width {
            return Err(Error::Shape(format!(
                "plane of {} values for a {}x{} plan",
                plane.len(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    /// `C = Bh · X · Bwᵀ`.
    pub fn forward(&self, plane: &[f64]) -> Result<Vec<f64>> {
        self.check(plane)?;
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        gemm(h, h, w, &self.basis_h, false, plane, false, &mut tmp, 0.0);
        let mut out = vec![0.0; h * w];
        gemm(h, w, w, &tmp, false, &self.basis_w, true, &mut out, 0.0);
        Ok(out)
    }

    /// `X = Bhᵀ · C · Bw`.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check(coeffs)?;
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        gemm(h, h, w, &self.basis_h, true, coeffs, false, &mut tmp, 0.0);
        let mut out = vec![0.0; h * w];
        gemm(h, w, w, &tmp, false, &self.basis_w, false, &mut out, 0.0);
        Ok(out)
    }
}

/// Splits an `H×W` or `C×H×W` image into `(channels, h, w)`.
fn planes(image: &Tensor) -> Result<(usize, usize, usize)> {
    let (c, h, w) = match image.shape() {
        [h, w] => (1, *h, *w),
        [c, h, w] => (*c, *h, *w),
        s => return Err(Error::Shape(format!("expected H×W or C×H×W, got {s:?}"))),
    };
    if c * h * w == 0 {
        return Err(Error::Empty("image"));
    }
    Ok((c, h, w))
}

fn per_plane(image: &Tensor, f: impl Fn(&DctPlan, &[f64]) -> Result<Vec<f64>>) -> Result<Tensor> {
    let (_, h, w) = planes(image)?;
    if !image.all_finite() {
        return Err(Error::NonFinite("image passed to the DCT".into()));
    }
    let plan = DctPlan::new(h, w)?;
    let mut out = Vec::with_capacity(image.len());
    for plane in image.data().chunks(h * w) {
        out.extend(f(&plan, plane)?);
    }
    Tensor::new(image.shape().to_vec(), out)
}

/// Orthonormal 2-D DCT of each channel plane.
pub fn dct2(image: &Tensor) -> Result<Tensor> {
    per_plane(image, DctPlan::forward)
}

pub fn idct2(coeffs: &Tensor) -> Result<Tensor> {
    per_plane(coeffs, DctPlan::inverse)
}

/// Range of the drop threshold `t`, drawn uniformly per image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentPolicy {
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 0.5,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.t_min && self.t_min <= self.t_max && self.t_max <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= t_min <= t_max <= 1, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.t_max > self.t_min {
            rng.random_range(self.t_min..=self.t_max)
        } else {
            self.t_min
        }
    }

    /// Generator for item `index` of `epoch`, independent of batching.
    pub fn rng_for(&self, epoch: usize, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((epoch as u64) << 32) ^ index as u64);
        rng
    }
}

/// Zeroes coefficients whose magnitude is below `t` times the largest one.
/// Returns the number of coefficients dropped.
pub fn drop_coefficients(coeffs: &mut [f64], t: f64) -> usize {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let cut = t * max;
    let mut dropped = 0;
    for c in coeffs.iter_mut() {
        if c.abs() < cut {
            *c = 0.0;
            dropped += 1;
        }
    }
    dropped
}

/// Drops low-magnitude coefficients at a fixed threshold and reconstructs.
/// Each channel uses its own maximum.
pub fn augment_with_threshold(image: &Tensor, t: f64, clamp: bool) -> Result<Tensor> {
    let mut out = per_plane(image, |plan, plane| {
        let mut c = plan.forward(plane)?;
        drop_coefficients(&mut c, t);
        plan.inverse(&c)
    })?;
    if clamp {
        out.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Draws `t` from `policy` and applies [`augment_with_threshold`] with clamping.
pub fn augment(image: &Tensor, policy: &AugmentPolicy, rng: &mut impl Rng) -> Result<Tensor> {
    policy.validate()?;
    let t = policy.draw(rng);
    augment_with_threshold(image, t, true)
}

/// Augments every item of an `N×C×H×W` batch; item `i` of `epoch` always
/// receives the same threshold regardless of how the batch is formed.
pub fn augment_batch(batch: &Tensor, indices: &[usize], policy: &AugmentPolicy, epoch: usize) -> Result<Tensor> {
    policy.validate()?;
    let s = batch.shape();
    if s.len() != 4 || indices.len() != s[0] {
        return Err(Error::Shape(format!("batch {s:?} with {} indices", indices.len())));
    }
    let item_shape = s[1..].to_vec();
    let mut out = Vec::with_capacity(batch.len());
    for (k, &idx) in indices.iter().enumerate() {
        let mut rng = policy.rng_for(epoch, idx);
        let img = Tensor::new(item_shape.clone(), batch.item(k).to_vec())?;
        out.extend(augment(&img, policy, &mut rng)?.into_data());
    }
    Tensor::new(s.to_vec(), out)
}

pub fn energy(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// Share of DCT energy at `u + v >= (h + w) / 2` (the upper frequency half).
pub fn high_band_fraction(image: &Tensor) -> Result<f64> {
    let (_, h, w) = planes(image)?;
    let coeffs = dct2(image)?;
    let (mut high, mut total) = (0.0, 0.0);
    for plane in coeffs.data().chunks(h * w) {
        for (i, c) in plane.iter().enumerate() {
            let (u, v) = (i / w, i % w);
            total += c * c;
            if 2 * (u + v) >= h + w {
                high += c * c;
            }
        }
    }
    Ok(if total > 0.0 { high / total } else { 0.0 })
}
