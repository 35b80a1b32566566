//! Layer kinds of the sequential network and their forward/backward passes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::activations::{ActivationSpec, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mutable view of one trainable parameter handed to optimizers.
pub struct ParamMut<'a> {
    pub name: String,
    pub value: &'a mut [f64],
    pub grad: Option<&'a [f64]>,
    /// Whether L2 regularisation applies.
    pub decay: bool,
}

/// Per-layer values recorded during a taped forward pass.
#[derive(Debug)]
pub(crate) enum Cache {
    Conv { cols: Vec<f64>, in_shape: [usize; 4] },
    Pool { argmax: Vec<u32>, in_shape: [usize; 4] },
    Linear { input: Tensor },
    Activation { input: Tensor },
    Flatten { in_shape: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub size: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ActivationLayer {
    pub spec: ActivationSpec,
    grads: Option<[f64; PARAM_COUNT]>,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    MaxPool2d(MaxPool2d),
    Linear(Linear),
    Activation(ActivationLayer),
    Flatten,
}

fn he_normal(rng: &mut impl Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape, data).expect("consistent shape").into_param()
}

impl Conv2d {
    pub fn new(
        rng: &mut impl Rng,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            weight: he_normal(rng, vec![out_channels, in_channels, kernel, kernel], fan_in),
            bias: Tensor::zeros([out_channels]).into_param(),
            stride,
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let k = self.kernel();
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < k || wp < k {
            return None;
        }
        Some(((hp - k) / self.stride + 1, (wp - k) / self.stride + 1))
    }

    /// Unfolds one `[c, h, w]` image into `[c*k*k, oh*ow]` columns.
    fn im2col(&self, img: &[f64], c: usize, h: usize, w: usize, oh: usize, ow: usize, cols: &mut [f64]) {
        let k = self.kernel();
        let (s, p) = (self.stride as isize, self.padding as isize);
        let npix = oh * ow;
        for ci in 0..c {
            let plane = &img[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut cols[row * npix..(row + 1) * npix];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ky as isize - p;
                        let line = &mut dst[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= h as isize {
                            line.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = ox as isize * s + kx as isize - p;
                            *v = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], c: usize, h: usize, w: usize, oh: usize, ow: usize, img: &mut [f64]) {
        let k = self.kernel();
        let (s, p) = (self.stride as isize, self.padding as isize);
        let npix = oh * ow;
        for ci in 0..c {
            let plane = &mut img[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let src = &cols[row * npix..(row + 1) * npix];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ky as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = ox as isize * s + kx as isize - p;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, x: &Tensor, keep: bool) -> (Tensor, Option<Cache>) {
        let [n, c, h, w] = dims4(x);
        let (oh, ow) = self.out_hw(h, w).expect("checked by expect_input");
        let oc = self.out_channels();
        let kk = c * self.kernel() * self.kernel();
        let npix = oh * ow;
        let mut out = vec![0.0; n * oc * npix];
        let mut cols_all = if keep { vec![0.0; n * kk * npix] } else { Vec::new() };
        let mut scratch = if keep { Vec::new() } else { vec![0.0; kk * npix] };
        for i in 0..n {
            let cols: &mut [f64] = if keep {
                &mut cols_all[i * kk * npix..(i + 1) * kk * npix]
            } else {
                &mut scratch
            };
            self.im2col(x.item(i), c, h, w, oh, ow, cols);
            let dst = &mut out[i * oc * npix..(i + 1) * oc * npix];
            for (o, b) in self.bias.data().iter().enumerate() {
                dst[o * npix..(o + 1) * npix].iter_mut().for_each(|v| *v = *b);
            }
            gemm(oc, kk, npix, self.weight.data(), false, cols, false, dst, 1.0);
        }
        let out = Tensor::new([n, oc, oh, ow], out).expect("conv output shape");
        let cache = keep.then(|| Cache::Conv {
            cols: cols_all,
            in_shape: [n, c, h, w],
        });
        (out, cache)
    }

    fn backward(&mut self, cols: &[f64], in_shape: [usize; 4], grad_out: &Tensor) -> Tensor {
        let [n, c, h, w] = in_shape;
        let (oh, ow) = (grad_out.shape()[2], grad_out.shape()[3]);
        let oc = self.out_channels();
        let kk = c * self.kernel() * self.kernel();
        let npix = oh * ow;
        let mut dw = vec![0.0; oc * kk];
        let mut db = vec![0.0; oc];
        let mut dx = vec![0.0; n * c * h * w];
        let mut dcols = vec![0.0; kk * npix];
        for i in 0..n {
            let go = grad_out.item(i);
            let col = &cols[i * kk * npix..(i + 1) * kk * npix];
            gemm(oc, npix, kk, go, false, col, true, &mut dw, 1.0);
            for (o, d) in db.iter_mut().enumerate() {
                *d += go[o * npix..(o + 1) * npix].iter().sum::<f64>();
            }
            gemm(kk, oc, npix, self.weight.data(), true, go, false, &mut dcols, 0.0);
            self.col2im(&dcols, c, h, w, oh, ow, &mut dx[i * c * h * w..(i + 1) * c * h * w]);
        }
        self.weight.accumulate_grad(&dw);
        self.bias.accumulate_grad(&db);
        Tensor::new([n, c, h, w], dx).expect("conv input shape")
    }
}

impl MaxPool2d {
    fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if h < self.size || w < self.size {
            return None;
        }
        Some(((h - self.size) / self.stride + 1, (w - self.size) / self.stride + 1))
    }

    fn forward(&self, x: &Tensor, keep: bool) -> (Tensor, Option<Cache>) {
        let [n, c, h, w] = dims4(x);
        let (oh, ow) = self.out_hw(h, w).expect("checked by expect_input");
        let mut out = vec![0.0; n * c * oh * ow];
        let mut argmax = if keep { vec![0u32; out.len()] } else { Vec::new() };
        let src = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0usize;
                    for ky in 0..self.size {
                        let row = base + (oy * self.stride + ky) * w + ox * self.stride;
                        for kx in 0..self.size {
                            let v = src[row + kx];
                            if v > best {
                                best = v;
                                best_i = row + kx;
                            }
                        }
                    }
                    let o = (plane * oh + oy) * ow + ox;
                    out[o] = best;
                    if keep {
                        argmax[o] = best_i as u32;
                    }
                }
            }
        }
        let out = Tensor::new([n, c, oh, ow], out).expect("pool output shape");
        (out, keep.then(|| Cache::Pool { argmax, in_shape: [n, c, h, w] }))
    }
}

impl Linear {
    pub fn new(rng: &mut impl Rng, in_features: usize, out_features: usize) -> Self {
        Self {
            weight: he_normal(rng, vec![out_features, in_features], in_features),
            bias: Tensor::zeros([out_features]).into_param(),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let (i, o) = (self.in_features(), self.out_features());
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(self.bias.data());
        }
        gemm(n, i, o, x.data(), false, self.weight.data(), true, &mut out, 1.0);
        Tensor::new([n, o], out).expect("linear output shape")
    }

    fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Tensor {
        let n = input.batch();
        let (i, o) = (self.in_features(), self.out_features());
        let mut dw = vec![0.0; o * i];
        gemm(o, n, i, grad_out.data(), true, input.data(), false, &mut dw, 0.0);
        let mut db = vec![0.0; o];
        for row in grad_out.data().chunks(o) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, grad_out.data(), false, self.weight.data(), false, &mut dx, 0.0);
        self.weight.accumulate_grad(&dw);
        self.bias.accumulate_grad(&db);
        Tensor::new(input.shape().to_vec(), dx).expect("linear input shape")
    }
}

impl ActivationLayer {
    pub fn new(spec: ActivationSpec) -> Self {
        Self { spec, grads: None }
    }

    pub fn param_grads(&self) -> Option<&[f64; PARAM_COUNT]> {
        self.grads.as_ref()
    }

    fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Tensor {
        let spec = self.spec;
        let mut acc = [0.0; PARAM_COUNT];
        let needs_params = spec.kind.params().iter().any(|p| spec.is_learnable(*p));
        let dx: Vec<f64> = input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| {
                if needs_params && g != 0.0 {
                    for (a, pg) in acc.iter_mut().zip(spec.param_grads(x)) {
                        *a += g * pg;
                    }
                }
                g * spec.slope(x)
            })
            .collect();
        let grads = self.grads.get_or_insert([0.0; PARAM_COUNT]);
        for (g, a) in grads.iter_mut().zip(acc) {
            *g += a;
        }
        Tensor::new(input.shape().to_vec(), dx).expect("activation shape")
    }
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2d(_) => "maxpool2d",
            Layer::Linear(_) => "linear",
            Layer::Activation(_) => "act",
            Layer::Flatten => "flatten",
        }
    }

    pub fn activation(&self) -> Option<&ActivationSpec> {
        match self {
            Layer::Activation(a) => Some(&a.spec),
            _ => None,
        }
    }

    /// Output shape for `input`, or the expected input shape on mismatch.
    pub(crate) fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::LayerShape {
            layer: index,
            expected,
            actual: input.to_vec(),
        };
        match self {
            Layer::Conv2d(c) => {
                if input.len() != 4 || input[1] != c.in_channels() {
                    return Err(mismatch(vec![0, c.in_channels(), 0, 0]));
                }
                let (oh, ow) = c
                    .out_hw(input[2], input[3])
                    .ok_or_else(|| mismatch(vec![input[0], c.in_channels(), c.kernel(), c.kernel()]))?;
                Ok(vec![input[0], c.out_channels(), oh, ow])
            }
            Layer::MaxPool2d(p) => {
                if input.len() != 4 {
                    return Err(mismatch(vec![0, 0, p.size, p.size]));
                }
                let (oh, ow) = p
                    .out_hw(input[2], input[3])
                    .ok_or_else(|| mismatch(vec![input[0], input[1], p.size, p.size]))?;
                Ok(vec![input[0], input[1], oh, ow])
            }
            Layer::Linear(l) => {
                if input.len() != 2 || input[1] != l.in_features() {
                    return Err(mismatch(vec![0, l.in_features()]));
                }
                Ok(vec![input[0], l.out_features()])
            }
            Layer::Activation(_) => Ok(input.to_vec()),
            Layer::Flatten => {
                if input.is_empty() {
                    return Err(mismatch(vec![0, 0]));
                }
                Ok(vec![input[0], input[1..].iter().product()])
            }
        }
    }

    pub(crate) fn forward(&self, x: &Tensor, keep: bool) -> (Tensor, Option<Cache>) {
        match self {
            Layer::Conv2d(c) => c.forward(x, keep),
            Layer::MaxPool2d(p) => p.forward(x, keep),
            Layer::Linear(l) => {
                let out = l.forward(x);
                (out, keep.then(|| Cache::Linear { input: x.clone() }))
            }
            Layer::Activation(a) => {
                let out = a.spec.apply(x);
                (out, keep.then(|| Cache::Activation { input: x.clone() }))
            }
            Layer::Flatten => {
                let n = x.batch();
                let out = x.clone().reshape([n, x.item_len()]).expect("flatten");
                (out, keep.then(|| Cache::Flatten { in_shape: x.shape().to_vec() }))
            }
        }
    }

    pub(crate) fn backward(&mut self, cache: &Cache, grad_out: Tensor) -> Tensor {
        match (self, cache) {
            (Layer::Conv2d(c), Cache::Conv { cols, in_shape }) => c.backward(cols, *in_shape, &grad_out),
            (Layer::MaxPool2d(_), Cache::Pool { argmax, in_shape }) => {
                let mut dx = vec![0.0; in_shape.iter().product()];
                for (g, &i) in grad_out.data().iter().zip(argmax) {
                    dx[i as usize] += g;
                }
                Tensor::new(in_shape.to_vec(), dx).expect("pool input shape")
            }
            (Layer::Linear(l), Cache::Linear { input }) => l.backward(input, &grad_out),
            (Layer::Activation(a), Cache::Activation { input }) => a.backward(input, &grad_out),
            (Layer::Flatten, Cache::Flatten { in_shape }) => {
                grad_out.reshape(in_shape.clone()).expect("flatten input shape")
            }
            (layer, cache) => unreachable!("cache {cache:?} recorded for {}", layer.kind_name()),
        }
    }

    pub(crate) fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        match self {
            Layer::Conv2d(Conv2d { weight, bias, .. }) | Layer::Linear(Linear { weight, bias }) => {
                for (name, t) in [("weight", weight), ("bias", bias)] {
                    if !t.requires_grad() {
                        continue;
                    }
                    let (value, grad) = t.value_and_grad_mut();
                    f(ParamMut {
                        name: format!("{prefix}.{name}"),
                        value,
                        grad: grad.map(|g| &*g),
                        decay: true,
                    });
                }
            }
            Layer::Activation(a) => {
                let kind = a.spec.kind;
                for &p in kind.params() {
                    if !a.spec.is_learnable(p) {
                        continue;
                    }
                    let grad = a.grads.as_ref().map(|g| std::slice::from_ref(&g[p.index()]));
                    f(ParamMut {
                        name: format!("{prefix}.{}", p.name()),
                        value: std::slice::from_mut(a.spec.get_mut(p)),
                        grad,
                        decay: false,
                    });
                }
            }
            Layer::MaxPool2d(_) | Layer::Flatten => {}
        }
    }

    pub(crate) fn clear_grads(&mut self) {
        match self {
            Layer::Conv2d(Conv2d { weight, bias, .. }) | Layer::Linear(Linear { weight, bias }) => {
                weight.clear_grad();
                bias.clear_grad();
            }
            Layer::Activation(a) => a.grads = None,
            Layer::MaxPool2d(_) | Layer::Flatten => {}
        }
    }

    pub(crate) fn project_constraints(&mut self) {
        if let Layer::Activation(a) = self {
            a.spec = a.spec.project();
        }
    }
}

fn dims4(x: &Tensor) -> [usize; 4] {
    let s = x.shape();
    [s[0], s[1], s[2], s[3]]
}

/// `c = a·b + beta·c` with row-major `m×k` / `k×n` operands, optionally
/// transposed in storage.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths cover the m×k, k×n and m×n extents addressed
    // through the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
