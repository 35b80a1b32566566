//! Decision-space mapping of a network with a two-unit bottleneck: polar
//! sweeps of the head, boundary trip points, line fits and SVG rendering.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::layers::Layer;
use crate::model::Model;
use crate::network::{argmax, softmax, Network};
use crate::tensor::Tensor;

/// Angular step of the sweep.
pub const DEFAULT_DTHETA: f64 = 0.01;

const BISECTION_STEPS: usize = 48;

/// The layers after the two-unit bottleneck, taking 2-D features to logits.
#[derive(Debug, Clone)]
pub struct Fc2Net {
    head: Network,
    /// Index of the bottleneck layer in the full network.
    pub bottleneck: usize,
}

impl Fc2Net {
    pub fn head(&self) -> &Network {
        &self.head
    }

    pub fn classes(&self) -> usize {
        self.head.output_len()
    }

    pub fn input_dim(&self) -> usize {
        self.head.input_shape()[0]
    }

    /// Logits for `N×2` features.
    pub fn logits(&self, features: &Tensor) -> Result<Tensor> {
        self.head.infer(features)
    }

    /// Winning class and its softmax probability at one point.
    pub fn classify(&self, x: f64, y: f64) -> (usize, f64) {
        let logits = self
            .head
            .infer(&Tensor::new([1, 2], vec![x, y]).expect("1x2"))
            .expect("head takes 2-D input");
        let p = softmax(logits.data());
        let c = argmax(&p);
        (c, p[c])
    }
}

/// Prunes everything up to and including the two-unit layer.
pub fn build_fc2_net(net: &Network) -> Result<Fc2Net> {
    let idx = net
        .bottleneck_index()
        .ok_or_else(|| Error::InvalidArgument("network has no two-unit linear layer before its output".into()))?;
    let head: Vec<Layer> = net.layers()[idx + 1..].to_vec();
    Ok(Fc2Net {
        head: Network::new(head, [2])?,
        bottleneck: idx,
    })
}

/// Bottleneck features (`N×2`) of raw images.
pub fn fc2_features(model: &Model, head: &Fc2Net, images: &Tensor) -> Result<Tensor> {
    model.output_at(images, head.bottleneck)
}

/// Where the polar sweep is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Origin {
    /// Mean of the feature cloud.
    #[default]
    Centroid,
    Zero,
    /// Least-squares meeting point of the boundary lines of a first sweep.
    Concurrence,
}

impl std::str::FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "centroid" => Ok(Origin::Centroid),
            "zero" | "origin" => Ok(Origin::Zero),
            "concurrence" => Ok(Origin::Concurrence),
            _ => Err(Error::Unknown {
                what: "origin",
                name: s.to_string(),
            }),
        }
    }
}

pub fn centroid(features: &Tensor) -> [f64; 2] {
    let n = features.batch().max(1) as f64;
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..features.batch() {
        x += features.item(i)[0];
        y += features.item(i)[1];
    }
    [x / n, y / n]
}

/// Radius around `origin` containing fraction `q` of the features.
pub fn radius_quantile(features: &Tensor, origin: [f64; 2], q: f64) -> f64 {
    let mut r: Vec<f64> = (0..features.batch())
        .map(|i| {
            let f = features.item(i);
            ((f[0] - origin[0]).powi(2) + (f[1] - origin[1]).powi(2)).sqrt()
        })
        .collect();
    if r.is_empty() {
        return 0.0;
    }
    r.sort_by(f64::total_cmp);
    let k = ((q * r.len() as f64).ceil() as usize).clamp(1, r.len()) - 1;
    r[k]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Ring index, `1..=n`.
    pub ring: usize,
    pub r: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
    pub class: usize,
    pub score: f64,
}

/// A point on the boundary between two classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripPoint {
    pub x: f64,
    pub y: f64,
    pub class_a: usize,
    pub class_b: usize,
    pub ring: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMap {
    pub origin: [f64; 2],
    /// Radius of ring 1.
    pub unit: f64,
    pub n: usize,
    pub dtheta: f64,
    pub classes: usize,
    pub samples: Vec<Sample>,
    pub trip_points: Vec<TripPoint>,
}

impl DecisionMap {
    pub fn thetas(&self) -> usize {
        self.samples.len() / self.n
    }

    pub fn ring(&self, ring: usize) -> &[Sample] {
        let t = self.thetas();
        &self.samples[(ring - 1) * t..ring * t]
    }

    /// Outer sweep radius.
    pub fn radius(&self) -> f64 {
        self.unit * self.n as f64
    }

    /// Share of angles whose class at ring 1 differs from ring `n`.
    pub fn ray_violations(&self) -> f64 {
        let (inner, outer) = (self.ring(1), self.ring(self.n));
        let bad = inner.iter().zip(outer).filter(|(a, b)| a.class != b.class).count();
        bad as f64 / inner.len() as f64
    }

    pub fn mean_score(&self, ring: usize) -> f64 {
        let s = self.ring(ring);
        s.iter().map(|x| x.score).sum::<f64>() / s.len() as f64
    }

    /// `(transitions, regions)` around one ring, wrap-around included. A ring
    /// of a single class has no transitions and one region.
    pub fn circle_summary(&self, ring: usize) -> (usize, usize) {
        let s = self.ring(ring);
        let transitions = (0..s.len()).filter(|&i| s[i].class != s[(i + 1) % s.len()].class).count();
        (transitions, transitions.max(1))
    }

    /// Writes `r,theta,x,y,class,score` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "theta", "x", "y", "class", "score"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:.9}", s.r),
                format!("{:.4}", s.theta),
                format!("{:.9}", s.x),
                format!("{:.9}", s.y),
                s.class.to_string(),
                format!("{:.9}", s.score),
            ])?;
        }
        w.flush().map_err(|e| Error::io("csv", e))?;
        Ok(())
    }
}

/// Evaluates `head` on rings `r = unit·1..=unit·n` around `origin` at angles
/// `0, dθ, 2dθ, … < 2π`. Wherever the class changes between neighbouring
/// angles, bisection on the arc locates the boundary point.
pub fn sweep(head: &Fc2Net, n: usize, dtheta: f64, origin: [f64; 2], unit: f64) -> Result<DecisionMap> {
    if n < 1 || !(dtheta > 0.0) || !(unit > 0.0) || !unit.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sweep needs n >= 1, dtheta > 0 and a positive unit (n={n}, dtheta={dtheta}, unit={unit})"
        )));
    }
    if head.input_dim() != 2 {
        return Err(Error::Shape("decision head must take 2-D input".into()));
    }
    let thetas: Vec<f64> = (0..).map(|k| k as f64 * dtheta).take_while(|&t| t < TAU).collect();
    let point = |r: f64, t: f64| (origin[0] + r * t.cos(), origin[1] + r * t.sin());

    let mut samples = Vec::with_capacity(n * thetas.len());
    let mut trip_points = Vec::new();
    for ring in 1..=n {
        let r = unit * ring as f64;
        let coords: Vec<(f64, f64)> = thetas.iter().map(|&t| point(r, t)).collect();
        let flat: Vec<f64> = coords.iter().flat_map(|&(x, y)| [x, y]).collect();
        let logits = head.logits(&Tensor::new([coords.len(), 2], flat)?)?;
        let start = samples.len();
        for (k, &theta) in thetas.iter().enumerate() {
            let p = softmax(logits.item(k));
            let class = argmax(&p);
            let (x, y) = coords[k];
            samples.push(Sample {
                ring,
                r,
                theta,
                x,
                y,
                class,
                score: p[class],
            });
        }
        let ring_samples = &samples[start..];
        for k in 0..ring_samples.len() {
            let a = ring_samples[k];
            let b = ring_samples[(k + 1) % ring_samples.len()];
            if a.class == b.class {
                continue;
            }
            let (mut lo, mut hi) = (a.theta, if b.theta > a.theta { b.theta } else { b.theta + TAU });
            let mut class_hi = b.class;
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let (x, y) = point(r, mid);
                let (c, _) = head.classify(x, y);
                if c == a.class {
                    lo = mid;
                } else {
                    hi = mid;
                    class_hi = c;
                }
            }
            let (x, y) = point(r, 0.5 * (lo + hi));
            trip_points.push(TripPoint {
                x,
                y,
                class_a: a.class.min(class_hi),
                class_b: a.class.max(class_hi),
                ring,
            });
        }
    }
    Ok(DecisionMap {
        origin,
        unit,
        n,
        dtheta,
        classes: head.classes(),
        samples,
        trip_points,
    })
}

/// Total-least-squares line through one class pair's trip points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFit {
    pub class_a: usize,
    pub class_b: usize,
    pub points: usize,
    /// A point on the line (the centroid of the trip points).
    pub point: [f64; 2],
    /// Unit direction of the line.
    pub direction: [f64; 2],
    /// Largest perpendicular distance of a trip point from the line.
    pub max_residual: f64,
    /// Extent of the trip points along the line.
    pub span: [f64; 2],
}

pub fn fit_line(points: &[[f64; 2]]) -> Option<([f64; 2], [f64; 2], f64, [f64; 2])> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // principal axis of the 2x2 scatter matrix
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = [angle.cos(), angle.sin()];
    let mut max_residual = 0.0f64;
    let mut span = [f64::INFINITY, f64::NEG_INFINITY];
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        max_residual = max_residual.max((dx * dir[1] - dy * dir[0]).abs());
        let t = dx * dir[0] + dy * dir[1];
        span = [span[0].min(t), span[1].max(t)];
    }
    Some(([cx, cy], dir, max_residual, span))
}

/// One line per class pair with at least two trip points; pairs with fewer
/// are skipped with a warning.
pub fn fit_boundaries(map: &DecisionMap) -> Vec<BoundaryFit> {
    let mut pairs: BTreeMap<(usize, usize), Vec<[f64; 2]>> = BTreeMap::new();
    for t in &map.trip_points {
        pairs.entry((t.class_a, t.class_b)).or_default().push([t.x, t.y]);
    }
    let mut fits = Vec::new();
    for ((a, b), pts) in pairs {
        match fit_line(&pts) {
            Some((point, direction, max_residual, span)) => fits.push(BoundaryFit {
                class_a: a,
                class_b: b,
                points: pts.len(),
                point,
                direction,
                max_residual,
                span,
            }),
            None => log::warn!("classes {a}/{b}: {} trip point(s), boundary skipped", pts.len()),
        }
    }
    fits
}

/// Least-squares point closest to all fitted lines, if they are not parallel.
pub fn concurrence_point(fits: &[BoundaryFit]) -> Option<[f64; 2]> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for f in fits {
        let nrm = [-f.direction[1], f.direction[0]];
        let c = nrm[0] * f.point[0] + nrm[1] * f.point[1];
        a11 += nrm[0] * nrm[0];
        a12 += nrm[0] * nrm[1];
        a22 += nrm[1] * nrm[1];
        b1 += nrm[0] * c;
        b2 += nrm[1] * c;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 * (a11 + a22).powi(2).max(f64::MIN_POSITIVE) {
        return None;
    }
    Some([(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det])
}

/// Sweep of `head` with the origin picked per `origin` and rings spaced so
/// ring `n` reaches the 99th-percentile feature radius.
pub fn sweep_features(
    head: &Fc2Net,
    features: &Tensor,
    n: usize,
    dtheta: f64,
    origin: Origin,
) -> Result<DecisionMap> {
    if features.batch() == 0 {
        return Err(Error::Empty("feature set"));
    }
    let center = match origin {
        Origin::Zero => [0.0, 0.0],
        Origin::Centroid | Origin::Concurrence => centroid(features),
    };
    let unit = radius_quantile(features, center, 0.99) / n.max(1) as f64;
    let map = sweep(head, n, dtheta, center, unit)?;
    if origin != Origin::Concurrence {
        return Ok(map);
    }
    match concurrence_point(&fit_boundaries(&map)) {
        Some(p) => {
            let unit = radius_quantile(features, p, 0.99) / n.max(1) as f64;
            sweep(head, n, dtheta, p, unit)
        }
        None => Ok(map),
    }
}

/// Radius around the feature centroid holding 99% of the features.
pub fn compactness(features: &Tensor) -> f64 {
    radius_quantile(features, centroid(features), 0.99)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn color(class: usize) -> String {
    if class < PALETTE.len() {
        PALETTE[class].to_string()
    } else {
        let h = (class * 137) % 360;
        format!("hsl({h},60%,55%)")
    }
}

/// Renders class regions (one annular sector per run of equal class on each
/// ring), boundary lines, an optional `(features, labels)` scatter and a
/// legend with one entry per class.
pub fn render_map(map: &DecisionMap, fits: &[BoundaryFit], scatter: Option<(&Tensor, &[usize])>) -> String {
    let size = 640.0;
    let legend_w = 120.0;
    let extent = map.radius() * 1.05;
    let scale = size / (2.0 * extent);
    let sx = |x: f64| (x - map.origin[0] + extent) * scale;
    let sy = |y: f64| (extent - (y - map.origin[1])) * scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
        w = size + legend_w,
        h = size
    );
    let _ = writeln!(svg, r#"<rect width="{size:.0}" height="{size:.0}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g id="regions" fill-opacity="0.35" stroke="none">"#);
    let thetas = map.thetas();
    let dt = map.dtheta;
    for ring in 1..=map.n {
        let s = map.ring(ring);
        let r_in = map.unit * (ring as f64 - 0.5);
        let r_out = map.unit * (ring as f64 + 0.5);
        let mut k = 0;
        while k < thetas {
            let class = s[k].class;
            let mut end = k;
            while end + 1 < thetas && s[end + 1].class == class {
                end += 1;
            }
            let t0 = s[k].theta - dt / 2.0;
            let t1 = (s[end].theta + dt / 2.0).min(TAU - 1e-9 + dt / 2.0);
            let pt = |r: f64, t: f64| (sx(map.origin[0] + r * t.cos()), sy(map.origin[1] + r * t.sin()));
            let large = if t1 - t0 > std::f64::consts::PI { 1 } else { 0 };
            let (ax, ay) = pt(r_out, t0);
            let (bx, by) = pt(r_out, t1);
            let (cx, cy) = pt(r_in, t1);
            let (ex, ey) = pt(r_in, t0);
            let (ro, ri) = (r_out * scale, r_in * scale);
            let _ = writeln!(
                svg,
                r#"<path fill="{}" d="M{ax:.2},{ay:.2} A{ro:.2},{ro:.2} 0 {large} 0 {bx:.2},{by:.2} L{cx:.2},{cy:.2} A{ri:.2},{ri:.2} 0 {large} 1 {ex:.2},{ey:.2} Z"/>"#,
                color(class)
            );
            k = end + 1;
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="boundaries" stroke="black" stroke-width="1.2">"#);
    for f in fits {
        let p0 = [f.point[0] + f.span[0] * f.direction[0], f.point[1] + f.span[0] * f.direction[1]];
        let p1 = [f.point[0] + f.span[1] * f.direction[0], f.point[1] + f.span[1] * f.direction[1]];
        let _ = writeln!(
            svg,
            r#"<line data-pair="{}-{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            f.class_a,
            f.class_b,
            sx(p0[0]),
            sy(p0[1]),
            sx(p1[0]),
            sy(p1[1])
        );
    }
    let _ = writeln!(svg, "</g>");

    if let Some((features, labels)) = scatter {
        let _ = writeln!(svg, r#"<g id="features" fill-opacity="0.8">"#);
        for (i, &label) in labels.iter().enumerate().take(features.batch()) {
            let f = features.item(i);
            let (x, y) = (sx(f[0]), sy(f[1]));
            if (0.0..=size).contains(&x) && (0.0..=size).contains(&y) {
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{}"/>"#, color(label));
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for c in 0..map.classes {
        let y = 20.0 + 20.0 * c as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><rect x="{:.0}" y="{:.0}" width="12" height="12" fill="{}"/><text x="{:.0}" y="{:.0}">class {c}</text></g>"#,
            size + 10.0,
            y,
            color(c),
            size + 28.0,
            y + 10.0
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Linear;

    fn linear_head(weight: Vec<f64>, bias: Vec<f64>) -> Fc2Net {
        let classes = bias.len();
        let lin = Linear {
            weight: Tensor::new([classes, 2], weight).unwrap(),
            bias: Tensor::from_vec(bias),
        };
        Fc2Net {
            head: Network::new(vec![Layer::Linear(lin)], [2]).unwrap(),
            bottleneck: 0,
        }
    }

    #[test]
    fn sign_split_boundary_is_vertical() {
        let head = linear_head(vec![-1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0]);
        let (n, dt) = (5, 0.01);
        let map = sweep(&head, n, dt, [0.0, 0.0], 1.0).unwrap();
        assert!(!map.trip_points.is_empty());
        for t in &map.trip_points {
            assert!(t.x.abs() < dt * n as f64, "{t:?}");
        }
        let fits = fit_boundaries(&map);
        assert_eq!(fits.len(), 1);
        assert!(fits[0].max_residual < 1e-6);
        assert_eq!(map.ray_violations(), 0.0);
        assert!(map.mean_score(n) >= map.mean_score(1));
    }

    #[test]
    fn three_class_linear_head_fits_exactly() {
        let w = vec![1.0, 0.0, -0.5, 0.8, -0.5, -0.8];
        let head = linear_head(w, vec![0.3, -0.1, 0.2]);
        let map = sweep(&head, 8, 0.01, [0.0, 0.0], 1.0).unwrap();
        let fits = fit_boundaries(&map);
        assert!(!fits.is_empty() && fits.len() <= 3);
        for f in &fits {
            assert!(f.max_residual < 1e-6, "{f:?}");
        }
        for ring in 1..=8 {
            let (t, r) = map.circle_summary(ring);
            if t > 0 {
                assert_eq!(t, r);
            }
        }
    }

    #[test]
    fn duplicate_points_give_zero_residual() {
        let (_, dir, res, _) = fit_line(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(res, 0.0);
        assert!((dir[0].hypot(dir[1]) - 1.0).abs() < 1e-12);
        assert!(fit_line(&[[0.0, 0.0]]).is_none());
    }

    #[test]
    fn concurrence_of_lines_through_a_point() {
        let shifted_bias = {
            // logits of W(z - p) for p = (2, -1)
            let p = [2.0, -1.0];
            let w = [1.0, 0.0, -0.5, 0.8, -0.5, -0.8];
            (0..3).map(|c| -(w[2 * c] * p[0] + w[2 * c + 1] * p[1])).collect::<Vec<_>>()
        };
        let head = linear_head(vec![1.0, 0.0, -0.5, 0.8, -0.5, -0.8], shifted_bias);
        let map = sweep(&head, 6, 0.01, [0.0, 0.0], 1.5).unwrap();
        let p = concurrence_point(&fit_boundaries(&map)).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-6 && (p[1] + 1.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn build_requires_bottleneck() {
        use crate::activations::{ActivationKind, ActivationSpec};
        use crate::network::{Preset, Widths};
        let w = Widths { conv: [2, 2, 2], hidden: 4 };
        let act = ActivationSpec::init(ActivationKind::Relu);
        let plain = Network::preset(Preset::Conv3, act, [1, 28, 28], 10, w, 1).unwrap();
        assert!(build_fc2_net(&plain).is_err());
        let fc2 = Network::preset(Preset::Conv3Fc2, act, [1, 28, 28], 10, w, 1).unwrap();
        let head = build_fc2_net(&fc2).unwrap();
        assert_eq!(head.input_dim(), 2);
        assert_eq!(head.classes(), 10);
    }

    #[test]
    fn render_is_deterministic_with_legend() {
        let w: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let head = linear_head(w, vec![0.0; 10]);
        let map = sweep(&head, 4, 0.05, [0.0, 0.0], 1.0).unwrap();
        let fits = fit_boundaries(&map);
        let a = render_map(&map, &fits, None);
        let b = render_map(&map, &fits, None);
        assert_eq!(a, b);
        assert_eq!(a.matches(r#"class="legend-entry""#).count(), 10);
        roxmltree::Document::parse(&a).unwrap();
    }
}
