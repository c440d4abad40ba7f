//! Lyapunov charts, local stable/unstable graphs and normal-form
//! coordinates on one-dimensional unstable leaves.

use crate::cocycle::Tag;
use crate::error::{Error, Result};
use crate::linalg::{complex_structure, Mat4, Vec4, C64};
use crate::model::SurfaceModel;
use crate::orbit::ChartedOrbit;
use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

pub type Vec2 = Vector2<f64>;

/// Chart at `x_k`: `phi(p) = L log_{x_k}(p)`.
#[derive(Debug, Clone)]
pub struct LyapunovChart<P> {
    pub index: i64,
    pub base: P,
    pub linear: Mat4,
    pub inverse: Mat4,
    /// Radius of the ball on which `Lip(f~ - D_0 f~) < eps` was observed.
    pub radius: f64,
    pub lip: f64,
    /// `|L e_u|` off-axis residual (should vanish).
    pub alignment: f64,
}

pub fn to_chart<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, p: &M::Point) -> Result<Vec4> {
    Ok(orbit.chart_matrix(k)? * model.log(orbit.point(k)?, p)?)
}

pub fn from_chart<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, w: &Vec4) -> Result<M::Point> {
    model.exp(orbit.point(k)?, &(orbit.chart_inverse(k)? * w))
}

/// `f~_k = phi_{k+1} o f_{w_k} o phi_k^{-1}`.
pub fn chart_map<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, w: &Vec4) -> Result<Vec4> {
    let p = from_chart(model, orbit, k, w)?;
    let q = model.apply(orbit.word().auto(k), &p)?;
    to_chart(model, orbit, k + 1, &q)
}

fn transport_matrix<M: SurfaceModel>(model: &M, from: &M::Point, to: &M::Point) -> Result<Mat4> {
    let mut out = Mat4::zeros();
    for j in 0..4 {
        let mut e = Vec4::zeros();
        e[j] = 1.0;
        out.set_column(j, &model.transport(from, to, &e)?);
    }
    Ok(out)
}

/// `D f~_k(w)` from the model tangent at `exp(w)`. Difference quotients of
/// `f~_k` itself drown in rounding once chart norms pass about 1e8.
pub fn chart_jacobian<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, w: &Vec4) -> Result<Mat4> {
    let p = model.exp(orbit.point(k)?, &(orbit.chart_inverse(k)? * w))?;
    chart_jacobian_at(model, orbit, k, &p)
}

/// `D f~_k` at the chart position of the point `p`.
pub fn chart_jacobian_at<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, p: &M::Point) -> Result<Mat4> {
    let xk = orbit.point(k)?;
    let id = orbit.word().auto(k);
    let q = model.apply(id, p)?;
    let into = transport_matrix(model, p, xk)?
        .try_inverse()
        .ok_or_else(|| Error::ChartEscape("singular chart transition".into()))?;
    let out = transport_matrix(model, &q, orbit.point(k + 1)?)?;
    Ok(orbit.chart_matrix(k + 1)? * out * model.tangent(id, p)? * into * orbit.chart_inverse(k)?)
}

fn sample_directions() -> Vec<Vec4> {
    let raw = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 0.5, -0.5],
        [-0.3, 0.8, -0.9, 0.2],
        [0.6, 0.1, -0.4, -1.0],
    ];
    raw.iter().map(|r| Vec4::from_row_slice(r).normalize()).collect()
}

/// Largest observed `|D f~(w) - D_0 f~|` on the ball of radius `r`.
fn lip_estimate<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, r: f64) -> Result<f64> {
    let d0 = orbit.chart_derivative(k)?;
    let mut worst = 0.0f64;
    for dir in sample_directions() {
        for s in [0.5, 1.0] {
            let w = dir * (s * r);
            let d = chart_jacobian(model, orbit, k, &w)?;
            worst = worst.max((d - d0).norm());
        }
    }
    Ok(worst)
}

/// Chart at index `k` with a radius on which the nonlinear part is
/// `eps`-Lipschitz, found by halving from `r_max`.
pub fn build_chart<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    eps: f64,
    r_max: f64,
) -> Result<LyapunovChart<M::Point>> {
    if orbit.min_angle < 1e-6 {
        return Err(Error::DegenerateSplitting(orbit.min_angle));
    }
    let linear = orbit.chart_matrix(k)?;
    let inverse = orbit.chart_inverse(k)?;
    let j = complex_structure();
    let eu = orbit.eu(k)?;
    let es = orbit.es(k)?;
    let mut alignment = 0.0f64;
    for v in [eu, j * eu] {
        let w = linear * v;
        alignment = alignment.max((w[2].hypot(w[3])) / w.norm());
    }
    for v in [es, j * es] {
        let w = linear * v;
        alignment = alignment.max((w[0].hypot(w[1])) / w.norm());
    }
    let mut r = r_max;
    loop {
        if r < 1e-10 {
            return Err(Error::RadiusCollapse(r));
        }
        match lip_estimate(model, orbit, k, r) {
            Ok(l) if l < eps => {
                return Ok(LyapunovChart {
                    index: k,
                    base: orbit.point(k)?.clone(),
                    linear,
                    inverse,
                    radius: r,
                    lip: l,
                    alignment,
                })
            }
            Ok(_) | Err(Error::ChartEscape(_)) | Err(Error::DegenerateFiber { .. }) => r /= 2.0,
            Err(e) => return Err(e),
        }
    }
}

/// Local stable or unstable manifold in the chart at `x_k`, as a graph over
/// its own axis.
#[derive(Debug, Clone, Serialize)]
pub struct LeafGraph {
    pub index: i64,
    pub tag: Tag,
    pub q: f64,
    pub depth: usize,
    /// `(xi, h(xi), Dh(xi))` on the sample disc.
    pub samples: Vec<(Vec2, Vec2, Matrix2<f64>)>,
    pub max_dh: f64,
    /// Largest `|Dh|` on the rim after each doubling of the depth.
    pub trace: Vec<(usize, f64)>,
}

/// Realizes the graph-transform image of the zero graph at depth `depth`
/// at one axis point `target`, by shooting from the far chart. Returns the
/// full chart coordinates of the leaf point.
pub fn shoot<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    tag: Tag,
    target: &Vec2,
    depth: usize,
) -> Result<Vec4> {
    Ok(shoot_point(model, orbit, k, tag, target, depth)?.0)
}

/// `shoot` together with the far starting point that realizes it and the
/// leaf point itself, which is more accurate than its chart coordinates.
fn shoot_point<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    tag: Tag,
    target: &Vec2,
    depth: usize,
) -> Result<(Vec4, M::Point, i64, M::Point)> {
    let d = depth as i64;
    let (start, gain) = match tag {
        Tag::Unstable => {
            let mut g = 0.0;
            for i in k - d..k {
                g += orbit.tau(i)?;
            }
            (k - d, (-g).exp())
        }
        Tag::Stable => {
            let mut g = 0.0;
            for i in k..k + d {
                g += orbit.tau_stable(i)?;
            }
            (k + d, g.exp())
        }
    };
    orbit.chart_matrix(start)?;
    let w = orbit.word();
    let axis = |v: &Vec4| match tag {
        Tag::Unstable => Vec2::new(v[0], v[1]),
        Tag::Stable => Vec2::new(v[2], v[3]),
    };
    let embed = |a: &Vec2| match tag {
        Tag::Unstable => Vec4::new(a[0], a[1], 0.0, 0.0),
        Tag::Stable => Vec4::new(0.0, 0.0, a[0], a[1]),
    };
    let mut a0 = target * gain;
    let mut best: Option<(f64, Vec4, M::Point, M::Point)> = None;
    let mut prev_err: Option<f64> = None;
    for _ in 0..60 {
        let p0 = from_chart(model, orbit, start, &embed(&a0))?;
        let mut p = p0.clone();
        match tag {
            Tag::Unstable => {
                for i in start..k {
                    p = model.apply(w.auto(i), &p)?;
                }
            }
            Tag::Stable => {
                for i in (k..start).rev() {
                    p = model.apply_inverse(w.auto(i), &p)?;
                }
            }
        }
        let v = to_chart(model, orbit, k, &p)?;
        let err = target - axis(&v);
        let e = err.norm();
        if best.as_ref().is_none_or(|(b, _, _, _)| e < *b) {
            best = Some((e, v, p0, p));
        }
        if e <= 1e-13 * target.norm().max(1e-300) {
            break;
        }
        if let Some(p) = prev_err {
            if e > 0.5 * p {
                break;
            }
        }
        prev_err = Some(e);
        a0 += err * gain;
    }
    let (_, v, p0, p) = best.expect("at least one iteration");
    Ok((v, p0, start, p))
}

fn graph_value<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    tag: Tag,
    xi: &Vec2,
    depth: usize,
) -> Result<Vec2> {
    let v = shoot(model, orbit, k, tag, xi, depth)?;
    Ok(match tag {
        Tag::Unstable => Vec2::new(v[2], v[3]),
        Tag::Stable => Vec2::new(v[0], v[1]),
    })
}

/// Graph value `h(xi)` and its derivative. The derivative pushes the axis
/// plane at the far starting point through the chart Jacobians, so it has
/// no difference quotient in it.
fn graph_point<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    tag: Tag,
    xi: &Vec2,
    depth: usize,
) -> Result<(Vec2, Matrix2<f64>)> {
    let (v, p0, start, _) = shoot_point(model, orbit, k, tag, xi, depth)?;
    let w = orbit.word();
    let (axis, other) = match tag {
        Tag::Unstable => (0, 2),
        Tag::Stable => (2, 0),
    };
    let mut plane = nalgebra::Matrix4x2::<f64>::zeros();
    plane[(axis, 0)] = 1.0;
    plane[(axis + 1, 1)] = 1.0;
    let mut p = p0;
    match tag {
        Tag::Unstable => {
            for i in start..k {
                plane = chart_jacobian_at(model, orbit, i, &p)? * plane;
                p = model.apply(w.auto(i), &p)?;
            }
        }
        Tag::Stable => {
            for i in (k..start).rev() {
                let prev = model.apply_inverse(w.auto(i), &p)?;
                let j = chart_jacobian_at(model, orbit, i, &prev)?;
                plane = j.try_inverse().ok_or_else(|| Error::ChartEscape("singular chart Jacobian".into()))? * plane;
                p = prev;
            }
        }
    }
    let a = plane.fixed_view::<2, 2>(axis, 0).into_owned();
    let b = plane.fixed_view::<2, 2>(other, 0).into_owned();
    let dh = b * a.try_inverse().ok_or_else(|| Error::ChartEscape("graph is not over its axis".into()))?;
    Ok((Vec2::new(v[other], v[other + 1]), dh))
}

fn disc_samples(q: f64) -> Vec<Vec2> {
    let mut out = vec![Vec2::zeros()];
    for ring in [0.25, 0.5, 0.75, 1.0] {
        for a in 0..8 {
            let t = a as f64 * std::f64::consts::FRAC_PI_4 + ring;
            out.push(Vec2::new(t.cos(), t.sin()) * (ring * q));
        }
    }
    out
}

/// Local manifold of size `q` at chart index `k` by the graph transform
/// started from the zero graph `depth` steps away.
pub fn local_manifold<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    tag: Tag,
    q: f64,
    depth: usize,
) -> Result<LeafGraph> {
    let rim: Vec<Vec2> = disc_samples(q).into_iter().skip(25).collect();
    let mut trace = Vec::new();
    let mut j = 1usize;
    loop {
        let j_eff = j.min(depth);
        let mut worst = 0.0f64;
        for xi in &rim {
            worst = worst.max(graph_point(model, orbit, k, tag, xi, j_eff)?.1.norm());
        }
        trace.push((j_eff, worst));
        if j_eff == depth {
            break;
        }
        j *= 2;
    }
    let mut samples = Vec::new();
    let mut max_dh = 0.0f64;
    for xi in disc_samples(q) {
        let (h, dh) = graph_point(model, orbit, k, tag, &xi, depth)?;
        max_dh = max_dh.max(dh.norm());
        samples.push((xi, h, dh));
    }
    if max_dh > 1.0 / 3.0 {
        return Err(Error::GraphTransformDiverged { iteration: depth, slope: max_dh });
    }
    Ok(LeafGraph { index: k, tag, q, depth, samples, max_dh, trace })
}

/// Fitted `d(F^n x, F^n z) <= k e^{slope n} d(x, z)` for points on a local
/// stable graph, next to the same regression for the linear cocycle on `E^s`.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionFit {
    pub log_k: f64,
    pub slope: f64,
    /// Regression slope of `log |Df^n e_s|` over the same steps.
    pub reference_slope: f64,
    pub steps: usize,
}

fn regress(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, y) in ys.iter().enumerate() {
        sxx += (i as f64 - mx).powi(2);
        sxy += (i as f64 - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub const CONTRACTION_MIN_DIST: f64 = 1e-7;

pub fn stable_contraction<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    graph: &LeafGraph,
    steps: usize,
) -> Result<ContractionFit> {
    if graph.tag != Tag::Stable {
        return Err(Error::InvalidArgument("contraction fit needs a stable graph".into()));
    }
    let k = graph.index;
    let w = orbit.word();
    let mut reference = vec![0.0];
    for i in 0..steps as i64 {
        reference.push(reference[i as usize] + orbit.theta_stable(k + i)?);
    }
    let (reference_slope, _) = regress(&reference);
    let mut slope_sum = 0.0;
    let mut worst_k = f64::NEG_INFINITY;
    let rim: Vec<_> = graph.samples.iter().skip(25).collect();
    // Pesin-size graphs can be 1e-11 across in model units, where rounding
    // alone moves the fitted rate by more than eps; push the rim out to
    // CONTRACTION_MIN_DIST along the same stable leaf.
    let stretch = (orbit.chart_matrix(k)? * orbit.es(k)?).norm();
    for (xi, _, _) in &rim {
        let xi = xi * (CONTRACTION_MIN_DIST * stretch / xi.norm()).max(1.0);
        let (_, _, _, z0) = shoot_point(model, orbit, k, Tag::Stable, &xi, graph.depth)?;
        let mut x = orbit.point(k)?.clone();
        let mut z = z0;
        // distances in the norm the cocycle is expressed in
        let mut logs = vec![model.log(&x, &z)?.norm().ln()];
        for i in 0..steps as i64 {
            x = model.apply(w.auto(k + i), &x)?;
            z = model.apply(w.auto(k + i), &z)?;
            logs.push(model.log(&x, &z)?.norm().ln());
        }
        let rel: Vec<f64> = logs.iter().map(|l| l - logs[0]).collect();
        let (s, _) = regress(&rel);
        slope_sum += s;
        for (i, r) in rel.iter().enumerate() {
            worst_k = worst_k.max(r - s * i as f64);
        }
    }
    Ok(ContractionFit { log_k: worst_k, slope: slope_sum / rim.len() as f64, reference_slope, steps })
}

/// Max distance of `f~_k(W^s_q(x_k))` from the stable graph at `k + 1`, in
/// chart units.
pub fn stable_inclusion_residual<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    graph: &LeafGraph,
) -> Result<f64> {
    let k = graph.index;
    let mut worst = 0.0f64;
    for (xi, h, _) in &graph.samples {
        let img = chart_map(model, orbit, k, &Vec4::new(h[0], h[1], xi[0], xi[1]))?;
        let eta = Vec2::new(img[2], img[3]);
        let next = graph_value(model, orbit, k + 1, Tag::Stable, &eta, graph.depth.saturating_sub(1).max(1))?;
        worst = worst.max((next - Vec2::new(img[0], img[1])).norm());
    }
    Ok(worst)
}

/// A point on the unstable leaf of `x_base`, kept with its past: `history[i]`
/// is its position near `x_{start + i}`.
#[derive(Debug, Clone)]
pub struct LeafPoint<P> {
    pub start: i64,
    pub history: Vec<P>,
}

impl<P: Clone> LeafPoint<P> {
    pub fn base(&self) -> i64 {
        self.start + self.history.len() as i64 - 1
    }

    pub fn current(&self) -> &P {
        self.history.last().expect("nonempty history")
    }

    pub fn at(&self, k: i64) -> Option<&P> {
        usize::try_from(k - self.start).ok().and_then(|i| self.history.get(i))
    }

    /// Applies the next map of the word.
    pub fn advance<M: SurfaceModel<Point = P>>(&self, model: &M, orbit: &ChartedOrbit<P>) -> Result<Self> {
        let mut h = self.history.clone();
        h.push(model.apply(orbit.word().auto(self.base()), self.current())?);
        Ok(LeafPoint { start: self.start, history: h })
    }

    /// Drops the last step.
    pub fn retreat(&self) -> Option<Self> {
        (self.history.len() > 1).then(|| LeafPoint { start: self.start, history: self.history[..self.history.len() - 1].to_vec() })
    }
}

/// The orbit itself as a leaf point based at `k`.
pub fn orbit_leaf_point<M: SurfaceModel>(orbit: &ChartedOrbit<M::Point>, k: i64) -> Result<LeafPoint<M::Point>> {
    let start = -orbit.radius();
    let history = (start..=k).map(|i| orbit.point(i).cloned()).collect::<Result<_>>()?;
    Ok(LeafPoint { start, history })
}

/// Points of the unstable leaf through `x_k`, seeded on `E^u(x_{k-depth})`
/// and pushed forward. `size` is the intended model distance from `x_k`.
/// Chart units are unsuitable here: chart norms along a tempered orbit can
/// reach 1e10, which leaves nothing above rounding.
pub fn unstable_leaf_points<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    k: i64,
    depth: usize,
    size: f64,
    count: usize,
) -> Result<Vec<LeafPoint<M::Point>>> {
    let start = k - depth as i64;
    let mut growth = 0.0;
    for i in start..k {
        growth += orbit.theta(i)?;
    }
    let eu = orbit.eu(start)?;
    let j = complex_structure();
    let x0 = orbit.point(start)?;
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let t = 2.0 * std::f64::consts::PI * (c as f64 + 0.37) / count as f64;
        let r = size * (0.3 + 0.7 * ((c * 7 % count) as f64 + 0.5) / count as f64);
        let v = (eu * t.cos() + j * eu * t.sin()) * (r * (-growth).exp());
        let mut lp = LeafPoint { start, history: vec![model.exp(x0, &v)?] };
        for _ in 0..depth {
            lp = lp.advance(model, orbit)?;
        }
        out.push(lp);
    }
    Ok(out)
}

/// Normal-form coordinate on the unstable leaf through a base leaf point.
#[derive(Debug, Clone)]
pub struct NormalForm<P> {
    pub base: LeafPoint<P>,
    /// Unit vectors spanning `E^u` along the base history, with the log
    /// growth `theta` of each step.
    eu: Vec<Vec4>,
    theta: Vec<f64>,
    /// Coboundary offset `phi` when the base is an orbit point.
    pub phi: Option<f64>,
    pub tol: f64,
}

pub const NFC_TOL: f64 = 1e-9;
pub const NFC_FLOOR: f64 = 1e-7;

impl<P: Clone> NormalForm<P> {
    pub fn index(&self) -> i64 {
        self.base.base()
    }

    /// `H(z)` as a complex number, by the telescoping limit
    /// `e^{sum theta} xi_n(z)` with adaptive depth `n`.
    pub fn eval<M: SurfaceModel<Point = P>>(&self, model: &M, orbit: &ChartedOrbit<P>, z: &LeafPoint<P>) -> Result<C64> {
        let k = self.index();
        if z.base() != k {
            return Err(Error::InvalidArgument("leaf point and normal form have different base indices".into()));
        }
        let lo = self.base.start.max(z.start).max(-orbit.radius());
        let j = complex_structure();
        // Repeated involutions make the base orbit backtrack and revisit the
        // same pair of points, so values are only compared at steps where the
        // accumulated gain reaches a new maximum.
        let mut prev: Option<C64> = None;
        let mut record = f64::NEG_INFINITY;
        let mut settled = 0;
        let mut log_gain = 0.0;
        for m in (lo..k).rev() {
            let i = (m - self.base.start) as usize;
            log_gain += self.theta[i];
            let b = self.base.at(m).expect("in history");
            let es = orbit.es(m)?;
            let eu = self.eu[i];
            let basis = Mat4::from_columns(&[eu, j * eu, es, j * es]);
            let zm = z.at(m).expect("in history");
            let c = basis.try_inverse().ok_or(Error::DegenerateSplitting(0.0))? * model.log(b, zm)?;
            let h = C64::new(c[0], c[1]) * log_gain.exp();
            if h.norm() == 0.0 {
                return Ok(h);
            }
            if log_gain <= record + 1e-6 {
                continue;
            }
            record = log_gain;
            if let Some(p) = prev {
                // closer than this, rounding in the log outweighs curvature
                if model.distance(b, zm) < NFC_FLOOR {
                    return Ok(h);
                }
                if (h - p).norm() <= self.tol * h.norm() {
                    settled += 1;
                    if settled == 3 {
                        return Ok(h);
                    }
                } else {
                    settled = 0;
                }
            }
            prev = Some(h);
        }
        Err(Error::NonConvergence(format!("normal form did not settle within depth {}", k - lo)))
    }

    /// `e^{-phi} H(z)`.
    pub fn eval_modified<M: SurfaceModel<Point = P>>(&self, model: &M, orbit: &ChartedOrbit<P>, z: &LeafPoint<P>) -> Result<C64> {
        let phi = self.phi.ok_or_else(|| Error::InvalidArgument("modified coordinates need an orbit base".into()))?;
        Ok(self.eval(model, orbit, z)? * (-phi).exp())
    }

    /// `D f` restricted to the leaf tangent at the base, as a real scale.
    pub fn derivative_gain(&self) -> f64 {
        self.theta.last().map(|t| t.exp()).unwrap_or(1.0)
    }
}

/// Normal form based at a leaf point.
pub fn normal_form<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    base: &LeafPoint<M::Point>,
) -> Result<NormalForm<M::Point>> {
    let w = orbit.word();
    let start = base.start;
    let mut eu = vec![orbit.eu(start)?];
    let mut theta = Vec::new();
    for (i, p) in base.history.iter().enumerate() {
        let d = model.tangent(w.auto(start + i as i64), p)?;
        let v = d * eu[i];
        theta.push(v.norm().ln());
        eu.push(v.normalize());
    }
    let k = base.base();
    let on_orbit = orbit
        .point(k)
        .ok()
        .map(|x| model.distance(x, base.current()) == 0.0)
        .unwrap_or(false);
    let phi = if on_orbit { orbit.phi(k).ok() } else { None };
    Ok(NormalForm { base: base.clone(), eu, theta, phi, tol: NFC_TOL })
}

/// `|H_{F y}(F z) - Df|_{E^u} H_y(z)| / |H_y(z)|`.
pub fn conjugacy_residual<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    nf: &NormalForm<M::Point>,
    z: &LeafPoint<M::Point>,
) -> Result<f64> {
    let h = nf.eval(model, orbit, z)?;
    let next = normal_form(model, orbit, &nf.base.advance(model, orbit)?)?;
    let h2 = next.eval(model, orbit, &z.advance(model, orbit)?)?;
    let k = nf.index();
    let gain = nf.theta[(k - nf.base.start) as usize].exp();
    Ok((h2 - h * gain).norm() / h.norm())
}

/// Complex affine fit `H_a = alpha H_b + beta` over leaf points; returns
/// `(alpha, beta, max residual relative to the largest |H_a|)`.
pub fn affine_change<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    a: &NormalForm<M::Point>,
    b: &NormalForm<M::Point>,
    points: &[LeafPoint<M::Point>],
) -> Result<(C64, C64, f64)> {
    if points.len() < 3 {
        return Err(Error::Insufficient("affine fit needs 3 points".into()));
    }
    let ha: Vec<C64> = points.iter().map(|p| a.eval(model, orbit, p)).collect::<Result<_>>()?;
    let hb: Vec<C64> = points.iter().map(|p| b.eval(model, orbit, p)).collect::<Result<_>>()?;
    let n = points.len() as f64;
    let ma = ha.iter().sum::<C64>() / n;
    let mb = hb.iter().sum::<C64>() / n;
    let mut sbb = 0.0;
    let mut sab = C64::new(0.0, 0.0);
    for (x, y) in ha.iter().zip(&hb) {
        sbb += (y - mb).norm_sqr();
        sab += (x - ma) * (y - mb).conj();
    }
    let alpha = sab / sbb;
    let beta = ma - alpha * mb;
    let scale = ha.iter().map(|h| h.norm()).fold(0.0, f64::max);
    let resid = ha
        .iter()
        .zip(&hb)
        .map(|(x, y)| (x - alpha * y - beta).norm())
        .fold(0.0, f64::max);
    Ok((alpha, beta, resid / scale))
}

/// `| |H_new(F z)| - e^tau |H_new(z)| | / |H_new(z)|` at an orbit base.
pub fn modified_scaling_check<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    nf: &NormalForm<M::Point>,
    z: &LeafPoint<M::Point>,
) -> Result<f64> {
    let k = nf.index();
    let h = nf.eval_modified(model, orbit, z)?.norm();
    if h == 0.0 {
        let next = normal_form(model, orbit, &nf.base.advance(model, orbit)?)?;
        return next.eval_modified(model, orbit, &z.advance(model, orbit)?).map(|v| v.norm());
    }
    let next = normal_form(model, orbit, &nf.base.advance(model, orbit)?)?;
    let h2 = next.eval_modified(model, orbit, &z.advance(model, orbit)?)?.norm();
    Ok((h2 - orbit.tau(k)?.exp() * h).abs() / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TorusGenerator, TorusModel};
    use crate::orbit::OrbitSpec;
    use crate::walk::{FiniteMeasure, WalkWord};

    fn cat() -> (TorusModel, ChartedOrbit<[f64; 4]>) {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let spec = OrbitSpec { radius: 40, pad: 40, lambda_plus: l, lambda_minus: -l, eps0: 0.005 };
        let o = ChartedOrbit::build(&m, &w, &[0.1, 0.2, 0.3, 0.4], spec).unwrap();
        (m, o)
    }

    fn random_torus() -> (TorusModel, ChartedOrbit<[f64; 4]>) {
        let a = TorusGenerator::from_integer_2x2("A", [[2, 1], [1, 1]]);
        let b = TorusGenerator::from_gaussian("B", [[1, 0], [0, 0]], [[0, 1], [1, 0]]);
        let m = TorusModel::new(vec![a, b]).unwrap();
        let mu = FiniteMeasure::uniform(vec![0, 1]).unwrap();
        let w = WalkWord::new(11, &mu);
        let est = crate::cocycle::lyapunov_exponents(&m, &mu, &[0.1, 0.2, 0.3, 0.4], 5, 20_000).unwrap();
        let eps0 = crate::cocycle::default_eps0(est.lambda_plus, est.lambda_minus);
        let spec = OrbitSpec { radius: 60, pad: 60, lambda_plus: est.lambda_plus, lambda_minus: est.lambda_minus, eps0 };
        let o = ChartedOrbit::build(&m, &w, &[0.1, 0.2, 0.3, 0.4], spec).unwrap();
        (m, o)
    }

    #[test]
    fn cat_chart_is_eigenframe() {
        let (m, o) = cat();
        let ch = build_chart(&m, &o, 0, 0.005, 1.0).unwrap();
        assert!(ch.alignment < 1e-10);
        assert_eq!(ch.radius, 1.0);
        let d = o.chart_derivative(0).unwrap();
        let l = (3.0 + 5f64.sqrt()) / 2.0;
        let off = d.fixed_view::<2, 2>(0, 2).norm() + d.fixed_view::<2, 2>(2, 0).norm();
        assert!(off < 1e-10);
        // blocks are conformal with modulus e^tau, within eps0 of log l
        let tau = o.tau(0).unwrap();
        assert!((tau - l.ln()).abs() <= 0.005 + 1e-12);
        assert!(chart_map(&m, &o, 0, &Vec4::zeros()).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cat_leaves_are_flat() {
        let (m, o) = cat();
        let g = local_manifold(&m, &o, 0, Tag::Unstable, 0.05, 20).unwrap();
        for (_, h, dh) in &g.samples {
            assert!(h.norm() < 1e-12);
            assert!(dh.norm() < 1e-9);
        }
        let s = local_manifold(&m, &o, 0, Tag::Stable, 0.05, 20).unwrap();
        assert!(s.max_dh < 1e-9);
        let fit = stable_contraction(&m, &o, &s, 10).unwrap();
        let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((fit.slope + l).abs() < 1e-6);
        assert!(stable_inclusion_residual(&m, &o, &s).unwrap() < 1e-12);
    }

    #[test]
    fn cat_normal_form_is_linear() {
        let (m, o) = cat();
        let base = orbit_leaf_point::<TorusModel>(&o, 0).unwrap();
        let nf = normal_form(&m, &o, &base).unwrap();
        assert_eq!(nf.eval(&m, &o, &base).unwrap(), C64::new(0.0, 0.0));
        let pts = unstable_leaf_points(&m, &o, 0, 10, 1e-3, 6).unwrap();
        for p in &pts {
            assert!(conjugacy_residual(&m, &o, &nf, p).unwrap() < 1e-9);
            assert!(modified_scaling_check(&m, &o, &nf, p).unwrap() < 1e-12);
            // H is the E^u coordinate of the displacement
            let h = nf.eval(&m, &o, p).unwrap();
            assert!((h.norm() - m.distance(o.point(0).unwrap(), p.current())).abs() < 1e-12);
        }
    }

    #[test]
    fn random_torus_affine_change_and_scaling() {
        let (m, o) = random_torus();
        let base = orbit_leaf_point::<TorusModel>(&o, 0).unwrap();
        let nf = normal_form(&m, &o, &base).unwrap();
        let pts = unstable_leaf_points(&m, &o, 0, 30, 1e-3, 8).unwrap();
        let other = normal_form(&m, &o, &pts[0]).unwrap();
        let (alpha, _, resid) = affine_change(&m, &o, &nf, &other, &pts[1..]).unwrap();
        assert!(resid < 1e-7, "{resid}");
        assert!((alpha.norm() - 1.0).abs() < 1e-6);
        for p in &pts {
            assert!(modified_scaling_check(&m, &o, &nf, p).unwrap() < 1e-6);
        }
    }
}
