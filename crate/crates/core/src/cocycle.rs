//! Lyapunov exponents and Oseledets subspaces of the derivative cocycle.

use crate::error::{Error, Result};
use crate::linalg::{complex_structure, grassmann_distance, min_principal_angle, orthonormalize, push_frame, Frame, Mat4, Vec4};
use crate::model::SurfaceModel;
use crate::walk::{FiniteMeasure, WalkWord};
use serde::Serialize;

/// Exponent estimates from a QR run.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovEstimate {
    /// Sorted in decreasing order.
    pub exponents: [f64; 4],
    pub stderr: [f64; 4],
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `(1/n) sum log |det Df|` over the same steps.
    pub mean_log_det: f64,
    pub n: usize,
    pub transient: usize,
    /// Largest gap between the full estimate and the last-quarter estimate.
    pub drift: f64,
    pub converged: bool,
}

fn mgs4(m: &Mat4) -> (Mat4, [f64; 4]) {
    let mut q = *m;
    let mut r = [0.0; 4];
    for j in 0..4 {
        let mut col = q.column(j).into_owned();
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k).into_owned();
                col -= qk * qk.dot(&col);
            }
        }
        let n = col.norm();
        r[j] = n;
        q.set_column(j, &(col / n));
    }
    (q, r)
}

fn batch_stats(samples: &[f64], batches: usize) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(2);
    let size = n / b;
    if size == 0 {
        return (mean, 0.0);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| samples[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Default transient discarded before averaging.
pub fn default_transient(n: usize) -> usize {
    (n / 10).min(1000)
}

/// QR estimate of all four exponents along a random word drawn from `measure`.
pub fn lyapunov_exponents<M: SurfaceModel>(
    model: &M,
    measure: &FiniteMeasure,
    x0: &M::Point,
    seed: u64,
    n: usize,
) -> Result<LyapunovEstimate> {
    let w = WalkWord::new(seed, measure);
    lyapunov_exponents_along(model, &w, x0, n, default_transient(n))
}

/// QR estimate along a given word, re-orthonormalizing every step and
/// averaging `n` steps after `transient` discarded ones.
pub fn lyapunov_exponents_along<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x0: &M::Point,
    n: usize,
    transient: usize,
) -> Result<LyapunovEstimate> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 steps, got {n}")));
    }
    let mut x = x0.clone();
    let mut q = Mat4::identity();
    let mut logs: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut log_det = 0.0;
    for i in 0..(transient + n) {
        let id = w.auto(i as i64);
        let d = model.tangent(id, &x)?;
        let (q2, r) = mgs4(&(d * q));
        q = q2;
        if i >= transient {
            for k in 0..4 {
                logs[k].push(r[k].ln());
            }
            log_det += d.determinant().abs().ln();
        }
        x = model.apply(id, &x)?;
    }
    let batches = 20;
    let mut est: Vec<(f64, f64, usize)> = (0..4)
        .map(|k| {
            let (m, se) = batch_stats(&logs[k], batches);
            (m, se, k)
        })
        .collect();
    // drift between the full average and the last quarter
    let quarter = n / 4;
    let mut drift = 0.0f64;
    let mut drift_ok = true;
    for (m, se, k) in &est {
        let tail = logs[*k][n - quarter..].iter().sum::<f64>() / quarter as f64;
        let d = (tail - m).abs();
        drift = drift.max(d);
        if d > 10.0 * se * 2.0 + 1e-12 {
            drift_ok = false;
        }
    }
    // last two dyadic windows
    let mut dyadic_ok = true;
    for (_, se, k) in &est {
        let a = &logs[*k][n / 4..n / 2];
        let b = &logs[*k][n / 2..];
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        // window standard errors scale like sqrt(n / len)
        let sa = se * (n as f64 / a.len() as f64).sqrt();
        let sb = se * (n as f64 / b.len() as f64).sqrt();
        if (ma - mb).abs() > 3.0 * (sa * sa + sb * sb).sqrt() + 1e-12 {
            dyadic_ok = false;
        }
    }
    est.sort_by(|a, b| b.0.total_cmp(&a.0));
    let exponents = [est[0].0, est[1].0, est[2].0, est[3].0];
    let stderr = [est[0].1, est[1].1, est[2].1, est[3].1];
    Ok(LyapunovEstimate {
        exponents,
        stderr,
        lambda_plus: exponents[0],
        lambda_minus: exponents[3],
        mean_log_det: log_det / n as f64,
        n,
        transient,
        drift,
        converged: drift_ok && dyadic_ok,
    })
}

/// Standard error of `lambda_plus + lambda_minus` from a QR run, computed
/// from batch means of the per-step sums.
pub fn sum_exponent_stderr<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x0: &M::Point,
    n: usize,
    transient: usize,
) -> Result<(f64, f64)> {
    let mut x = x0.clone();
    let mut q = Mat4::identity();
    let mut sums = Vec::with_capacity(n);
    let mut magnitude = 0.0;
    for i in 0..(transient + n) {
        let id = w.auto(i as i64);
        let d = model.tangent(id, &x)?;
        let (q2, r) = mgs4(&(d * q));
        q = q2;
        if i >= transient {
            sums.push(r[0].ln() + r[3].ln());
            magnitude += r[0].ln().abs() + r[3].ln().abs();
        }
        x = model.apply(id, &x)?;
    }
    let (mean, se) = batch_stats(&sums, 20);
    // the two exponent means are accumulated separately, so their sum
    // carries rounding of order sqrt(n) ulps of the mean magnitude even
    // when every per-step sum vanishes
    let rounding = f64::EPSILON * (n as f64).sqrt() * magnitude / n as f64;
    Ok((mean, se.hypot(rounding)))
}

/// `eps0 = min(1, lambda+/200, -lambda-/200) / 10`.
pub fn default_eps0(lambda_plus: f64, lambda_minus: f64) -> f64 {
    1.0f64.min(lambda_plus / 200.0).min(-lambda_minus / 200.0) / 10.0
}

/// Estimated Oseledets splitting at a point of the skew product.
#[derive(Debug, Clone)]
pub struct OseledetsFrame<P> {
    pub point: P,
    pub word: WalkWord,
    pub eu: Frame,
    pub es: Frame,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub angle: f64,
    pub n_used: usize,
}

/// Generic starting planes for the power iterations.
pub fn generic_plane(variant: u64) -> Frame {
    let a = Vec4::new(0.8, 0.3 + 0.1 * variant as f64, -0.7, 0.2);
    let b = Vec4::new(-0.4, 1.0, 0.5 - 0.2 * variant as f64, -0.9);
    orthonormalize(&Frame::from_columns(&[a, b])).0
}

/// Points `x_{-n}, ..., x_{-1}` of the backward orbit (index 0 = `x_{-1}`).
pub fn backward_orbit<M: SurfaceModel>(model: &M, w: &WalkWord, x: &M::Point, n: usize) -> Result<Vec<M::Point>> {
    let mut out = Vec::with_capacity(n);
    let mut p = x.clone();
    for k in 1..=n as i64 {
        p = model.apply_inverse(w.auto(-k), &p)?;
        out.push(p.clone());
    }
    out.reverse();
    Ok(out)
}

/// `E^u(x, w)` by pushing `start` forward from `x_{-n}`.
pub fn unstable_plane<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    n: usize,
    start: &Frame,
) -> Result<Frame> {
    let past = backward_orbit(model, w, x, n)?;
    let mut f = *start;
    for (i, p) in past.iter().enumerate() {
        let k = i as i64 - n as i64;
        f = push_frame(&model.tangent(w.auto(k), p)?, &f).0;
    }
    Ok(f)
}

/// `E^s(x, w)` by pulling `start` back from `x_n`, with the orbit, its
/// tangents and the pulled-back planes at every `x_k`.
fn stable_plane_with_orbit<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    n: usize,
    start: &Frame,
) -> Result<(Frame, Vec<M::Point>, Vec<Mat4>, Vec<Frame>)> {
    let mut pts = Vec::with_capacity(n + 1);
    let mut tangents = Vec::with_capacity(n);
    let mut p = x.clone();
    for k in 0..n as i64 {
        let id = w.auto(k);
        tangents.push(model.tangent(id, &p)?);
        pts.push(p.clone());
        p = model.apply(id, &p)?;
    }
    pts.push(p);
    let mut f = *start;
    let mut planes = vec![f; n + 1];
    for k in (0..n).rev() {
        let inv = tangents[k]
            .try_inverse()
            .ok_or_else(|| Error::NonConvergence("singular tangent".into()))?;
        f = push_frame(&inv, &f).0;
        planes[k] = f;
    }
    Ok((f, pts, tangents, planes))
}

/// Oseledets splitting at `(x, w)` from `n_bwd` past and `n_fwd` future steps.
pub fn oseledets_splitting<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    n_fwd: usize,
    n_bwd: usize,
) -> Result<OseledetsFrame<M::Point>> {
    if n_fwd == 0 || n_bwd == 0 {
        return Err(Error::InvalidArgument("windows must be positive".into()));
    }
    let eu = unstable_plane(model, w, x, n_bwd, &generic_plane(0))?;
    // pad the future so the planes along the forward window have converged
    let (es, _pts, tangents, planes) = stable_plane_with_orbit(model, w, x, 2 * n_fwd, &generic_plane(1))?;
    // finite-time exponents along the forward window
    let mut fu = eu;
    let mut gu = 0.0;
    let mut gs = 0.0;
    for k in 0..n_fwd {
        let (f2, a) = push_frame(&tangents[k], &fu);
        gu += a;
        fu = f2;
        gs += push_frame(&tangents[k], &planes[k]).1;
    }
    let angle = min_principal_angle(&eu, &es);
    if angle < 1e-8 {
        return Err(Error::DegenerateSplitting(angle));
    }
    Ok(OseledetsFrame {
        point: x.clone(),
        word: w.clone(),
        eu,
        es,
        lambda_plus: gu / (2.0 * n_fwd as f64),
        lambda_minus: gs / (2.0 * n_fwd as f64),
        angle,
        n_used: n_fwd + n_bwd,
    })
}

/// Grassmann distance between `Df E^u(x)` and an independently estimated
/// `E^u(F(x, w))` (different starting plane, same window length).
pub fn equivariance_residual<M: SurfaceModel>(
    model: &M,
    frame: &OseledetsFrame<M::Point>,
    n_bwd: usize,
) -> Result<f64> {
    let w = &frame.word;
    let d = model.tangent(w.auto(0), &frame.point)?;
    let pushed = push_frame(&d, &frame.eu).0;
    let y = model.apply(w.auto(0), &frame.point)?;
    let fresh = unstable_plane(model, &w.shift(1), &y, n_bwd, &generic_plane(7))?;
    let du = grassmann_distance(&pushed, &fresh);
    let dinv = d.try_inverse().ok_or_else(|| Error::NonConvergence("singular tangent".into()))?;
    let es_next = stable_plane_with_orbit(model, &w.shift(1), &y, n_bwd, &generic_plane(9))?.0;
    let pulled = push_frame(&dinv, &es_next).0;
    Ok(du.max(grassmann_distance(&pulled, &frame.es)))
}

/// Which Oseledets subspace a vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tag {
    Stable,
    Unstable,
}

/// Extra steps used to converge the reference planes in the unstable
/// direction of iteration.
pub const PLANE_PAD: usize = 64;

/// Planes `E^u(x_{-k})` for `k = 1..=n` (index `k - 1`).
fn unstable_planes_past<M: SurfaceModel>(model: &M, w: &WalkWord, x: &M::Point, n: usize) -> Result<Vec<Frame>> {
    let depth = n + PLANE_PAD;
    let past = backward_orbit(model, w, x, depth)?;
    let mut f = generic_plane(3);
    let mut out = vec![f; n];
    for (i, p) in past.iter().enumerate() {
        let k = i as i64 - depth as i64;
        // planes at x_{-depth+1} .. x_{-1}: k + 1 ranges over -depth+1..=0
        f = push_frame(&model.tangent(w.auto(k), p)?, &f).0;
        let idx = -(k + 1);
        if idx >= 1 && (idx as usize) <= n {
            out[idx as usize - 1] = f;
        }
    }
    Ok(out)
}

/// Planes `E^s(x_k)` for `k = 1..=n` (index `k - 1`).
fn stable_planes_future<M: SurfaceModel>(model: &M, w: &WalkWord, x: &M::Point, n: usize) -> Result<Vec<Frame>> {
    let (_, _, _, planes) = stable_plane_with_orbit(model, w, x, n + PLANE_PAD, &generic_plane(4))?;
    Ok(planes[1..=n].to_vec())
}

/// Iterates of `v` under the cocycle for `k = 1..=n` forward and backward,
/// as `(log |Df^k v|, unit vector)`. In the direction where `v` is unstable
/// for the iteration, each iterate is projected back onto an independently
/// converged Oseledets plane.
pub fn tracked_iterates<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    v: &Vec4,
    tag: Tag,
    n: usize,
) -> Result<(Vec<(f64, Vec4)>, Vec<(f64, Vec4)>)> {
    let nv = v.norm();
    let fwd_planes = if tag == Tag::Stable && n > 0 { Some(stable_planes_future(model, w, x, n)?) } else { None };
    let bwd_planes = if tag == Tag::Unstable && n > 0 { Some(unstable_planes_past(model, w, x, n)?) } else { None };
    let mut fwd = Vec::with_capacity(n);
    let mut p = x.clone();
    let mut u = v / nv;
    let mut log_len = nv.ln();
    for k in 0..n {
        let id = w.auto(k as i64);
        u = model.tangent(id, &p)? * u;
        if let Some(pl) = &fwd_planes {
            u = pl[k] * (pl[k].transpose() * u);
        }
        let s = u.norm();
        log_len += s.ln();
        u /= s;
        p = model.apply(id, &p)?;
        fwd.push((log_len, u));
    }
    let mut bwd = Vec::with_capacity(n);
    let mut p = x.clone();
    let mut u = v / nv;
    let mut log_len = nv.ln();
    for k in 1..=n {
        let id = w.auto(-(k as i64));
        let prev = model.apply_inverse(id, &p)?;
        let dinv = model
            .tangent(id, &prev)?
            .try_inverse()
            .ok_or_else(|| Error::NonConvergence("singular tangent".into()))?;
        u = dinv * u;
        if let Some(pl) = &bwd_planes {
            u = pl[k - 1] * (pl[k - 1].transpose() * u);
        }
        let s = u.norm();
        log_len += s.ln();
        u /= s;
        p = prev;
        bwd.push((log_len, u));
    }
    Ok((fwd, bwd))
}

/// Truncated two-sided Lyapunov norm of `v` at `(x, w)`:
/// `(sum_{|n| <= N} |Df^n v|^2 e^{-2 lambda n - 2 eps0 |n|})^{1/2}`,
/// accumulated in the log domain.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_norm<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    v: &Vec4,
    tag: Tag,
    lambda: f64,
    eps0: f64,
    n_trunc: usize,
) -> Result<f64> {
    let nv = v.norm();
    if nv == 0.0 {
        return Ok(0.0);
    }
    let (fwd, bwd) = tracked_iterates(model, w, x, v, tag, n_trunc)?;
    let mut terms = vec![2.0 * nv.ln()];
    for (k, (g, _)) in fwd.iter().enumerate() {
        let n = (k + 1) as f64;
        terms.push(2.0 * g - 2.0 * lambda * n - 2.0 * eps0 * n);
    }
    for (k, (g, _)) in bwd.iter().enumerate() {
        let n = (k + 1) as f64;
        terms.push(2.0 * g + 2.0 * lambda * n - 2.0 * eps0 * n);
    }
    if n_trunc == 0 {
        return Ok(nv);
    }
    Ok((0.5 * crate::linalg::log_sum_exp(&terms)).exp())
}

/// Non-uniform hyperbolicity constant at a sample.
#[derive(Debug, Clone, Serialize)]
pub struct NuhEstimate {
    /// Smallest `L` satisfying the growth and angle bounds over `|n| <= N`.
    pub l_hat: f64,
    /// Per-index log-growths `(n, log|Df^n e_u|, log|Df^n e_s|, angle)`.
    pub profile: Vec<(i64, f64, f64, f64)>,
}

/// Growth profile of unit vectors of `E^u` and `E^s` along `[-N, N]`,
/// with the angle between the two planes at each point.
pub fn growth_profile<M: SurfaceModel>(
    model: &M,
    frame: &OseledetsFrame<M::Point>,
    n: usize,
) -> Result<Vec<(i64, f64, f64, f64)>> {
    let w = &frame.word;
    let j = complex_structure();
    let eu = frame.eu.column(0).into_owned();
    let es = frame.es.column(0).into_owned();
    let (uf, ub) = tracked_iterates(model, w, &frame.point, &eu, Tag::Unstable, n)?;
    let (sf, sb) = tracked_iterates(model, w, &frame.point, &es, Tag::Stable, n)?;
    let angle = |a: &Vec4, b: &Vec4| {
        min_principal_angle(&Frame::from_columns(&[*a, j * a]), &Frame::from_columns(&[*b, j * b]))
    };
    let mut out = vec![(0i64, 0.0, 0.0, frame.angle)];
    for k in 0..n {
        out.push(((k + 1) as i64, uf[k].0, sf[k].0, angle(&uf[k].1, &sf[k].1)));
        out.push((-((k + 1) as i64), ub[k].0, sb[k].0, angle(&ub[k].1, &sb[k].1)));
    }
    out.sort_by_key(|t| t.0);
    Ok(out)
}

/// Smallest `L >= 1` with
/// `L^-1 e^{n lambda - |n| eps0/2} <= |Df^n v| <= L e^{n lambda + |n| eps0/2}`
/// on both subspaces and `angle(F^n) > e^{-|n| eps0} / L`, for `|n| <= N`.
pub fn nuh_from_profile(profile: &[(i64, f64, f64, f64)], lambda_plus: f64, lambda_minus: f64, eps0: f64) -> f64 {
    let mut log_l = 0.0f64;
    for &(n, gu, gs, angle) in profile {
        let nf = n as f64;
        let slack = 0.5 * eps0 * nf.abs();
        for (g, lam) in [(gu, lambda_plus), (gs, lambda_minus)] {
            log_l = log_l.max(g - nf * lam - slack).max(nf * lam - slack - g);
        }
        log_l = log_l.max(-eps0 * nf.abs() - angle.ln());
    }
    log_l.exp()
}

pub fn nuh_estimate<M: SurfaceModel>(
    model: &M,
    frame: &OseledetsFrame<M::Point>,
    lambda_plus: f64,
    lambda_minus: f64,
    eps0: f64,
    n: usize,
) -> Result<NuhEstimate> {
    let profile = growth_profile(model, frame, n)?;
    Ok(NuhEstimate { l_hat: nuh_from_profile(&profile, lambda_plus, lambda_minus, eps0), profile })
}

/// Temperedness of the NUH constant along an orbit segment.
#[derive(Debug, Clone, Serialize)]
pub struct NuhTemperedness {
    /// `(m, L_hat(F^m x))` for `m` in `[-M, M]`.
    pub values: Vec<(i64, f64)>,
    /// Largest `log L_hat(F^m) - log L_hat(x) - eps0 |m|`; at most 0 when
    /// the growth bound `L(F^m) <= L e^{eps0 |m|}` holds for the raw estimate.
    pub worst_excess: f64,
    /// `sup_m L_hat(F^m) e^{-eps0 |m|}`, which satisfies the growth bound by
    /// construction on the tested segment.
    pub tempered: f64,
}

/// Evaluates `L_hat` at `F^m(x, w)` for `|m| <= m_max` and checks the
/// growth bound against `L_hat(x, w)`.
#[allow(clippy::too_many_arguments)]
pub fn nuh_temperedness<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    lambda_plus: f64,
    lambda_minus: f64,
    eps0: f64,
    n: usize,
    window: usize,
    m_max: usize,
) -> Result<NuhTemperedness> {
    let mut values = Vec::new();
    for m in -(m_max as i64)..=(m_max as i64) {
        let y = crate::walk::compose(model, w, m, x)?;
        let ws = w.shift(m);
        let fr = oseledets_splitting(model, &ws, &y, window, window)?;
        values.push((m, nuh_estimate(model, &fr, lambda_plus, lambda_minus, eps0, n)?.l_hat));
    }
    let l0 = values[m_max].1;
    let worst_excess = values
        .iter()
        .map(|&(m, l)| l.ln() - l0.ln() - eps0 * m.unsigned_abs() as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let tempered = values
        .iter()
        .map(|&(m, l)| l * (-eps0 * m.unsigned_abs() as f64).exp())
        .fold(0.0, f64::max);
    Ok(NuhTemperedness { values, worst_excess, tempered })
}

/// Fitted Hoelder exponent and constant.
#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub alpha_hat: f64,
    pub l_hat: f64,
    /// Half-width of the 95% interval on `alpha_hat`.
    pub alpha_ci: f64,
    /// Exponent predicted from the block parameters, `(a - b) / (a - d)`.
    pub alpha_predicted: f64,
    /// All subspace distances vanish: any exponent is consistent.
    pub unconstrained: bool,
    pub pairs_used: usize,
}

/// Block parameters for the Hoelder diagnostic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockParams {
    pub a: f64,
    pub b: f64,
    /// `C` of the block `Delta_{a,b,C}`.
    pub c_block: f64,
    /// Growth constants `C, c` of `prod |f_i|_{C^{1,1}} <= C e^{c n}`.
    pub c_growth: f64,
    pub c_rate: f64,
    pub rho0: f64,
}

impl BlockParams {
    pub fn d(&self) -> f64 {
        (2.0 * self.c_growth * self.c_growth).ln() + 2.0 * self.c_rate + (self.rho0 / 4.0).ln().abs() + self.a.abs()
    }

    pub fn alpha(&self) -> f64 {
        (self.a - self.b) / (self.a - self.d())
    }
}

/// Subspace distance with the far-pair convention: 1 when `d_X >= rho0/4`,
/// otherwise the Grassmann distance after transporting `E_y` to `x`.
pub fn subspace_distance<M: SurfaceModel>(
    model: &M,
    x: &M::Point,
    ex: &Frame,
    y: &M::Point,
    ey: &Frame,
    rho0: f64,
) -> Result<f64> {
    if model.distance(x, y) >= rho0 / 4.0 {
        return Ok(1.0);
    }
    Ok(grassmann_distance(ex, &transport(model, y, x, ey)?))
}

/// Transport of a plane at `y` to `x`, re-orthonormalized.
pub fn transport<M: SurfaceModel>(model: &M, y: &M::Point, x: &M::Point, f: &Frame) -> Result<Frame> {
    let a = model.transport(y, x, &f.column(0).into_owned())?;
    let b = model.transport(y, x, &f.column(1).into_owned())?;
    Ok(orthonormalize(&Frame::from_columns(&[a, b])).0)
}

/// Regression of `log d(E_x, E_y)` on `log d_X(x, y)` over close pairs.
pub fn holder_diagnostic<M: SurfaceModel>(
    model: &M,
    samples: &[(M::Point, Frame)],
    params: &BlockParams,
) -> Result<HolderFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut close_pairs = 0usize;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let (x, ex) = &samples[i];
            let (y, ey) = &samples[j];
            let dx = model.distance(x, y);
            if dx >= params.rho0 / 4.0 || dx == 0.0 {
                continue;
            }
            close_pairs += 1;
            let de = subspace_distance(model, x, ex, y, ey, params.rho0)?;
            if de > 1e-13 {
                xs.push(dx.ln());
                ys.push(de.ln());
            }
        }
    }
    if close_pairs < 30 {
        return Err(Error::Insufficient(format!("{close_pairs} in-block pairs, need 30")));
    }
    let alpha_predicted = params.alpha();
    if xs.len() < 3 {
        return Ok(HolderFit {
            alpha_hat: f64::INFINITY,
            l_hat: 0.0,
            alpha_ci: 0.0,
            alpha_predicted,
            unconstrained: true,
            pairs_used: close_pairs,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (resid / (n - 2.0).max(1.0) / sxx).sqrt();
    Ok(HolderFit {
        alpha_hat: slope,
        l_hat: intercept.exp(),
        alpha_ci: 1.96 * se,
        alpha_predicted,
        unconstrained: false,
        pairs_used: close_pairs,
    })
}

/// Whether `(x, w)` lies in the estimated block `Delta_{a,b,C}` for the plane
/// `e` over `n` forward steps.
pub fn in_block<M: SurfaceModel>(
    model: &M,
    w: &WalkWord,
    x: &M::Point,
    e: &Frame,
    params: &BlockParams,
    n: usize,
) -> Result<bool> {
    let perp = {
        let p = Mat4::identity() - e * e.transpose();
        let svd = p.svd(true, false);
        let u = svd.u.ok_or_else(|| Error::NonConvergence("svd".into()))?;
        let mut idx: Vec<usize> = (0..4).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        Frame::from_columns(&[u.column(idx[0]).into_owned(), u.column(idx[1]).into_owned()])
    };
    let mut p = x.clone();
    let mut fe = *e;
    let mut fp = perp;
    let (mut ge, mut gp) = (0.0, 0.0);
    let lc = params.c_block.ln();
    for k in 0..n as i64 {
        let d = model.tangent(w.auto(k), &p)?;
        // largest expansion inside E, smallest inside the complement
        let se = (d * fe).singular_values();
        let sp = (d * fp).singular_values();
        ge += se.max().ln();
        gp += sp.min().ln();
        fe = push_frame(&d, &fe).0;
        fp = push_frame(&d, &fp).0;
        p = model.apply(w.auto(k), &p)?;
        let nf = (k + 1) as f64;
        if ge > lc + params.a * nf || gp < -lc + params.b * nf {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TorusGenerator, TorusModel};

    fn golden_ratio_log() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn cat_map_exponents() {
        let m = TorusModel::cat_map();
        let est = lyapunov_exponents(&m, &FiniteMeasure::dirac(0), &[0.1, 0.2, 0.3, 0.4], 1, 10_000).unwrap();
        let l = golden_ratio_log();
        assert!((est.exponents[0] - l).abs() < 1e-6);
        assert!((est.exponents[1] - l).abs() < 1e-6);
        assert!((est.exponents[2] + l).abs() < 1e-6);
        assert!((est.exponents[3] + l).abs() < 1e-6);
        assert!(est.exponents.iter().sum::<f64>().abs() < 1e-9);
        assert!(est.converged);
    }

    #[test]
    fn identity_support_gives_zero_exponents() {
        let id = TorusGenerator::from_integer_2x2("I", [[1, 0], [0, 1]]);
        let m = TorusModel::new(vec![id]).unwrap();
        let est = lyapunov_exponents(&m, &FiniteMeasure::dirac(0), &[0.1, 0.2, 0.3, 0.4], 1, 500).unwrap();
        assert_eq!(est.exponents, [0.0; 4]);
    }

    #[test]
    fn too_few_steps_rejected() {
        let m = TorusModel::cat_map();
        assert!(lyapunov_exponents(&m, &FiniteMeasure::dirac(0), &[0.0; 4], 1, 50).is_err());
    }

    #[test]
    fn cat_map_splitting_matches_eigenvectors() {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let fr = oseledets_splitting(&m, &w, &[0.3, 0.1, 0.7, 0.2], 40, 40).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let vu = Vec4::new(phi, 1.0, 0.0, 0.0).normalize();
        let vs = Vec4::new(-1.0, phi, 0.0, 0.0).normalize();
        let j = complex_structure();
        let eu = Frame::from_columns(&[vu, j * vu]);
        let es = Frame::from_columns(&[vs, j * vs]);
        assert!(grassmann_distance(&fr.eu, &eu) < 1e-8);
        assert!(grassmann_distance(&fr.es, &es) < 1e-8);
        assert!((fr.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
        assert!(equivariance_residual(&m, &fr, 40).unwrap() < 1e-6);
        let l = golden_ratio_log();
        assert!((fr.lambda_plus - l).abs() < 1e-9);
        assert!((fr.lambda_minus + l).abs() < 1e-9);
    }

    #[test]
    fn lyapunov_norm_geometric_series() {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let x = [0.3, 0.1, 0.7, 0.2];
        let fr = oseledets_splitting(&m, &w, &x, 40, 40).unwrap();
        let l = golden_ratio_log();
        let eps0 = default_eps0(l, -l);
        let v = fr.eu.column(0).into_owned() * 2.0;
        assert_eq!(lyapunov_norm(&m, &w, &x, &v, Tag::Unstable, l, eps0, 0).unwrap(), 2.0);
        let n = 30;
        let q = (-2.0 * eps0).exp();
        let closed = 2.0 * (1.0 + 2.0 * q * (1.0 - q.powi(n)) / (1.0 - q)).sqrt();
        let got = lyapunov_norm(&m, &w, &x, &v, Tag::Unstable, l, eps0, n as usize).unwrap();
        assert!((got - closed).abs() < 1e-10 * closed);
        let mut prev = 0.0;
        for k in 0..10 {
            let val = lyapunov_norm(&m, &w, &x, &v, Tag::Unstable, l, eps0, k).unwrap();
            assert!(val >= prev && val >= v.norm() - 1e-15);
            prev = val;
        }
    }

    #[test]
    fn nuh_constant_bounded_for_single_matrix() {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let fr = oseledets_splitting(&m, &w, &[0.3, 0.1, 0.7, 0.2], 40, 40).unwrap();
        let l = golden_ratio_log();
        let eps0 = default_eps0(l, -l);
        let a = nuh_estimate(&m, &fr, l, -l, eps0, 10).unwrap().l_hat;
        let b = nuh_estimate(&m, &fr, l, -l, eps0, 30).unwrap().l_hat;
        assert!(a < 1.0 + 1e-9 && b < 1.0 + 1e-9, "{a} {b}");
    }

    #[test]
    fn holder_on_constant_field_is_unconstrained() {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let mut samples = Vec::new();
        for i in 0..12 {
            let x = [0.3 + 0.001 * i as f64, 0.1, 0.7, 0.2 + 0.0005 * i as f64];
            let fr = oseledets_splitting(&m, &w, &x, 30, 30).unwrap();
            samples.push((x, fr.es));
        }
        let params = BlockParams { a: -0.9, b: 0.9, c_block: 2.0, c_growth: 3.0, c_rate: 1.0, rho0: 1.0 };
        let fit = holder_diagnostic(&m, &samples, &params).unwrap();
        assert!(fit.unconstrained);
        assert!(fit.alpha_predicted > 0.0 && fit.alpha_predicted < 1.0);
        // far pairs count as distance 1
        let far = subspace_distance(&m, &[0.0; 4], &samples[0].1, &[0.5, 0.5, 0.5, 0.5], &samples[1].1, 1.0).unwrap();
        assert_eq!(far, 1.0);
    }

    #[test]
    fn holder_needs_enough_pairs() {
        let m = TorusModel::cat_map();
        let samples = vec![([0.0; 4], generic_plane(0)); 3];
        let params = BlockParams { a: -0.9, b: 0.9, c_block: 2.0, c_growth: 3.0, c_rate: 1.0, rho0: 1.0 };
        assert!(matches!(holder_diagnostic(&m, &samples, &params), Err(Error::Insufficient(_))));
    }
}
