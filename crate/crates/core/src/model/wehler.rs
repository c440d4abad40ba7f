//! Wehler surfaces: smooth (2,2,2) hypersurfaces in `(P^1)^3` with the three
//! covering involutions.
//!
//! Coefficients are real; points are complex and stored as normalized
//! homogeneous pairs `(s_m, t_m)` per factor, so the real locus is an
//! invariant subset. Local charts use the affine coordinate `u = s/t` (or
//! `t/s` when `|s| > |t|`) in each factor, keep the two coordinates in which
//! the surface is a graph, and solve for the third by Newton's method.

use super::dual::Dual;
use super::{AutoId, CohomologyRep, SurfaceModel};
use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::linalg::{complex_to_real, Mat4, Vec4, C64};
use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

const NEWTON_MAX: usize = 60;

/// Coefficients `a[i][j][k]` of `x^i y^j z^k` in affine coordinates.
pub type WehlerCoefficients = [[[f64; 3]; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct WehlerPoint {
    pub h: [[C64; 2]; 3],
}

impl WehlerPoint {
    /// Point with real affine coordinates `(x, y, z)`; infinite values are allowed.
    pub fn from_affine(xyz: [f64; 3]) -> Self {
        let h = xyz.map(|x| {
            if x.is_infinite() {
                normalize_pair([C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
            } else {
                normalize_pair([C64::new(x, 0.0), C64::new(1.0, 0.0)])
            }
        });
        WehlerPoint { h }
    }

    /// Affine coordinates `s/t` (infinite where `t = 0`).
    pub fn affine(&self) -> [C64; 3] {
        self.h.map(|[s, t]| {
            if t.norm() == 0.0 {
                C64::new(f64::INFINITY, 0.0)
            } else {
                s / t
            }
        })
    }

    /// Largest imaginary part of the affine coordinates in their charts.
    pub fn imaginary_size(&self) -> f64 {
        self.h
            .iter()
            .map(|[s, t]| {
                let r = if s.norm() <= t.norm() { s / t } else { t / s };
                r.im.abs()
            })
            .fold(0.0, f64::max)
    }
}

fn normalize_pair(p: [C64; 2]) -> [C64; 2] {
    let n = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
    let big = if p[0].norm() >= p[1].norm() { p[0] } else { p[1] };
    let phase = big / big.norm();
    let f = phase * n;
    [p[0] / f, p[1] / f]
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ChartSpec {
    flip: [bool; 3],
    drop: usize,
    kept: [usize; 2],
}

fn hom<const N: usize>(u: Dual<N>, flip: bool) -> [Dual<N>; 2] {
    if flip {
        [Dual::one(), u]
    } else {
        [u, Dual::one()]
    }
}

fn ratio<const N: usize>(h: [Dual<N>; 2], flip: bool) -> Result<Dual<N>> {
    let (num, den) = if flip { (h[1], h[0]) } else { (h[0], h[1]) };
    if den.v.norm() < 1e-300 || num.v.norm() > 1e12 * den.v.norm() {
        return Err(Error::ChartEscape("point outside the affine patch".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WehlerModel {
    pub coefficients: WehlerCoefficients,
}

impl WehlerModel {
    pub fn new(coefficients: WehlerCoefficients) -> Self {
        WehlerModel { coefficients }
    }

    /// Builds the model from `(i, j, k, coefficient)` affine terms.
    pub fn from_terms(terms: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut a = [[[0.0; 3]; 3]; 3];
        for &(i, j, k, c) in terms {
            if i > 2 || j > 2 || k > 2 {
                return Err(Error::InvalidArgument(format!("degree ({i},{j},{k}) exceeds (2,2,2)")));
            }
            a[i][j][k] += c;
        }
        Ok(Self::new(a))
    }

    /// `(1+x^2)(1+y^2)(1+z^2) + a xyz - b`.
    pub fn symmetric(a: f64, b: f64) -> Self {
        let mut c = [[[0.0; 3]; 3]; 3];
        for i in [0, 2] {
            for j in [0, 2] {
                for k in [0, 2] {
                    c[i][j][k] = 1.0;
                }
            }
        }
        c[1][1][1] = a;
        c[0][0][0] -= b;
        Self::new(c)
    }

    /// The default test surface used by the golden configuration.
    pub fn golden() -> Self {
        Self::symmetric(10.0, 2.0)
    }

    fn phi_hom<const N: usize>(&self, h: &[[Dual<N>; 2]; 3]) -> Dual<N> {
        let mons: Vec<[Dual<N>; 3]> =
            h.iter().map(|[s, t]| [*t * *t, *s * *t, *s * *s]).collect();
        let mut acc = Dual::zero();
        for i in 0..3 {
            for j in 0..3 {
                let ij = mons[0][i] * mons[1][j];
                for k in 0..3 {
                    let c = self.coefficients[i][j][k];
                    if c != 0.0 {
                        acc = acc + (ij * mons[2][k]).scale(C64::new(c, 0.0));
                    }
                }
            }
        }
        acc
    }

    /// Coefficients `(C, B, A)` of the binary quadratic form in factor `m`,
    /// indexed by the power of `s_m`.
    fn binary_form<const N: usize>(&self, m: usize, h: &[[Dual<N>; 2]; 3]) -> [Dual<N>; 3] {
        let mons: Vec<[Dual<N>; 3]> =
            h.iter().map(|[s, t]| [*t * *t, *s * *t, *s * *s]).collect();
        let others: Vec<usize> = (0..3).filter(|&x| x != m).collect();
        let mut out = [Dual::zero(); 3];
        for (p, o) in out.iter_mut().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    let mut idx = [0usize; 3];
                    idx[m] = p;
                    idx[others[0]] = a;
                    idx[others[1]] = b;
                    let c = self.coefficients[idx[0]][idx[1]][idx[2]];
                    if c != 0.0 {
                        *o = *o
                            + (mons[others[0]][a] * mons[others[1]][b]).scale(C64::new(c, 0.0));
                    }
                }
            }
        }
        out
    }

    fn phi_chart<const N: usize>(&self, flip: [bool; 3], u: [Dual<N>; 3]) -> Dual<N> {
        let h = [hom(u[0], flip[0]), hom(u[1], flip[1]), hom(u[2], flip[2])];
        self.phi_hom(&h)
    }

    /// Surface equation at a point in normalized homogeneous coordinates.
    pub fn residual(&self, p: &WehlerPoint) -> f64 {
        let h = p.h.map(|[s, t]| [Dual::<0>::constant(s), Dual::<0>::constant(t)]);
        self.phi_hom(&h).v.norm()
    }

    fn chart_coords(p: &WehlerPoint, flip: [bool; 3]) -> Result<[C64; 3]> {
        let mut u = [C64::new(0.0, 0.0); 3];
        for m in 0..3 {
            let h = [Dual::<0>::constant(p.h[m][0]), Dual::<0>::constant(p.h[m][1])];
            u[m] = ratio(h, flip[m])?.v;
        }
        Ok(u)
    }

    fn gradient(&self, flip: [bool; 3], u: [C64; 3]) -> [C64; 3] {
        let d = [0, 1, 2].map(|m| Dual::<3>::variable(u[m], m));
        self.phi_chart(flip, d).d
    }

    fn chart_spec(&self, p: &WehlerPoint) -> Result<(ChartSpec, [C64; 3], [C64; 3])> {
        let flip = p.h.map(|[s, t]| s.norm() > t.norm());
        let u = Self::chart_coords(p, flip)?;
        let g = self.gradient(flip, u);
        let drop = (0..3)
            .max_by(|&a, &b| g[a].norm().total_cmp(&g[b].norm()))
            .unwrap_or(0);
        let scale = self.coefficients.iter().flatten().flatten().map(|c| c.abs()).sum::<f64>();
        if g[drop].norm() < 1e-10 * scale.max(1.0) {
            return Err(Error::ChartEscape("singular point of the surface".into()));
        }
        let kept = match drop {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        Ok((ChartSpec { flip, drop, kept }, u, g))
    }

    fn point_from_chart(flip: [bool; 3], u: [C64; 3]) -> WehlerPoint {
        let h = [0, 1, 2].map(|m| {
            let one = C64::new(1.0, 0.0);
            normalize_pair(if flip[m] { [one, u[m]] } else { [u[m], one] })
        });
        WehlerPoint { h }
    }

    /// Solves for the dropped coordinate by Newton's method starting from
    /// the current value. With `max_iter == 1` this is a single correction.
    fn solve_dropped(&self, spec: &ChartSpec, mut u: [C64; 3], max_iter: usize) -> Result<[C64; 3]> {
        let m = spec.drop;
        for _ in 0..max_iter {
            let mut d = u.map(Dual::<1>::constant);
            d[m] = Dual::variable(u[m], 0);
            let f = self.phi_chart(spec.flip, d);
            if f.d[0].norm() < 1e-300 {
                return Err(Error::ChartEscape("vanishing derivative in Newton solve".into()));
            }
            let step = f.v / f.d[0];
            u[m] -= step;
            if !u[m].re.is_finite() || !u[m].im.is_finite() || u[m].norm() > 1e8 {
                return Err(Error::ChartEscape("Newton solve left the chart".into()));
            }
            if step.norm() <= 1e-15 * (1.0 + u[m].norm()) {
                return Ok(u);
            }
        }
        if max_iter == 1 {
            return Ok(u);
        }
        Err(Error::ChartEscape("Newton solve did not converge".into()))
    }

    /// One Newton step back onto the surface in the point's own chart.
    pub fn reproject(&self, p: &WehlerPoint) -> Result<WehlerPoint> {
        let (spec, u, _) = self.chart_spec(p)?;
        let u = self.solve_dropped(&spec, u, 1)?;
        Ok(Self::point_from_chart(spec.flip, u))
    }

    /// Other root of the binary form in factor `m`, as dual numbers.
    fn involution_pair<const N: usize>(&self, m: usize, h: &[[Dual<N>; 2]; 3]) -> Result<[Dual<N>; 2]> {
        let [c, b, a] = self.binary_form(m, h);
        let [s0, t0] = h[m];
        let w = if s0.v.norm() >= t0.v.norm() {
            [c * s0, -(b * s0) - c * t0]
        } else {
            [-(b * t0) - a * s0, a * t0]
        };
        let hs = (s0.v.norm_sqr() + t0.v.norm_sqr()).sqrt();
        let scale = (a.v.norm() + b.v.norm() + c.v.norm()) * hs;
        let wn = (w[0].v.norm_sqr() + w[1].v.norm_sqr()).sqrt();
        if scale < 1e-12 || wn <= 1e-12 * scale {
            return Err(Error::DegenerateFiber { involution: m });
        }
        Ok(w)
    }

    /// Samples a real point of the surface by choosing the last two factors
    /// uniformly on `RP^1` and solving for the first.
    pub fn random_real_point<R: Rng>(&self, rng: &mut R) -> Result<WehlerPoint> {
        for _ in 0..10_000 {
            let th1: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let th2: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let mut h = [[Dual::<0>::zero(); 2]; 3];
            h[1] = [Dual::constant(C64::new(th1.sin(), 0.0)), Dual::constant(C64::new(th1.cos(), 0.0))];
            h[2] = [Dual::constant(C64::new(th2.sin(), 0.0)), Dual::constant(C64::new(th2.cos(), 0.0))];
            let [c, b, a] = self.binary_form(0, &h).map(|d| d.v.re);
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let root = if rng.gen_bool(0.5) { [q, a] } else { [c, q] };
            if root[0].abs() + root[1].abs() < 1e-12 {
                continue;
            }
            let p = WehlerPoint {
                h: [
                    normalize_pair([C64::new(root[0], 0.0), C64::new(root[1], 0.0)]),
                    [h[1][0].v, h[1][1].v],
                    [h[2][0].v, h[2][1].v],
                ],
            };
            let Ok(p) = self.reproject(&p) else { continue };
            if self.residual(&p) < 1e-12 && self.chart_spec(&p).is_ok() {
                return Ok(p);
            }
        }
        Err(Error::NonConvergence("no real point found on the surface".into()))
    }

    fn check_id(id: AutoId) -> Result<()> {
        if id < 3 {
            Ok(())
        } else {
            Err(Error::UnknownAutomorphism(id))
        }
    }

    /// Cohomology action of the involution in factor `m` on `(h1, h2, h3)`.
    pub fn involution_cohomology(m: usize) -> IntMatrix {
        let mut rows = [[0i64; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row[m] = if i == m { -1 } else { 2 };
        }
        IntMatrix::from_rows(&rows)
    }

    pub fn gram() -> IntMatrix {
        IntMatrix::from_rows(&[[0, 2, 2], [2, 0, 2], [2, 2, 0]])
    }
}

impl SurfaceModel for WehlerModel {
    type Point = WehlerPoint;

    fn name(&self) -> &str {
        "wehler"
    }

    fn automorphism_count(&self) -> usize {
        3
    }

    fn automorphism_name(&self, id: AutoId) -> String {
        format!("sigma{}", id + 1)
    }

    fn inverse_id(&self, id: AutoId) -> Result<AutoId> {
        Self::check_id(id)?;
        Ok(id)
    }

    fn apply(&self, id: AutoId, p: &WehlerPoint) -> Result<WehlerPoint> {
        Self::check_id(id)?;
        let h = p.h.map(|[s, t]| [Dual::<0>::constant(s), Dual::<0>::constant(t)]);
        let w = self.involution_pair(id, &h)?;
        let mut out = p.clone();
        out.h[id] = normalize_pair([w[0].v, w[1].v]);
        self.reproject(&out)
    }

    fn tangent(&self, id: AutoId, p: &WehlerPoint) -> Result<Mat4> {
        Self::check_id(id)?;
        let (spec, u, g) = self.chart_spec(p)?;
        let mut d = [Dual::<2>::zero(); 3];
        d[spec.kept[0]] = Dual::variable(u[spec.kept[0]], 0);
        d[spec.kept[1]] = Dual::variable(u[spec.kept[1]], 1);
        let gm = g[spec.drop];
        d[spec.drop] = Dual {
            v: u[spec.drop],
            d: [-g[spec.kept[0]] / gm, -g[spec.kept[1]] / gm],
        };
        let mut h = [0, 1, 2].map(|m| hom(d[m], spec.flip[m]));
        h[id] = self.involution_pair(id, &h)?;
        let q = self.apply(id, p)?;
        let (spec_q, _, _) = self.chart_spec(&q)?;
        let mut jac = Matrix2::<C64>::zeros();
        for (r, &k) in spec_q.kept.iter().enumerate() {
            let out = ratio(h[k], spec_q.flip[k])?;
            jac[(r, 0)] = out.d[0];
            jac[(r, 1)] = out.d[1];
        }
        Ok(complex_to_real(&jac))
    }

    fn exp(&self, base: &WehlerPoint, v: &Vec4) -> Result<WehlerPoint> {
        let (spec, mut u, _) = self.chart_spec(base)?;
        u[spec.kept[0]] += C64::new(v[0], v[2]);
        u[spec.kept[1]] += C64::new(v[1], v[3]);
        let u = self.solve_dropped(&spec, u, NEWTON_MAX)?;
        Ok(Self::point_from_chart(spec.flip, u))
    }

    fn log(&self, base: &WehlerPoint, p: &WehlerPoint) -> Result<Vec4> {
        let (spec, u0, _) = self.chart_spec(base)?;
        let u = Self::chart_coords(p, spec.flip)?;
        let a = u[spec.kept[0]] - u0[spec.kept[0]];
        let b = u[spec.kept[1]] - u0[spec.kept[1]];
        Ok(Vec4::new(a.re, b.re, a.im, b.im))
    }

    fn transport(&self, from: &WehlerPoint, to: &WehlerPoint, v: &Vec4) -> Result<Vec4> {
        // same affine chart: the transition is a translation
        let (a, _, _) = self.chart_spec(from)?;
        let (b, _, _) = self.chart_spec(to)?;
        if a.flip == b.flip && a.drop == b.drop {
            return Ok(*v);
        }
        super::finite_difference_transport(self, from, to, v)
    }

    fn distance(&self, p: &WehlerPoint, q: &WehlerPoint) -> f64 {
        p.h.iter()
            .zip(&q.h)
            .map(|(a, b)| {
                let inner = a[0].conj() * b[0] + a[1].conj() * b[1];
                let wedge = a[0] * b[1] - a[1] * b[0];
                let d = wedge.norm().atan2(inner.norm());
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn coordinates(&self, p: &WehlerPoint) -> Vec<f64> {
        p.h.iter()
            .map(|[s, t]| {
                let w = s * t.conj();
                let theta = 0.5 * (2.0 * w.re).atan2(t.norm_sqr() - s.norm_sqr());
                (theta / std::f64::consts::PI).rem_euclid(1.0)
            })
            .collect()
    }

    fn cohomology(&self, id: AutoId) -> Option<CohomologyRep> {
        if id >= 3 {
            return None;
        }
        Some(CohomologyRep { matrix: Self::involution_cohomology(id), gram: Self::gram() })
    }

    fn kahler_class(&self) -> Option<Vec<i64>> {
        Some(vec![1, 1, 1])
    }
}
