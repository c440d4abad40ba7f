//! A finite two-sided orbit segment with Oseledets vectors and Lyapunov
//! scales computed over one common window.
//!
//! Every chart, roof value and flow step at index `k` in `[-N, N]` is read
//! from the same window, so the one-step identities between neighbouring
//! indices hold to rounding.

use crate::cocycle::generic_plane;
use crate::error::{Error, Result};
use crate::linalg::{complex_structure, grassmann_distance, complex_line, Mat4, Vec4};
use crate::model::SurfaceModel;
use crate::walk::WalkWord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitSpec {
    /// Charts exist for indices in `[-radius, radius]`.
    pub radius: usize,
    /// Extra steps on both sides used to converge the Oseledets vectors.
    pub pad: usize,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub eps0: f64,
}

#[derive(Debug, Clone)]
pub struct ChartedOrbit<P> {
    word: WalkWord,
    radius: i64,
    pad: i64,
    points: Vec<P>,
    tangents: Vec<Mat4>,
    eu: Vec<Vec4>,
    es: Vec<Vec4>,
    theta_u: Vec<f64>,
    theta_s: Vec<f64>,
    log_su: Vec<f64>,
    log_ss: Vec<f64>,
    basis_inv: Vec<Mat4>,
    spec: OrbitSpec,
    /// Distance between lines obtained from two different seeds at the window ends.
    pub convergence: f64,
    pub min_angle: f64,
}

fn ensure_holomorphic(d: &Mat4) -> Result<()> {
    let j = complex_structure();
    let c = (j * d - d * j).norm();
    if c > 1e-8 * d.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("tangent map is not complex-linear (|[J, D]| = {c:e})")));
    }
    Ok(())
}

impl<P: Clone> ChartedOrbit<P> {
    pub fn build<M: SurfaceModel<Point = P>>(model: &M, w: &WalkWord, x: &P, spec: OrbitSpec) -> Result<Self> {
        let n = spec.radius as i64;
        let pad = spec.pad as i64;
        let lo = -n - pad;
        let hi = n + pad;
        let len = (hi - lo + 1) as usize;
        // orbit
        let mut fwd = vec![x.clone()];
        for k in 0..hi {
            let p = model.apply(w.auto(k), fwd.last().expect("nonempty"))?;
            fwd.push(p);
        }
        let mut bwd = Vec::new();
        let mut p = x.clone();
        for k in 1..=(-lo) {
            p = model.apply_inverse(w.auto(-k), &p)?;
            bwd.push(p.clone());
        }
        bwd.reverse();
        let points: Vec<P> = bwd.into_iter().chain(fwd).collect();
        debug_assert_eq!(points.len(), len);
        let mut tangents = Vec::with_capacity(len - 1);
        for (i, p) in points[..len - 1].iter().enumerate() {
            let d = model.tangent(w.auto(lo + i as i64), p)?;
            ensure_holomorphic(&d)?;
            tangents.push(d);
        }
        // unstable vectors pushed forward, stable ones pulled back
        let push = |start: Vec4| -> Vec<Vec4> {
            let mut out = vec![start.normalize()];
            for d in &tangents {
                let v = d * out.last().expect("nonempty");
                out.push(v.normalize());
            }
            out
        };
        let inverses: Vec<Mat4> = tangents
            .iter()
            .map(|d| d.try_inverse().ok_or_else(|| Error::NonConvergence("singular tangent".into())))
            .collect::<Result<_>>()?;
        let pull = |start: Vec4| -> Vec<Vec4> {
            let mut out = vec![start.normalize(); len];
            for i in (0..len - 1).rev() {
                out[i] = (inverses[i] * out[i + 1]).normalize();
            }
            out
        };
        let g0 = generic_plane(0).column(0).into_owned();
        let g1 = generic_plane(5).column(1).into_owned();
        let eu_all = push(g0);
        let es_all = pull(g1);
        let eu_alt = push(g1);
        let es_alt = pull(g0);
        let i_lo = pad as usize;
        let i_hi = (pad + 2 * n) as usize;
        let mut convergence = 0.0f64;
        for i in [i_lo, i_hi] {
            convergence = convergence
                .max(grassmann_distance(&complex_line(&eu_all[i]), &complex_line(&eu_alt[i])))
                .max(grassmann_distance(&complex_line(&es_all[i]), &complex_line(&es_alt[i])));
        }
        let eu: Vec<Vec4> = eu_all[i_lo..=i_hi].to_vec();
        let es: Vec<Vec4> = es_all[i_lo..=i_hi].to_vec();
        let theta_u: Vec<f64> = (0..2 * n as usize).map(|i| (tangents[i_lo + i] * eu[i]).norm().ln()).collect();
        let theta_s: Vec<f64> = (0..2 * n as usize).map(|i| (tangents[i_lo + i] * es[i]).norm().ln()).collect();
        let log_su = log_scales(&theta_u, spec.lambda_plus, spec.eps0);
        let log_ss = log_scales(&theta_s, spec.lambda_minus, spec.eps0);
        let j = complex_structure();
        let mut basis_inv = Vec::with_capacity(eu.len());
        let mut min_angle = f64::INFINITY;
        for i in 0..eu.len() {
            let b = Mat4::from_columns(&[eu[i], j * eu[i], es[i], j * es[i]]);
            let ang = crate::linalg::min_principal_angle(&complex_line(&eu[i]), &complex_line(&es[i]));
            min_angle = min_angle.min(ang);
            basis_inv.push(b.try_inverse().ok_or(Error::DegenerateSplitting(ang))?);
        }
        Ok(Self {
            word: w.clone(),
            radius: n,
            pad,
            points,
            tangents,
            eu,
            es,
            theta_u,
            theta_s,
            log_su,
            log_ss,
            basis_inv,
            spec,
            convergence,
            min_angle,
        })
    }
}

/// `log s(k)` with `s(k)^2 = sum_i e^{2 (G_i - G_k) - 2 lambda (i - k) - 2 eps0 |i - k|}`
/// over the whole window, `G` the partial sums of `theta`. The sum splits
/// into `i >= k` and `i < k` halves, each following a one-step recursion.
fn log_scales(theta: &[f64], lambda: f64, eps0: f64) -> Vec<f64> {
    let m = theta.len() + 1;
    // a_{k+1} - a_k with a_i = 2 (G_i - lambda i)
    let step: Vec<f64> = theta.iter().map(|t| 2.0 * (t - lambda)).collect();
    let lae = |x: f64, y: f64| {
        let hi = x.max(y);
        if hi == f64::NEG_INFINITY {
            hi
        } else {
            hi + ((x - hi).exp() + (y - hi).exp()).ln()
        }
    };
    let mut ahead = vec![0.0; m];
    for k in (0..m - 1).rev() {
        ahead[k] = lae(0.0, step[k] - 2.0 * eps0 + ahead[k + 1]);
    }
    let mut behind = vec![f64::NEG_INFINITY; m];
    for k in 1..m {
        behind[k] = -step[k - 1] - 2.0 * eps0 + lae(0.0, behind[k - 1]);
    }
    (0..m).map(|k| 0.5 * lae(ahead[k], behind[k])).collect()
}

impl<P> ChartedOrbit<P> {
    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn spec(&self) -> &OrbitSpec {
        &self.spec
    }

    pub fn word(&self) -> &WalkWord {
        &self.word
    }

    /// Whether the chart at `k` exists.
    pub fn contains(&self, k: i64) -> bool {
        k.abs() <= self.radius
    }

    /// Whether the one-step quantities at `k` (which also need `k + 1`) exist.
    pub fn has_step(&self, k: i64) -> bool {
        k >= -self.radius && k < self.radius
    }

    fn check(&self, k: i64) -> Result<usize> {
        if self.contains(k) {
            Ok((k + self.radius) as usize)
        } else {
            Err(Error::WindowExhausted(k))
        }
    }

    fn check_step(&self, k: i64) -> Result<usize> {
        if self.has_step(k) {
            Ok((k + self.radius) as usize)
        } else {
            Err(Error::WindowExhausted(k))
        }
    }

    /// Orbit point `x_k`; available on the padded range.
    pub fn point(&self, k: i64) -> Result<&P> {
        let i = k + self.radius + self.pad;
        self.points.get(usize::try_from(i).map_err(|_| Error::WindowExhausted(k))?).ok_or(Error::WindowExhausted(k))
    }

    /// `D f_{w_k}` at `x_k`; available on the padded range.
    pub fn tangent(&self, k: i64) -> Result<&Mat4> {
        let i = k + self.radius + self.pad;
        self.tangents.get(usize::try_from(i).map_err(|_| Error::WindowExhausted(k))?).ok_or(Error::WindowExhausted(k))
    }

    pub fn eu(&self, k: i64) -> Result<Vec4> {
        Ok(self.eu[self.check(k)?])
    }

    pub fn es(&self, k: i64) -> Result<Vec4> {
        Ok(self.es[self.check(k)?])
    }

    /// `theta = log |Df|_{E^u}|` at `x_k`.
    pub fn theta(&self, k: i64) -> Result<f64> {
        Ok(self.theta_u[self.check_step(k)?])
    }

    pub fn theta_stable(&self, k: i64) -> Result<f64> {
        Ok(self.theta_s[self.check_step(k)?])
    }

    /// `phi = log(|v| / |v|_0) = -log s_u` on `E^u`.
    pub fn phi(&self, k: i64) -> Result<f64> {
        Ok(-self.log_su[self.check(k)?])
    }

    pub fn log_scale_stable(&self, k: i64) -> Result<f64> {
        Ok(self.log_ss[self.check(k)?])
    }

    /// Inverse of the real basis `[e_u, J e_u, e_s, J e_s]` at `x_k`.
    pub fn basis_inverse(&self, k: i64) -> Result<&Mat4> {
        Ok(&self.basis_inv[self.check(k)?])
    }

    /// Linear part of the Lyapunov chart at `x_k`: tangent vectors to chart
    /// coordinates `(u_re, u_im, s_re, s_im)`.
    pub fn chart_matrix(&self, k: i64) -> Result<Mat4> {
        let i = self.check(k)?;
        let su = self.log_su[i].exp();
        let ss = self.log_ss[i].exp();
        let scale = Mat4::from_diagonal(&Vec4::new(su, su, ss, ss));
        Ok(scale * self.basis_inv[i])
    }

    pub fn chart_inverse(&self, k: i64) -> Result<Mat4> {
        let i = self.check(k)?;
        let j = complex_structure();
        let b = Mat4::from_columns(&[self.eu[i], j * self.eu[i], self.es[i], j * self.es[i]]);
        let su = self.log_su[i].exp();
        let ss = self.log_ss[i].exp();
        Ok(b * Mat4::from_diagonal(&Vec4::new(1.0 / su, 1.0 / su, 1.0 / ss, 1.0 / ss)))
    }

    /// `D_0 f~` from the chart at `k` to the chart at `k + 1`.
    pub fn chart_derivative(&self, k: i64) -> Result<Mat4> {
        self.check_step(k)?;
        Ok(self.chart_matrix(k + 1)? * self.tangent(k)? * self.chart_inverse(k)?)
    }

    /// Roof `tau = log |D_0 f~|_{R^u}|`, read off the chart derivative.
    pub fn tau(&self, k: i64) -> Result<f64> {
        let d = self.chart_derivative(k)?;
        Ok(d.fixed_view::<2, 1>(0, 0).norm().ln())
    }

    /// Stable counterpart of `tau`.
    pub fn tau_stable(&self, k: i64) -> Result<f64> {
        let d = self.chart_derivative(k)?;
        Ok(d.fixed_view::<2, 1>(2, 2).norm().ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TorusModel;
    use crate::walk::FiniteMeasure;

    #[test]
    fn scale_recursion_matches_direct_sum() {
        let theta: Vec<f64> = (0..200).map(|i| 0.3 + 0.2 * ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let (lambda, eps0) = (0.3, 0.01);
        let mut g = vec![0.0];
        for t in &theta {
            g.push(g.last().unwrap() + t);
        }
        let fast = log_scales(&theta, lambda, eps0);
        for k in [0usize, 1, 57, 199, 200] {
            let terms: Vec<f64> = (0..g.len())
                .map(|i| {
                    let d = i as f64 - k as f64;
                    2.0 * (g[i] - g[k]) - 2.0 * lambda * d - 2.0 * eps0 * d.abs()
                })
                .collect();
            let direct = 0.5 * crate::linalg::log_sum_exp(&terms);
            assert!((fast[k] - direct).abs() < 1e-12, "k = {k}: {} vs {direct}", fast[k]);
        }
    }

    fn cat_orbit() -> ChartedOrbit<[f64; 4]> {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let spec = OrbitSpec { radius: 30, pad: 40, lambda_plus: l, lambda_minus: -l, eps0: 0.01 };
        ChartedOrbit::build(&m, &w, &[0.1, 0.2, 0.3, 0.4], spec).unwrap()
    }

    #[test]
    fn window_bounds() {
        let o = cat_orbit();
        assert!(o.eu(30).is_ok());
        assert_eq!(o.eu(31), Err(Error::WindowExhausted(31)));
        assert!(o.theta(29).is_ok());
        assert_eq!(o.theta(30), Err(Error::WindowExhausted(30)));
        assert!(o.point(-70).is_ok());
        assert!(o.point(-71).is_err());
    }

    #[test]
    fn cat_map_roof_is_constant_up_to_window_weights() {
        let o = cat_orbit();
        let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!(o.convergence < 1e-12);
        for k in -30..30 {
            assert!((o.theta(k).unwrap() - l).abs() < 1e-12);
            let tau = o.tau(k).unwrap();
            assert!((tau - l).abs() <= 0.01 + 1e-12);
            let cob = o.theta(k).unwrap() - o.phi(k + 1).unwrap() + o.phi(k).unwrap();
            assert!((tau - cob).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_holomorphic_tangents() {
        use crate::model::TorusGenerator;
        let g = TorusGenerator::linear("B", [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]);
        let m = TorusModel::new(vec![g]).unwrap();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let spec = OrbitSpec { radius: 3, pad: 3, lambda_plus: 1.0, lambda_minus: -1.0, eps0: 0.01 };
        assert!(matches!(ChartedOrbit::build(&m, &w, &[0.0; 4], spec), Err(Error::InvalidArgument(_))));
    }
}
