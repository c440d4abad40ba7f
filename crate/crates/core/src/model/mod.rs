//! Surfaces with finitely many named automorphisms.
//!
//! Every model exposes its tangent spaces in real coordinates of C^2 via
//! `exp`/`log` charts at each point. The tangent map is the derivative at
//! zero of `v -> log_{f(p)}(f(exp_p(v)))`.

mod dual;
pub mod torus;
pub mod wehler;

pub use torus::{TorusGenerator, TorusModel};
pub use wehler::{WehlerModel, WehlerPoint};

use crate::error::Result;
use crate::exact::IntMatrix;
use crate::linalg::{Mat4, Vec4};

/// Index of an automorphism within a model.
pub type AutoId = usize;

/// Integral action of an automorphism on a cohomology lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CohomologyRep {
    pub matrix: IntMatrix,
    pub gram: IntMatrix,
}

/// Derivative of an automorphism at a point.
#[derive(Debug, Clone)]
pub struct TangentMap<P> {
    pub matrix: Mat4,
    pub base: P,
    pub image: P,
}

pub trait SurfaceModel: Send + Sync {
    type Point: Clone + std::fmt::Debug + Send + Sync;

    fn name(&self) -> &str;

    /// Number of registered automorphisms (ids are `0..count`).
    fn automorphism_count(&self) -> usize;

    fn automorphism_name(&self, id: AutoId) -> String;

    fn inverse_id(&self, id: AutoId) -> Result<AutoId>;

    fn apply(&self, id: AutoId, p: &Self::Point) -> Result<Self::Point>;

    fn apply_inverse(&self, id: AutoId, p: &Self::Point) -> Result<Self::Point> {
        self.apply(self.inverse_id(id)?, p)
    }

    /// Tangent matrix of `id` at `p`, in the charts of `p` and of its image.
    fn tangent(&self, id: AutoId, p: &Self::Point) -> Result<Mat4>;

    fn exp(&self, base: &Self::Point, v: &Vec4) -> Result<Self::Point>;

    fn log(&self, base: &Self::Point, p: &Self::Point) -> Result<Vec4>;

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> f64;

    /// Real coordinates used for histograms and dumps.
    fn coordinates(&self, p: &Self::Point) -> Vec<f64>;

    fn cohomology(&self, id: AutoId) -> Option<CohomologyRep>;

    /// A class with positive square used to normalize masses.
    fn kahler_class(&self) -> Option<Vec<i64>>;

    fn tangent_map(&self, id: AutoId, p: &Self::Point) -> Result<TangentMap<Self::Point>> {
        Ok(TangentMap {
            matrix: self.tangent(id, p)?,
            base: p.clone(),
            image: self.apply(id, p)?,
        })
    }

    /// Transport of a tangent vector at `from` to `to`: the derivative at 0
    /// of `v -> log_to(exp_from(v))`.
    fn transport(&self, from: &Self::Point, to: &Self::Point, v: &Vec4) -> Result<Vec4> {
        finite_difference_transport(self, from, to, v)
    }

    /// Tangent map of the inverse automorphism at `p`.
    fn tangent_inverse(&self, id: AutoId, p: &Self::Point) -> Result<Mat4> {
        self.tangent(self.inverse_id(id)?, p)
    }
}

/// Central difference for `D_0 (log_to o exp_from) v`.
pub fn finite_difference_transport<M: SurfaceModel + ?Sized>(model: &M, from: &M::Point, to: &M::Point, v: &Vec4) -> Result<Vec4> {
    let h = 1e-5;
    let plus = model.log(to, &model.exp(from, &(v * h))?)?;
    let minus = model.log(to, &model.exp(from, &(v * -h))?)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Central finite-difference derivative of `v -> log_{f p}(f(exp_p v))` at 0.
pub fn finite_difference_tangent<M: SurfaceModel>(
    model: &M,
    id: AutoId,
    p: &M::Point,
    step: f64,
) -> Result<Mat4> {
    let image = model.apply(id, p)?;
    let mut out = Mat4::zeros();
    for j in 0..4 {
        let mut e = Vec4::zeros();
        e[j] = step;
        let plus = model.log(&image, &model.apply(id, &model.exp(p, &e)?)?)?;
        let minus = model.log(&image, &model.apply(id, &model.exp(p, &(-e))?)?)?;
        out.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    Ok(out)
}
