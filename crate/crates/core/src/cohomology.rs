//! Integral isometries of hyperbolic lattices: trichotomy, masses and
//! Furstenberg vectors of random products.

use crate::error::{Error, Result};
use crate::exact::{char_poly, count_roots_outside_unit, dominant_real_root, rational_to_f64, signature, IntMatrix};
use crate::walk::{derive_seed, FiniteMeasure, WalkWord};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

/// Cap on the order search for non-loxodromic isometries.
pub const ORDER_BOUND: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum IsometryClass {
    Loxodromic { spectral_radius: f64 },
    /// `M^power` is unipotent and not the identity.
    Parabolic { power: u64 },
    Elliptic { order: u64 },
    Undecided { bound: u64 },
}

impl IsometryClass {
    pub fn is_loxodromic(&self) -> bool {
        matches!(self, IsometryClass::Loxodromic { .. })
    }
}

/// Rational interval containing the spectral radius, for loxodromic `m`.
pub fn spectral_radius_interval(m: &IntMatrix, bits: u32) -> Option<(BigRational, BigRational)> {
    let p = char_poly(m);
    if count_roots_outside_unit(&p) == 0 {
        return None;
    }
    dominant_real_root(&p, bits)
}

/// Whether `p + q sqrt(d)` is exactly a root of the characteristic
/// polynomial of `m` and lies in its dominant-root interval.
pub fn spectral_radius_is(m: &IntMatrix, p: i64, q: i64, d: i64) -> (bool, bool) {
    let poly = char_poly(m);
    // Horner in Z[sqrt(d)]: (a + b r)(p + q r) = (ap + bqd) + (aq + bp) r
    let (p, q, d) = (BigInt::from(p), BigInt::from(q), BigInt::from(d));
    let (mut a, mut b) = (BigInt::zero(), BigInt::zero());
    for c in poly.coeffs.iter().rev() {
        let na = &a * &p + &b * &q * &d + c;
        let nb = &a * &q + &b * &p;
        a = na;
        b = nb;
    }
    let exact = a.is_zero() && b.is_zero();
    let value = p.to_f64().unwrap_or(f64::NAN) + q.to_f64().unwrap_or(f64::NAN) * d.to_f64().unwrap_or(f64::NAN).sqrt();
    let dominant = spectral_radius_interval(m, 64)
        .map(|(lo, hi)| {
            let (lo, hi) = (rational_to_f64(&lo), rational_to_f64(&hi));
            lo - 1e-12 * value <= value && value <= hi + 1e-12 * value
        })
        .unwrap_or(false);
    (exact, dominant)
}

fn is_unipotent(m: &IntMatrix) -> bool {
    let n = m.rows();
    m.sub(&IntMatrix::identity(n)).pow(n as u64).is_zero()
}

/// Classifies an isometry of `gram` exactly.
///
/// Eigenvalues of an isometry of a form of signature `(1, n-1)` off the unit
/// circle are real, so the loxodromic test reduces to counting real roots of
/// the characteristic polynomial outside `[-1, 1]`. Otherwise all eigenvalues
/// are roots of unity and some power is unipotent.
pub fn classify_isometry(m: &IntMatrix, gram: &IntMatrix) -> Result<IsometryClass> {
    classify_with_bound(m, gram, ORDER_BOUND)
}

pub fn classify_with_bound(m: &IntMatrix, gram: &IntMatrix, bound: u64) -> Result<IsometryClass> {
    if !m.preserves(gram) {
        return Err(Error::NotIsometry);
    }
    if let Some((lo, hi)) = spectral_radius_interval(m, 120) {
        let r = rational_to_f64(&((lo + hi) / BigRational::from_integer(2.into())));
        return Ok(IsometryClass::Loxodromic { spectral_radius: r });
    }
    let mut pk = IntMatrix::identity(m.rows());
    for k in 1..=bound {
        pk = pk.mul(m);
        if pk.is_identity() {
            return Ok(IsometryClass::Elliptic { order: k });
        }
        if is_unipotent(&pk) {
            return Ok(IsometryClass::Parabolic { power: k });
        }
    }
    Ok(IsometryClass::Undecided { bound })
}

/// Integral lattice with a group of isometries and a mass gauge.
#[derive(Debug, Clone)]
pub struct LatticeAction {
    gram: IntMatrix,
    gram_f: DMatrix<f64>,
    generators: Vec<IntMatrix>,
    generators_f: Vec<DMatrix<f64>>,
    kappa0: Vec<i64>,
}

impl LatticeAction {
    pub fn new(gram: IntMatrix, generators: Vec<IntMatrix>, kappa0: Vec<i64>) -> Result<Self> {
        let n = gram.rows();
        if !gram.is_square() || gram != gram.transpose() {
            return Err(Error::InvalidArgument("Gram matrix must be symmetric".into()));
        }
        let (pos, neg, zero) = signature(&gram);
        if pos != 1 || zero != 0 || neg + 1 != n {
            return Err(Error::InvalidArgument(format!("signature ({pos},{neg}) is not hyperbolic")));
        }
        if kappa0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: kappa0.len() });
        }
        for g in &generators {
            if g.rows() != n || !g.preserves(&gram) {
                return Err(Error::NotIsometry);
            }
        }
        let gram_f = gram.to_f64();
        let k = DVector::from_iterator(n, kappa0.iter().map(|&x| x as f64));
        if k.dot(&(&gram_f * &k)) <= 0.0 {
            return Err(Error::InvalidArgument("kappa0 must have positive square".into()));
        }
        let generators_f = generators.iter().map(|g| g.to_f64()).collect();
        Ok(LatticeAction { gram, gram_f, generators, generators_f, kappa0 })
    }

    pub fn gram(&self) -> &IntMatrix {
        &self.gram
    }

    pub fn generators(&self) -> &[IntMatrix] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.gram.rows()
    }

    pub fn pairing(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.gram_f * b))
    }

    pub fn kappa(&self) -> DVector<f64> {
        DVector::from_iterator(self.rank(), self.kappa0.iter().map(|&x| x as f64))
    }

    /// `M(a) = <a | kappa0>`.
    pub fn mass(&self, a: &DVector<f64>) -> f64 {
        self.pairing(a, &self.kappa())
    }

    /// Exact mass of an integral class.
    pub fn mass_exact(&self, a: &[i64]) -> i64 {
        let n = self.rank();
        let mut s = 0i64;
        for i in 0..n {
            for j in 0..n {
                let g = i64::try_from(&self.gram[(i, j)]).expect("small Gram entries");
                s += a[i] * g * self.kappa0[j];
            }
        }
        s
    }

    pub fn classify(&self, id: usize) -> Result<IsometryClass> {
        classify_isometry(&self.generators[id], &self.gram)
    }

    fn nef_proxy(&self, v: &DVector<f64>) -> bool {
        self.mass(v) > 0.0 && self.pairing(v, v) >= -1e-9 * v.norm_squared()
    }
}

/// Mass-normalized limit class along a word.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectiveClass {
    pub vector: Vec<f64>,
    pub converged: bool,
    /// `(n, projective distance to the previous dyadic n)`.
    pub cauchy: Vec<(u64, f64)>,
    /// `<e|e> / |e|^2`.
    pub isotropy: f64,
    /// Positive-cone proxy for nefness.
    pub nef_proxy: bool,
    /// `log M((f^n)^* a)` at the final `n`.
    pub log_mass_growth: f64,
}

fn proj_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a / a.norm() - b / b.norm()).norm()
}

/// Float image of an exact integer matrix scaled by `2^-shift`, returning
/// the matrix and `shift * ln 2`.
fn scaled(p: &IntMatrix) -> (DMatrix<f64>, f64) {
    let bits = p.max_abs_entry().bits();
    let shift = bits.saturating_sub(60);
    let m = DMatrix::from_fn(p.rows(), p.cols(), |r, c| {
        let e: BigInt = &p[(r, c)] >> shift;
        e.to_f64().unwrap_or(0.0)
    });
    (m, shift as f64 * std::f64::consts::LN_2)
}

/// `M_{w_0} M_{w_1} ... M_{w_{n-1}} a` normalized to mass 1, where atoms of
/// the word's measure index the action's generators. The product is formed
/// exactly, so excursions towards a repelling direction lose nothing.
/// Returns the class and the log of the mass growth factor.
pub fn pullback(action: &LatticeAction, w: &WalkWord, a: &DVector<f64>, n: u64) -> (DVector<f64>, f64) {
    let mut p = IntMatrix::identity(action.rank());
    for i in 0..n {
        p = p.mul(&action.generators[w.auto(i as i64)]);
    }
    let (m, log_scale) = scaled(&p);
    let v = m * a;
    let mass = action.mass(&v);
    (v / mass, log_scale + mass.abs().ln() - action.mass(a).abs().ln())
}

/// Mass-normalized pullbacks along `w` at dyadic `n` up to `n_max`, with
/// the convergence flag but without raising on non-convergence.
pub fn furstenberg_trace(
    action: &LatticeAction,
    w: &WalkWord,
    a: &DVector<f64>,
    n_max: u64,
    tol: f64,
) -> Result<ProjectiveClass> {
    if action.pairing(a, a) <= 0.0 {
        return Err(Error::InvalidArgument("starting class must have positive square".into()));
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let log_mass0 = action.mass(a).abs().ln();
    let mut p = IntMatrix::identity(action.rank());
    let mut cauchy = Vec::new();
    let mut prev: Option<DVector<f64>> = None;
    let mut next_check = 1u64;
    let mut last = a.clone();
    let mut growth = 0.0;
    for i in 0..n_max {
        p = p.mul(&action.generators[w.auto(i as i64)]);
        let n = i + 1;
        if n == next_check || n == n_max {
            let (m, log_scale) = scaled(&p);
            let v = m * a;
            let mass = action.mass(&v);
            let v = v / mass;
            growth = log_scale + mass.abs().ln() - log_mass0;
            if let Some(q) = &prev {
                cauchy.push((n, proj_dist(&v, q)));
            }
            prev = Some(v.clone());
            last = v;
            if n == next_check {
                next_check *= 2;
            }
        }
    }
    // a bounded orbit (elliptic or parabolic-only support) does not pick out a direction
    let converged = cauchy.last().map(|&(_, d)| d < tol).unwrap_or(false) && growth > 1.0;
    let isotropy = action.pairing(&last, &last) / last.norm_squared();
    Ok(ProjectiveClass {
        vector: last.iter().copied().collect(),
        converged,
        cauchy,
        isotropy,
        nef_proxy: action.nef_proxy(&last),
        log_mass_growth: growth,
    })
}

/// Furstenberg vector along `w` starting from the class `a`; fails with
/// `NonConvergence` unless the dyadic pullbacks are Cauchy within `tol`
/// and the mass grows.
pub fn furstenberg_vector(
    action: &LatticeAction,
    w: &WalkWord,
    a: &DVector<f64>,
    n_max: u64,
    tol: f64,
) -> Result<ProjectiveClass> {
    let class = furstenberg_trace(action, w, a, n_max, tol)?;
    if !class.converged {
        return Err(Error::NonConvergence(format!(
            "Furstenberg vector: mass growth {:.3e}, last Cauchy gap {:.3e}",
            class.log_mass_growth,
            class.cauchy.last().map(|c| c.1).unwrap_or(f64::NAN)
        )));
    }
    Ok(class)
}

/// Dominant eigenvector of a loxodromic generator by power iteration,
/// normalized to mass 1.
pub fn dominant_direction(action: &LatticeAction, id: usize, iters: usize) -> DVector<f64> {
    let g = &action.generators_f[id];
    let mut v = action.kappa();
    for _ in 0..iters {
        v = g * v;
        v /= v.amax();
    }
    let m = action.mass(&v);
    v / m
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySample {
    pub classes: Vec<ProjectiveClass>,
    /// Samples whose dyadic pullbacks were not Cauchy at `n_iter`.
    pub non_converged: usize,
    /// Largest fraction of samples within `atom_scale` of a single sample.
    pub max_cluster_mass: f64,
    pub atom_scale: f64,
    /// No two loxodromic atoms with disjoint fixed-point pairs were found.
    pub elementary: bool,
    pub nef_fraction: f64,
}

/// Attracting and repelling isotropic directions of a loxodromic generator.
pub fn fixed_pair(action: &LatticeAction, id: usize) -> (DVector<f64>, DVector<f64>) {
    let g = &action.generators_f[id];
    let inv = g.clone().try_inverse().expect("isometries are invertible");
    let power = |m: &DMatrix<f64>| {
        let mut v = action.kappa();
        for _ in 0..200 {
            v = m * v;
            v /= v.amax();
        }
        let s = action.mass(&v);
        v / s
    };
    (power(g), power(&inv))
}

/// Whether two loxodromic atoms of `measure` have disjoint fixed-point pairs
/// on the boundary (the usual witness for a non-elementary action).
pub fn has_independent_loxodromics(action: &LatticeAction, measure: &FiniteMeasure) -> Result<bool> {
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    for &id in measure.atoms() {
        if action.classify(id)?.is_loxodromic() {
            pairs.push(fixed_pair(action, id));
        }
    }
    let close = |a: &DVector<f64>, b: &DVector<f64>| proj_dist(a, b) < 1e-6;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (a, b) = (&pairs[i], &pairs[j]);
            if !close(&a.0, &b.0) && !close(&a.0, &b.1) && !close(&a.1, &b.0) && !close(&a.1, &b.1) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Number of distinct dominant (attracting) directions among the
/// loxodromic atoms of `measure`.
pub fn distinct_dominant_directions(action: &LatticeAction, measure: &FiniteMeasure) -> Result<usize> {
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for &id in measure.atoms() {
        if action.classify(id)?.is_loxodromic() {
            let d = dominant_direction(action, id, 200);
            if dirs.iter().all(|e| proj_dist(e, &d) > 1e-6) {
                dirs.push(d);
            }
        }
    }
    Ok(dirs.len())
}

/// Samples of the Furstenberg vector over independent random words.
pub fn boundary_measure_sample(
    action: &LatticeAction,
    measure: &FiniteMeasure,
    n_samples: usize,
    n_iter: u64,
    seed: u64,
) -> Result<BoundarySample> {
    let elementary = !has_independent_loxodromics(action, measure)?;
    let kappa = action.kappa();
    let classes: Vec<ProjectiveClass> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let w = WalkWord::with_cache(derive_seed(seed, i), measure, 0);
            furstenberg_trace(action, &w, &kappa, n_iter, 1e-9)
        })
        .collect::<Result<_>>()?;
    let non_converged = classes.iter().filter(|c| !c.converged).count();
    let atom_scale = 1e-3;
    let vs: Vec<DVector<f64>> = classes.iter().map(|c| DVector::from_vec(c.vector.clone())).collect();
    let max_cluster = vs
        .iter()
        .map(|v| vs.iter().filter(|u| proj_dist(u, v) < atom_scale).count())
        .max()
        .unwrap_or(0);
    let denom = classes.len().max(1) as f64;
    let nef = classes.iter().filter(|c| c.nef_proxy).count() as f64 / denom;
    Ok(BoundarySample {
        max_cluster_mass: max_cluster as f64 / denom,
        classes,
        non_converged,
        atom_scale,
        elementary,
        nef_fraction: nef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WehlerModel;

    fn wehler_gens() -> (IntMatrix, IntMatrix, IntMatrix, IntMatrix) {
        (
            WehlerModel::involution_cohomology(0),
            WehlerModel::involution_cohomology(1),
            WehlerModel::involution_cohomology(2),
            WehlerModel::gram(),
        )
    }

    #[test]
    fn identity_is_elliptic() {
        let g = WehlerModel::gram();
        assert_eq!(
            classify_isometry(&IntMatrix::identity(3), &g).unwrap(),
            IsometryClass::Elliptic { order: 1 }
        );
        let (s1, ..) = wehler_gens();
        assert_eq!(classify_isometry(&s1, &g).unwrap(), IsometryClass::Elliptic { order: 2 });
    }

    #[test]
    fn wehler_trichotomy() {
        let (s1, s2, s3, g) = wehler_gens();
        let p = s1.mul(&s2);
        assert_eq!(classify_isometry(&p, &g).unwrap(), IsometryClass::Parabolic { power: 1 });
        let n = p.sub(&IntMatrix::identity(3));
        assert!(!n.is_zero());
        // the upper-left 2x2 block of M - I squares to zero; globally (M - I)^3 = 0
        let block = IntMatrix::from_big(2, 2, vec![n[(0, 0)].clone(), n[(0, 1)].clone(), n[(1, 0)].clone(), n[(1, 1)].clone()]);
        assert!(!block.is_zero());
        assert!(block.mul(&block).is_zero());
        assert!(n.pow(3).is_zero());
        let l = s1.mul(&s2).mul(&s3);
        // trace 17, det -1
        assert_eq!(l.trace(), 17.into());
        assert_eq!(l.det(), (-1).into());
        match classify_isometry(&l, &g).unwrap() {
            IsometryClass::Loxodromic { spectral_radius } => {
                assert!((spectral_radius - (9.0 + 4.0 * 5f64.sqrt())).abs() < 1e-9)
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn non_isometry_rejected() {
        let g = WehlerModel::gram();
        let m = IntMatrix::from_rows(&[[2, 0, 0], [0, 1, 0], [0, 0, 1]]);
        assert_eq!(classify_isometry(&m, &g), Err(Error::NotIsometry));
    }

    #[test]
    fn classification_stable_under_powers() {
        let (s1, s2, s3, g) = wehler_gens();
        let gens = [s1.clone(), s1.mul(&s2), s1.mul(&s2).mul(&s3), s3.mul(&s1)];
        for m in &gens {
            let base = classify_isometry(m, &g).unwrap().is_loxodromic();
            for k in 1..=5 {
                assert_eq!(classify_isometry(&m.pow(k), &g).unwrap().is_loxodromic(), base);
            }
        }
    }

    #[test]
    fn undecided_when_bound_too_small() {
        // rotation of order 3 in the hyperbolic plane's Weyl-free part is not
        // available, use an order-2 swap with bound 1
        let g = IntMatrix::from_rows(&[[0, 1], [1, 0]]);
        let swap = IntMatrix::from_rows(&[[0, 1], [1, 0]]);
        assert_eq!(classify_with_bound(&swap, &g, 1).unwrap(), IsometryClass::Undecided { bound: 1 });
        assert_eq!(classify_with_bound(&swap, &g, 2).unwrap(), IsometryClass::Elliptic { order: 2 });
    }

    /// Generators: g = s1 s2 s3, g^-1 = s3 s2 s1, s1, s1 s2, and the
    /// conjugate s1 g s1 = s2 s3 s1.
    fn wehler_action() -> LatticeAction {
        let (s1, s2, s3, g) = wehler_gens();
        let l = s1.mul(&s2).mul(&s3);
        LatticeAction::new(
            g,
            vec![l.clone(), s3.mul(&s2).mul(&s1), s1.clone(), s1.mul(&s2), s2.mul(&s3).mul(&s1)],
            vec![1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn mass_examples() {
        let a = wehler_action();
        assert_eq!(a.mass_exact(&[1, 1, 1]), 12);
        assert_eq!(a.mass_exact(&[0, 0, 0]), 0);
        let x = [1, -2, 3];
        let y = [0, 5, -1];
        let comb: Vec<i64> = x.iter().zip(&y).map(|(a, b)| 2 * a + b).collect();
        assert_eq!(a.mass_exact(&comb), 2 * a.mass_exact(&x) + a.mass_exact(&y));
    }

    #[test]
    fn furstenberg_single_loxodromic_matches_eigenvector() {
        let act = wehler_action();
        let mu = FiniteMeasure::dirac(0);
        let w = WalkWord::new(0, &mu);
        let k = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let e = furstenberg_vector(&act, &w, &k, 64, 1e-12).unwrap();
        // oracle: kernel of M - rho I
        let rho = 9.0 + 4.0 * 5f64.sqrt();
        let m = act.generators()[0].to_f64() - DMatrix::identity(3, 3) * rho;
        let svd = m.svd(true, true);
        let (imin, _) = svd.singular_values.argmin();
        let v = svd.v_t.unwrap().row(imin).transpose();
        let v = &v / act.mass(&v);
        let e = DVector::from_vec(e.vector);
        assert!(proj_dist(&e, &v) < 1e-8);
        assert!(act.pairing(&e, &e) / e.norm_squared() < 1e-6);
    }

    #[test]
    fn isotropy_decays_with_spectral_gap() {
        let act = wehler_action();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let k = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let rho: f64 = 9.0 + 4.0 * 5f64.sqrt();
        let ratios: Vec<f64> = (1..=5)
            .map(|n| {
                let (v, _) = pullback(&act, &w, &k, n);
                act.pairing(&v, &v) / v.norm_squared() * rho.powi(2 * n as i32)
            })
            .collect();
        for r in &ratios[1..] {
            assert!((r / ratios[0]).abs() > 0.2 && (r / ratios[0]).abs() < 5.0, "{ratios:?}");
        }
    }

    #[test]
    fn elliptic_support_flags_non_convergence() {
        let act = wehler_action();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(2));
        let k = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(furstenberg_vector(&act, &w, &k, 256, 1e-9), Err(Error::NonConvergence(_))));
        let g = WehlerModel::gram();
        let id = LatticeAction::new(g, vec![IntMatrix::identity(3)], vec![1, 1, 1]).unwrap();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        assert!(furstenberg_vector(&id, &w, &k, 256, 1e-9).is_err());
    }

    #[test]
    fn pullback_equivariance() {
        let act = wehler_action();
        let mu = FiniteMeasure::uniform(vec![0, 1]).unwrap();
        let k = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        for seed in 0..10 {
            let w = WalkWord::new(seed, &mu);
            let (v_next, _) = pullback(&act, &w, &k, 9);
            let (v_shift, _) = pullback(&act, &w.shift(1), &k, 8);
            let stepped = act.generators()[w.auto(0)].to_f64() * v_shift;
            let stepped = &stepped / act.mass(&stepped);
            assert!((&stepped - &v_next).norm() < 1e-10 * v_next.norm());
        }
    }

    #[test]
    fn inverse_pair_shows_both_directions_but_is_elementary() {
        let act = wehler_action();
        let mu = FiniteMeasure::uniform(vec![0, 1]).unwrap();
        let s = boundary_measure_sample(&act, &mu, 200, 256, 5).unwrap();
        assert!(s.elementary);
        assert_eq!(distinct_dominant_directions(&act, &mu).unwrap(), 2);
        let (ep, em) = fixed_pair(&act, 0);
        let near = |e: &DVector<f64>| {
            s.classes.iter().filter(|c| proj_dist(&DVector::from_vec(c.vector.clone()), e) < 1e-2).count()
        };
        assert!(near(&ep) > 0 && near(&em) > 0);
        // only words whose net exponent vanishes stay away from both
        assert!(near(&ep) + near(&em) >= 150, "{} {}", near(&ep), near(&em));
    }

    #[test]
    fn independent_pair_has_atomless_boundary_samples() {
        let act = wehler_action();
        let mu = FiniteMeasure::uniform(vec![0, 4]).unwrap();
        assert!(has_independent_loxodromics(&act, &mu).unwrap());
        let s = boundary_measure_sample(&act, &mu, 200, 64, 5).unwrap();
        assert!(!s.elementary);
        assert_eq!(s.non_converged, 0);
        assert!(s.nef_fraction >= 0.99);
        assert!(s.max_cluster_mass < 0.2, "{}", s.max_cluster_mass);
        for c in &s.classes {
            assert!(c.isotropy.abs() < 1e-6);
        }
        // single loxodromic: deterministic limit
        let single = boundary_measure_sample(&act, &FiniteMeasure::dirac(0), 20, 64, 5).unwrap();
        assert!(single.elementary);
        assert_eq!(single.max_cluster_mass, 1.0);
    }
}
