//! Exact checks on integral quadratic lattices: evenness, representation of
//! values, isotropic vectors, bounded isometry search, parabolic absence.
//!
//! Searches run over integer boxes in `i128`; every witness is re-verified
//! with big-integer arithmetic before it is returned.

use crate::cohomology::{classify_isometry, IsometryClass};
use crate::error::{Error, Result};
use crate::exact::{bilinear, exact_sqrt, signature, IntMatrix};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralLattice {
    gram: IntMatrix,
    small: Vec<Vec<i128>>,
}

impl IntegralLattice {
    pub fn new(gram: IntMatrix) -> Result<Self> {
        if !gram.is_square() || gram.transpose() != gram {
            return Err(Error::InvalidArgument("Gram matrix must be square and symmetric".into()));
        }
        let n = gram.rows();
        let mut small = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                small[i][j] = gram[(i, j)]
                    .to_i128()
                    .filter(|x| x.abs() < 1 << 40)
                    .ok_or_else(|| Error::InvalidArgument("Gram entries too large for box search".into()))?;
            }
        }
        Ok(IntegralLattice { gram, small })
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        Self::new(IntMatrix::from_rows(rows))
    }

    pub fn gram(&self) -> &IntMatrix {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.gram.rows()
    }

    /// `(positive, negative, zero)` inertia.
    pub fn signature(&self) -> (usize, usize, usize) {
        signature(&self.gram)
    }

    pub fn q_big(&self, v: &[BigInt]) -> BigInt {
        bilinear(&self.gram, v, v)
    }

    fn q(&self, v: &[i128]) -> i128 {
        let n = v.len();
        let mut s = 0;
        for i in 0..n {
            for j in 0..n {
                s += self.small[i][j] * v[i] * v[j];
            }
        }
        s
    }

    fn b(&self, u: &[i128], v: &[i128]) -> i128 {
        let n = u.len();
        let mut s = 0;
        for i in 0..n {
            for j in 0..n {
                s += self.small[i][j] * u[i] * v[j];
            }
        }
        s
    }

    /// gcd of all values `q(v)`: `gcd(G_ii, 2 G_ij)`.
    pub fn value_gcd(&self) -> BigInt {
        let n = self.rank();
        let mut g = BigInt::zero();
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { self.gram[(i, j)].clone() } else { &self.gram[(i, j)] * 2 };
                g = g.gcd(&e);
            }
        }
        g
    }
}

fn to_big(v: &[i128]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

/// Coordinates ordered `0, 1, -1, 2, -2, ...`.
fn ordered_range(bound: i64) -> Vec<i128> {
    let mut out = vec![0i128];
    for r in 1..=bound as i128 {
        out.push(r);
        out.push(-r);
    }
    out
}

/// All vectors of the box `|v_i| <= bound`, by shells of increasing sup-norm.
fn box_vectors(n: usize, bound: i64) -> Vec<Vec<i128>> {
    let coords = ordered_range(bound);
    let mut all: Vec<Vec<i128>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(all.len() * coords.len());
        for v in &all {
            for &c in &coords {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        all = next;
    }
    all.retain(|v| v.iter().any(|&x| x != 0));
    // stable sort keeps the 0, 1, -1, ... order inside each shell
    all.sort_by_key(|v| v.iter().map(|x| x.abs()).max().unwrap_or(0));
    all
}

fn check_box(n: usize, bound: i64) -> Result<()> {
    let size = (2.0 * bound as f64 + 1.0).powi(n as i32);
    if bound < 1 || size > 5e7 {
        return Err(Error::InvalidArgument(format!("search box of size {size:e} is out of range")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Representation {
    Found(Vec<BigInt>),
    /// Impossible for all vectors, with the reason.
    CertifiedAbsent(String),
    /// Not found in the searched box.
    AbsentWithinBound(i64),
}

impl Representation {
    pub fn is_absent(&self) -> bool {
        !matches!(self, Representation::Found(_))
    }
}

/// `(even, witness)`: a basis vector with odd square when not even.
pub fn is_even(l: &IntegralLattice) -> (bool, Option<Vec<BigInt>>) {
    let n = l.rank();
    for i in 0..n {
        if l.gram[(i, i)].is_odd() {
            let mut e = vec![BigInt::zero(); n];
            e[i] = BigInt::from(1);
            return (false, Some(e));
        }
    }
    (true, None)
}

/// A vector with `q(v) = value`, or a certificate / bounded search result.
pub fn represents(l: &IntegralLattice, value: i64, search_bound: i64) -> Result<Representation> {
    let g = l.value_gcd();
    if !g.is_zero() && !(BigInt::from(value) % &g).is_zero() {
        return Ok(Representation::CertifiedAbsent(format!("every value of q is divisible by {g}, {value} is not")));
    }
    if value == 0 {
        return Err(Error::InvalidArgument("use null_vectors for value 0".into()));
    }
    if let Some(reason) = definite_sign_certificate(l, value) {
        return Ok(Representation::CertifiedAbsent(reason));
    }
    check_box(l.rank(), search_bound)?;
    let target = value as i128;
    let hit = box_vectors(l.rank(), search_bound).into_iter().find(|v| l.q(v) == target);
    Ok(match hit {
        Some(v) => {
            let big = to_big(&v);
            assert_eq!(l.q_big(&big), BigInt::from(value));
            Representation::Found(big)
        }
        None => Representation::AbsentWithinBound(search_bound),
    })
}

fn definite_sign_certificate(l: &IntegralLattice, value: i64) -> Option<String> {
    let (p, m, z) = l.signature();
    if z == 0 && m == 0 && value < 0 {
        return Some("form is positive definite".into());
    }
    if z == 0 && p == 0 && value > 0 {
        return Some("form is negative definite".into());
    }
    None
}

#[derive(Debug, Clone, Serialize)]
pub struct NullVectors {
    /// Primitive isotropic vectors found in the box, up to sign.
    pub found: Vec<Vec<BigInt>>,
    /// Proof that none exist, when available.
    pub certificate: Option<String>,
}

/// Isotropic vectors in the box, with an exact certificate for binary forms
/// whose discriminant is not a square.
pub fn null_vectors(l: &IntegralLattice, search_bound: i64) -> Result<NullVectors> {
    let certificate = if l.rank() == 2 {
        let a = &l.gram[(0, 0)];
        let b = &l.gram[(0, 1)];
        let c = &l.gram[(1, 1)];
        let disc: BigInt = b * b - a * c;
        if disc.is_negative() {
            Some(format!("binary form is definite (b^2 - ac = {disc})"))
        } else if exact_sqrt(&disc).is_none() {
            Some(format!(
                "q(x, y) = 0 with y != 0 forces x/y = (-b +- sqrt({disc}))/a, and {disc} is not a square, so the ratio is irrational"
            ))
        } else {
            None
        }
    } else {
        let (p, m, z) = l.signature();
        (z == 0 && (p == 0 || m == 0)).then(|| "form is definite".to_string())
    };
    if certificate.is_some() {
        return Ok(NullVectors { found: vec![], certificate });
    }
    check_box(l.rank(), search_bound)?;
    let mut found: Vec<Vec<BigInt>> = box_vectors(l.rank(), search_bound)
        .into_iter()
        .filter(|v| l.q(v) == 0)
        .filter(|v| v.iter().fold(0i128, |g, &x| g.gcd(&x)) == 1)
        .filter(|v| v.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0))
        .map(|v| to_big(&v))
        .collect();
    for v in &found {
        assert!(l.q_big(v).is_zero());
    }
    found.dedup();
    Ok(NullVectors { found, certificate: None })
}

/// Dominant eigenline of a rank-2 loxodromic isometry, as the slope
/// `y / x = u + v sqrt(d)` with `d` squarefree (or `d = 1`, `v = 0` when
/// rational), or `None` for the vertical line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QuadraticSlope {
    pub u: (BigInt, BigInt),
    pub v: (BigInt, BigInt),
    pub d: BigInt,
}

fn squarefree_split(n: &BigInt) -> (BigInt, BigInt) {
    // n = f^2 d with d squarefree; trial division is enough for the sizes here
    let mut d = n.clone();
    let mut f = BigInt::from(1);
    let mut p = BigInt::from(2);
    while &p * &p <= d {
        let pp = &p * &p;
        while (&d % &pp).is_zero() {
            d /= &pp;
            f *= &p;
        }
        p += 1;
    }
    (f, d)
}

fn rat_key(r: &BigRational) -> (BigInt, BigInt) {
    (r.numer().clone(), r.denom().clone())
}

pub fn dominant_slope(m: &IntMatrix) -> Option<Option<QuadraticSlope>> {
    if m.rows() != 2 {
        return None;
    }
    let (a, b, c, d) = (m[(0, 0)].clone(), m[(0, 1)].clone(), m[(1, 0)].clone(), m[(1, 1)].clone());
    let t = &a + &d;
    let det = &a * &d - &b * &c;
    let disc: BigInt = &t * &t - 4 * &det;
    if !disc.is_positive() || t.is_zero() {
        return None;
    }
    let sign = if t.is_positive() { 1 } else { -1 };
    let (f, d0) = squarefree_split(&disc);
    let half = |x: BigInt, y: BigInt| BigRational::new(x, y);
    if b.is_zero() {
        // eigenvector (lambda - d, c); vertical exactly when lambda = a is dominant
        if c.is_zero() {
            return None;
        }
        let dominant_is_a = a.abs() > d.abs();
        if dominant_is_a {
            return Some(None);
        }
        let slope = BigRational::new(d.clone() - a.clone(), c.clone());
        return Some(Some(QuadraticSlope { u: rat_key(&slope), v: (BigInt::zero(), BigInt::from(1)), d: BigInt::from(1) }));
    }
    // slope = (lambda - a) / b with lambda = (t + sign sqrt(disc)) / 2
    let u = half(&d - &a, 2 * &b);
    let v = half(BigInt::from(sign) * &f, 2 * &b);
    if d0 == BigInt::from(1) {
        let s = u + v;
        return Some(Some(QuadraticSlope { u: rat_key(&s), v: (BigInt::zero(), BigInt::from(1)), d: BigInt::from(1) }));
    }
    Some(Some(QuadraticSlope { u: rat_key(&u), v: rat_key(&v), d: d0 }))
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometrySearch {
    pub bound: i64,
    pub total: usize,
    pub loxodromic: usize,
    pub parabolic: usize,
    pub elliptic: usize,
    pub undecided: usize,
    pub distinct_axes: usize,
    /// Loxodromic witnesses with their spectral radii.
    pub loxodromic_examples: Vec<(Vec<Vec<String>>, f64)>,
    #[serde(skip)]
    pub matrices: Vec<IntMatrix>,
}

/// All `M` with entries in `[-bound, bound]` and `M^T G M = G`, by column
/// candidates: column `j` must have square `G_jj`, pairs must match `G_ij`.
pub fn isometries(l: &IntegralLattice, entry_bound: i64) -> Result<Vec<IntMatrix>> {
    let n = l.rank();
    check_box(n, entry_bound)?;
    let vecs = box_vectors(n, entry_bound);
    let candidates: Vec<Vec<Vec<i128>>> = (0..n)
        .map(|j| {
            let target = l.small[j][j];
            vecs.par_iter().filter(|v| l.q(v) == target).cloned().collect()
        })
        .collect();
    let mut out: Vec<Vec<Vec<i128>>> = candidates[0]
        .par_iter()
        .flat_map_iter(|c0| {
            let mut acc = Vec::new();
            extend(l, &candidates, vec![c0.clone()], &mut acc);
            acc
        })
        .collect();
    out.sort();
    let mats: Vec<IntMatrix> = out
        .into_iter()
        .map(|cols| {
            let mut m = IntMatrix::zeros(n, n);
            for (j, c) in cols.iter().enumerate() {
                for i in 0..n {
                    m[(i, j)] = BigInt::from(c[i]);
                }
            }
            m
        })
        .collect();
    for m in &mats {
        assert!(m.preserves(&l.gram));
    }
    Ok(mats)
}

fn extend(l: &IntegralLattice, cands: &[Vec<Vec<i128>>], cols: Vec<Vec<i128>>, out: &mut Vec<Vec<Vec<i128>>>) {
    let j = cols.len();
    if j == cands.len() {
        out.push(cols);
        return;
    }
    for c in &cands[j] {
        if cols.iter().enumerate().all(|(i, ci)| l.b(ci, c) == l.small[i][j]) {
            let mut next = cols.clone();
            next.push(c.clone());
            extend(l, cands, next, out);
        }
    }
}

pub fn isometry_search(l: &IntegralLattice, entry_bound: i64) -> Result<IsometrySearch> {
    let mats = isometries(l, entry_bound)?;
    let mut s = IsometrySearch {
        bound: entry_bound,
        total: mats.len(),
        loxodromic: 0,
        parabolic: 0,
        elliptic: 0,
        undecided: 0,
        distinct_axes: 0,
        loxodromic_examples: vec![],
        matrices: vec![],
    };
    let mut axes = std::collections::BTreeSet::new();
    for m in &mats {
        match classify_isometry(m, &l.gram)? {
            IsometryClass::Loxodromic { spectral_radius } => {
                s.loxodromic += 1;
                if let Some(slope) = dominant_slope(m) {
                    axes.insert(slope);
                }
                if s.loxodromic_examples.len() < 8 {
                    let rows = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].to_string()).collect()).collect();
                    s.loxodromic_examples.push((rows, spectral_radius));
                }
            }
            IsometryClass::Parabolic { .. } => s.parabolic += 1,
            IsometryClass::Elliptic { .. } => s.elliptic += 1,
            IsometryClass::Undecided { .. } => s.undecided += 1,
        }
    }
    s.distinct_axes = axes.len();
    s.matrices = mats;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicAbsence {
    pub absent: bool,
    pub certified: bool,
    pub reason: String,
    /// Non-identity unipotent isometries found by the scan.
    pub unipotents_found: usize,
}

fn is_unipotent(m: &IntMatrix) -> bool {
    let n = m.rows();
    !m.is_identity() && m.sub(&IntMatrix::identity(n)).pow(n as u64).is_zero()
}

/// A parabolic isometry fixes an isotropic vector, so a certificate of no
/// null vectors rules parabolics out; the bounded scan for unipotents runs
/// independently.
pub fn parabolic_absence(l: &IntegralLattice, entry_bound: i64) -> Result<ParabolicAbsence> {
    if l.rank() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: l.rank() });
    }
    let nulls = null_vectors(l, entry_bound)?;
    let mats = isometries(l, entry_bound)?;
    let unipotents_found = mats.iter().filter(|m| is_unipotent(m)).count();
    let certified = nulls.certificate.is_some();
    let (absent, reason) = if certified {
        (true, "certified: no isotropic vectors, and a parabolic fixes one".to_string())
    } else {
        (unipotents_found == 0, format!("isotropic vectors exist; scan to bound {entry_bound} found {unipotents_found} unipotents"))
    };
    if certified {
        assert_eq!(unipotents_found, 0, "scan contradicts the certificate");
    }
    Ok(ParabolicAbsence { absent, certified, reason, unipotents_found })
}

/// Trivial Weyl group: no roots (vectors of square -2). Returns whether the
/// absence is certified rather than bounded.
pub fn weyl_trivial(l: &IntegralLattice, search_bound: i64) -> Result<(bool, bool)> {
    Ok(match represents(l, -2, search_bound)? {
        Representation::Found(_) => (false, false),
        Representation::CertifiedAbsent(_) => (true, true),
        Representation::AbsentWithinBound(_) => (true, false),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AppendixReport {
    pub gram: Vec<Vec<String>>,
    pub even: bool,
    pub lines: Vec<CheckLine>,
}

impl AppendixReport {
    /// The four conditions (evenness is reported separately).
    pub fn conditions_pass(&self) -> bool {
        self.lines.iter().filter(|l| l.name != "even").all(|l| l.pass)
    }
}

/// No -2 vectors, no null vectors, two loxodromics with distinct axes,
/// no parabolics; plus evenness.
pub fn verify_appendix(l: &IntegralLattice, bound: i64) -> Result<AppendixReport> {
    let (even, witness) = is_even(l);
    let rep = represents(l, -2, bound)?;
    let nulls = null_vectors(l, bound)?;
    let iso = isometry_search(l, bound)?;
    let par = parabolic_absence(l, bound)?;
    let lines = vec![
        CheckLine {
            name: "even".into(),
            pass: even,
            detail: match witness {
                Some(w) => format!("q({:?}) = {} is odd", w.iter().map(|x| x.to_string()).collect::<Vec<_>>(), l.q_big(&w)),
                None => "all diagonal entries even".into(),
            },
        },
        CheckLine {
            name: "no-minus-two".into(),
            pass: rep.is_absent(),
            detail: format!("{rep:?}"),
        },
        CheckLine {
            name: "no-null".into(),
            pass: nulls.found.is_empty(),
            detail: nulls.certificate.clone().unwrap_or_else(|| format!("{} primitive null vectors in box", nulls.found.len())),
        },
        CheckLine {
            name: "hyperbolic-axes".into(),
            pass: iso.distinct_axes >= 2,
            detail: format!("{} loxodromic of {} isometries, {} distinct axes (bound {bound})", iso.loxodromic, iso.total, iso.distinct_axes),
        },
        CheckLine { name: "parabolic-absence".into(), pass: par.absent, detail: par.reason },
    ];
    let gram = (0..l.rank()).map(|i| (0..l.rank()).map(|j| l.gram[(i, j)].to_string()).collect()).collect();
    Ok(AppendixReport { gram, even, lines })
}
