//! Exact integer and rational arithmetic: integer matrices, characteristic
//! polynomials and Sturm-sequence root isolation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (r, c): (usize, usize)) -> &BigInt {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut BigInt {
        &mut self.data[r * self.cols + c]
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.as_ref().len(), c, "ragged matrix");
            data.extend(row.as_ref().iter().map(|&x| BigInt::from(x)));
        }
        IntMatrix { rows: r, cols: c, data }
    }

    pub fn from_big(rows: usize, cols: usize, data: Vec<BigInt>) -> Self {
        assert_eq!(data.len(), rows * cols);
        IntMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let prod = a * &other[(k, c)];
                    out[(r, c)] += prod;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        IntMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        IntMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &BigInt) -> IntMatrix {
        IntMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn pow(&self, mut k: u64) -> IntMatrix {
        let mut base = self.clone();
        let mut acc = Self::identity(self.rows);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Self::identity(self.rows)
    }

    pub fn trace(&self) -> BigInt {
        (0..self.rows).map(|i| self[(i, i)].clone()).sum()
    }

    pub fn max_abs_entry(&self) -> BigInt {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_default()
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| &self[(r, c)] * &v[c]).sum())
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<BigInt> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |r, c| {
            self[(r, c)].to_f64().unwrap_or(f64::NAN)
        })
    }

    /// `self^T * g * self == g`.
    pub fn preserves(&self, g: &IntMatrix) -> bool {
        self.is_square()
            && g.is_square()
            && self.rows == g.rows
            && self.transpose().mul(g).mul(self) == *g
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(p) = (k + 1..n).find(|&r| !a[(r, k)].is_zero()) else {
                    return BigInt::zero();
                };
                for c in 0..n {
                    let tmp = a[(k, c)].clone();
                    a[(k, c)] = a[(p, c)].clone();
                    a[(p, c)] = tmp;
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)];
                    a[(i, j)] = v / &prev;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * a[(n - 1, n - 1)].clone()
    }
}

/// Bilinear form `u^T g v`.
pub fn bilinear(g: &IntMatrix, u: &[BigInt], v: &[BigInt]) -> BigInt {
    let gv = g.apply(v);
    u.iter().zip(&gv).map(|(a, b)| a * b).sum()
}

/// Polynomial with integer coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPoly {
    pub coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + BigRational::from_integer(c.clone());
        }
        acc
    }

    /// Exact division by `x - r` for an integer root `r`; `None` if `r` is not a root.
    pub fn deflate(&self, r: i64) -> Option<IntPoly> {
        let r = BigInt::from(r);
        let n = self.degree();
        if n == 0 {
            return None;
        }
        let mut q = vec![BigInt::zero(); n];
        let mut carry = BigInt::zero();
        for i in (0..=n).rev() {
            let v = &self.coeffs[i] + &carry * &r;
            if i == 0 {
                return if v.is_zero() { Some(IntPoly::new(q)) } else { None };
            }
            q[i - 1] = v.clone();
            carry = v;
        }
        None
    }
}

/// Characteristic polynomial `det(xI - M)` by Faddeev-LeVerrier (exact).
pub fn char_poly(m: &IntMatrix) -> IntPoly {
    assert!(m.is_square());
    let n = m.rows();
    let mut c = vec![BigInt::zero(); n + 1];
    c[n] = BigInt::one();
    let mut mk = IntMatrix::zeros(n, n);
    let id = IntMatrix::identity(n);
    for k in 1..=n {
        mk = m.mul(&mk).add(&id.scale(&c[n + 1 - k]));
        let t = m.mul(&mk).trace();
        let (q, r) = (-t).div_rem(&BigInt::from(k));
        debug_assert!(r.is_zero());
        c[n - k] = q;
    }
    IntPoly::new(c)
}

type RatPoly = Vec<BigRational>;

fn rat_trim(mut p: RatPoly) -> RatPoly {
    while p.len() > 1 && p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
    p
}

fn rat_rem(a: &RatPoly, b: &RatPoly) -> RatPoly {
    let mut r = a.clone();
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let f = &r[dr] / &lead;
        for i in 0..=db {
            let t = &f * &b[i];
            r[dr - db + i] -= t;
        }
        r.pop();
        r = rat_trim(r);
        if r.len() <= db {
            break;
        }
    }
    if r.is_empty() {
        r.push(BigRational::zero());
    }
    r
}

fn rat_eval(p: &RatPoly, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn rat_is_zero(p: &RatPoly) -> bool {
    p.iter().all(|c| c.is_zero())
}

/// Sturm sequence of a polynomial.
#[derive(Debug, Clone)]
pub struct Sturm {
    seq: Vec<RatPoly>,
}

/// Where to evaluate sign variations.
pub enum At<'a> {
    NegInf,
    Point(&'a BigRational),
    PosInf,
}

impl Sturm {
    pub fn new(p: &IntPoly) -> Self {
        let p0: RatPoly = p.coeffs.iter().map(|c| BigRational::from_integer(c.clone())).collect();
        let p1: RatPoly = if p0.len() > 1 {
            p0.iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect()
        } else {
            vec![BigRational::zero()]
        };
        let mut seq = vec![p0];
        if !rat_is_zero(&p1) {
            seq.push(p1);
            loop {
                let n = seq.len();
                let r = rat_rem(&seq[n - 2], &seq[n - 1]);
                if rat_is_zero(&r) {
                    break;
                }
                seq.push(r.into_iter().map(|c| -c).collect());
            }
        }
        Sturm { seq }
    }

    fn sign_at(p: &RatPoly, at: &At) -> i32 {
        let deg = p.len() - 1;
        let s = match at {
            At::Point(x) => rat_eval(p, x),
            At::PosInf => p[deg].clone(),
            At::NegInf => {
                if deg % 2 == 0 {
                    p[deg].clone()
                } else {
                    -p[deg].clone()
                }
            }
        };
        if s.is_zero() {
            0
        } else if s.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn variations(&self, at: At) -> usize {
        let mut last = 0;
        let mut count = 0;
        for p in &self.seq {
            let s = Self::sign_at(p, &at);
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }

    /// Number of distinct real roots in `(a, b]` (`a`, `b` may be infinite).
    pub fn count(&self, a: At, b: At) -> usize {
        self.variations(a).saturating_sub(self.variations(b))
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Strips all roots at `+1` and `-1` from an integer polynomial.
pub fn strip_unit_roots(p: &IntPoly) -> IntPoly {
    let mut q = p.clone();
    loop {
        if let Some(d) = q.deflate(1) {
            q = d;
        } else if let Some(d) = q.deflate(-1) {
            q = d;
        } else {
            return q;
        }
    }
}

/// Cauchy bound on the absolute value of real roots.
fn cauchy_bound(p: &IntPoly) -> BigRational {
    let lead = p.coeffs[p.degree()].abs();
    let m = p.coeffs[..p.degree()].iter().map(|c| c.abs()).max().unwrap_or_default();
    BigRational::one() + BigRational::new(m, lead)
}

/// Number of real roots with absolute value strictly greater than one.
pub fn count_roots_outside_unit(p: &IntPoly) -> usize {
    let q = strip_unit_roots(p);
    if q.degree() == 0 {
        return 0;
    }
    let s = Sturm::new(&q);
    let one = rat(1);
    let neg = rat(-1);
    s.count(At::Point(&one), At::PosInf) + s.count(At::NegInf, At::Point(&neg))
}

/// Isolates the largest root of `|x|` among real roots outside `[-1, 1]`,
/// returning a rational interval of width below `2^-bits` times the bound.
pub fn dominant_real_root(p: &IntPoly, bits: u32) -> Option<(BigRational, BigRational)> {
    let q = strip_unit_roots(p);
    if q.degree() == 0 {
        return None;
    }
    let s = Sturm::new(&q);
    let bound = cauchy_bound(&q);
    let one = rat(1);
    let neg = rat(-1);
    let npos = s.count(At::Point(&one), At::PosInf);
    let nneg = s.count(At::NegInf, At::Point(&neg));
    let largest_pos = if npos > 0 {
        Some(isolate_top(&s, one.clone(), bound.clone(), bits))
    } else {
        None
    };
    // mirror: roots of q(-x)
    let largest_neg = if nneg > 0 {
        let mirrored = IntPoly::new(
            q.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c.clone() } else { c.clone() })
                .collect(),
        );
        let sm = Sturm::new(&mirrored);
        Some(isolate_top(&sm, one, bound, bits))
    } else {
        None
    };
    match (largest_pos, largest_neg) {
        (Some(a), Some(b)) => Some(if a.1 >= b.1 { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// Bisection for the largest root in `(lo, hi]`, which must contain one.
fn isolate_top(s: &Sturm, mut lo: BigRational, mut hi: BigRational, bits: u32) -> (BigRational, BigRational) {
    let two = rat(2);
    for _ in 0..bits {
        let mid = (&lo + &hi) / &two;
        if s.count(At::Point(&mid), At::Point(&hi)) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Integer square root if `n` is a perfect square.
pub fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

/// Signature `(positive, negative, zero)` of a symmetric integer matrix,
/// by exact symmetric elimination over the rationals.
pub fn signature(g: &IntMatrix) -> (usize, usize, usize) {
    assert!(g.is_square());
    let n = g.rows();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|r| (0..n).map(|c| BigRational::from_integer(g[(r, c)].clone())).collect())
        .collect();
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    let mut i = 0;
    while i < n {
        if let Some(k) = (i..n).find(|&k| !a[k][k].is_zero()) {
            a.swap(i, k);
            for row in a.iter_mut() {
                row.swap(i, k);
            }
        } else if let Some((_, j)) = (i..n)
            .flat_map(|r| (r + 1..n).map(move |c| (r, c)))
            .find(|&(r, c)| !a[r][c].is_zero())
        {
            // e_i <- e_i + e_j makes the pivot 2 a_ij
            let (r, _) = (i..n)
                .flat_map(|r| (r + 1..n).map(move |c| (r, c)))
                .find(|&(r, c)| !a[r][c].is_zero())
                .unwrap();
            for c in 0..n {
                let v = a[j][c].clone();
                a[r][c] += v;
            }
            for row in a.iter_mut() {
                let v = row[j].clone();
                row[r] += v;
            }
            a.swap(i, r);
            for row in a.iter_mut() {
                row.swap(i, r);
            }
        } else {
            zero += n - i;
            break;
        }
        let p = a[i][i].clone();
        if p.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for r in i + 1..n {
            let f = &a[r][i] / &p;
            if f.is_zero() {
                continue;
            }
            for c in i..n {
                let v = &f * &a[i][c];
                a[r][c] -= v;
            }
        }
        for r in i + 1..n {
            a[r][i] = BigRational::zero();
            a[i][r] = BigRational::zero();
        }
        i += 1;
    }
    (pos, neg, zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_poly_of_companion() {
        // x^3 - 17x^2 - 17x + 1 style check on a hand matrix
        let m = IntMatrix::from_rows(&[[2, 1], [1, 1]]);
        let p = char_poly(&m);
        assert_eq!(p.coeffs, vec![BigInt::from(1), BigInt::from(-3), BigInt::from(1)]);
        let m3 = IntMatrix::from_rows(&[[1, 2, 0], [0, 1, 0], [3, 0, 2]]);
        // det(xI - M) = (x-1)^2 (x-2)
        let p3 = char_poly(&m3);
        assert_eq!(
            p3.coeffs,
            vec![BigInt::from(-2), BigInt::from(5), BigInt::from(-4), BigInt::from(1)]
        );
    }

    #[test]
    fn bareiss_det() {
        let m = IntMatrix::from_rows(&[[0, 2, 1], [3, 1, 4], [1, 0, 5]]);
        // 0*(5) - 2*(15-4) + 1*(0-1) = -23
        assert_eq!(m.det(), BigInt::from(-23));
        assert_eq!(IntMatrix::identity(4).det(), BigInt::from(1));
    }

    #[test]
    fn sturm_counts_roots() {
        // (x-3)(x+2)(x-0.5)*2 = 2x^3 - 3x^2 - 11x + 6
        let p = IntPoly::new(vec![6, -11, -3, 2].into_iter().map(BigInt::from).collect());
        let s = Sturm::new(&p);
        assert_eq!(s.count(At::NegInf, At::PosInf), 3);
        assert_eq!(count_roots_outside_unit(&p), 2);
        let (lo, hi) = dominant_real_root(&p, 60).unwrap();
        assert!((rational_to_f64(&lo) - 3.0).abs() < 1e-12);
        assert!(lo <= hi);
    }

    #[test]
    fn deflation_by_unit_roots() {
        // (x-1)^2 (x+1)
        let p = IntPoly::new(vec![1, -1, -1, 1].into_iter().map(BigInt::from).collect());
        assert_eq!(strip_unit_roots(&p).degree(), 0);
        assert_eq!(count_roots_outside_unit(&p), 0);
    }

    #[test]
    fn signatures() {
        assert_eq!(signature(&IntMatrix::from_rows(&[[0, 1], [1, 0]])), (1, 1, 0));
        assert_eq!(signature(&IntMatrix::from_rows(&[[0, 2, 2], [2, 0, 2], [2, 2, 0]])), (1, 2, 0));
        assert_eq!(signature(&IntMatrix::from_rows(&[[7, 0], [0, -14]])), (1, 1, 0));
        assert_eq!(signature(&IntMatrix::from_rows(&[[1, 1], [1, 1]])), (1, 0, 1));
        assert_eq!(
            signature(&IntMatrix::from_rows(&[[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, -2, 0], [0, 0, 0, -2]])),
            (1, 3, 0)
        );
    }

    #[test]
    fn power_and_preserve() {
        let p = IntMatrix::from_rows(&[[3, 4], [2, 3]]);
        let g = IntMatrix::from_rows(&[[7, 0], [0, -14]]);
        assert!(p.preserves(&g));
        assert!(p.pow(5).preserves(&g));
        assert_eq!(p.pow(0), IntMatrix::identity(2));
        assert_eq!(p.pow(3), p.mul(&p).mul(&p));
    }
}
