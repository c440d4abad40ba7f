//! Degree-2 jets at the origin of origin-fixing maps of R^n (n = 2 or 4),
//! and the matrix of precomposition on them.
//!
//! Per-coordinate basis: `x_1..x_n`, then `x_j^2 / 2`, then `x_j x_k` for
//! `j < k` in lexicographic order. In this basis the coordinates of a jet are
//! its raw first and second partials.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub trait JetScalar:
    Clone + Debug + PartialEq + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn to_f64(&self) -> f64;
    fn half(self) -> Self;
}

impl JetScalar for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }

    fn half(self) -> Self {
        0.5 * self
    }
}

impl JetScalar for BigRational {
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn half(self) -> Self {
        self / BigRational::from_integer(2.into())
    }
}

/// Second Taylor polynomial at 0 of a map fixing 0.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoly2<T = f64> {
    n: usize,
    /// `lin[i][j] = d f_i / d x_j`.
    lin: Vec<Vec<T>>,
    /// `quad[i][j][k] = d^2 f_i / dx_j dx_k`, symmetric in `j, k`.
    quad: Vec<Vec<Vec<T>>>,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 2 || n == 4 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: 4, got: n })
    }
}

impl<T: JetScalar> JetPoly2<T> {
    pub fn new(lin: Vec<Vec<T>>, quad: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let n = lin.len();
        check_dim(n)?;
        if lin.iter().any(|r| r.len() != n) || quad.len() != n || quad.iter().any(|q| q.len() != n || q.iter().any(|r| r.len() != n)) {
            return Err(Error::DimensionMismatch { expected: n, got: quad.len() });
        }
        for q in &quad {
            for j in 0..n {
                for k in 0..j {
                    if q[j][k] != q[k][j] {
                        return Err(Error::InvalidArgument("second partials must be symmetric".into()));
                    }
                }
            }
        }
        Ok(JetPoly2 { n, lin, quad })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dim(n)?;
        let lin = (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
        let quad = vec![vec![vec![T::zero(); n]; n]; n];
        Ok(JetPoly2 { n, lin, quad })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn first(&self, i: usize, j: usize) -> &T {
        &self.lin[i][j]
    }

    pub fn second(&self, i: usize, j: usize, k: usize) -> &T {
        &self.quad[i][j][k]
    }

    /// Truncated evaluation `Df v + D^2 f (v, v) / 2`.
    pub fn eval(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                let mut q = T::zero();
                for j in 0..self.n {
                    s = s + self.lin[i][j].clone() * v[j].clone();
                    for k in 0..self.n {
                        q = q + self.quad[i][j][k].clone() * v[j].clone() * v[k].clone();
                    }
                }
                s + q.half()
            })
            .collect()
    }

    pub fn map<U: JetScalar>(&self, f: impl Fn(&T) -> U) -> JetPoly2<U> {
        JetPoly2 {
            n: self.n,
            lin: self.lin.iter().map(|r| r.iter().map(&f).collect()).collect(),
            quad: self.quad.iter().map(|q| q.iter().map(|r| r.iter().map(&f).collect()).collect()).collect(),
        }
    }
}

impl JetPoly2<f64> {
    pub fn to_rational(&self) -> JetPoly2<BigRational> {
        self.map(|x| BigRational::from_float(*x).expect("finite coefficient"))
    }

    /// Largest absolute first or second partial.
    pub fn max_partial(&self) -> f64 {
        let a = self.lin.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let b = self.quad.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        a.max(b)
    }

    pub fn max_second_partial(&self) -> f64 {
        self.quad.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Frobenius bound on the operator norm of `D^2 f`.
    pub fn second_norm(&self) -> f64 {
        self.quad.iter().flatten().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn linear_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.lin[i][j])
    }
}

/// Jet of `f` at 0 by central differences with one Richardson step.
pub fn jet_from_map(f: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> Result<JetPoly2<f64>> {
    jet_from_map_with_step(f, n, 1e-4)
}

pub fn jet_from_map_with_step(f: impl Fn(&[f64]) -> Vec<f64>, n: usize, h: f64) -> Result<JetPoly2<f64>> {
    check_dim(n)?;
    let origin = vec![0.0; n];
    let f0 = f(&origin);
    if f0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f0.len() });
    }
    let r0 = f0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r0 >= 1e-12 {
        return Err(Error::OriginNotFixed(r0));
    }
    let at = |pairs: &[(usize, f64)]| {
        let mut v = vec![0.0; n];
        for &(i, s) in pairs {
            v[i] += s;
        }
        f(&v)
    };
    let first = |j: usize, h: f64| -> Vec<f64> {
        let p = at(&[(j, h)]);
        let m = at(&[(j, -h)]);
        (0..n).map(|i| (p[i] - m[i]) / (2.0 * h)).collect()
    };
    let second = |j: usize, k: usize, h: f64| -> Vec<f64> {
        if j == k {
            let p = at(&[(j, h)]);
            let m = at(&[(j, -h)]);
            (0..n).map(|i| (p[i] - 2.0 * f0[i] + m[i]) / (h * h)).collect()
        } else {
            let pp = at(&[(j, h), (k, h)]);
            let pm = at(&[(j, h), (k, -h)]);
            let mp = at(&[(j, -h), (k, h)]);
            let mm = at(&[(j, -h), (k, -h)]);
            (0..n).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h)).collect()
        }
    };
    let richardson = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| (4.0 * y - x) / 3.0).collect() };
    let mut lin = vec![vec![0.0; n]; n];
    let mut quad = vec![vec![vec![0.0; n]; n]; n];
    for j in 0..n {
        let d = richardson(first(j, h), first(j, h / 2.0));
        for i in 0..n {
            lin[i][j] = d[i];
        }
        for k in 0..=j {
            let d2 = richardson(second(j, k, h), second(j, k, h / 2.0));
            for i in 0..n {
                quad[i][j][k] = d2[i];
                quad[i][k][j] = d2[i];
            }
        }
    }
    JetPoly2::new(lin, quad)
}

/// `j(f o g) = j(f) o j(g)` truncated at degree 2.
pub fn jet_compose<T: JetScalar>(f: &JetPoly2<T>, g: &JetPoly2<T>) -> Result<JetPoly2<T>> {
    if f.n != g.n {
        return Err(Error::DimensionMismatch { expected: f.n, got: g.n });
    }
    let n = f.n;
    let mut lin = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = T::zero();
            for a in 0..n {
                s = s + f.lin[i][a].clone() * g.lin[a][j].clone();
            }
            lin[i][j] = s;
        }
    }
    let mut quad = vec![vec![vec![T::zero(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..=j {
                let mut s = T::zero();
                for a in 0..n {
                    for b in 0..n {
                        s = s + f.quad[i][a][b].clone() * g.lin[a][j].clone() * g.lin[b][k].clone();
                    }
                    s = s + f.lin[i][a].clone() * g.quad[a][j][k].clone();
                }
                quad[i][k][j] = s.clone();
                quad[i][j][k] = s;
            }
        }
    }
    JetPoly2::new(lin, quad)
}

/// Per-coordinate basis size: `n` linear plus `n (n + 1) / 2` quadratic monomials.
pub fn basis_size(n: usize) -> usize {
    n + n * (n + 1) / 2
}

/// Index of the quadratic monomial `x_j x_k` (`x_j^2 / 2` when `j == k`).
fn quad_index(n: usize, j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    if j == k {
        return n + j;
    }
    let mut idx = 2 * n;
    for a in 0..n {
        for b in a + 1..n {
            if (a, b) == (j, k) {
                return idx;
            }
            idx += 1;
        }
    }
    unreachable!()
}

/// Matrix of `h -> h o j(f)` on one coordinate: column `c` holds the
/// coordinates of `e_c o j(f)`.
pub fn precomposition_block<T: JetScalar>(f: &JetPoly2<T>) -> Vec<Vec<T>> {
    let n = f.n;
    let m = basis_size(n);
    let mut b = vec![vec![T::zero(); m]; m];
    let a = &f.lin;
    // linear monomials x_c: f_c itself
    for c in 0..n {
        for j in 0..n {
            b[j][c] = a[c][j].clone();
            for k in j..n {
                b[quad_index(n, j, k)][c] = f.quad[c][j][k].clone();
            }
        }
    }
    // x_c^2 / 2 -> (A x)_c^2 / 2
    for c in 0..n {
        let col = n + c;
        for j in 0..n {
            b[quad_index(n, j, j)][col] = a[c][j].clone() * a[c][j].clone();
            for k in j + 1..n {
                b[quad_index(n, j, k)][col] = a[c][j].clone() * a[c][k].clone();
            }
        }
    }
    // x_c x_d -> (A x)_c (A x)_d
    for c in 0..n {
        for d in c + 1..n {
            let col = quad_index(n, c, d);
            for j in 0..n {
                let two = T::one() + T::one();
                b[quad_index(n, j, j)][col] = two * a[c][j].clone() * a[d][j].clone();
                for k in j + 1..n {
                    b[quad_index(n, j, k)][col] = a[c][j].clone() * a[d][k].clone() + a[c][k].clone() * a[d][j].clone();
                }
            }
        }
    }
    b
}

/// Full matrix on `J^2_0(R^n, R^n)`: `n` copies of the block on the diagonal.
pub fn precomposition_matrix(f: &JetPoly2<f64>) -> DMatrix<f64> {
    let n = f.n;
    let m = basis_size(n);
    let b = precomposition_block(f);
    let mut out = DMatrix::zeros(n * m, n * m);
    for c in 0..n {
        for i in 0..m {
            for j in 0..m {
                out[(c * m + i, c * m + j)] = b[i][j];
            }
        }
    }
    out
}

/// Ordering under which matrices of a chain multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ChainOrder {
    /// `T_{f o g} = T_g T_f`.
    Reversed,
    /// `T_{f o g} = T_f T_g`.
    Forward,
}

/// Checks both orderings on a chain `f_{n-1} o ... o f_0` and returns the
/// max entrywise error of each.
pub fn chain_errors(chain: &[JetPoly2<f64>]) -> Result<(f64, f64)> {
    let n = chain[0].n;
    let mut composed = JetPoly2::identity(n)?;
    for f in chain {
        composed = jet_compose(f, &composed)?;
    }
    let target = precomposition_matrix(&composed);
    let size = target.nrows();
    let mut rev = DMatrix::identity(size, size);
    let mut fwd = DMatrix::identity(size, size);
    for f in chain {
        let t = precomposition_matrix(f);
        // composed = f o previous: reversed order multiplies on the left by T_prev
        rev = &rev * &t;
        fwd = &t * &fwd;
    }
    Ok(((&rev - &target).abs().max(), (&fwd - &target).abs().max()))
}

/// Empirically locked ordering.
pub fn lock_order(chain: &[JetPoly2<f64>], tol: f64) -> Result<ChainOrder> {
    let (rev, fwd) = chain_errors(chain)?;
    match (rev < tol, fwd < tol) {
        (true, false) => Ok(ChainOrder::Reversed),
        (false, true) => Ok(ChainOrder::Forward),
        (true, true) => Err(Error::Insufficient("chain does not distinguish the orderings".into())),
        (false, false) => Err(Error::NonConvergence(format!("no ordering is a homomorphism ({rev:e}, {fwd:e})"))),
    }
}

/// `C_f = 2 (C'_f)^2` with `C'_f` the largest first or second partial.
pub fn jet_constant(f: &JetPoly2<f64>) -> f64 {
    let c = f.max_partial();
    2.0 * c * c
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SecondDerivativeBound {
    pub steps: usize,
    pub c: f64,
    pub bound: f64,
    pub measured: f64,
}

/// `|D^2 F~^t| <= C^n`, `n = floor(t + k)`, `C = sqrt(60) max C_{f~_i}`,
/// next to the largest second partial of the composed chain measured by
/// finite differences of the composition itself.
pub fn second_derivative_bound(
    maps: &[&dyn Fn(&[f64]) -> Vec<f64>],
    dim: usize,
    t: f64,
    k: f64,
) -> Result<SecondDerivativeBound> {
    let steps = (t + k).floor().max(0.0) as usize;
    if steps > maps.len() {
        return Err(Error::InvalidArgument(format!("chain has {} maps, need {steps}", maps.len())));
    }
    let mut c = 1.0f64;
    for f in &maps[..steps] {
        c = c.max(60f64.sqrt() * jet_constant(&jet_from_map(f, dim)?));
    }
    let composed = |v: &[f64]| -> Vec<f64> {
        let mut x = v.to_vec();
        for f in &maps[..steps] {
            x = f(&x);
        }
        x
    };
    let measured = jet_from_map(composed, dim)?.max_second_partial();
    Ok(SecondDerivativeBound { steps, c, bound: c.powi(steps as i32), measured })
}

/// Upper and lower displacement bounds from the jet: returns
/// `(|F(v)|, |DF v| + s |v|^2 / 2, |DF v| - s |v|^2 / 2)` for `sup |D^2| <= s`.
pub fn taylor_sandwich(f: impl Fn(&[f64]) -> Vec<f64>, jet: &JetPoly2<f64>, v: &[f64], d2_sup: f64) -> (f64, f64, f64) {
    let fv = f(v);
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let lin: Vec<f64> = (0..jet.n).map(|i| (0..jet.n).map(|j| jet.lin[i][j] * v[j]).sum()).collect();
    let r = norm(v);
    let l = norm(&lin);
    (norm(&fv), l + 0.5 * d2_sup * r * r, l - 0.5 * d2_sup * r * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example(v: &[f64]) -> Vec<f64> {
        vec![2.0 * v[0], v[0] * v[0] + v[1]]
    }

    fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> JetPoly2<f64> {
        let lin = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let mut quad = vec![vec![vec![0.0; n]; n]; n];
        for q in quad.iter_mut() {
            for j in 0..n {
                for k in 0..=j {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    q[j][k] = x;
                    q[k][j] = x;
                }
            }
        }
        JetPoly2::new(lin, quad).unwrap()
    }

    #[test]
    fn example_partials() {
        let j = jet_from_map(example, 2).unwrap();
        assert!((j.first(0, 0) - 2.0).abs() < 1e-10);
        assert!((j.second(1, 0, 0) - 2.0).abs() < 1e-8);
        assert!(j.first(0, 1).abs() < 1e-10 && j.second(0, 0, 0).abs() < 1e-8);
        let lin = jet_from_map(|v: &[f64]| vec![v[0] + 2.0 * v[1], -v[1]], 2).unwrap();
        assert!(lin.max_second_partial() < 1e-8);
    }

    #[test]
    fn origin_must_be_fixed() {
        assert!(matches!(jet_from_map(|v: &[f64]| vec![v[0] + 1.0, v[1]], 2), Err(Error::OriginNotFixed(_))));
    }

    #[test]
    fn worked_block() {
        let exact = JetPoly2::new(
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![vec![vec![0.0; 2]; 2], vec![vec![2.0, 0.0], vec![0.0, 0.0]]],
        )
        .unwrap();
        let b = precomposition_block(&exact);
        let expected = [
            [2.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, 4.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 2.0],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(b[i][j], expected[i][j], "entry ({i}, {j})");
            }
        }
        assert_eq!(precomposition_matrix(&exact).nrows(), 10);
    }

    #[test]
    fn self_composition_of_example() {
        let j = jet_from_map(example, 2).unwrap();
        let jj = jet_compose(&j, &j).unwrap();
        assert!((jj.first(0, 0) - 4.0).abs() < 1e-9);
        assert!((jj.second(1, 0, 0) - 10.0).abs() < 1e-7);
        let id = JetPoly2::identity(2).unwrap();
        assert_eq!(jet_compose(&j, &id).unwrap(), j);
        assert_eq!(jet_compose(&id, &j).unwrap(), j);
    }

    #[test]
    fn finite_differences_match_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let q = random_quadratic(&mut rng, 2);
            let fd = jet_from_map(|v: &[f64]| q.eval(v), 2).unwrap();
            let err = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (fd.first(i, j) - q.first(i, j)).abs().max((0..2).map(|k| (fd.second(i, j, k) - q.second(i, j, k)).abs()).fold(0.0, f64::max)))
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn homomorphism_locks_reversed_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 4] {
            for len in 2..=6 {
                let chain: Vec<_> = (0..len).map(|_| random_quadratic(&mut rng, n)).collect();
                let (rev, fwd) = chain_errors(&chain).unwrap();
                assert!(rev < 1e-9, "{rev}");
                assert!(fwd > 1e-3);
                assert_eq!(lock_order(&chain, 1e-9).unwrap(), ChainOrder::Reversed);
            }
        }
        assert_eq!(basis_size(4), 14);
    }

    #[test]
    fn identity_matrix_and_associativity() {
        let id = JetPoly2::<f64>::identity(4).unwrap();
        let t = precomposition_matrix(&id);
        assert_eq!(t, DMatrix::identity(56, 56));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b, c) = (random_quadratic(&mut rng, 4), random_quadratic(&mut rng, 4), random_quadratic(&mut rng, 4));
        let l = jet_compose(&jet_compose(&a, &b).unwrap(), &c).unwrap();
        let r = jet_compose(&a, &jet_compose(&b, &c).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((l.first(i, j) - r.first(i, j)).abs() < 1e-12);
                for k in 0..4 {
                    assert!((l.second(i, j, k) - r.second(i, j, k)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matrix_entries_bounded_by_jet_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q = random_quadratic(&mut rng, 2);
            let m = precomposition_matrix(&q);
            assert!(m.abs().max() <= jet_constant(&q).max(q.max_partial()) + 1e-12);
        }
    }

    #[test]
    fn rational_mode_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let chain: Vec<_> = (0..5).map(|_| random_quadratic(&mut rng, 2)).collect();
        let mut fl = JetPoly2::identity(2).unwrap();
        let mut ra = JetPoly2::<BigRational>::identity(2).unwrap();
        for f in &chain {
            fl = jet_compose(f, &fl).unwrap();
            ra = jet_compose(&f.to_rational(), &ra).unwrap();
        }
        let bf = precomposition_block(&fl);
        let br = precomposition_block(&ra);
        for i in 0..5 {
            for j in 0..5 {
                assert!((bf[i][j] - JetScalar::to_f64(&br[i][j])).abs() < 1e-12 * bf[i][j].abs().max(1.0));
            }
        }
        // evaluation uses exact halves in rational mode
        let v = [BigRational::from_float(0.25).unwrap(), BigRational::from_float(-0.5).unwrap()];
        let ev = ra.eval(&v);
        let evf = fl.eval(&[0.25, -0.5]);
        assert!((JetScalar::to_f64(&ev[0]) - evf[0]).abs() < 1e-12 * evf[0].abs().max(1.0));
    }

    #[test]
    fn sandwich_on_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q = random_quadratic(&mut rng, 4);
            let s = q.second_norm();
            for _ in 0..10 {
                let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.1..0.1)).collect();
                let (fv, up, lo) = taylor_sandwich(|x: &[f64]| q.eval(x), &q, &v, s);
                assert!(fv <= up + 1e-12 && fv >= lo - 1e-12);
            }
        }
    }

    #[test]
    fn bound_on_linear_chain() {
        let f = |v: &[f64]| vec![2.0 * v[0] + v[1], v[0] + v[1]];
        let maps: Vec<&dyn Fn(&[f64]) -> Vec<f64>> = vec![&f, &f, &f];
        let b = second_derivative_bound(&maps, 2, 2.5, 0.5).unwrap();
        assert_eq!(b.steps, 3);
        assert!(b.measured < 1e-6);
        assert!(b.measured <= b.bound);
    }
}
