//! Complex 2-tori `C^2 / Lambda` with affine automorphisms `x -> M x + b`.
//!
//! Points are stored in lattice coordinates reduced to `[0, 1)^4`. Tangent
//! vectors live in the ambient real coordinates `(Re z1, Re z2, Im z1, Im z2)`,
//! so the tangent of a generator is `B M B^-1` where `B` is the lattice basis.

use super::{AutoId, CohomologyRep, SurfaceModel};
use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::linalg::{complex_structure, Mat4, Vec4};
use serde::{Deserialize, Serialize};

pub type TorusPoint = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGenerator {
    pub name: String,
    /// Integer matrix acting on lattice coordinates.
    pub matrix: [[i64; 4]; 4],
    #[serde(default)]
    pub translation: [f64; 4],
}

impl TorusGenerator {
    pub fn linear(name: &str, matrix: [[i64; 4]; 4]) -> Self {
        TorusGenerator { name: name.to_string(), matrix, translation: [0.0; 4] }
    }

    /// Real form of a complex 2x2 matrix with Gaussian-integer entries,
    /// given as `(re, im)` parts.
    pub fn from_gaussian(name: &str, re: [[i64; 2]; 2], im: [[i64; 2]; 2]) -> Self {
        let mut m = [[0i64; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = re[a][b];
                m[a + 2][b + 2] = re[a][b];
                m[a][b + 2] = -im[a][b];
                m[a + 2][b] = im[a][b];
            }
        }
        Self::linear(name, m)
    }

    /// Complex 2x2 matrix with integer entries acting diagonally on both
    /// real and imaginary parts.
    pub fn from_integer_2x2(name: &str, a: [[i64; 2]; 2]) -> Self {
        Self::from_gaussian(name, a, [[0; 2]; 2])
    }

    pub fn det(&self) -> i64 {
        let m = IntMatrix::from_rows(&self.matrix);
        i64::try_from(m.det()).unwrap_or(0)
    }

    pub fn is_volume_preserving(&self) -> bool {
        self.det().abs() == 1
    }

    fn int_matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(&self.matrix)
    }

    /// Gaussian-integer form `(re, im)` if the matrix commutes with `J`.
    pub fn gaussian_parts(&self) -> Option<([[i64; 2]; 2], [[i64; 2]; 2])> {
        let m = &self.matrix;
        let mut re = [[0; 2]; 2];
        let mut im = [[0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                if m[a][b] != m[a + 2][b + 2] || m[a][b + 2] != -m[a + 2][b] {
                    return None;
                }
                re[a][b] = m[a][b];
                im[a][b] = m[a + 2][b];
            }
        }
        Some((re, im))
    }
}

#[derive(Debug, Clone)]
pub struct TorusModel {
    name: String,
    basis: Mat4,
    basis_inv: Mat4,
    generators: Vec<TorusGenerator>,
    inverses: Vec<AutoId>,
    tangents: Vec<Mat4>,
}

fn integer_inverse(m: &[[i64; 4]; 4]) -> Option<[[i64; 4]; 4]> {
    let im = IntMatrix::from_rows(m);
    let det = im.det();
    if det != 1.into() && det != (-1).into() {
        return None;
    }
    // adjugate / det
    let mut inv = [[0i64; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let minor_rows: Vec<Vec<i64>> = (0..4)
                .filter(|&i| i != c)
                .map(|i| (0..4).filter(|&j| j != r).map(|j| m[i][j]).collect())
                .collect();
            let cof = IntMatrix::from_rows(&minor_rows).det();
            let sign = if (r + c) % 2 == 0 { 1 } else { -1 };
            let v = i64::try_from(cof * &det).ok()? * sign;
            inv[r][c] = v;
        }
    }
    Some(inv)
}

fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn reduce_centered(x: f64) -> f64 {
    x - x.round()
}

impl TorusModel {
    /// Standard lattice `Z^4`. Inverses of the given generators are appended
    /// unless already present.
    pub fn new(generators: Vec<TorusGenerator>) -> Result<Self> {
        Self::with_basis(Mat4::identity(), generators)
    }

    pub fn with_basis(basis: Mat4, generators: Vec<TorusGenerator>) -> Result<Self> {
        let basis_inv = basis
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular lattice basis".into()))?;
        if generators.is_empty() {
            return Err(Error::InvalidArgument("torus model needs a generator".into()));
        }
        let mut gens = generators;
        let base_count = gens.len();
        let mut inverses = vec![usize::MAX; base_count];
        for i in 0..base_count {
            let g = gens[i].clone();
            let inv = integer_inverse(&g.matrix).ok_or_else(|| {
                Error::InvalidArgument(format!("generator {} is not invertible over Z", g.name))
            })?;
            // b' = -M^-1 b
            let mut t = [0.0; 4];
            for (r, tr) in t.iter_mut().enumerate() {
                *tr = -(0..4).map(|c| inv[r][c] as f64 * g.translation[c]).sum::<f64>();
            }
            let t = t.map(reduce);
            let existing = gens.iter().position(|h| {
                h.matrix == inv && h.translation.iter().zip(&t).all(|(a, b)| (a - b).abs() < 1e-15)
            });
            match existing {
                Some(j) => {
                    inverses[i] = j;
                    if j < base_count {
                        inverses[j] = i;
                    }
                }
                None => {
                    let j = gens.len();
                    gens.push(TorusGenerator {
                        name: format!("{}^-1", g.name),
                        matrix: inv,
                        translation: t,
                    });
                    inverses[i] = j;
                    inverses.push(i);
                }
            }
        }
        let tangents = gens
            .iter()
            .map(|g| {
                let m = Mat4::from_fn(|r, c| g.matrix[r][c] as f64);
                basis * m * basis_inv
            })
            .collect();
        Ok(TorusModel {
            name: "torus".into(),
            basis,
            basis_inv,
            generators: gens,
            inverses,
            tangents,
        })
    }

    /// The model generated by `[[2,1],[1,1]]` acting on `C^2 / Z[i]^2`.
    pub fn cat_map() -> Self {
        Self::new(vec![TorusGenerator::from_integer_2x2("A", [[2, 1], [1, 1]])])
            .expect("cat map is unimodular")
    }

    pub fn generators(&self) -> &[TorusGenerator] {
        &self.generators
    }

    pub fn generator_id(&self, name: &str) -> Option<AutoId> {
        self.generators.iter().position(|g| g.name == name)
    }

    pub fn basis(&self) -> &Mat4 {
        &self.basis
    }

    /// Lattice coordinates of an ambient vector (not reduced).
    pub fn to_lattice(&self, v: &Vec4) -> Vec4 {
        self.basis_inv * v
    }

    pub fn reduce_point(p: &[f64; 4]) -> TorusPoint {
        p.map(reduce)
    }

    fn check(&self, id: AutoId) -> Result<&TorusGenerator> {
        self.generators.get(id).ok_or(Error::UnknownAutomorphism(id))
    }
}

/// `H -> A^* H A` on Hermitian 2x2 matrices in the basis
/// `(E11, E22, [[0,1],[1,0]], [[0,i],[-i,0]])`.
fn hermitian_action(re: [[i64; 2]; 2], im: [[i64; 2]; 2]) -> IntMatrix {
    type G = (i64, i64);
    let mul = |a: G, b: G| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let add = |a: G, b: G| (a.0 + b.0, a.1 + b.1);
    let a = |r: usize, c: usize| (re[r][c], im[r][c]);
    let basis: [[[G; 2]; 2]; 4] = [
        [[(1, 0), (0, 0)], [(0, 0), (0, 0)]],
        [[(0, 0), (0, 0)], [(0, 0), (1, 0)]],
        [[(0, 0), (1, 0)], [(1, 0), (0, 0)]],
        [[(0, 0), (0, 1)], [(0, -1), (0, 0)]],
    ];
    let mut out = [[0i64; 4]; 4];
    for (k, h) in basis.iter().enumerate() {
        // (A^* H A)_{rc} = sum conj(A_{pr}) H_{pq} A_{qc}
        let mut res = [[(0i64, 0i64); 2]; 2];
        for (r, row) in res.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let mut acc = (0, 0);
                for p in 0..2 {
                    for q in 0..2 {
                        let apr = a(p, r);
                        let conj = (apr.0, -apr.1);
                        acc = add(acc, mul(mul(conj, h[p][q]), a(q, c)));
                    }
                }
                *cell = acc;
            }
        }
        // decompose [[x, b + i c], [b - i c, d]]
        out[0][k] = res[0][0].0;
        out[1][k] = res[1][1].0;
        out[2][k] = res[0][1].0;
        out[3][k] = res[0][1].1;
    }
    IntMatrix::from_rows(&out)
}

pub fn torus_gram() -> IntMatrix {
    IntMatrix::from_rows(&[[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, -2, 0], [0, 0, 0, -2]])
}

impl SurfaceModel for TorusModel {
    type Point = TorusPoint;

    fn name(&self) -> &str {
        &self.name
    }

    fn automorphism_count(&self) -> usize {
        self.generators.len()
    }

    fn automorphism_name(&self, id: AutoId) -> String {
        self.generators.get(id).map(|g| g.name.clone()).unwrap_or_default()
    }

    fn inverse_id(&self, id: AutoId) -> Result<AutoId> {
        self.inverses.get(id).copied().ok_or(Error::UnknownAutomorphism(id))
    }

    fn apply(&self, id: AutoId, p: &TorusPoint) -> Result<TorusPoint> {
        let g = self.check(id)?;
        let mut out = [0.0; 4];
        for (r, o) in out.iter_mut().enumerate() {
            let s: f64 = (0..4).map(|c| g.matrix[r][c] as f64 * p[c]).sum();
            *o = reduce(s + g.translation[r]);
        }
        Ok(out)
    }

    fn tangent(&self, id: AutoId, _p: &TorusPoint) -> Result<Mat4> {
        self.tangents.get(id).copied().ok_or(Error::UnknownAutomorphism(id))
    }

    fn exp(&self, base: &TorusPoint, v: &Vec4) -> Result<TorusPoint> {
        let d = self.basis_inv * v;
        Ok([0, 1, 2, 3].map(|i| reduce(base[i] + d[i])))
    }

    fn log(&self, base: &TorusPoint, p: &TorusPoint) -> Result<Vec4> {
        let d = Vec4::from_fn(|i, _| reduce_centered(p[i] - base[i]));
        Ok(self.basis * d)
    }

    fn transport(&self, _from: &TorusPoint, _to: &TorusPoint, v: &Vec4) -> Result<Vec4> {
        Ok(*v)
    }

    fn distance(&self, p: &TorusPoint, q: &TorusPoint) -> f64 {
        // exact for the standard lattice; nearest image among neighbours otherwise
        let d = Vec4::from_fn(|i, _| reduce_centered(q[i] - p[i]));
        if self.basis == Mat4::identity() {
            return d.norm();
        }
        let mut best = f64::INFINITY;
        for mask in 0..81u32 {
            let mut shift = Vec4::zeros();
            let mut m = mask;
            for i in 0..4 {
                shift[i] = (m % 3) as f64 - 1.0;
                m /= 3;
            }
            best = best.min((self.basis * (d + shift)).norm());
        }
        best
    }

    fn coordinates(&self, p: &TorusPoint) -> Vec<f64> {
        p.to_vec()
    }

    fn cohomology(&self, id: AutoId) -> Option<CohomologyRep> {
        let g = self.generators.get(id)?;
        if self.basis != Mat4::identity() {
            return None;
        }
        let (re, im) = g.gaussian_parts()?;
        Some(CohomologyRep { matrix: hermitian_action(re, im), gram: torus_gram() })
    }

    fn kahler_class(&self) -> Option<Vec<i64>> {
        Some(vec![1, 1, 0, 0])
    }
}

impl TorusModel {
    /// Whether every generator commutes with the complex structure in ambient coordinates.
    pub fn is_holomorphic(&self) -> bool {
        let j = complex_structure();
        self.tangents.iter().all(|t| (t * j - j * t).norm() < 1e-12)
    }

    pub fn int_matrix(&self, id: AutoId) -> Option<IntMatrix> {
        self.generators.get(id).map(|g| g.int_matrix())
    }
}
