//! Small dense linear-algebra helpers for the 4-dimensional real tangent
//! cocycle. Tangent spaces are complex 2-dimensional and are stored in real
//! coordinates `(Re z1, Re z2, Im z1, Im z2)`.

use nalgebra::{Complex, Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector4};

pub type Mat4 = Matrix4<f64>;
pub type Vec4 = Vector4<f64>;
/// A 2-plane in R^4 given by (usually orthonormal) columns.
pub type Frame = SMatrix<f64, 4, 2>;
pub type C64 = Complex<f64>;

/// Multiplication by `i` in real coordinates.
pub fn complex_structure() -> Mat4 {
    let mut j = Mat4::zeros();
    j[(0, 2)] = -1.0;
    j[(1, 3)] = -1.0;
    j[(2, 0)] = 1.0;
    j[(3, 1)] = 1.0;
    j
}

/// Real 4x4 representation of a complex 2x2 matrix `P + iQ`: `[[P, -Q], [Q, P]]`.
pub fn complex_to_real(m: &Matrix2<C64>) -> Mat4 {
    let mut r = Mat4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let z = m[(a, b)];
            r[(a, b)] = z.re;
            r[(a + 2, b + 2)] = z.re;
            r[(a, b + 2)] = -z.im;
            r[(a + 2, b)] = z.im;
        }
    }
    r
}

/// Embeds a complex 2-vector into R^4.
pub fn c2_to_real(z: [C64; 2]) -> Vec4 {
    Vec4::new(z[0].re, z[1].re, z[0].im, z[1].im)
}

pub fn real_to_c2(v: &Vec4) -> [C64; 2] {
    [C64::new(v[0], v[2]), C64::new(v[1], v[3])]
}

/// Orthonormalizes the columns of `f` (modified Gram-Schmidt).
/// Returns the orthonormal frame and `log |det R|`.
pub fn orthonormalize(f: &Frame) -> (Frame, f64) {
    let mut q = *f;
    let mut log_det = 0.0;
    for j in 0..2 {
        let mut col = q.column(j).into_owned();
        for k in 0..j {
            let qk = q.column(k).into_owned();
            col -= qk * qk.dot(&col);
        }
        let n = col.norm();
        log_det += n.ln();
        q.set_column(j, &(col / n));
    }
    (q, log_det)
}

/// Complex line spanned by `v`, as the orthonormal real frame `[v, Jv] / |v|`.
pub fn complex_line(v: &Vec4) -> Frame {
    let u = v / v.norm();
    let ju = complex_structure() * u;
    Frame::from_columns(&[u, ju])
}

/// Pushes a frame through `m`, re-orthonormalizes, returns the new frame
/// and the log of the area growth.
pub fn push_frame(m: &Mat4, f: &Frame) -> (Frame, f64) {
    orthonormalize(&(m * f))
}

pub fn projector(f: &Frame) -> Mat4 {
    f * f.transpose()
}

/// Grassmann distance between two planes given by orthonormal frames:
/// the spectral norm of the difference of orthogonal projectors, which is
/// the sine of the largest principal angle.
pub fn grassmann_distance(a: &Frame, b: &Frame) -> f64 {
    let d = projector(a) - projector(b);
    SymmetricEigen::new(d)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.abs()))
}

/// Smallest principal angle between two planes given by orthonormal frames.
pub fn min_principal_angle(a: &Frame, b: &Frame) -> f64 {
    let c = a.transpose() * b;
    let s = c.singular_values();
    let cmax = s.iter().fold(0.0_f64, |m, x| m.max(*x)).min(1.0);
    cmax.acos()
}

/// Symmetric square root and inverse square root of an SPD 2x2 matrix.
pub fn spd_sqrt(g: &Matrix2<f64>) -> (Matrix2<f64>, Matrix2<f64>) {
    let eig = SymmetricEigen::new(*g);
    let v = eig.eigenvectors;
    let s = Matrix2::from_diagonal(&eig.eigenvalues.map(|e| e.max(0.0).sqrt()));
    let si = Matrix2::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.max(f64::MIN_POSITIVE).sqrt()));
    (v * s * v.transpose(), v * si * v.transpose())
}

/// Stable `log(sum(exp(x_i)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_rep_is_multiplicative() {
        let a = Matrix2::new(
            C64::new(1.0, 2.0),
            C64::new(0.5, -1.0),
            C64::new(0.0, 1.0),
            C64::new(3.0, 0.0),
        );
        let b = Matrix2::new(
            C64::new(-1.0, 0.5),
            C64::new(2.0, 0.0),
            C64::new(1.0, 1.0),
            C64::new(0.0, -2.0),
        );
        let lhs = complex_to_real(&(a * b));
        let rhs = complex_to_real(&a) * complex_to_real(&b);
        assert!((lhs - rhs).norm() < 1e-12);
        // commutes with J
        let j = complex_structure();
        assert!((complex_to_real(&a) * j - j * complex_to_real(&a)).norm() < 1e-12);
    }

    #[test]
    fn grassmann_distance_of_orthogonal_planes_is_one() {
        let a = Frame::from_columns(&[Vec4::x(), Vec4::y()]);
        let b = Frame::from_columns(&[Vec4::z(), Vec4::w()]);
        assert!((grassmann_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert!(grassmann_distance(&a, &a) < 1e-12);
        assert!((min_principal_angle(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1, -2.0, 3.0];
        let direct = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }
}
