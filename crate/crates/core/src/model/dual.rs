//! Forward-mode dual numbers over `C` with `N` derivative directions.

use crate::linalg::C64;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: C64,
    pub d: [C64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: C64) -> Self {
        Dual { v, d: [C64::new(0.0, 0.0); N] }
    }

    pub fn variable(v: C64, k: usize) -> Self {
        let mut d = [C64::new(0.0, 0.0); N];
        d[k] = C64::new(1.0, 0.0);
        Dual { v, d }
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn scale(self, s: C64) -> Self {
        Dual { v: self.v * s, d: self.d.map(|x| x * s) }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Dual { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { v: -self.v, d: self.d.map(|x| -x) }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [C64::new(0.0, 0.0); N];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = self.d[k] * o.v + self.v * o.d[k];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = C64::new(1.0, 0.0) / o.v;
        let v = self.v * inv;
        let mut d = [C64::new(0.0, 0.0); N];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = (self.d[k] - v * o.d[k]) * inv;
        }
        Dual { v, d }
    }
}
