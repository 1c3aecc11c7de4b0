//! Truncated Taylor series in one variable.
//!
//! `Series<T, N>` implements [`Real`], so closure products and energies can
//! be evaluated along a polynomial path and return every Taylor coefficient
//! up to degree `N - 1` at once.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Series<T, const N: usize>(pub [T; N]);

impl<T: Real, const N: usize> Series<T, N> {
    pub fn constant(c: T) -> Self {
        let mut a = [T::zero(); N];
        a[0] = c;
        Series(a)
    }

    /// Series with the given leading coefficients, zero beyond.
    pub fn from_coeffs(c: &[T]) -> Self {
        let mut a = [T::zero(); N];
        for (x, y) in a.iter_mut().zip(c) {
            *x = *y;
        }
        Series(a)
    }

    pub fn coeff(&self, k: usize) -> T {
        self.0[k]
    }

    /// `k`-th derivative at zero, `k! · c_k`.
    pub fn derivative(&self, k: usize) -> T {
        let mut f = T::one();
        for i in 2..=k {
            f = f * T::from_f64(i as f64);
        }
        self.0[k] * f
    }
}

impl<T: Real, const N: usize> Add for Series<T, N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut a = self.0;
        for (x, y) in a.iter_mut().zip(o.0) {
            *x = *x + y;
        }
        Series(a)
    }
}

impl<T: Real, const N: usize> Sub for Series<T, N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut a = self.0;
        for (x, y) in a.iter_mut().zip(o.0) {
            *x = *x - y;
        }
        Series(a)
    }
}

impl<T: Real, const N: usize> Neg for Series<T, N> {
    type Output = Self;
    fn neg(self) -> Self {
        Series(self.0.map(|x| -x))
    }
}

impl<T: Real, const N: usize> Mul for Series<T, N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [T::zero(); N];
        for i in 0..N {
            if self.0[i] == T::zero() {
                continue;
            }
            for j in 0..N - i {
                c[i + j] = c[i + j] + self.0[i] * o.0[j];
            }
        }
        Series(c)
    }
}

impl<T: Real, const N: usize> Div for Series<T, N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut q = [T::zero(); N];
        for k in 0..N {
            let mut s = self.0[k];
            for j in 1..=k {
                s = s - o.0[j] * q[k - j];
            }
            q[k] = s / o.0[0];
        }
        Series(q)
    }
}

impl<T: Real, const N: usize> Real for Series<T, N> {
    fn from_f64(x: f64) -> Self {
        Series::constant(T::from_f64(x))
    }

    fn to_f64(self) -> f64 {
        self.0[0].to_f64()
    }

    fn sin(self) -> Self {
        sin_cos(&self).0
    }

    fn cos(self) -> Self {
        sin_cos(&self).1
    }

    fn epsilon() -> f64 {
        T::epsilon()
    }
}

fn sin_cos<T: Real, const N: usize>(u: &Series<T, N>) -> (Series<T, N>, Series<T, N>) {
    let mut s = [T::zero(); N];
    let mut c = [T::zero(); N];
    s[0] = u.0[0].sin();
    c[0] = u.0[0].cos();
    for k in 1..N {
        let mut sk = T::zero();
        let mut ck = T::zero();
        for j in 1..=k {
            let ju = T::from_f64(j as f64) * u.0[j];
            sk = sk + ju * c[k - j];
            ck = ck - ju * s[k - j];
        }
        let kk = T::from_f64(k as f64);
        s[k] = sk / kk;
        c[k] = ck / kk;
    }
    (Series(s), Series(c))
}
