//! Minimal real-number abstraction so closure products can be evaluated in
//! `f64` or in double-double precision (`twofloat`).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Unit roundoff of the arithmetic.
    fn epsilon() -> f64;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
}

impl Real for TwoFloat {
    fn from_f64(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn sin(self) -> Self {
        dd_sin_cos(self).0
    }
    fn cos(self) -> Self {
        dd_sin_cos(self).1
    }
    fn epsilon() -> f64 {
        1e-31
    }
}

/// Double-double sine and cosine: quadrant reduction by π/2 followed by
/// Taylor series on `[-π/4, π/4]`. `TwoFloat::sin` stops near 1e-21.
fn dd_sin_cos(x: TwoFloat) -> (TwoFloat, TwoFloat) {
    let q = (x.hi() / std::f64::consts::FRAC_PI_2).round();
    let r = x - twofloat::consts::FRAC_PI_2 * q;
    let r2 = r * r;
    let mut s = r;
    let mut c = TwoFloat::from(1.0);
    let mut term_s = r;
    let mut term_c = TwoFloat::from(1.0);
    for n in 1..=16 {
        let k = 2.0 * n as f64;
        term_s = -term_s * r2 / (k * (k + 1.0));
        term_c = -term_c * r2 / (k * (k - 1.0));
        s += term_s;
        c += term_c;
        if term_c.hi().abs() < 1e-36 && term_s.hi().abs() < 1e-36 {
            break;
        }
    }
    match (q as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub(crate) type M3<T> = [[T; 3]; 3];
pub(crate) type M4<T> = [[T; 4]; 4];

pub(crate) fn ident3<T: Real>() -> M3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub(crate) fn ident4<T: Real>() -> M4<T> {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub(crate) fn mul3<T: Real>(a: &M3<T>, b: &M3<T>) -> M3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s = s + a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub(crate) fn mul4<T: Real>(a: &M4<T>, b: &M4<T>) -> M4<T> {
    let mut c = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = T::zero();
            for k in 0..4 {
                s = s + a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub(crate) fn rot_z<T: Real>(a: T) -> M3<T> {
    let (s, c) = (a.sin(), a.cos());
    let z = T::zero();
    [[c, -s, z], [s, c, z], [z, z, T::one()]]
}

pub(crate) fn rot_x<T: Real>(a: T) -> M3<T> {
    let (s, c) = (a.sin(), a.cos());
    let z = T::zero();
    [[T::one(), z, z], [z, c, -s], [z, s, c]]
}

pub(crate) fn homogeneous<T: Real>(r: &M3<T>, t: [T; 3]) -> M4<T> {
    let mut m = ident4::<T>();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j];
        }
        m[i][3] = t[i];
    }
    m
}
