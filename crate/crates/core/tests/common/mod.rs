//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use mathieu_sg::trirec::Truncation;

pub fn dense(t: &Truncation) -> DMatrix<f64> {
    let rows = t.to_dense();
    let m = rows.len();
    DMatrix::from_fn(m, m, |i, j| rows[i][j])
}

/// Real eigenvalues of the (possibly nonsymmetric) dense truncation, sorted.
pub fn dense_eigenvalues(t: &Truncation) -> Vec<f64> {
    let a = dense(t);
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Right null vector of `T - lambda` from the smallest singular value.
pub fn dense_null_vector(t: &Truncation, lambda: f64) -> Vec<f64> {
    let m = t.m();
    let a = dense(t) - DMatrix::<f64>::identity(m, m) * lambda;
    let svd = a.svd(false, true);
    let vt = svd.v_t.unwrap();
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    (0..m).map(|c| vt[(imin, c)]).collect()
}

/// Eigenpair by dense eigensolve: k-th eigenvalue (1-based) and its null vector.
pub fn dense_eigenpair(t: &Truncation, k: usize) -> (f64, Vec<f64>) {
    let ev = dense_eigenvalues(t);
    let l = ev[k - 1];
    (l, dense_null_vector(t, l))
}

/// Sturm bisection in binary fixed point with `bits` fractional bits, on the
/// symmetric form with squared couplings `upper*lower` formed exactly.
pub struct BigSturm {
    pub bits: u32,
    diag: Vec<BigInt>,
    b2: Vec<BigInt>,
}

pub fn to_fixed(x: f64, bits: u32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bitsx = x.to_bits();
    let sign = if bitsx >> 63 == 1 { -1 } else { 1 };
    let exp = ((bitsx >> 52) & 0x7ff) as i64;
    let frac = bitsx & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let shift = e + bits as i64;
    assert!(shift >= 0, "value too small for the fixed-point scale");
    let v = BigInt::from(mant) << (shift as usize);
    if sign < 0 {
        -v
    } else {
        v
    }
}

/// `v * 2^-bits` as f64 without overflow.
pub fn from_fixed(v: &BigInt, bits: u32) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let len = v.bits() as i64;
    let drop = (len - 64).max(0);
    let top = (v.abs() >> (drop as usize)).to_f64().unwrap();
    let s = if v.is_negative() { -1.0 } else { 1.0 };
    s * top * 2f64.powi((drop - bits as i64) as i32)
}

impl BigSturm {
    pub fn new(t: &Truncation, bits: u32) -> Self {
        let diag = t.diag.iter().map(|&d| to_fixed(d, bits)).collect();
        let b2 = t
            .upper
            .iter()
            .zip(&t.lower)
            .map(|(&u, &l)| (to_fixed(u, bits) * to_fixed(l, bits)) >> (bits as usize))
            .collect();
        BigSturm { bits, diag, b2 }
    }

    pub fn count_below(&self, x: &BigInt) -> usize {
        let mut count = 0;
        let mut q = BigInt::zero();
        for (p, d) in self.diag.iter().enumerate() {
            q = if p == 0 {
                d - x
            } else {
                d - x - ((&self.b2[p - 1] << (self.bits as usize)) / &q)
            };
            if q.is_zero() {
                q = BigInt::from(1);
            }
            if q.is_negative() {
                count += 1;
            }
        }
        count
    }

    /// k-th eigenvalue (1-based) inside `[lo, hi]`, to full fixed-point precision.
    pub fn kth(&self, k: usize, lo: f64, hi: f64) -> BigInt {
        let mut lo = to_fixed(lo, self.bits);
        let mut hi = to_fixed(hi, self.bits);
        assert!(self.count_below(&lo) < k && self.count_below(&hi) >= k, "bracket does not contain eigenvalue {k}");
        let one = BigInt::from(1);
        while &hi - &lo > one {
            let mid: BigInt = (&lo + &hi) >> 1usize;
            if self.count_below(&mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Classical RK4 monodromy trace of `u'' + (delta + eps cos t) u = 0` over 2*pi.
pub fn rk4_trace(delta: f64, eps: f64, steps: usize) -> f64 {
    let h = 2.0 * std::f64::consts::PI / steps as f64;
    let f = |t: f64, y: [f64; 4]| -> [f64; 4] {
        let q = delta + eps * t.cos();
        [y[1], -q * y[0], y[3], -q * y[2]]
    };
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, y);
        let a: [f64; 4] = std::array::from_fn(|j| y[j] + 0.5 * h * k1[j]);
        let k2 = f(t + 0.5 * h, a);
        let b: [f64; 4] = std::array::from_fn(|j| y[j] + 0.5 * h * k2[j]);
        let k3 = f(t + 0.5 * h, b);
        let c: [f64; 4] = std::array::from_fn(|j| y[j] + h * k3[j]);
        let k4 = f(t + h, c);
        for j in 0..4 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y[0] + y[3]
}

/// Normwise relative distance between two vectors after aligning scale and sign
/// on the largest entry of `reference`.
pub fn aligned_distance(v: &[f64], reference: &[f64]) -> f64 {
    let (imax, _) = reference.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
    let s = reference[imax] / v[imax];
    let scale = reference[imax].abs();
    v.iter().zip(reference).map(|(a, b)| (a * s - b).abs()).fold(0.0, f64::max) / scale
}
