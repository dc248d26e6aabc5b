//! Dense complex matrix exponential by scaling and squaring with diagonal
//! Pade approximants (orders 3/5/7/9/13 selected by the 1-norm).
//!
//! Accuracy envelope: backward error below u = 2^-53 per the standard
//! theta thresholds, so the relative forward error is bounded by the
//! problem's own condition number. For strongly non-normal generators the
//! squaring phase can lose accuracy when intermediate powers dwarf the
//! final result; callers needing guarantees in that regime should use the
//! extended-precision propagator instead.

use crate::{CMat, Error, Result};
use num_complex::Complex64;

/// Largest 1-norm accepted before refusing to exponentiate: e^norm would
/// overflow f64 shortly above this, producing silent infinities.
const MAX_NORM: f64 = 700.0;

// Backward-error thresholds theta_m for the [m/m] Pade approximant at
// double precision (Higham 2005, Table 2.3 / Alg 2.3 constants).
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

/// Pade numerator coefficients b_0..b_m for the [m/m] approximant; the
/// denominator uses the same values with alternating signs.
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves (-U + V) X = (U + V) for X, the Pade ratio, given the split of
/// the approximant into even part V and odd part U.
fn pade_solve(u: CMat, v: CMat) -> Result<CMat> {
    let p = &u + &v;
    let q = &v - &u;
    let lu = nalgebra::LU::new(q);
    lu.solve(&p).ok_or(Error::ExpOverflow { norm: f64::NAN })
}

/// Evaluates the order-m Pade approximant for m in {3, 5, 7, 9} where the
/// required even powers a2, a4, ... are passed in ascending order.
fn pade_low(a: &CMat, powers: &[CMat], b: &[f64]) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    // Odd part: U = A (b1 I + b3 A^2 + b5 A^4 + ...), even part analogous.
    let mut u_inner = id.scale(b[1]);
    let mut v = id.scale(b[0]);
    for (k, p) in powers.iter().enumerate() {
        u_inner += p.scale(b[2 * k + 3]);
        v += p.scale(b[2 * k + 2]);
    }
    pade_solve(a * u_inner, v)
}

/// Order-13 evaluation with the factored Horner scheme that needs only
/// A^2, A^4, A^6.
fn pade_13(a: &CMat, a2: &CMat, a4: &CMat, a6: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let b = &B13;
    let u_high = a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]);
    let u_low = a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + id.scale(b[1]);
    let u = a * (a6 * u_high + u_low);
    let v_high = a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]);
    let v = a6 * v_high + a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + id.scale(b[0]);
    pade_solve(u, v)
}

/// exp(A) for a square complex matrix.
pub fn matrix_exponential(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let norm = one_norm(a);
    if !norm.is_finite() || norm > MAX_NORM {
        return Err(Error::ExpOverflow { norm });
    }
    let a2 = a * a;
    if norm <= THETA_3 {
        return pade_low(a, &[a2], &B3);
    }
    let a4 = &a2 * &a2;
    if norm <= THETA_5 {
        return pade_low(a, &[a2, a4], &B5);
    }
    let a6 = &a2 * &a4;
    if norm <= THETA_7 {
        return pade_low(a, &[a2, a4, a6], &B7);
    }
    if norm <= THETA_9 {
        let a8 = &a4 * &a4;
        return pade_low(a, &[a2, a4, a6, a8], &B9);
    }
    // Scale A by 2^-s so the norm falls under theta_13, then square back.
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scale = (0.5f64).powi(s as i32);
    let a_s = a.scale_complex(scale);
    let a2s = a2.scale_complex(scale * scale);
    let a4s = a4.scale_complex(scale.powi(4));
    let a6s = a6.scale_complex(scale.powi(6));
    let mut e = pade_13(&a_s, &a2s, &a4s, &a6s)?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

trait ScaleComplex {
    fn scale_complex(&self, s: f64) -> CMat;
}

impl ScaleComplex for CMat {
    fn scale_complex(&self, s: f64) -> CMat {
        self * Complex64::new(s, 0.0)
    }
}
