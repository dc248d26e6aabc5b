//! Orthonormal spherical harmonics with the Condon-Shortley phase.
//!
//! Built from the fully normalized associated Legendre recurrence, which
//! is stable for all orders used here (well beyond L = 100). Negative
//! orders come from the conjugation symmetry
//! `Y_{L,-M} = (-1)^M conj(Y_{L,M})`.

use crate::{Error, Result};
use num_complex::Complex64;

/// Fully normalized associated Legendre value `P~_L^M(cos theta)` for
/// `M >= 0`, defined so that `Y_{L M} = P~_L^M(cos theta) e^{i M phi}`.
/// The Condon-Shortley sign lives in the diagonal seed step.
fn normalized_legendre(l: u32, m: u32, theta: f64) -> f64 {
    let (sin_t, cos_t) = theta.sin_cos();
    // Seed: P~_0^0 = 1/sqrt(4 pi), then walk the diagonal to P~_M^M.
    let mut pmm = 0.5 / std::f64::consts::PI.sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_t;
    }
    if l == m {
        return pmm;
    }
    // First off-diagonal term P~_{M+1}^M, then the three-term recurrence
    // upward in degree.
    let mut p_prev = pmm;
    let mut p_curr = (2.0 * m as f64 + 3.0).sqrt() * cos_t * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let p_next = a * (cos_t * p_curr - b * p_prev);
        p_prev = p_curr;
        p_curr = p_next;
    }
    p_curr
}

/// Spherical harmonic `Y_{L M}(theta, phi)`, orthonormal on the sphere.
pub fn spherical_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() > l {
        return Err(Error::QuantumNumber(format!(
            "order |M| = {} exceeds degree L = {l}",
            m.abs()
        )));
    }
    let m_abs = m.unsigned_abs();
    let p = normalized_legendre(l, m_abs, theta);
    let phase = Complex64::from_polar(1.0, m_abs as f64 * phi);
    let y_pos = phase * p;
    if m >= 0 {
        Ok(y_pos)
    } else {
        // Y_{L,-M} = (-1)^M conj(Y_{L,M}) for M = |m| > 0.
        let sign = if m_abs % 2 == 0 { 1.0 } else { -1.0 };
        Ok(y_pos.conj() * sign)
    }
}
