//! Clebsch-Gordan coefficients and irreducible spherical tensor operators.
//!
//! Coefficients follow the Condon-Shortley phase convention and are
//! computed from the Racah single-sum formula. Factorial logarithms are
//! accumulated in double-double precision so the only f64-level rounding
//! left is the `ln` of each integer and the final `exp`; the alternating
//! sum itself is also carried in double-double to blunt cancellation.

use crate::dd::Dd;
use crate::spin::SpinSystem;
use crate::{CMat, Error, Result};
use num_complex::Complex64;
use std::sync::OnceLock;

/// Largest factorial argument supported; covers couplings up to
/// j1 + j2 + J + 1 = 4094, far beyond any practical spin here.
const LNFACT_LEN: usize = 4096;

fn lnfact_table() -> &'static Vec<Dd> {
    static TABLE: OnceLock<Vec<Dd>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LNFACT_LEN);
        t.push(Dd::ZERO);
        for k in 1..LNFACT_LEN {
            let prev = t[k - 1];
            t.push(prev + Dd::from_f64((k as f64).ln()));
        }
        t
    })
}

fn lnfact(n: i64) -> Result<Dd> {
    if n < 0 || n as usize >= LNFACT_LEN {
        return Err(Error::QuantumNumber(format!(
            "factorial argument {n} outside supported range"
        )));
    }
    Ok(lnfact_table()[n as usize])
}

/// Doubled quantum number as an integer, rejecting values that are not
/// half-integers.
fn doubled(x: f64, what: &str) -> Result<i64> {
    let t = 2.0 * x;
    if !t.is_finite() || (t - t.round()).abs() > 1e-9 || t.abs() > 1e12 {
        return Err(Error::QuantumNumber(format!(
            "{what} = {x} is not a half-integer"
        )));
    }
    Ok(t.round() as i64)
}

/// Doubled (j, m) pair with the ladder constraints `j >= 0`, `|m| <= j`,
/// and `j - m` integer.
fn doubled_pair(j: f64, m: f64, what: &str) -> Result<(i64, i64)> {
    let tj = doubled(j, what)?;
    let tm = doubled(m, &format!("m of {what}"))?;
    if tj < 0 {
        return Err(Error::QuantumNumber(format!("{what} = {j} is negative")));
    }
    if tm.abs() > tj || (tj - tm) % 2 != 0 {
        return Err(Error::QuantumNumber(format!(
            "projection m = {m} is not on the {what} = {j} ladder"
        )));
    }
    Ok((tj, tm))
}

/// Clebsch-Gordan coefficient `C^{J M}_{j1 m1; j2 m2}` coupling
/// `|j1 m1> |j2 m2>` to `|J M>` (Condon-Shortley phase).
///
/// Violated selection rules (M != m1 + m2, triangle inequality,
/// non-integer total j1 + j2 + J, M off the J ladder) give exact 0;
/// malformed input states `|j m>` are an error. The target pair gets the
/// laxer treatment because a legal product state can always be asked for
/// its component along a non-existent |J M>, and that component is zero.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    let (tj1, tm1) = doubled_pair(j1, m1, "j1")?;
    let (tj2, tm2) = doubled_pair(j2, m2, "j2")?;
    let tj = doubled(j, "J")?;
    let tm = doubled(m, "M of J")?;
    if tj < 0 {
        return Err(Error::QuantumNumber(format!("J = {j} is negative")));
    }

    if tm1 + tm2 != tm
        || tj < (tj1 - tj2).abs()
        || tj > tj1 + tj2
        || (tj1 + tj2 + tj) % 2 != 0
        || tm.abs() > tj
        || (tj - tm) % 2 != 0
    {
        return Ok(0.0);
    }

    // Everything below works with true (undoubled) integer combinations.
    let a1 = (tj1 + tj2 - tj) / 2;
    let a2 = (tj1 - tj2 + tj) / 2;
    let a3 = (-tj1 + tj2 + tj) / 2;
    let ln_delta2 = lnfact(a1)? + lnfact(a2)? + lnfact(a3)? - lnfact((tj1 + tj2 + tj) / 2 + 1)?;
    let ln_proj = lnfact((tj1 + tm1) / 2)?
        + lnfact((tj1 - tm1) / 2)?
        + lnfact((tj2 + tm2) / 2)?
        + lnfact((tj2 - tm2) / 2)?
        + lnfact((tj + tm) / 2)?
        + lnfact((tj - tm) / 2)?;
    let ln_pre = (Dd::from_f64(((tj + 1) as f64).ln()) + ln_delta2 + ln_proj) * Dd::from_f64(0.5);

    let k_min = 0
        .max((tj2 - tj - tm1) / 2)
        .max((tj1 + tm2 - tj) / 2);
    let k_max = a1.min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);

    let mut sum = Dd::ZERO;
    for k in k_min..=k_max {
        let ln_den = lnfact(k)?
            + lnfact(a1 - k)?
            + lnfact((tj1 - tm1) / 2 - k)?
            + lnfact((tj2 + tm2) / 2 - k)?
            + lnfact((tj - tj2 + tm1) / 2 + k)?
            + lnfact((tj - tj1 - tm2) / 2 + k)?;
        let term = (ln_pre - ln_den).to_f64().exp();
        if k % 2 == 0 {
            sum = sum + Dd::from_f64(term);
        } else {
            sum = sum - Dd::from_f64(term);
        }
    }
    Ok(sum.to_f64())
}

/// Irreducible spherical tensor operator `T_{L M}` on the spin-S space,
/// with elements `sqrt((2L+1)/(2S+1)) * C^{S m'}_{S m; L M}` at row m',
/// column m (basis ordered m = S..-S).
pub fn tensor_operator(sys: &SpinSystem, l: u32, m: i32) -> Result<CMat> {
    let spin = sys.spin();
    let dim = sys.dim();
    let two_s = dim - 1;
    if l as usize > two_s {
        return Err(Error::QuantumNumber(format!(
            "rank L = {l} exceeds 2S = {two_s}"
        )));
    }
    if m.unsigned_abs() > l {
        return Err(Error::QuantumNumber(format!(
            "component M = {m} exceeds rank L = {l}"
        )));
    }
    let scale = ((2.0 * l as f64 + 1.0) / dim as f64).sqrt();
    let mut t = CMat::zeros(dim, dim);
    for col in 0..dim {
        // Selection rule m' = m + M pins one row per column.
        let row = col as i64 - m as i64;
        if row < 0 || row >= dim as i64 {
            continue;
        }
        let m_in = spin - col as f64;
        let m_out = spin - row as f64;
        let c = clebsch_gordan(spin, m_in, l as f64, m as f64, spin, m_out)?;
        t[(row as usize, col)] = Complex64::new(scale * c, 0.0);
    }
    Ok(t)
}
