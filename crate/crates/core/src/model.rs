//! Model parameters and the PT-symmetric Hamiltonian
//! `H = 2v Sx - 2i gamma Sz`, with its closed-form spectrum.

use crate::dd::{Cdd, CddMat, Dd};
use crate::spin::SpinSystem;
use crate::{is_half_integer, CMat, Error, Result};
use num_complex::Complex64;

/// Spectral regime relative to the exceptional point at `gamma = v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `gamma < v`: real spectrum, oscillatory dynamics.
    Below,
    /// `gamma = v`: all eigenvalues coalesce at zero; H is defective.
    Exceptional,
    /// `gamma > v`: purely imaginary spectrum, exponential dynamics.
    Above,
}

/// Coupling `v > 0`, gain/loss rate `gamma >= 0`, and the spin value.
///
/// The exceptional point sits exactly at `gamma = v`; the regime is always
/// derived from the stored values, never cached.
#[derive(Clone, Copy, Debug)]
pub struct ModelParams {
    pub spin: f64,
    pub v: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(spin: f64, v: f64, gamma: f64) -> Result<Self> {
        if !(spin > 0.0) || !is_half_integer(spin) {
            return Err(Error::InvalidSpin(spin));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("v must be positive, got {v}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        Ok(ModelParams { spin, v, gamma })
    }

    pub fn regime(&self) -> Regime {
        if self.gamma < self.v {
            Regime::Below
        } else if self.gamma > self.v {
            Regime::Above
        } else {
            Regime::Exceptional
        }
    }

    /// Deformation angle `r = atanh(gamma/v)`; finite only below the
    /// exceptional point.
    pub fn deformation_angle(&self) -> f64 {
        (self.gamma / self.v).atanh()
    }

    /// Oscillation frequency `sqrt(v^2 - gamma^2)` below the exceptional
    /// point; the dynamics of the factor system and of all expectation
    /// values is periodic with `T = pi / omega`.
    pub fn omega(&self) -> f64 {
        (self.v * self.v - self.gamma * self.gamma).sqrt()
    }

    /// Period `T = pi / sqrt(v^2 - gamma^2)` of the factor functions and
    /// trace oscillations; `None` at or above the exceptional point.
    pub fn period(&self) -> Option<f64> {
        match self.regime() {
            Regime::Below => Some(std::f64::consts::PI / self.omega()),
            _ => None,
        }
    }
}

/// `H = 2v sx - 2i gamma sz`. Non-Hermitian for `gamma > 0` but always
/// PT-symmetric: `P conj(H) P = H` with parity `m -> -m`.
pub fn build_hamiltonian(sys: &SpinSystem, p: &ModelParams) -> CMat {
    &sys.sx * Complex64::new(2.0 * p.v, 0.0) + &sys.sz * Complex64::new(0.0, -2.0 * p.gamma)
}

/// `H = 2v sx - 2i gamma sz` with entries carried in double-double
/// precision.
///
/// The raising amplitudes are square roots of `S(S+1) - m(m+1)`, which is
/// exactly representable, so every entry here is accurate to the working
/// precision instead of to f64. That matters when certifying the computed
/// spectrum against the closed form: near the exceptional point the
/// eigenvalue condition numbers amplify entry rounding by up to
/// `exp(2 atanh(gamma/v) S)`, which already moves the f64 matrix's true
/// eigenvalues off the closed-form values by ~1e-4 at S=10, gamma=0.9.
pub fn build_hamiltonian_dd(sys: &SpinSystem, p: &ModelParams) -> CddMat {
    let n = sys.dim();
    let mut h = CddMat::zeros(n);
    for k in 0..n {
        let m = p.spin - k as f64;
        h[(k, k)] = Cdd::new(Dd::ZERO, -(Dd::from_f64(2.0 * p.gamma) * Dd::from_f64(m)));
        if k > 0 {
            // 2v * sx entry; sx = (sp + sp^T)/2 halves the raising amplitude.
            let arg = p.spin * (p.spin + 1.0) - m * (m + 1.0);
            let w = Dd::from_f64(arg).sqrt() * Dd::from_f64(p.v);
            h[(k - 1, k)] = Cdd::new(w, Dd::ZERO);
            h[(k, k - 1)] = Cdd::new(w, Dd::ZERO);
        }
    }
    h
}

/// Closed-form eigenvalues `E_m = -2 m sqrt(v^2 - gamma^2)` in the basis
/// order `m = S..-S`. Below the exceptional point the branch is real;
/// above it the square root continues to `-2 m i sqrt(gamma^2 - v^2)`;
/// at the exceptional point all 2S+1 eigenvalues coalesce at zero.
pub fn analytic_spectrum(p: &ModelParams) -> Vec<Complex64> {
    let dim = (2.0 * p.spin) as usize + 1;
    (0..dim)
        .map(|k| {
            let m = p.spin - k as f64;
            match p.regime() {
                Regime::Below => Complex64::new(-2.0 * m * p.omega(), 0.0),
                Regime::Exceptional => Complex64::ZERO,
                Regime::Above => {
                    let w = (p.gamma * p.gamma - p.v * p.v).sqrt();
                    Complex64::new(0.0, -2.0 * m * w)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(10.0, 0.0, 0.5).is_err());
        assert!(ModelParams::new(10.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(0.4, 1.0, 0.1).is_err());
    }

    #[test]
    fn regime_boundaries_are_exact() {
        assert_eq!(ModelParams::new(1.0, 1.0, 0.999).unwrap().regime(), Regime::Below);
        assert_eq!(
            ModelParams::new(1.0, 1.0, 1.0).unwrap().regime(),
            Regime::Exceptional
        );
        assert_eq!(ModelParams::new(1.0, 1.0, 1.001).unwrap().regime(), Regime::Above);
    }

    #[test]
    fn hermitian_limit_at_zero_gamma() {
        let sys = SpinSystem::new(10.0).unwrap();
        let h = build_hamiltonian(&sys, &ModelParams::new(10.0, 1.0, 0.0).unwrap());
        let dev = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn dd_hamiltonian_agrees_with_f64_build_and_squares_exactly() {
        let sys = SpinSystem::new(10.0).unwrap();
        let p = ModelParams::new(10.0, 1.0, 0.9).unwrap();
        let hd = build_hamiltonian_dd(&sys, &p);
        let hf = build_hamiltonian(&sys, &p);
        let dev = (&hd.to_cmat() - &hf).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-15, "dd entries disagree with f64 build: {dev:.2e}");
        // The raising amplitudes square back to the exact integer argument
        // S(S+1) - m(m+1) at dd precision, which f64 entries cannot do.
        for k in 1..sys.dim() {
            let m = p.spin - k as f64;
            let arg = p.spin * (p.spin + 1.0) - m * (m + 1.0);
            let w = hd[(k - 1, k)].re;
            let resid = (w * w - crate::dd::Dd::from_f64(arg)).to_f64().abs();
            assert!(resid < 1e-28 * arg.max(1.0), "k={k}: square residual {resid:.2e}");
        }
    }

    #[test]
    fn spectrum_endpoints_at_zero_gamma() {
        let p = ModelParams::new(10.0, 1.0, 0.0).unwrap();
        let e = analytic_spectrum(&p);
        assert_eq!(e.len(), 21);
        assert_relative_eq!(e[0].re, -20.0);
        assert_relative_eq!(e[20].re, 20.0);
        assert!(e.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn spectrum_collapses_at_exceptional_point() {
        let p = ModelParams::new(10.0, 1.0, 1.0).unwrap();
        assert!(analytic_spectrum(&p).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn spectrum_half_gamma_leading_eigenvalue() {
        let p = ModelParams::new(10.0, 1.0, 0.5).unwrap();
        let e = analytic_spectrum(&p);
        assert_relative_eq!(e[0].re, -20.0 * 0.75f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn spectrum_above_ep_is_imaginary() {
        let p = ModelParams::new(10.0, 1.0, 1.2).unwrap();
        let e = analytic_spectrum(&p);
        assert!(e.iter().all(|z| z.re == 0.0));
        let w = (1.2f64 * 1.2 - 1.0).sqrt();
        assert_relative_eq!(e[0].im, -20.0 * w, epsilon = 1e-12);
    }

    #[test]
    fn period_matches_frequency() {
        let p = ModelParams::new(10.0, 1.0, 0.9).unwrap();
        assert_relative_eq!(p.period().unwrap(), std::f64::consts::PI / 0.19f64.sqrt());
        assert!(ModelParams::new(10.0, 1.0, 1.0).unwrap().period().is_none());
        assert!(ModelParams::new(10.0, 1.0, 1.5).unwrap().period().is_none());
    }
}
