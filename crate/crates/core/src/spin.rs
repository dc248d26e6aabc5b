//! SU(2) representation machinery: spin operators, Dicke and coherent
//! states, and the parity-time symmetry residual.
//!
//! Basis ordering is `m = S, S-1, ..., -S` everywhere: `sz` is diagonal
//! with descending entries and index `k` maps to `m = S - k`.

use crate::{is_half_integer, CMat, CVec, Error, Result};
use num_complex::Complex64;

/// The three dense angular-momentum matrices for one spin value.
///
/// Invariants (validated in tests): `[sx, sy] = i sz` and cyclic,
/// `sx^2 + sy^2 + sz^2 = S(S+1) I`, all three Hermitian, `sz` diagonal.
#[derive(Clone, Debug)]
pub struct SpinSystem {
    spin: f64,
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
}

impl SpinSystem {
    /// Builds the operators from the ladder construction: `S+` has entries
    /// `sqrt(S(S+1) - m(m+1))` one place above the diagonal, and
    /// `sx = (S+ + S-)/2`, `sy = (S+ - S-)/(2i)`.
    pub fn new(spin: f64) -> Result<Self> {
        if !(spin > 0.0) || !is_half_integer(spin) {
            return Err(Error::InvalidSpin(spin));
        }
        let dim = (2.0 * spin) as usize + 1;
        let mut sp = CMat::zeros(dim, dim);
        for k in 1..dim {
            // Raising element <m+1|S+|m> for m = spin - k.
            let m = spin - k as f64;
            let c = (spin * (spin + 1.0) - m * (m + 1.0)).sqrt();
            sp[(k - 1, k)] = Complex64::new(c, 0.0);
        }
        let sm = sp.transpose();
        let sx = (&sp + &sm).scale(0.5);
        let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
        let mut sz = CMat::zeros(dim, dim);
        for k in 0..dim {
            sz[(k, k)] = Complex64::new(spin - k as f64, 0.0);
        }
        Ok(SpinSystem { spin, sx, sy, sz })
    }

    #[inline]
    pub fn spin(&self) -> f64 {
        self.spin
    }

    #[inline]
    pub fn dim(&self) -> usize {
        (2.0 * self.spin) as usize + 1
    }

    /// `m` values in storage order, `S` down to `-S`.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spin - k as f64).collect()
    }
}

/// Ket of fixed spin; the norm is allowed to drift from 1 under
/// non-unitary maps, and constructors produce unit norm.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub spin: f64,
    pub amplitudes: CVec,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Projector |psi><psi| as a dense matrix.
    pub fn projector(&self) -> CMat {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// The `Sz` eigenstate `|S, m>`: a unit basis vector at index `S - m`.
pub fn dicke_state(sys: &SpinSystem, m: f64) -> Result<StateVector> {
    let spin = sys.spin();
    // m must sit on the ladder: within range and an integer step below S.
    if !is_half_integer(m) || m.abs() > spin || (spin - m).fract() != 0.0 {
        return Err(Error::QuantumNumber(format!(
            "m = {m} invalid for spin {spin}"
        )));
    }
    let mut amplitudes = CVec::zeros(sys.dim());
    amplitudes[(spin - m) as usize] = Complex64::ONE;
    Ok(StateVector {
        spin,
        amplitudes,
    })
}

/// Spin coherent state `exp(-i phi Sz) exp(-i theta Sy) |S, S>`.
///
/// Evaluated in closed form: the amplitude on `|S, m>` is
/// `sqrt(C(2S, S-m)) cos(theta/2)^(S+m) sin(theta/2)^(S-m) e^(-i m phi)`,
/// which keeps the construction O(dim) and exact at the poles.
/// The Bloch vector of the result is `S (sin t cos p, sin t sin p, cos t)`.
pub fn coherent_state(sys: &SpinSystem, theta: f64, phi: f64) -> StateVector {
    let spin = sys.spin();
    let dim = sys.dim();
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut amplitudes = CVec::zeros(dim);
    // Binomial coefficients C(2S, k) by the multiplicative recurrence;
    // exact through spin 10 and accurate to a few ulp beyond.
    let n = dim - 1;
    let mut binom = 1.0f64;
    for k in 0..dim {
        let m = spin - k as f64;
        let magnitude = binom.sqrt() * powi_checked(c, spin + m) * powi_checked(s, spin - m);
        amplitudes[k] = Complex64::from_polar(magnitude, -m * phi);
        binom *= (n - k) as f64 / (k + 1) as f64;
    }
    StateVector { spin, amplitudes }
}

/// `base^exp` for a non-negative integer exponent given as f64.
#[inline]
fn powi_checked(base: f64, exp: f64) -> f64 {
    debug_assert!(exp >= 0.0 && exp.fract() == 0.0);
    base.powi(exp as i32)
}

/// Residual of parity-time symmetry: `||P conj(H) P - H||_inf`, where the
/// parity P exchanges `m -> -m` (the anti-diagonal permutation) and complex
/// conjugation implements time reversal in this basis. Zero means symmetric.
pub fn pt_symmetry_check(sys: &SpinSystem, h: &CMat) -> Result<f64> {
    let dim = sys.dim();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, expected {dim}x{dim}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut residual = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            // (P conj(H) P)[i,j] = conj(H[dim-1-i, dim-1-j])
            let mapped = h[(dim - 1 - i, dim - 1 - j)].conj();
            residual = residual.max((mapped - h[(i, j)]).norm());
        }
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ModelParams};
    use approx::assert_relative_eq;

    fn commutator(a: &CMat, b: &CMat) -> CMat {
        a * b - b * a
    }

    fn max_abs(m: &CMat) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_invalid_spin() {
        assert!(SpinSystem::new(0.0).is_err());
        assert!(SpinSystem::new(-1.0).is_err());
        assert!(SpinSystem::new(0.3).is_err());
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let sys = SpinSystem::new(0.5).unwrap();
        assert_relative_eq!(sys.sz[(0, 0)].re, 0.5);
        assert_relative_eq!(sys.sz[(1, 1)].re, -0.5);
        assert_relative_eq!(sys.sx[(0, 1)].re, 0.5);
        assert_relative_eq!(sys.sy[(0, 1)].im, -0.5);
    }

    #[test]
    fn spin_one_ladder_elements() {
        let sys = SpinSystem::new(1.0).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(sys.sx[(0, 1)].re, inv_sqrt2, epsilon = 1e-15);
        assert_relative_eq!(sys.sx[(1, 2)].re, inv_sqrt2, epsilon = 1e-15);
        assert_eq!(sys.sz[(1, 1)], Complex64::ZERO);
    }

    #[test]
    fn algebra_invariants_hold_through_large_spins() {
        for &spin in &[0.5, 1.0, 1.5, 2.0, 7.5, 10.0, 25.0, 50.0] {
            let sys = SpinSystem::new(spin).unwrap();
            let i = Complex64::new(0.0, 1.0);
            let xy = commutator(&sys.sx, &sys.sy) - &sys.sz * i;
            let yz = commutator(&sys.sy, &sys.sz) - &sys.sx * i;
            let zx = commutator(&sys.sz, &sys.sx) - &sys.sy * i;
            assert!(max_abs(&xy) < 1e-12, "spin {spin}");
            assert!(max_abs(&yz) < 1e-12, "spin {spin}");
            assert!(max_abs(&zx) < 1e-12, "spin {spin}");

            let casimir = &sys.sx * &sys.sx + &sys.sy * &sys.sy + &sys.sz * &sys.sz;
            let expected = CMat::identity(sys.dim(), sys.dim()).scale(spin * (spin + 1.0));
            assert!(max_abs(&(casimir - expected)) < 1e-11, "spin {spin}");

            assert!(max_abs(&(sys.sx.adjoint() - &sys.sx)) == 0.0);
            assert!(max_abs(&(sys.sy.adjoint() - &sys.sy)) == 0.0);
        }
    }

    #[test]
    fn dicke_state_is_unit_basis_vector() {
        let sys = SpinSystem::new(10.0).unwrap();
        let top = dicke_state(&sys, 10.0).unwrap();
        assert_eq!(top.amplitudes[0], Complex64::ONE);
        let mid = dicke_state(&sys, 0.0).unwrap();
        assert_eq!(mid.amplitudes[10], Complex64::ONE);
        assert!(dicke_state(&sys, 11.0).is_err());
        assert!(dicke_state(&sys, 0.5).is_err());
    }

    #[test]
    fn coherent_state_at_pole_is_top_dicke() {
        let sys = SpinSystem::new(10.0).unwrap();
        let psi = coherent_state(&sys, 0.0, 0.3);
        assert_relative_eq!(psi.amplitudes[0].norm(), 1.0, epsilon = 1e-14);
        for k in 1..sys.dim() {
            assert_eq!(psi.amplitudes[k], Complex64::ZERO);
        }
    }

    #[test]
    fn coherent_state_matches_rotation_construction() {
        // Cross-check the closed form against exp(-i phi sz) exp(-i theta sy)|S,S>.
        let sys = SpinSystem::new(6.0).unwrap();
        let (theta, phi) = (1.234, -0.677);
        let psi = coherent_state(&sys, theta, phi);
        let i = Complex64::new(0.0, 1.0);
        let rot = crate::expm::matrix_exponential(&(&sys.sz * (-i * phi))).unwrap()
            * crate::expm::matrix_exponential(&(&sys.sy * (-i * theta))).unwrap();
        let top = dicke_state(&sys, 6.0).unwrap();
        let expected = &rot * &top.amplitudes;
        let diff = (&psi.amplitudes - &expected).norm();
        assert!(diff < 1e-13, "closed form vs rotated construction: {diff:.3e}");
    }

    #[test]
    fn coherent_state_bloch_vector() {
        let sys = SpinSystem::new(10.0).unwrap();
        let psi = coherent_state(&sys, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4);
        let expect = |op: &CMat| (psi.amplitudes.adjoint() * op * &psi.amplitudes)[(0, 0)].re;
        let target = 10.0 / 2.0f64.sqrt();
        assert_relative_eq!(expect(&sys.sx), target, epsilon = 1e-10);
        assert_relative_eq!(expect(&sys.sy), target, epsilon = 1e-10);
        assert_relative_eq!(expect(&sys.sz), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn pt_residual_vanishes_for_model_hamiltonian() {
        let sys = SpinSystem::new(10.0).unwrap();
        for &(v, gamma) in &[(1.0, 0.0), (1.0, 0.5), (2.0, 3.0), (0.7, 0.7)] {
            let h = build_hamiltonian(&sys, &ModelParams::new(10.0, v, gamma).unwrap());
            assert!(pt_symmetry_check(&sys, &h).unwrap() < 1e-12);
        }
    }

    #[test]
    fn pt_residual_detects_asymmetric_operator() {
        // sz itself maps to -sz under parity with real entries, so the
        // residual equals 2 ||sz||_inf; documents a non-symmetric case.
        let sys = SpinSystem::new(3.0).unwrap();
        let residual = pt_symmetry_check(&sys, &sys.sz).unwrap();
        assert_relative_eq!(residual, 6.0, epsilon = 1e-14);
        let zero = CMat::zeros(sys.dim(), sys.dim());
        assert_eq!(pt_symmetry_check(&sys, &zero).unwrap(), 0.0);
    }
}
