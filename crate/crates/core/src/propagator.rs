//! Three independent constructions of the evolution operator
//! `U(t) = e^{-iHt}` plus the deformation diagnostic.
//!
//! * direct: scaling-and-squaring exponential of `-iHt`, the reference
//!   below the conditioning wall;
//! * diagonalization: similarity sandwich `e^{r Sy} e^{-2i w t Sx} e^{-r Sy}`
//!   (hyperbolic branch above the exceptional point), whose error grows
//!   like the sandwich condition number as `gamma -> v`;
//! * disentangling: `e^{-f Sz} e^{-g Sy} e^{-i h Sx}` with real factor
//!   functions from a well-conditioned ODE, stable arbitrarily close to
//!   the exceptional point.
//!
//! A double-double sequential-product exponential is included as the
//! extended-precision referee for accuracy claims that exceed what f64
//! conditioning admits.

use crate::dd::{CddMat, Dd};
use crate::expm::matrix_exponential;
use crate::model::{build_hamiltonian, ModelParams, Regime};
use crate::ode::{integrate_dense, DenseOutput, Dopri5Options};
use crate::spin::{coherent_state, SpinSystem, StateVector};
use crate::{CMat, Error, Result};
use num_complex::Complex64;

/// Which construction produced a propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Direct,
    Diagonalization,
    Disentangling,
}

/// Evolution operator at a single time.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub matrix: CMat,
    pub t: f64,
    pub method: Method,
}

fn check_consistent(sys: &SpinSystem, p: &ModelParams) -> Result<()> {
    if sys.spin() != p.spin {
        return Err(Error::DimensionMismatch(format!(
            "spin system S = {} does not match parameters S = {}",
            sys.spin(),
            p.spin
        )));
    }
    Ok(())
}

fn ensure_finite(matrix: CMat, t: f64, method: Method) -> Result<Propagator> {
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpOverflow {
            norm: 2.0 * t.abs(),
        });
    }
    Ok(Propagator { matrix, t, method })
}

/// Largest `||-iHt||_1` the f64 scaling-and-squaring route is allowed to
/// handle for a non-Hermitian model: the single-Pade threshold, below
/// which no squaring happens. Squaring a non-normal propagator amplifies
/// rounding by the norm hump `||U(t/2)||^2 / ||U(t)||`, which for this
/// model grows like `exp(2 atanh(gamma/v) S)` per period and destroys
/// f64 results entirely by t ~ 10 at gamma = 0.9.
const DIRECT_F64_NORM_LIMIT: f64 = 5.37;

/// `U(t) = e^{-iHt}`, the reference construction.
///
/// Small arguments (and every Hermitian one) go through f64
/// scaling-and-squaring; non-Hermitian arguments past the single-Pade
/// threshold are handed to the double-double sequential engine, whose
/// accuracy survives the norm humps that break f64 squaring.
pub fn propagator_direct(sys: &SpinSystem, p: &ModelParams, t: f64) -> Result<Propagator> {
    check_consistent(sys, p)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    let h = build_hamiltonian(sys, p);
    let hnorm = (0..sys.dim())
        .map(|j| (0..sys.dim()).map(|i| h[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let u = if p.gamma == 0.0 || t.abs() * hnorm <= DIRECT_F64_NORM_LIMIT {
        matrix_exponential(&(&h * Complex64::new(0.0, -t)))?
    } else {
        propagator_direct_dd(sys, p, t)?
    };
    ensure_finite(u, t, Method::Direct)
}

/// Condition estimate of the diagonalization sandwich, `exp(2 r S)` with
/// `r = atanh(gamma/v)` below the exceptional point and `r = atanh(v/gamma)`
/// above it. Values beyond ~1e8 mean the similarity amplifies rounding
/// past single-precision-equivalent accuracy; callers should prefer the
/// disentangling construction there.
pub fn diag_condition_estimate(p: &ModelParams) -> f64 {
    let ratio = match p.regime() {
        Regime::Below => p.gamma / p.v,
        Regime::Above => p.v / p.gamma,
        Regime::Exceptional => return f64::INFINITY,
    };
    (2.0 * ratio.atanh() * p.spin).exp()
}

/// `U(t)` by the similarity sandwich. Oscillatory branch for `gamma < v`,
/// hyperbolic branch for `gamma > v`; refuses the exceptional point where
/// the transform degenerates.
pub fn propagator_diag(sys: &SpinSystem, p: &ModelParams, t: f64) -> Result<Propagator> {
    check_consistent(sys, p)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    let dim = sys.dim();
    let u = match p.regime() {
        Regime::Exceptional => return Err(Error::AtExceptionalPoint),
        Regime::Below => {
            let r = p.deformation_angle();
            let deform = matrix_exponential(&(&sys.sy * Complex64::new(r, 0.0)))?;
            let undeform = matrix_exponential(&(&sys.sy * Complex64::new(-r, 0.0)))?;
            let rot = matrix_exponential(&(&sys.sx * Complex64::new(0.0, -2.0 * p.omega() * t)))?;
            deform * rot * undeform
        }
        Regime::Above => {
            let alpha = (p.v / p.gamma).atanh();
            let w = (p.gamma * p.gamma - p.v * p.v).sqrt();
            let deform = matrix_exponential(&(&sys.sy * Complex64::new(alpha, 0.0)))?;
            let undeform = matrix_exponential(&(&sys.sy * Complex64::new(-alpha, 0.0)))?;
            // Middle factor e^{-2 w t Sz} is diagonal; take it entrywise.
            let middle = CMat::from_fn(dim, dim, |i, j| {
                if i == j {
                    Complex64::new((-2.0 * w * t * (p.spin - i as f64)).exp(), 0.0)
                } else {
                    Complex64::ZERO
                }
            });
            deform * middle * undeform
        }
    };
    ensure_finite(u, t, Method::Diagonalization)
}

/// Real factor functions of the disentangled form
/// `U(t) = e^{-f Sz} e^{-g Sy} e^{-i h Sx}`, integrated from
/// `df/dt = 2v tanh(g) cosh(f) + 2 gamma`, `dg/dt = -2v sinh(f)`,
/// `dh/dt = 2v cosh(f)/cosh(g)` with `f(0) = g(0) = h(0) = 0`.
///
/// The sampled vectors are an output convenience; evaluation at
/// arbitrary times inside the range goes through the dense interpolant.
#[derive(Clone, Debug)]
pub struct DisentanglingFactors {
    times: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    dense: DenseOutput<3>,
}

impl DisentanglingFactors {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn t_max(&self) -> f64 {
        self.dense.t_end()
    }

    /// Factor values `(f, g, h)` at any time inside the integrated span.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        if t == 0.0 {
            return Ok((0.0, 0.0, 0.0));
        }
        let y = self.dense.eval(t)?;
        Ok((y[0], y[1], y[2]))
    }
}

fn factor_rhs(v: f64, gamma: f64) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |_t, y| {
        let [f, g, _h] = *y;
        [
            2.0 * v * g.tanh() * f.cosh() + 2.0 * gamma,
            -2.0 * v * f.sinh(),
            2.0 * v * f.cosh() / g.cosh(),
        ]
    }
}

/// Integrate the factor system over `[0, t_max]`, sampling every `dt_out`.
pub fn disentangle(p: &ModelParams, t_max: f64, dt_out: f64) -> Result<DisentanglingFactors> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if !(dt_out > 0.0) || !dt_out.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dt_out must be positive, got {dt_out}"
        )));
    }
    let opt = Dopri5Options::default();
    let dense = integrate_dense(factor_rhs(p.v, p.gamma), 0.0, t_max, [0.0; 3], &opt)?;

    let n_samples = (t_max / dt_out + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(n_samples + 1);
    let mut f = Vec::with_capacity(n_samples + 1);
    let mut g = Vec::with_capacity(n_samples + 1);
    let mut h = Vec::with_capacity(n_samples + 1);
    // The initial condition is exact; never interpolate it.
    times.push(0.0);
    f.push(0.0);
    g.push(0.0);
    h.push(0.0);
    for k in 1..=n_samples {
        let t = k as f64 * dt_out;
        let y = dense.eval(t.min(t_max))?;
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::IntegrationFailure {
                t,
                reason: "factor functions left the finite range".into(),
            });
        }
        times.push(t);
        f.push(y[0]);
        g.push(y[1]);
        h.push(y[2]);
    }
    Ok(DisentanglingFactors {
        times,
        f,
        g,
        h,
        dense,
    })
}

/// `U(t)` assembled from the disentangling factors:
/// diagonal `e^{-f Sz}` taken entrywise, `e^{-g Sy}` and `e^{-i h Sx}`
/// by scaling-and-squaring.
pub fn propagator_disentangled(
    sys: &SpinSystem,
    factors: &DisentanglingFactors,
    t: f64,
) -> Result<Propagator> {
    let (f, g, h) = factors.eval(t)?;
    let dim = sys.dim();
    let left = CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new((-f * (sys.spin() - i as f64)).exp(), 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let mid = matrix_exponential(&(&sys.sy * Complex64::new(-g, 0.0)))?;
    let right = matrix_exponential(&(&sys.sx * Complex64::new(0.0, -h)))?;
    ensure_finite(left * mid * right, t, Method::Disentangling)
}

/// Extended-precision `U(t)` referee: a double-double Taylor base step
/// `B = e^{-iH delta}` composed sequentially `U = B^n`, on a Hamiltonian
/// whose entries are themselves double-double accurate. Far slower than
/// f64 scaling-and-squaring and accurate to ~1e-28 relative per unit
/// norm, which keeps it trustworthy where f64 conditioning (growing like
/// `exp(2 r S)`) has destroyed every f64 route; the dd entries matter
/// because the same conditioning amplifies f64 entry rounding to ~1e-4
/// by gamma = 0.9.
pub fn propagator_direct_dd(sys: &SpinSystem, p: &ModelParams, t: f64) -> Result<CMat> {
    let out = propagator_step_dd(sys, p, t)?.to_cmat();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpOverflow { norm: 2.0 * t });
    }
    Ok(out)
}

/// `U(t)` in full double-double representation, for consumers that
/// compose long step sequences themselves (a stepped series keeps its
/// accuracy only if the running product never drops to f64, since each
/// norm-hump transit amplifies whatever error is present at its foot).
pub fn propagator_step_dd(sys: &SpinSystem, p: &ModelParams, t: f64) -> Result<CddMat> {
    check_consistent(sys, p)?;
    let dim = sys.dim();
    if t == 0.0 {
        return Ok(CddMat::identity(dim));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "referee propagator expects finite t, got {t}"
        )));
    }
    let h = crate::model::build_hamiltonian_dd(sys, p);
    let hnorm = (0..dim)
        .map(|i| (0..dim).map(|j| h[(i, j)].abs().to_f64()).sum::<f64>())
        .fold(0.0, f64::max);
    // Keep the Taylor argument at norm <= ~1 so 50 terms reach the
    // double-double floor.
    let delta_target = (1.0 / hnorm.max(1.0)).min(0.05);
    let n = (t.abs() / delta_target).ceil() as usize;
    let delta = Dd::from_f64(t) * Dd::from_f64(n as f64).recip();

    // Base step by Taylor series of (-i H delta).
    let mut arg = CddMat::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let z = h[(i, j)];
            // -i (re + i im) = im - i re
            arg[(i, j)] = crate::dd::Cdd::new(z.im, -z.re) * delta;
        }
    }
    let mut base = CddMat::identity(dim);
    let mut term = CddMat::identity(dim);
    for k in 1..=60u32 {
        term = term.mul(&arg).scale(Dd::from_f64(k as f64).recip());
        base = base.add(&term);
        if term.max_abs() < 1e-40 * base.max_abs() {
            break;
        }
    }

    let mut u = CddMat::identity(dim);
    for _ in 0..n {
        u = u.mul(&base);
    }
    Ok(u)
}

/// Best coherent-state fit of the deformed state `e^{-r Sy} psi`:
/// returns the squared overlap with the optimal coherent state and the
/// fitted direction `(theta, phi)`.
pub fn deformation_fit(
    sys: &SpinSystem,
    p: &ModelParams,
    psi: &StateVector,
) -> Result<(f64, f64, f64)> {
    check_consistent(sys, p)?;
    if psi.spin != sys.spin() {
        return Err(Error::DimensionMismatch(format!(
            "state spin {} does not match system spin {}",
            psi.spin,
            sys.spin()
        )));
    }
    if p.regime() != Regime::Below {
        return Err(Error::InvalidArgument(
            "deformation is defined below the exceptional point (gamma < v)".into(),
        ));
    }
    let r = p.deformation_angle();
    let deform = matrix_exponential(&(&sys.sy * Complex64::new(-r, 0.0)))?;
    let mut state = &deform * &psi.amplitudes;
    let norm = state.norm();
    if norm < 1e-300 {
        return Err(Error::VanishingTrace(norm));
    }
    state /= Complex64::new(norm, 0.0);

    let overlap_sq = |theta: f64, phi: f64| -> f64 {
        let coh = coherent_state(sys, theta, phi);
        coh.amplitudes.dotc(&state).norm_sqr()
    };

    // Coarse grid, then shrinking local 5x5 refinement.
    let mut best = (f64::MIN, 0.0, 0.0);
    let n_t = 48;
    let n_p = 96;
    for i in 0..=n_t {
        let theta = std::f64::consts::PI * i as f64 / n_t as f64;
        for j in 0..n_p {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_p as f64 - std::f64::consts::PI;
            let o = overlap_sq(theta, phi);
            if o > best.0 {
                best = (o, theta, phi);
            }
        }
    }
    let mut half_t = std::f64::consts::PI / n_t as f64;
    let mut half_p = std::f64::consts::PI / n_p as f64 * 2.0;
    for _ in 0..40 {
        let (_, t0, p0) = best;
        for di in -2..=2i32 {
            for dj in -2..=2i32 {
                let theta = (t0 + half_t * di as f64 / 2.0).clamp(0.0, std::f64::consts::PI);
                let phi = p0 + half_p * dj as f64 / 2.0;
                let o = overlap_sq(theta, phi);
                if o > best.0 {
                    best = (o, theta, phi);
                }
            }
        }
        half_t *= 0.45;
        half_p *= 0.45;
    }
    let (overlap, theta, mut phi) = best;
    // Report phi in (-pi, pi].
    phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
    if phi > std::f64::consts::PI {
        phi -= 2.0 * std::f64::consts::PI;
    }
    Ok((overlap.clamp(0.0, 1.0), theta, phi))
}

/// Squared overlap of `e^{-r Sy} psi` with its best coherent-state fit.
pub fn deformation_coherence(sys: &SpinSystem, p: &ModelParams, psi: &StateVector) -> Result<f64> {
    deformation_fit(sys, p, psi).map(|(overlap, _, _)| overlap)
}
