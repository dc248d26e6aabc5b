//! Husimi distribution of a spin state by two independent routes (direct
//! coherent-state overlap and a multipole kernel), grid sampling with
//! spherical quadrature, transport along characteristics of the phase-space
//! equation of motion, and a finite-difference residual check of that
//! equation.

use crate::cg::{clebsch_gordan, tensor_operator};
use crate::model::ModelParams;
use crate::observables::{expectation, integrate_ehrenfest, BlochPoint, DensityState};
use crate::ode::{integrate_with_halt, Dopri5Options};
use crate::propagator::propagator_direct;
use crate::quad::{fejer1, midpoint_phi};
use crate::sph::spherical_harmonic;
use crate::spin::{coherent_state, SpinSystem};
use crate::{CMat, Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Characteristics stop this far (radians) from either pole, where the
/// azimuthal advection coefficient diverges.
const POLE_MARGIN: f64 = 1e-3;

/// Negative values beyond this magnitude are reported as-is; anything
/// closer to zero is rounding noise on a nonnegative quantity.
const NEGATIVE_TOLERANCE: f64 = 1e-12;

fn check_spin(sys: &SpinSystem, rho: &DensityState) -> Result<()> {
    if sys.spin() != rho.spin {
        return Err(Error::DimensionMismatch(format!(
            "system S = {} vs state S = {}",
            sys.spin(),
            rho.spin
        )));
    }
    Ok(())
}

/// Raw overlap <theta,phi|rho|theta,phi> without clamping or checks.
fn overlap_value(sys: &SpinSystem, rho: &DensityState, theta: f64, phi: f64) -> f64 {
    let chi = coherent_state(sys, theta, phi);
    chi.amplitudes.dotc(&(&rho.matrix * &chi.amplitudes)).re
}

/// Husimi value Q(theta, phi) = <theta,phi|rho|theta,phi> as a quadratic
/// form with an explicitly constructed coherent state. Rounding-level
/// negatives are clamped to zero; anything more negative passes through
/// as a corruption signal.
pub fn husimi_direct(sys: &SpinSystem, rho: &DensityState, theta: f64, phi: f64) -> Result<f64> {
    check_spin(sys, rho)?;
    let q = overlap_value(sys, rho, theta, phi);
    Ok(if q < 0.0 && q > -NEGATIVE_TOLERANCE { 0.0 } else { q })
}

/// Husimi value of the coherent state |theta_c, phi_c><...| in closed
/// form: ((1 + n_c . n)/2)^(2S).
pub fn coherent_husimi(spin: f64, theta_c: f64, phi_c: f64, theta: f64, phi: f64) -> f64 {
    let dot = theta_c.sin() * theta.sin() * (phi_c - phi).cos() + theta_c.cos() * theta.cos();
    ((1.0 + dot) / 2.0).powi((2.0 * spin) as i32)
}

/// tr(a b) without forming the product matrix.
fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Multipole kernel for the Husimi function: the rank-L components
/// `2 sqrt(pi)/sqrt(2S+1) * C(S S; L 0 -> S S) * T_{L,M}` cached per spin,
/// so that Q = sum_{L,M} conj(Y_{L,M}) tr(rho T-component).
pub struct HusimiKernel {
    spin: f64,
    terms: Vec<(u32, i32, CMat)>,
}

/// State-specific multipole moments tr(rho * component); evaluating the
/// Husimi function at a point then costs one spherical-harmonic sum.
pub struct KernelMoments {
    coeffs: Vec<(u32, i32, Complex64)>,
}

impl HusimiKernel {
    pub fn new(sys: &SpinSystem) -> Result<Self> {
        let spin = sys.spin();
        let two_s = (2.0 * spin).round() as u32;
        let prefactor = 2.0 * PI.sqrt() / ((2.0 * spin + 1.0).sqrt());
        let mut terms = Vec::new();
        for l in 0..=two_s {
            let c_l = clebsch_gordan(spin, spin, l as f64, 0.0, spin, spin)?;
            for m in -(l as i32)..=(l as i32) {
                let matrix = tensor_operator(sys, l, m)? * Complex64::new(prefactor * c_l, 0.0);
                terms.push((l, m, matrix));
            }
        }
        Ok(HusimiKernel { spin, terms })
    }

    pub fn moments(&self, rho: &DensityState) -> Result<KernelMoments> {
        if rho.spin != self.spin {
            return Err(Error::DimensionMismatch(format!(
                "kernel S = {} vs state S = {}",
                self.spin, rho.spin
            )));
        }
        let coeffs = self
            .terms
            .iter()
            .map(|(l, m, mat)| (*l, *m, trace_product(&rho.matrix, mat)))
            .collect();
        Ok(KernelMoments { coeffs })
    }
}

impl KernelMoments {
    pub fn evaluate(&self, theta: f64, phi: f64) -> Result<f64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(l, m, c) in &self.coeffs {
            acc += spherical_harmonic(l, m, theta, phi)?.conj() * c;
        }
        Ok(acc.re)
    }
}

/// One-off kernel-route evaluation; builds the per-spin cache each call,
/// so batch callers should hold a [`HusimiKernel`] instead.
pub fn husimi_kernel(sys: &SpinSystem, rho: &DensityState, theta: f64, phi: f64) -> Result<f64> {
    check_spin(sys, rho)?;
    HusimiKernel::new(sys)?.moments(rho)?.evaluate(theta, phi)
}

/// Closed-form Husimi function of the Dicke state |S, m> (azimuth-free):
/// the kernel sum collapses to the M = 0 multipoles.
pub fn dicke_husimi(sys: &SpinSystem, m: f64, theta: f64) -> Result<f64> {
    let spin = sys.spin();
    if !crate::is_half_integer(m) || m.abs() > spin || (spin - m).fract() != 0.0 {
        return Err(Error::QuantumNumber(format!(
            "m = {m} invalid for spin {spin}"
        )));
    }
    let two_s = (2.0 * spin).round() as u32;
    let mut acc = 0.0;
    for l in 0..=two_s {
        let c_top = clebsch_gordan(spin, spin, l as f64, 0.0, spin, spin)?;
        let c_m = clebsch_gordan(spin, m, l as f64, 0.0, spin, m)?;
        let y = spherical_harmonic(l, 0, theta, 0.0)?.re;
        acc += 2.0 * PI.sqrt() * ((2 * l + 1) as f64).sqrt() / (2.0 * spin + 1.0) * y * c_top * c_m;
    }
    Ok(acc)
}

/// Husimi function sampled on a product grid: Fejer polar nodes (pole-free
/// midpoints) and uniform azimuthal midpoints shifted to [-pi, pi).
#[derive(Clone, Debug)]
pub struct HusimiGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta_nodes: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    pub values: nalgebra::DMatrix<f64>,
    /// Per-row solid-angle weight (polar weight times the azimuthal step);
    /// row i of `values` integrates with `weights[i]`.
    pub weights: Vec<f64>,
}

impl HusimiGrid {
    /// Quadrature integral of Q over the sphere.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_theta {
            let mut row = 0.0;
            for j in 0..self.n_phi {
                row += self.values[(i, j)];
            }
            acc += row * self.weights[i];
        }
        acc
    }

    /// (2S+1)/(4 pi) times the integral; reproduces tr(rho) since the
    /// polar rule is exact for the degree that a spin-S state can reach.
    pub fn quadrature_trace(&self, spin: f64) -> f64 {
        (2.0 * spin + 1.0) / (4.0 * PI) * self.integral()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    /// Grid indices (i, j) of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                if self.values[(i, j)] > best_v {
                    best_v = self.values[(i, j)];
                    best = (i, j);
                }
            }
        }
        best
    }
}

/// Sample the Husimi function of `rho` on an `n_theta` x `n_phi` grid.
/// Rows are independent and evaluated in parallel.
pub fn husimi_grid(
    sys: &SpinSystem,
    rho: &DensityState,
    n_theta: usize,
    n_phi: usize,
) -> Result<HusimiGrid> {
    check_spin(sys, rho)?;
    if n_theta < 8 || n_phi < 8 {
        return Err(Error::InvalidArgument(format!(
            "grid must be at least 8x8, got {n_theta}x{n_phi}"
        )));
    }
    let (theta_nodes, theta_w) = fejer1(n_theta);
    let (phi_raw, dphi) = midpoint_phi(n_phi);
    let phi_nodes: Vec<f64> = phi_raw.iter().map(|&p| p - PI).collect();
    let rows: Vec<Vec<f64>> = theta_nodes
        .par_iter()
        .map(|&theta| {
            phi_nodes
                .iter()
                .map(|&phi| {
                    let q = overlap_value(sys, rho, theta, phi);
                    if q < 0.0 && q > -NEGATIVE_TOLERANCE {
                        0.0
                    } else {
                        q
                    }
                })
                .collect()
        })
        .collect();
    let values =
        nalgebra::DMatrix::from_row_iterator(n_theta, n_phi, rows.into_iter().flatten());
    let weights = theta_w.iter().map(|&w| w * dphi).collect();
    Ok(HusimiGrid {
        n_theta,
        n_phi,
        theta_nodes,
        phi_nodes,
        values,
        weights,
    })
}

/// Husimi value transported along one characteristic curve of the
/// phase-space equation of motion.
#[derive(Clone, Debug)]
pub struct Characteristic {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub q: Vec<f64>,
    /// Set when integration stopped at the pole guard before `t_max`.
    pub halt_time: Option<f64>,
}

/// Integrate the characteristic system
/// `theta' = -2 v sin(phi) + 2 gamma sin(theta)`,
/// `phi'   = -2 v cot(theta) cos(phi)`,
/// with the transported value obeying `q' = 4 gamma S cos(theta) q` (raw)
/// or `q' = 4 gamma (S cos(theta) - <Sz>(t)) q` (normalized, with the
/// expectation supplied by the caller from the quantum evolution).
///
/// The curve halts `1e-3` radians from either pole and reports the stop
/// time; samples cover the span actually integrated.
pub fn integrate_characteristic(
    theta0: f64,
    phi0: f64,
    q0: f64,
    p: &ModelParams,
    t_max: f64,
    dt_out: f64,
    normalized: bool,
    sz: Option<&dyn Fn(f64) -> f64>,
) -> Result<Characteristic> {
    if !(theta0 > POLE_MARGIN && theta0 < PI - POLE_MARGIN) {
        return Err(Error::InvalidArgument(format!(
            "theta0 = {theta0} starts inside the pole guard"
        )));
    }
    if !(q0 >= 0.0 && q0.is_finite()) {
        return Err(Error::InvalidArgument(format!("q0 = {q0} must be finite and >= 0")));
    }
    if !(t_max > 0.0) || !(dt_out > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need positive t_max and dt_out, got {t_max}, {dt_out}"
        )));
    }
    if normalized && sz.is_none() {
        return Err(Error::InvalidArgument(
            "normalized transport needs the <Sz>(t) series from the quantum evolution".into(),
        ));
    }
    let (v, gamma, su) = (p.v, p.gamma, p.spin);
    let rhs = |t: f64, y: &[f64; 3]| {
        let (st, ct) = y[0].sin_cos();
        let (sp, cp) = y[1].sin_cos();
        let gain = if normalized {
            4.0 * gamma * (su * ct - (sz.unwrap())(t))
        } else {
            4.0 * gamma * su * ct
        };
        [
            -2.0 * v * sp + 2.0 * gamma * st,
            -2.0 * v * (ct / st) * cp,
            gain * y[2],
        ]
    };
    let halt = |_t: f64, y: &[f64; 3]| (y[0] - POLE_MARGIN).min(PI - POLE_MARGIN - y[0]);
    let opt = Dopri5Options {
        rtol: 1e-12,
        atol: 1e-14,
        ..Dopri5Options::default()
    };
    let (dense, stop) = integrate_with_halt(rhs, 0.0, t_max, [theta0, phi0, q0], &opt, halt)?;
    let t_eff = stop.unwrap_or(t_max);

    let mut times = vec![0.0];
    let mut theta = vec![theta0];
    let mut phi = vec![phi0];
    let mut q = vec![q0];
    let n_samples = (t_eff / dt_out + 1e-9).floor() as usize;
    for k in 1..=n_samples {
        let t = (k as f64 * dt_out).min(t_eff);
        let y = dense.eval(t)?;
        times.push(t);
        theta.push(y[0]);
        phi.push(y[1]);
        q.push(y[2]);
    }
    if stop.is_some() && t_eff - times.last().unwrap() > 1e-12 {
        let y = dense.eval(t_eff)?;
        times.push(t_eff);
        theta.push(y[0]);
        phi.push(y[1]);
        q.push(y[2]);
    }
    Ok(Characteristic {
        times,
        theta,
        phi,
        q,
        halt_time: stop,
    })
}

/// Residual of the phase-space equation of motion on a uniformly sampled
/// state series, evaluated for the trace-normalized Husimi function:
///
/// `dQ/dt = (2 v sin(phi) + 2 gamma sin(theta)) dQ/dtheta
///          + 2 v cot(theta) cos(phi) dQ/dphi
///          - 4 gamma (S cos(theta) - <Sz>(t)) Q`.
///
/// The time derivative is a central difference across `t_index`; spatial
/// derivatives are 4th-order central stencils with step pi/512, so the
/// residual isolates the time-discretization error (second order in the
/// series spacing).
pub fn pde_residual(
    sys: &SpinSystem,
    p: &ModelParams,
    rho_series: &[DensityState],
    dt: f64,
    theta: f64,
    phi: f64,
    t_index: usize,
) -> Result<f64> {
    if t_index == 0 || t_index + 1 >= rho_series.len() {
        return Err(Error::InvalidArgument(format!(
            "t_index = {t_index} needs both neighbors in a series of length {}",
            rho_series.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let h = PI / 512.0;
    if !(theta >= 0.1 && theta <= PI - 0.1) || theta - 2.0 * h <= 0.0 || theta + 2.0 * h >= PI {
        return Err(Error::InvalidArgument(format!(
            "stencil at theta = {theta} leaves the interior domain"
        )));
    }
    let center = &rho_series[t_index];
    check_spin(sys, center)?;

    // Normalized values; the trace divides out per state so the residual
    // tracks shape transport rather than overall gain.
    let qn = |rho: &DensityState, th: f64, ph: f64| overlap_value(sys, rho, th, ph) / rho.trace();

    let q_t = (qn(&rho_series[t_index + 1], theta, phi) - qn(&rho_series[t_index - 1], theta, phi))
        / (2.0 * dt);

    let q_c = qn(center, theta, phi);
    let q_theta = (-qn(center, theta + 2.0 * h, phi) + 8.0 * qn(center, theta + h, phi)
        - 8.0 * qn(center, theta - h, phi)
        + qn(center, theta - 2.0 * h, phi))
        / (12.0 * h);
    let q_phi = (-qn(center, theta, phi + 2.0 * h) + 8.0 * qn(center, theta, phi + h)
        - 8.0 * qn(center, theta, phi - h)
        + qn(center, theta, phi - 2.0 * h))
        / (12.0 * h);

    let sz_c = expectation(center, &sys.sz)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let rhs = (2.0 * p.v * sp + 2.0 * p.gamma * st) * q_theta
        + 2.0 * p.v * (ct / st) * cp * q_phi
        - 4.0 * p.gamma * (p.spin * ct - sz_c) * q_c;
    Ok((q_t - rhs).abs())
}

/// Sup-norm distance over a 128 x 256 grid between the trace-normalized
/// Husimi function of `rho` and the coherent-state Husimi centered at
/// (theta_c, phi_c).
pub fn coherent_mismatch(
    sys: &SpinSystem,
    rho: &DensityState,
    theta_c: f64,
    phi_c: f64,
) -> Result<f64> {
    check_spin(sys, rho)?;
    let tr = rho.trace();
    if !(tr.abs() > 1e-300) {
        return Err(Error::VanishingTrace(tr));
    }
    let (theta_nodes, _) = fejer1(128);
    let (phi_raw, _) = midpoint_phi(256);
    let spin = sys.spin();
    let worst = theta_nodes
        .par_iter()
        .map(|&theta| {
            phi_raw
                .iter()
                .map(|&pr| {
                    let phi = pr - PI;
                    let q = overlap_value(sys, rho, theta, phi) / tr;
                    (q - coherent_husimi(spin, theta_c, phi_c, theta, phi)).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Coherent transport fidelity: evolve the coherent state (theta0, phi0)
/// quantum-mechanically to time `t`, and compare its trace-normalized
/// Husimi function against the coherent-state Husimi centered at the
/// Ehrenfest point reached at `t`. Small values certify that coherent
/// states stay coherent with only their intensity changing.
pub fn transported_vs_quantum(
    sys: &SpinSystem,
    theta0: f64,
    phi0: f64,
    p: &ModelParams,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be >= 0")));
    }
    let rho0 = DensityState::from_pure(&coherent_state(sys, theta0, phi0))?;
    let rho_t = crate::observables::evolve_density(&rho0, &propagator_direct(sys, p, t)?)?;

    let s0 = BlochPoint::from_angles(p.spin, theta0, phi0);
    let center = if t > 0.0 {
        let traj = integrate_ehrenfest(&s0, p, t, t)?;
        *traj.points().last().unwrap()
    } else {
        s0
    };
    let n = center.normalized(p.spin);
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let theta_c = (n[2] / len).clamp(-1.0, 1.0).acos();
    let phi_c = n[1].atan2(n[0]);
    coherent_mismatch(sys, &rho_t, theta_c, phi_c)
}
