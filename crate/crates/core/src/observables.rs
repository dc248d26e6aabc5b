//! Density-matrix evolution, normalized expectation values, variances,
//! trace dynamics, the coherent-state Ehrenfest system, and the analytic
//! circle geometry of its trajectories.
//!
//! Expectations are normalized by the (generally non-unit, non-constant)
//! trace; the raw bilinear forms are exposed separately where the trace
//! growth itself is the observable.

use crate::model::ModelParams;
use crate::ode::{integrate_dense, DenseOutput, Dopri5Options};
use crate::propagator::{propagator_direct, Propagator};
use crate::spin::{SpinSystem, StateVector};
use crate::{CMat, Error, Result};

/// Weighted spin state: Hermitian, positive semidefinite, trace positive
/// but deliberately NOT normalized (the trace carries gain/loss physics).
#[derive(Clone, Debug)]
pub struct DensityState {
    pub spin: f64,
    pub matrix: CMat,
}

impl DensityState {
    /// Wrap a density matrix, checking shape, Hermiticity, and trace
    /// positivity. Positive semidefiniteness is spot-checked separately
    /// (`psd_defect`) because it needs an eigendecomposition.
    pub fn new(spin: f64, matrix: CMat) -> Result<Self> {
        let dim = (2.0 * spin) as usize + 1;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}x{dim} matrix for S = {spin}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm_defect = (&matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_defect > 1e-10 * matrix.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "density matrix is not Hermitian (defect {herm_defect:.2e})"
            )));
        }
        let tr = matrix.trace();
        if !(tr.re > 1e-300) {
            return Err(Error::VanishingTrace(tr.re));
        }
        Ok(DensityState { spin, matrix })
    }

    /// Projector onto a pure state.
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        Self::new(psi.spin, psi.projector())
    }

    /// Unnormalized identity mixture (trace = dim).
    pub fn maximally_mixed(sys: &SpinSystem) -> Self {
        DensityState {
            spin: sys.spin(),
            matrix: CMat::identity(sys.dim(), sys.dim()),
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Most negative eigenvalue, as a positivity diagnostic (near zero,
    /// slightly negative values are rounding).
    pub fn psd_defect(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &x| acc.min(x))
    }
}

/// Expectation triple (sx, sy, sz) in units of hbar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochPoint {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochPoint {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        BlochPoint { sx, sy, sz }
    }

    /// Point of a coherent state |theta, phi> at spin S.
    pub fn from_angles(spin: f64, theta: f64, phi: f64) -> Self {
        BlochPoint {
            sx: spin * theta.sin() * phi.cos(),
            sy: spin * theta.sin() * phi.sin(),
            sz: spin * theta.cos(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }

    /// Unit-sphere coordinates (x, y, z) = s / S.
    pub fn normalized(&self, spin: f64) -> [f64; 3] {
        [self.sx / spin, self.sy / spin, self.sz / spin]
    }
}

/// `rho(t) = U rho U^dagger`. The trace is free to grow or shrink; only
/// its collapse below the positivity guard is an error.
pub fn evolve_density(rho0: &DensityState, u: &Propagator) -> Result<DensityState> {
    let dim = rho0.matrix.nrows();
    if u.matrix.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "propagator is {}x{}, state is {dim}x{dim}",
            u.matrix.nrows(),
            u.matrix.ncols()
        )));
    }
    let evolved = &u.matrix * &rho0.matrix * u.matrix.adjoint();
    let tr = evolved.trace().re;
    if !(tr > 1e-300) {
        return Err(Error::VanishingTrace(tr));
    }
    Ok(DensityState {
        spin: rho0.spin,
        matrix: evolved,
    })
}

/// Raw bilinear form tr(rho A) (the unnormalized double-bracket average).
pub fn expectation_raw(rho: &DensityState, a: &CMat) -> Result<f64> {
    if a.nrows() != rho.matrix.nrows() || a.ncols() != rho.matrix.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, state is {}x{}",
            a.nrows(),
            a.ncols(),
            rho.matrix.nrows(),
            rho.matrix.ncols()
        )));
    }
    Ok((&rho.matrix * a).trace().re)
}

/// Normalized expectation tr(rho A)/tr(rho) for Hermitian A.
pub fn expectation(rho: &DensityState, a: &CMat) -> Result<f64> {
    let tr = rho.matrix.trace().re;
    if !(tr.abs() > 1e-300) {
        return Err(Error::VanishingTrace(tr));
    }
    Ok(expectation_raw(rho, a)? / tr)
}

/// Normalized first-moment triple of the spin operators.
pub fn bloch_point(sys: &SpinSystem, rho: &DensityState) -> Result<BlochPoint> {
    if sys.spin() != rho.spin {
        return Err(Error::DimensionMismatch(format!(
            "system S = {} vs state S = {}",
            sys.spin(),
            rho.spin
        )));
    }
    Ok(BlochPoint {
        sx: expectation(rho, &sys.sx)?,
        sy: expectation(rho, &sys.sy)?,
        sz: expectation(rho, &sys.sz)?,
    })
}

/// Variance triple (normalized expectations); exact zeros may round to
/// tiny negatives, which are clamped.
pub fn variances(sys: &SpinSystem, rho: &DensityState) -> Result<(f64, f64, f64)> {
    let var = |op: &CMat| -> Result<f64> {
        let first = expectation(rho, op)?;
        let second = expectation(rho, &(op * op))?;
        Ok((second - first * first).max(0.0))
    };
    Ok((var(&sys.sx)?, var(&sys.sy)?, var(&sys.sz)?))
}

/// Squared length of the normalized Bloch vector; equals S^2 exactly on
/// coherent states and stays strictly below for every other state.
pub fn coherence_functional(sys: &SpinSystem, rho: &DensityState) -> Result<f64> {
    Ok(bloch_point(sys, rho)?.norm_sqr())
}

/// Consistency residual of the trace-rate law d(tr rho)/dt = 2 tr(Gamma rho)
/// with Gamma = -2 gamma Sz: central finite difference (step 1e-5, two
/// short extra propagations from the given state) against the bilinear
/// form, scaled by max(1, tr rho).
pub fn trace_rate_residual(sys: &SpinSystem, rho: &DensityState, p: &ModelParams) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let forward = evolve_density(rho, &propagator_direct(sys, p, STEP)?)?;
    let backward = evolve_density(rho, &propagator_direct(sys, p, -STEP)?)?;
    let numeric = (forward.trace() - backward.trace()) / (2.0 * STEP);
    let gamma_form = -2.0 * p.gamma * expectation_raw(rho, &sys.sz)?;
    let analytic = 2.0 * gamma_form;
    Ok((numeric - analytic).abs() / rho.trace().abs().max(1.0))
}

/// Coherent-closure Ehrenfest rates:
/// `sx' = 2 gamma sx sz / S`,
/// `sy' = -2 v sz + 2 gamma sy sz / S`,
/// `sz' = 2 v sy + 2 gamma sz^2 / S - 2 gamma S`.
/// Valid as dynamics only while the state stays coherent.
pub fn ehrenfest_rhs(s: &BlochPoint, p: &ModelParams) -> BlochPoint {
    let su = p.spin;
    BlochPoint {
        sx: 2.0 * p.gamma * s.sx * s.sz / su,
        sy: -2.0 * p.v * s.sz + 2.0 * p.gamma * s.sy * s.sz / su,
        sz: 2.0 * p.v * s.sy + 2.0 * p.gamma * s.sz * s.sz / su - 2.0 * p.gamma * su,
    }
}

/// Sampled Ehrenfest trajectory with dense evaluation inside the span.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<BlochPoint>,
    dense: DenseOutput<3>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[BlochPoint] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> Result<BlochPoint> {
        let y = self.dense.eval(t)?;
        Ok(BlochPoint::new(y[0], y[1], y[2]))
    }

    pub fn t_max(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Integrate the coherent-closure system from a point on the sphere
/// |s0| = S, sampling every `dt_out`.
pub fn integrate_ehrenfest(
    s0: &BlochPoint,
    p: &ModelParams,
    t_max: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    if !(t_max > 0.0) || !(dt_out > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need positive t_max and dt_out, got {t_max}, {dt_out}"
        )));
    }
    let radius_defect = (s0.norm_sqr() - p.spin * p.spin).abs();
    if radius_defect > 1e-6 * p.spin * p.spin {
        return Err(Error::InvalidArgument(format!(
            "initial point is off the sphere |s| = S by {radius_defect:.2e}; \
             the closure only holds for coherent states"
        )));
    }
    let pc = *p;
    let rhs = move |_t: f64, y: &[f64; 3]| {
        let s = BlochPoint::new(y[0], y[1], y[2]);
        let d = ehrenfest_rhs(&s, &pc);
        [d.sx, d.sy, d.sz]
    };
    let opt = Dopri5Options::default();
    let dense = integrate_dense(rhs, 0.0, t_max, [s0.sx, s0.sy, s0.sz], &opt)?;
    let n_samples = (t_max / dt_out + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(n_samples + 1);
    let mut points = Vec::with_capacity(n_samples + 1);
    times.push(0.0);
    points.push(*s0);
    for k in 1..=n_samples {
        let t = (k as f64 * dt_out).min(t_max);
        let y = dense.eval(t)?;
        times.push(t);
        points.push(BlochPoint::new(y[0], y[1], y[2]));
    }
    Ok(Trajectory {
        times,
        points,
        dense,
    })
}

/// Circle traced by a coherent-closure trajectory, on the unit sphere of
/// normalized coordinates: intersection of the sphere with the plane
/// through the line y = c1 x + v/gamma.
#[derive(Clone, Copy, Debug)]
pub struct CircleSolution {
    pub c1: f64,
    pub p: f64,
    pub q: f64,
    pub xc: f64,
    pub yc: f64,
    pub dx: f64,
    pub dy: f64,
    pub degenerate: bool,
}

impl CircleSolution {
    /// Circle radius (also the |z| amplitude of the parametrization).
    pub fn radius(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy).sqrt()
    }

    /// Point at parameter angle alpha:
    /// `(xc, yc, 0) + (dx, dy, 0) cos(alpha) + (0, 0, radius) sin(alpha)`.
    pub fn point_at(&self, alpha: f64) -> [f64; 3] {
        let (s, c) = alpha.sin_cos();
        [
            self.xc + self.dx * c,
            self.yc + self.dy * c,
            self.radius() * s,
        ]
    }

    /// Exact Euclidean distance from a point (normalized coordinates) to
    /// the circle as a set in 3-space.
    pub fn distance_to(&self, point: [f64; 3]) -> f64 {
        let r = self.radius();
        let u = [point[0] - self.xc, point[1] - self.yc, point[2]];
        if r == 0.0 {
            return (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        }
        // Plane normal spans (dy, -dx, 0)/r; axial and in-plane radial
        // components give the distance to a circle directly.
        let n = [self.dy / r, -self.dx / r, 0.0];
        let axial = u[0] * n[0] + u[1] * n[1];
        let in_plane = [u[0] - axial * n[0], u[1] - axial * n[1], u[2]];
        let radial =
            (in_plane[0] * in_plane[0] + in_plane[1] * in_plane[1] + in_plane[2] * in_plane[2])
                .sqrt();
        (axial * axial + (radial - r) * (radial - r)).sqrt()
    }
}

/// Analytic circle through the initial coherent direction (theta0, phi0).
///
/// Limiting cases the generic formulas cannot express directly: x0 = 0
/// uses the vertical-plane circle (c1 reported infinite), and gamma = 0
/// the rotation circle about the x-axis.
pub fn analytic_circle(theta0: f64, phi0: f64, p: &ModelParams) -> Result<CircleSolution> {
    if !theta0.is_finite() || !phi0.is_finite() {
        return Err(Error::InvalidArgument("angles must be finite".into()));
    }
    let x0 = theta0.sin() * phi0.cos();
    let y0 = theta0.sin() * phi0.sin();

    if p.gamma == 0.0 {
        // Pure rotation about x: the circle x = x0.
        let rad = (1.0 - x0 * x0).max(0.0).sqrt();
        return Ok(CircleSolution {
            c1: f64::INFINITY,
            p: 0.0,
            q: 0.0,
            xc: x0,
            yc: 0.0,
            dx: 0.0,
            dy: rad,
            degenerate: rad < 1e-10,
        });
    }

    let k = p.v / p.gamma;
    if x0.abs() < 1e-14 {
        // c1 -> infinity: the plane x = 0 cut, a great circle.
        return Ok(CircleSolution {
            c1: f64::INFINITY,
            p: 0.0,
            q: 0.0,
            xc: 0.0,
            yc: 0.0,
            dx: 0.0,
            dy: 1.0,
            degenerate: false,
        });
    }

    let c1 = -(k - y0) / x0;
    let denom = 1.0 + c1 * c1;
    let pp = k * c1 / denom;
    let qq = (k * k - 1.0) / denom;
    let disc = (pp * pp - qq).max(0.0);
    let dx = disc.sqrt();
    let dy = c1 * dx;
    Ok(CircleSolution {
        c1,
        p: pp,
        q: qq,
        xc: -pp,
        yc: -c1 * pp + k,
        dx,
        dy,
        degenerate: (pp * pp - qq).abs() < 1e-10,
    })
}
