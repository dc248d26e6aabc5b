//! Cross-checks that span modules: independent computational routes to
//! the same quantity must agree, and evolved states must satisfy the
//! structural identities of the model. Single-point versions of some of
//! these live next to their modules; here they run as sweeps and as
//! full pipelines.

use nalgebra::DVector;
use num_complex::Complex64;
use ptspin_core::husimi::husimi_grid;
use ptspin_core::model::{build_hamiltonian, build_hamiltonian_dd, ModelParams};
use ptspin_core::observables::{
    bloch_point, evolve_density, expectation_raw, integrate_ehrenfest, variances, BlochPoint,
    DensityState,
};
use ptspin_core::propagator::{
    disentangle, propagator_diag, propagator_direct, propagator_disentangled,
};
use ptspin_core::quad::{fejer1, midpoint_phi};
use ptspin_core::spectrum::{match_spectra, numerical_spectrum, numerical_spectrum_dd};
use ptspin_core::spin::{coherent_state, dicke_state, SpinSystem, StateVector};
use ptspin_core::CMat;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

fn rel_frob(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

/// The three propagator constructions agree pairwise over the whole
/// unbroken phase, at a short and a hump-scale time.
#[test]
fn three_methods_agree_across_the_unbroken_phase() {
    let sys = SpinSystem::new(10.0).unwrap();
    for k in 1..=9 {
        let p = ModelParams::new(10.0, 1.0, k as f64 / 10.0).unwrap();
        let factors = disentangle(&p, 3.5, 0.05).unwrap();
        for &t in &[0.7, 3.3] {
            let dir = propagator_direct(&sys, &p, t).unwrap().matrix;
            let dis = propagator_disentangled(&sys, &factors, t).unwrap().matrix;
            let dia = propagator_diag(&sys, &p, t).unwrap().matrix;
            for (name, m) in [("disentangled", &dis), ("diagonalization", &dia)] {
                let dev = rel_frob(m, &dir);
                assert!(
                    dev < 1e-7,
                    "gamma={}, t={t}: {name} vs direct {dev:.2e}",
                    p.gamma
                );
            }
            let dev = rel_frob(&dis, &dia);
            assert!(dev < 1e-7, "gamma={}, t={t}: dis vs diag {dev:.2e}", p.gamma);
        }
    }
}

/// Coherent states resolve the identity: (2S+1)/(4 pi) times the
/// quadrature sum of their projectors is the unit matrix. Ties the state
/// constructor to the same nodes and weights the Husimi grid uses.
#[test]
fn coherent_states_resolve_the_identity() {
    let sys = SpinSystem::new(10.0).unwrap();
    let dim = sys.dim();
    let (thetas, tw) = fejer1(64);
    let (phis, dphi) = midpoint_phi(128);
    let mut acc = CMat::zeros(dim, dim);
    for (i, &theta) in thetas.iter().enumerate() {
        for &phi in &phis {
            let psi = coherent_state(&sys, theta, phi - PI);
            acc += psi.projector() * Complex64::new(tw[i] * dphi, 0.0);
        }
    }
    acc *= Complex64::new(dim as f64 / (4.0 * PI), 0.0);
    let dev = (&acc - CMat::identity(dim, dim)).norm();
    assert!(dev < 1e-10, "identity defect {dev:.2e}");
}

/// One-parameter group law: U(a + b) = U(a) U(b), on both the plain f64
/// route (small couplings and times) and the extended-precision route
/// that long times switch to.
#[test]
fn propagator_composition_is_consistent_across_routes() {
    let sys = SpinSystem::new(10.0).unwrap();
    let cases = [(0.12, 0.10, 0.15), (0.9, 1.1, 2.2)];
    for &(gamma, a, b) in &cases {
        let p = ModelParams::new(10.0, 1.0, gamma).unwrap();
        let whole = propagator_direct(&sys, &p, a + b).unwrap().matrix;
        let split = propagator_direct(&sys, &p, a).unwrap().matrix
            * propagator_direct(&sys, &p, b).unwrap().matrix;
        let dev = rel_frob(&split, &whole);
        assert!(dev < 1e-10, "gamma={gamma}: U({a})U({b}) vs U({}) {dev:.2e}", a + b);
    }
}

/// The stepped trace obeys the loss law d(tr rho)/dt = -4 gamma tr(rho Sz)
/// along an entire evolution, tying the propagator to the raw expectation.
#[test]
fn stepped_trace_rate_matches_the_loss_law() {
    let sys = SpinSystem::new(10.0).unwrap();
    let p = ModelParams::new(10.0, 1.0, 0.6).unwrap();
    let dt = 2e-4;
    let u = propagator_direct(&sys, &p, dt).unwrap().matrix;
    let mut psi = coherent_state(&sys, FRAC_PI_2, FRAC_PI_4).amplitudes;
    let mut traces = Vec::with_capacity(3001);
    let mut sz_raw = Vec::with_capacity(3001);
    for _ in 0..=3000 {
        traces.push(psi.norm_squared());
        let rho = DensityState::new(10.0, &psi * psi.adjoint()).unwrap();
        sz_raw.push(expectation_raw(&rho, &sys.sz).unwrap());
        psi = &u * psi;
    }
    // Central differences carry an O(dt^2) truncation error that scales
    // with the third time derivative, itself bounded by (4 gamma S)^3
    // times the trace; the tolerance sits far above that.
    let scale = 4.0 * p.gamma * p.spin;
    for k in 1..3000 {
        let fd = (traces[k + 1] - traces[k - 1]) / (2.0 * dt);
        let law = -4.0 * p.gamma * sz_raw[k];
        assert!(
            (fd - law).abs() <= 1e-4 * scale * traces[k],
            "t={:.3}: d(tr)/dt = {fd:.6e} vs law {law:.6e}",
            k as f64 * dt
        );
    }
}

/// The f64 and extended-precision eigensolvers deliver the same spectrum
/// once matched. The f64 route loses accuracy with the eigenvector basis
/// conditioning e^{2 r S} (about 5e2 at gamma = 0.3, 3.5e9 at 0.8), so
/// the agreement bound has to widen with it.
#[test]
fn both_eigensolvers_agree_on_the_spectrum() {
    let sys = SpinSystem::new(10.0).unwrap();
    for &(gamma, tol) in &[(0.3, 1e-9), (0.8, 1e-6)] {
        let p = ModelParams::new(10.0, 1.0, gamma).unwrap();
        let dd = numerical_spectrum_dd(&build_hamiltonian_dd(&sys, &p)).unwrap();
        let f64s = numerical_spectrum(&build_hamiltonian(&sys, &p)).unwrap();
        let matched = match_spectra(&dd, &f64s).unwrap();
        let worst = dd
            .iter()
            .zip(&matched)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(worst < tol, "gamma={gamma}: eigensolver split {worst:.2e}");
    }
}

/// The Husimi peak of an evolved coherent state sits on the Ehrenfest
/// direction to within one grid cell.
#[test]
fn husimi_peak_rides_the_ehrenfest_trajectory() {
    let sys = SpinSystem::new(10.0).unwrap();
    let p = ModelParams::new(10.0, 1.0, 0.5).unwrap();
    let t = 2.0;
    let psi = &propagator_direct(&sys, &p, t).unwrap().matrix
        * &coherent_state(&sys, FRAC_PI_2, FRAC_PI_4).amplitudes;
    let psi = psi.unscale(psi.norm());
    let rho = DensityState::from_pure(&StateVector {
        spin: 10.0,
        amplitudes: psi,
    })
    .unwrap();
    let grid = husimi_grid(&sys, &rho, 128, 256).unwrap();
    let (i, j) = grid.argmax();
    let (tp, pp) = (grid.theta_nodes[i], grid.phi_nodes[j]);
    let s0 = BlochPoint::from_angles(10.0, FRAC_PI_2, FRAC_PI_4);
    let traj = integrate_ehrenfest(&s0, &p, t, t).unwrap();
    let n = traj.points().last().unwrap().normalized(10.0);
    let peak = [tp.sin() * pp.cos(), tp.sin() * pp.sin(), tp.cos()];
    let dot = (peak[0] * n[0] + peak[1] * n[1] + peak[2] * n[2]).clamp(-1.0, 1.0);
    let angle = dot.acos();
    // Fejer/midpoint cells are ~0.025 rad on each axis.
    assert!(angle < 0.03, "peak is {angle:.3} rad off the Ehrenfest direction");
}

/// The Husimi function of an evolved pure state never goes negative
/// beyond evaluation rounding, anywhere on a fine grid.
#[test]
fn evolved_state_keeps_a_nonnegative_husimi_function() {
    let sys = SpinSystem::new(10.0).unwrap();
    let p = ModelParams::new(10.0, 1.0, 0.7).unwrap();
    let psi = &propagator_direct(&sys, &p, 1.5).unwrap().matrix
        * &dicke_state(&sys, 4.0).unwrap().amplitudes;
    let psi = psi.unscale(psi.norm());
    let rho = DensityState::from_pure(&StateVector {
        spin: 10.0,
        amplitudes: psi,
    })
    .unwrap();
    let grid = husimi_grid(&sys, &rho, 96, 192).unwrap();
    assert!(
        grid.min_value() >= -1e-12,
        "negative Husimi value {:.2e}",
        grid.min_value()
    );
}

/// The whole pipeline accepts half-integer spin: propagator triangle and
/// the coherent-state invariants at S = 7/2.
#[test]
fn half_integer_spin_runs_the_full_pipeline() {
    let sys = SpinSystem::new(3.5).unwrap();
    let p = ModelParams::new(3.5, 1.0, 0.6).unwrap();
    let t = 1.2;
    let dir = propagator_direct(&sys, &p, t).unwrap().matrix;
    let factors = disentangle(&p, t, 0.05).unwrap();
    let dis = propagator_disentangled(&sys, &factors, t).unwrap().matrix;
    let dia = propagator_diag(&sys, &p, t).unwrap().matrix;
    assert!(rel_frob(&dis, &dir) < 1e-9, "dis vs dir {:.2e}", rel_frob(&dis, &dir));
    assert!(rel_frob(&dia, &dir) < 1e-9, "diag vs dir {:.2e}", rel_frob(&dia, &dir));

    let psi0 = coherent_state(&sys, 1.1, -0.4);
    let psi_t: DVector<Complex64> = &dir * &psi0.amplitudes;
    let rho = DensityState::from_pure(&StateVector {
        spin: 3.5,
        amplitudes: psi_t,
    })
    .unwrap();
    let b = bloch_point(&sys, &rho).unwrap();
    assert!(
        (b.norm_sqr() - 3.5 * 3.5).abs() < 1e-10,
        "Bloch radius^2 {:.12}",
        b.norm_sqr()
    );
    let (vx, vy, vz) = variances(&sys, &rho).unwrap();
    assert!(
        (vx + vy + vz - 3.5).abs() < 1e-10,
        "variance sum {:.12}",
        vx + vy + vz
    );

    let rho0 = DensityState::from_pure(&psi0).unwrap();
    let u = propagator_direct(&sys, &p, t).unwrap();
    let rho2 = evolve_density(&rho0, &u).unwrap();
    let b2 = bloch_point(&sys, &rho2).unwrap();
    assert!(
        (b2.sx - b.sx).abs() + (b2.sy - b.sy).abs() + (b2.sz - b.sz).abs() < 1e-10,
        "state and density evolutions disagree"
    );
}
