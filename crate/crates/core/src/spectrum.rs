//! Dense complex eigenvalues in double-double precision.
//!
//! The model Hamiltonian's eigenvalue condition numbers blow up like
//! `exp(2 r S)` toward the exceptional point, which costs an f64 solver
//! up to ~13 digits at gamma = 0.99. Working in double-double keeps the
//! numerical spectrum trustworthy at the 1e-8 level this library
//! certifies. Pipeline: Householder reduction to upper Hessenberg,
//! characteristic-polynomial Newton ratios by Hyman's recurrence, and
//! simultaneous root refinement by the Aberth-Ehrlich iteration from a
//! Gershgorin starting circle.

use crate::dd::{Cdd, CddMat, Dd};
use crate::{CMat, Error, Result};
use num_complex::Complex64;

/// Unitary similarity reduction to upper Hessenberg form, in place.
fn hessenberg_in_place(h: &mut CddMat) {
    let n = h.dim();
    for k in 0..n.saturating_sub(2) {
        // Skip when the column is already Hessenberg; this leaves
        // tridiagonal inputs (the model Hamiltonian) untouched.
        let tail: f64 = ((k + 2)..n)
            .map(|i| h[(i, k)].norm_sqr().to_f64())
            .sum();
        if tail == 0.0 {
            continue;
        }
        let sigma = ((k + 1)..n)
            .fold(Dd::ZERO, |acc, i| acc + h[(i, k)].norm_sqr());
        let norm_x = sigma.sqrt();
        let x0 = h[(k + 1, k)];
        let x0_abs = x0.abs();
        // alpha = -phase(x0) * ||x||; this phase choice keeps the
        // Householder scalar tau real.
        let alpha = if x0_abs.to_f64() == 0.0 {
            Cdd::new(-norm_x, Dd::ZERO)
        } else {
            -(x0 * (norm_x / x0_abs))
        };
        let mut v = vec![Cdd::ZERO; n];
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = h[(i, k)];
        }
        let vnorm2 = v.iter().fold(Dd::ZERO, |acc, z| acc + z.norm_sqr());
        if vnorm2.to_f64() == 0.0 {
            continue;
        }
        let tau = Dd::from_f64(2.0) / vnorm2;

        // H <- P H with P = I - tau v v^dagger (rows k+1.. touched).
        for j in 0..n {
            let w = ((k + 1)..n).fold(Cdd::ZERO, |acc, i| acc + v[i].conj() * h[(i, j)]);
            let wt = w * tau;
            for i in (k + 1)..n {
                h[(i, j)] = h[(i, j)] - v[i] * wt;
            }
        }
        // H <- H P (columns k+1.. touched).
        for i in 0..n {
            let w = ((k + 1)..n).fold(Cdd::ZERO, |acc, j| acc + h[(i, j)] * v[j]);
            let wt = w * tau;
            for j in (k + 1)..n {
                h[(i, j)] = h[(i, j)] - wt * v[j].conj();
            }
        }
        // Enforce the exact zeros the reflection produced.
        h[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            h[(i, k)] = Cdd::ZERO;
        }
    }
}

/// Hessenberg blocks delimited by exactly-zero subdiagonal entries; the
/// characteristic polynomial factors over them.
fn split_blocks(h: &CddMat) -> Vec<(usize, usize)> {
    let n = h.dim();
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n - 1 {
        if h[(i + 1, i)].norm_sqr().to_f64() == 0.0 {
            blocks.push((start, i + 1));
            start = i + 1;
        }
    }
    blocks.push((start, n));
    blocks
}

/// Newton ratio p(z)/p'(z) of the characteristic polynomial, summed in
/// reciprocal over the Hessenberg blocks: p'/p = sum_b r_b'/r_b, where
/// each block ratio comes from Hyman's back-substitution. The constant
/// subdiagonal prefactor of det(H - zI) cancels in the ratio.
fn newton_ratio(h: &CddMat, blocks: &[(usize, usize)], z: Cdd) -> Cdd {
    let mut logderiv = Cdd::ZERO;
    for &(s, e) in blocks {
        let len = e - s;
        if len == 1 {
            // r = h[s][s] - z, r' = -1.
            let r = h[(s, s)] - z;
            logderiv = logderiv + (-Cdd::ONE) / r;
            continue;
        }
        let mut x = vec![Cdd::ZERO; len];
        let mut xp = vec![Cdd::ZERO; len];
        x[len - 1] = Cdd::ONE;
        for ii in (0..len - 1).rev() {
            let row = s + ii + 1;
            let mut sr = Cdd::ZERO;
            let mut sp = Cdd::ZERO;
            for jj in (ii + 1)..len {
                let mut m = h[(row, s + jj)];
                if row == s + jj {
                    m = m - z;
                }
                sr = sr + m * x[jj];
                sp = sp + m * xp[jj];
            }
            sp = sp - x[ii + 1];
            let sub = h[(row, s + ii)];
            x[ii] = -(sr / sub);
            xp[ii] = -(sp / sub);
            // Rescale the active tail if magnitudes run away; the
            // common factor cancels in r'/r.
            let mag = x[ii].abs().to_f64();
            if mag > 1e60 {
                let c = x[ii].abs().recip();
                for jj in ii..len {
                    x[jj] = x[jj] * c;
                    xp[jj] = xp[jj] * c;
                }
            }
        }
        let mut r = Cdd::ZERO;
        let mut rp = Cdd::ZERO;
        for jj in 0..len {
            let mut m = h[(s, s + jj)];
            if jj == 0 {
                m = m - z;
            }
            r = r + m * x[jj];
            rp = rp + m * xp[jj];
        }
        rp = rp - x[0];
        logderiv = logderiv + rp / r;
    }
    // Newton step p/p' = 1 / (p'/p).
    logderiv.conj() * (Dd::ONE / logderiv.norm_sqr())
}

/// All eigenvalues of a dense complex square matrix, sorted by real part
/// then imaginary part. Accuracy is limited only by the eigenvalue
/// condition numbers at double-double working precision, relative to the
/// f64 entries as stored; matrices whose entries are themselves rounded
/// from wider values inherit that rounding amplified by the conditioning
/// (see `numerical_spectrum_dd` for the model Hamiltonian).
pub fn numerical_spectrum(a: &CMat) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix contains non-finite entries".into(),
        ));
    }
    numerical_spectrum_dd(&CddMat::from_cmat(a))
}

/// All eigenvalues of a dense complex square matrix given directly in
/// double-double precision, sorted by real part then imaginary part.
///
/// Feeding entries that are accurate beyond f64 (for the model, the
/// output of `build_hamiltonian_dd`) keeps the computed spectrum on the
/// closed-form values even where the conditioning would amplify f64
/// entry rounding past any useful tolerance.
pub fn numerical_spectrum_dd(a: &CddMat) -> Result<Vec<Complex64>> {
    let n = a.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            if !z.re.to_f64().is_finite() || !z.im.to_f64().is_finite() {
                return Err(Error::InvalidArgument(
                    "matrix contains non-finite entries".into(),
                ));
            }
        }
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)].to_complex()]);
    }

    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    let blocks = split_blocks(&h);

    // Starting points on the Gershgorin circle, rotated off the axes so
    // symmetric spectra do not collide with their own mirror images.
    let radius = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)].abs().to_f64()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-30);
    let mut z: Vec<Cdd> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.35) / n as f64 + 0.4;
            Cdd::from_f64(radius * angle.cos(), radius * angle.sin())
        })
        .collect();

    let mut converged = vec![false; n];
    let mut prev_movement = f64::INFINITY;
    let mut stagnant_iters = 0;
    for _iter in 0..500 {
        let mut movement: f64 = 0.0;
        for k in 0..n {
            if converged[k] {
                continue;
            }
            let newton = newton_ratio(&h, &blocks, z[k]);
            if !newton.abs().to_f64().is_finite() {
                // Landed exactly on a root.
                converged[k] = true;
                continue;
            }
            let mut repulsion = Cdd::ZERO;
            for j in 0..n {
                if j == k {
                    continue;
                }
                let mut diff = z[k] - z[j];
                if diff.norm_sqr().to_f64() == 0.0 {
                    diff = Cdd::from_f64(1e-20 * radius, 0.0);
                }
                repulsion = repulsion + diff.conj() * (Dd::ONE / diff.norm_sqr());
            }
            let denom = Cdd::ONE - newton * repulsion;
            let w = if denom.norm_sqr().to_f64() == 0.0 {
                newton
            } else {
                newton / denom
            };
            z[k] = z[k] - w;
            let rel = w.abs().to_f64() / z[k].abs().to_f64().max(radius * 1e-12);
            movement = movement.max(rel);
            if rel < 1e-20 {
                converged[k] = true;
            }
        }
        if converged.iter().all(|&c| c) {
            break;
        }
        // The polynomial's own evaluation noise (condition * u_dd) puts a
        // floor under the movement; stop once it stagnates there. The size
        // gate keeps the detector out of the slow transit phase far from
        // the roots (and away from defective roots, whose relative steps
        // never shrink below order one).
        if movement < 1e-6 && movement >= 0.9 * prev_movement {
            stagnant_iters += 1;
            if stagnant_iters >= 8 {
                break;
            }
        } else {
            stagnant_iters = 0;
        }
        prev_movement = movement;
    }

    let mut out: Vec<Complex64> = z.iter().map(|c| c.to_complex()).collect();
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(out)
}

/// Permute `computed` so entry i is the nearest remaining match to
/// `reference[i]` (greedy pairing for spectrum comparisons and output).
pub fn match_spectra(reference: &[Complex64], computed: &[Complex64]) -> Result<Vec<Complex64>> {
    if reference.len() != computed.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot pair {} reference with {} computed eigenvalues",
            reference.len(),
            computed.len()
        )));
    }
    let mut used = vec![false; computed.len()];
    let mut out = Vec::with_capacity(computed.len());
    for r in reference {
        let (best, _) = computed
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, c)| (i, (c - r).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one unused entry remains");
        used[best] = true;
        out.push(computed[best]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analytic_spectrum, build_hamiltonian, build_hamiltonian_dd, ModelParams};
    use crate::spin::SpinSystem;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_pair_error(analytic: &[Complex64], numeric: &[Complex64]) -> f64 {
        let matched = match_spectra(analytic, numeric).unwrap();
        analytic
            .iter()
            .zip(&matched)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_matrix_is_exact() {
        let d = CMat::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(i as f64 + 1.0, -(i as f64))
            } else {
                Complex64::ZERO
            }
        });
        let eig = numerical_spectrum(&d).unwrap();
        let want: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64 + 1.0, -(i as f64))).collect();
        assert!(max_pair_error(&want, &eig) < 1e-14);
    }

    #[test]
    fn upper_triangular_reads_off_the_diagonal() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        a[(0, 1)] = Complex64::new(5.0, 2.0);
        a[(1, 1)] = Complex64::new(-2.0, 0.0);
        a[(1, 2)] = Complex64::new(3.0, 0.0);
        a[(2, 2)] = Complex64::new(0.5, -1.0);
        let eig = numerical_spectrum(&a).unwrap();
        let want = vec![
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.5, -1.0),
            Complex64::new(1.0, 0.0),
        ];
        assert!(max_pair_error(&want, &eig) < 1e-14);
    }

    #[test]
    fn rotation_generator_has_imaginary_pair() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        a[(1, 0)] = Complex64::new(-1.0, 0.0);
        let eig = numerical_spectrum(&a).unwrap();
        let want = vec![Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)];
        assert!(max_pair_error(&want, &eig) < 1e-15);
    }

    #[test]
    fn defective_jordan_block_collapses_to_zero() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        let eig = numerical_spectrum(&a).unwrap();
        // A double root is only determined to sqrt(working precision).
        assert!(eig.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn random_hermitian_matches_symmetric_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 12;
        let b = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let a = (&b + b.adjoint()) * Complex64::new(0.5, 0.0);
        let want: Vec<Complex64> = nalgebra::SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let eig = numerical_spectrum(&a).unwrap();
        assert!(max_pair_error(&want, &eig) < 1e-12);
    }

    #[test]
    fn model_spectrum_matches_analytic_below_ep() {
        let sys = SpinSystem::new(10.0).unwrap();
        for &gamma in &[0.0, 0.25, 0.5, 0.75, 0.9] {
            let p = ModelParams::new(10.0, 1.0, gamma).unwrap();
            let eig = numerical_spectrum_dd(&build_hamiltonian_dd(&sys, &p)).unwrap();
            let err = max_pair_error(&analytic_spectrum(&p), &eig);
            assert!(err < 1e-9, "gamma={gamma}: {err:.2e}");
        }
    }

    #[test]
    fn model_spectrum_survives_near_ep_conditioning() {
        let sys = SpinSystem::new(10.0).unwrap();
        let p = ModelParams::new(10.0, 1.0, 0.99).unwrap();
        let eig = numerical_spectrum_dd(&build_hamiltonian_dd(&sys, &p)).unwrap();
        let err = max_pair_error(&analytic_spectrum(&p), &eig);
        assert!(err < 1e-8, "near-EP error {err:.2e}");
    }

    #[test]
    fn model_spectrum_is_purely_imaginary_above_ep() {
        let sys = SpinSystem::new(10.0).unwrap();
        let p = ModelParams::new(10.0, 1.0, 1.2).unwrap();
        let eig = numerical_spectrum_dd(&build_hamiltonian_dd(&sys, &p)).unwrap();
        let max_re = eig.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        assert!(max_re < 1e-10, "max |Re| = {max_re:.2e}");
        let err = max_pair_error(&analytic_spectrum(&p), &eig);
        assert!(err < 1e-9, "pairing error {err:.2e}");
    }

    #[test]
    fn f64_entries_drift_near_the_ep_while_dd_entries_hold() {
        // The f64-rounded raising amplitudes are a backward perturbation
        // of the matrix; at gamma=0.9 the conditioning amplifies it to
        // ~1e-4 in the eigenvalues, which no solver can undo. The same
        // solver fed dd-accurate entries stays on the closed form.
        let sys = SpinSystem::new(10.0).unwrap();
        let p = ModelParams::new(10.0, 1.0, 0.9).unwrap();
        let want = analytic_spectrum(&p);

        let from_f64 = numerical_spectrum(&build_hamiltonian(&sys, &p)).unwrap();
        let err_f64 = max_pair_error(&want, &from_f64);
        assert!(
            err_f64 > 1e-7 && err_f64 < 1e-2,
            "f64-entry drift {err_f64:.2e} outside its conditioning window"
        );

        let from_dd = numerical_spectrum_dd(&build_hamiltonian_dd(&sys, &p)).unwrap();
        let err_dd = max_pair_error(&want, &from_dd);
        assert!(err_dd < 1e-12, "dd-entry error {err_dd:.2e}");
    }

    #[test]
    fn rejects_non_square_input() {
        let a = CMat::zeros(2, 3);
        assert!(matches!(
            numerical_spectrum(&a),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }
}
