//! Explicit Dormand-Prince 5(4) integrator with adaptive steps and a
//! quartic dense-output interpolant.
//!
//! The state is a fixed-size `[f64; N]`; every accepted step stores its
//! interpolation coefficients so solutions can be evaluated at arbitrary
//! times inside the integration span without re-stepping. An optional
//! halt function stops the integration at a sign change, refined to the
//! crossing by bisection on the dense interpolant.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Weights of the extra interpolation stage combination.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Clone, Copy, Debug)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Dopri5Options {
            rtol: 1e-11,
            atol: 1e-12,
            h0: None,
            max_steps: 10_000_000,
        }
    }
}

/// One accepted step: interval start, width, and the five interpolation
/// coefficient vectors of the quartic dense polynomial.
#[derive(Clone, Debug)]
struct StepRecord<const N: usize> {
    t_old: f64,
    h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> StepRecord<N> {
    /// Evaluate the interpolant at local coordinate `s = (t - t_old) / h`.
    fn eval(&self, s: f64) -> [f64; N] {
        let s1 = 1.0 - s;
        let [c0, c1, c2, c3, c4] = &self.cont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = c0[i] + (c1[i] + (c2[i] + (c3[i] + c4[i] * s1) * s) * s1) * s;
        }
        y
    }
}

/// Continuously evaluable solution of an initial value problem on
/// `[t0, t_end]`.
#[derive(Clone, Debug)]
pub struct DenseOutput<const N: usize> {
    t0: f64,
    t_end: f64,
    steps: Vec<StepRecord<N>>,
}

impl<const N: usize> DenseOutput<N> {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Solution value at `t`, which must lie inside the integration span
    /// (a relative slack of 1e-12 absorbs endpoint rounding).
    pub fn eval(&self, t: f64) -> Result<[f64; N]> {
        let span = (self.t_end - self.t0).abs().max(1.0);
        if t < self.t0 - 1e-12 * span || t > self.t_end + 1e-12 * span {
            return Err(Error::OutOfRange { t, t_max: self.t_end });
        }
        let t = t.clamp(self.t0, self.t_end);
        // Binary search for the step whose interval contains t.
        let idx = self
            .steps
            .partition_point(|rec| rec.t_old + rec.h < t)
            .min(self.steps.len() - 1);
        let rec = &self.steps[idx];
        let s = ((t - rec.t_old) / rec.h).clamp(0.0, 1.0);
        Ok(rec.eval(s))
    }

    pub fn end_state(&self) -> [f64; N] {
        self.steps
            .last()
            .map(|rec| rec.eval(1.0))
            .expect("dense output always holds at least one step")
    }
}

fn rms_error_norm<const N: usize>(e: &[f64; N], y: &[f64; N], y_new: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
        let q = e[i] / sc;
        acc += q * q;
    }
    (acc / N as f64).sqrt()
}

/// Automatic initial step size (order-5 variant of the classical
/// starting-step heuristic).
fn initial_step<const N: usize, F>(f: &F, t0: f64, y0: &[f64; N], f0: &[f64; N], t_end: f64, rtol: f64, atol: f64) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let span = t_end - t0;
    let sc = |y: &[f64; N], i: usize| atol + rtol * y[i].abs();
    let d0 = (0..N).map(|i| (y0[i] / sc(y0, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let d1 = (0..N).map(|i| (f0[i] / sc(y0, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs()).copysign(span);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y0[i] + h0 * f0[i];
    }
    let f1 = f(t0 + h0, &y1);
    let d2 = (0..N)
        .map(|i| ((f1[i] - f0[i]) / sc(y0, i)).powi(2))
        .sum::<f64>()
        .sqrt()
        / (N as f64).sqrt()
        / h0.abs();
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0.abs() * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0.abs()).min(h1).min(span.abs()).copysign(span)
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end > t0`, returning the
/// dense solution over the full span.
pub fn integrate_dense<const N: usize, F>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opt: &Dopri5Options,
) -> Result<DenseOutput<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    integrate_with_halt(f, t0, t_end, y0, opt, |_, _| 1.0).map(|(sol, _)| sol)
}

/// Integrate as [`integrate_dense`], additionally stopping early when
/// `halt(t, y)` first becomes non-positive at an accepted step. The
/// crossing is refined by bisection on the dense interpolant, the
/// solution is truncated there, and the stop time is returned.
pub fn integrate_with_halt<const N: usize, F, G>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opt: &Dopri5Options,
    halt: G,
) -> Result<(DenseOutput<N>, Option<f64>)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    G: Fn(f64, &[f64; N]) -> f64,
{
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "integration span must be forward, got [{t0}, {t_end}]"
        )));
    }
    let rtol = opt.rtol;
    let atol = opt.atol;
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    let mut h = opt.h0.unwrap_or_else(|| initial_step(&f, t0, &y0, &k0, t_end, rtol, atol));
    let mut steps: Vec<StepRecord<N>> = Vec::new();
    let mut just_rejected = false;
    let mut n_attempts = 0usize;

    while t < t_end {
        n_attempts += 1;
        if n_attempts > opt.max_steps {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step budget of {} exhausted", opt.max_steps),
            });
        }
        let span_left = t_end - t;
        if h > span_left {
            h = span_left;
        }
        if h <= t_end.abs().max(1.0) * 1e-15 {
            return Err(Error::IntegrationFailure {
                t,
                reason: "step size underflow".into(),
            });
        }

        // Six derivative stages beyond the stored FSAL stage.
        let mut k = [[0.0; N]; 7];
        k[0] = k0;
        for stage in 1..7 {
            let mut ys = [0.0; N];
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage - 1][j] * kj[i];
                }
                ys[i] = y[i] + h * acc;
            }
            k[stage] = f(t + C[stage] * h, &ys);
        }

        let mut y_new = [0.0; N];
        let mut err_vec = [0.0; N];
        for i in 0..N {
            let mut acc = 0.0;
            let mut eacc = 0.0;
            for stage in 0..7 {
                acc += B[stage] * k[stage][i];
                eacc += E[stage] * k[stage][i];
            }
            y_new[i] = y[i] + h * acc;
            err_vec[i] = h * eacc;
        }
        let err = rms_error_norm(&err_vec, &y, &y_new, rtol, atol);

        if err <= 1.0 {
            // Accept: build the dense coefficients for this interval.
            let k_new = k[6];
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let mut dacc = 0.0;
                for stage in 0..7 {
                    dacc += D[stage] * k[stage][i];
                }
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k_new[i] - bspl;
                cont[4][i] = h * dacc;
            }
            let rec = StepRecord { t_old: t, h, cont };
            let t_new = t + h;

            // Halt check with bisection refinement on the interpolant.
            if halt(t_new, &y_new) <= 0.0 {
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let ym = rec.eval(mid);
                    if halt(t + mid * h, &ym) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let s_stop = hi;
                let t_stop = t + s_stop * h;
                let truncated = StepRecord {
                    t_old: t,
                    h: s_stop * h,
                    // Reparametrize the quartic onto the shortened interval
                    // by sampling; five samples determine it exactly.
                    cont: refit_quartic(&rec, s_stop),
                };
                steps.push(truncated);
                return Ok((
                    DenseOutput {
                        t0,
                        t_end: t_stop,
                        steps,
                    },
                    Some(t_stop),
                ));
            }

            steps.push(rec);
            t = t_new;
            y = y_new;
            k0 = k_new;
            let facmax = if just_rejected { 1.0 } else { 5.0 };
            just_rejected = false;
            let fac = if err == 0.0 {
                facmax
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, facmax)
            };
            h *= fac;
        } else {
            just_rejected = true;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    Ok((
        DenseOutput {
            t0,
            t_end,
            steps,
        },
        None,
    ))
}

/// Express the restriction of a step's interpolant to `[0, s_stop]` in
/// the same five-coefficient basis, by collocation at five local nodes.
fn refit_quartic<const N: usize>(rec: &StepRecord<N>, s_stop: f64) -> [[f64; N]; 5] {
    // Basis at local u in [0,1]: {1, u, u(1-u), u^2(1-u), u^2(1-u)^2}.
    let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut basis = [[0.0f64; 5]; 5];
    for (r, &u) in nodes.iter().enumerate() {
        let u1 = 1.0 - u;
        basis[r] = [1.0, u, u * u1, u * u * u1, u * u * u1 * u1];
    }
    // Values of the original interpolant at the mapped nodes.
    let mut rhs = [[0.0f64; N]; 5];
    for (r, &u) in nodes.iter().enumerate() {
        rhs[r] = rec.eval(u * s_stop);
    }
    // Solve the 5x5 collocation system by Gaussian elimination with
    // partial pivoting, once for all N components.
    let mut aug = basis;
    let mut sol = rhs;
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        sol.swap(col, piv);
        for row in (col + 1)..5 {
            let fac = aug[row][col] / aug[col][col];
            for c in col..5 {
                aug[row][c] -= fac * aug[col][c];
            }
            for i in 0..N {
                sol[row][i] -= fac * sol[col][i];
            }
        }
    }
    let mut cont = [[0.0f64; N]; 5];
    for row in (0..5).rev() {
        for i in 0..N {
            let mut acc = sol[row][i];
            for c in (row + 1)..5 {
                acc -= aug[row][c] * cont[c][i];
            }
            cont[row][i] = acc / aug[row][row];
        }
    }
    cont
}
