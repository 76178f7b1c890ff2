//! Adaptive Dormand-Prince 5(4) integrator for complex state vectors.

use crate::error::{Error, Result};
use crate::spin::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; zero picks one from the span.
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h0: 0.0,
            h_min: 1e-14,
            max_steps: 200_000,
        }
    }
}

/// Verdict of a step observer on a trial step that passed error control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepVerdict {
    Accept,
    /// Retry with a smaller step (e.g. a tracked phase jumped too far).
    Reject,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1 >= t0`, overwriting `y`.
///
/// `f` writes the derivative into its last argument. An `Err` from `f` at a
/// trial stage shrinks the step; at the current accepted point it is
/// returned. `observe(t, y_old, y_new)` sees every trial step that passes
/// error control and may reject it.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [C64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    O: FnMut(f64, &[C64], &[C64]) -> StepVerdict,
{
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidArgument(format!(
            "integration span [{t0}, {t1}] is not a forward interval"
        )));
    }
    let n = y.len();
    let mut stats = OdeStats::default();
    if t1 == t0 {
        return Ok(stats);
    }
    let span = t1 - t0;
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]);
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    let mut t = t0;
    f(t, y, &mut k[0])?;
    stats.rhs_evals += 1;

    let mut h = if opts.h0 > 0.0 {
        opts.h0.min(span)
    } else {
        initial_step(y, &k[0], span, opts)
    };
    let mut have_fsal = true;
    let mut last_err = 1e-4f64;
    let min_step = opts.h_min.max(span * 1e-15);

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::TooManySteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        if !have_fsal {
            f(t, y, &mut k[0])?;
            stats.rhs_evals += 1;
            have_fsal = true;
        }
        let last = t + h >= t1 || (t1 - (t + h)) < min_step;
        if last {
            h = t1 - t;
        }
        if h < min_step && !last {
            return Err(underflow(t, h, y));
        }

        let trial = trial_step(&mut f, t, h, y, &mut k, &mut stage, &mut y_new);
        stats.rhs_evals += 6;
        let err = match trial {
            Ok(()) => error_norm(y, &y_new, &k, h, opts),
            Err(_) => f64::INFINITY,
        };

        if err.is_finite() && err <= 1.0 {
            if observe(t + h, y, &y_new) == StepVerdict::Reject {
                stats.rejected += 1;
                h *= 0.5;
                if h < min_step {
                    return Err(underflow(t, h, y));
                }
                continue;
            }
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            k.swap(0, 6);
            stats.accepted += 1;
            if last {
                return Ok(stats);
            }
            // PI step-size control
            let e = err.max(1e-10);
            let factor = (0.9 * e.powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0)).clamp(0.2, 5.0);
            last_err = e;
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            h *= factor;
            if h < min_step {
                return Err(underflow(t, h, y));
            }
        }
    }
}

fn underflow(t: f64, h: f64, y: &[C64]) -> Error {
    Error::StepUnderflow {
        t,
        h,
        z: y.first().copied().unwrap_or_default(),
        zbar: y.get(1).copied().unwrap_or_default(),
    }
}

fn initial_step(y: &[C64], dy: &[C64], span: f64, opts: &OdeOptions) -> f64 {
    let scale = |v: &C64| opts.atol + opts.rtol * v.norm();
    let d0 = y
        .iter()
        .map(|v| (v.norm() / scale(v)).powi(2))
        .sum::<f64>()
        .sqrt();
    let d1 = y
        .iter()
        .zip(dy)
        .map(|(v, d)| (d.norm() / scale(v)).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span).min(0.1 * span.max(1e-3)).max(1e-12)
}

#[allow(clippy::too_many_arguments)]
fn trial_step<F>(
    f: &mut F,
    t: f64,
    h: f64,
    y: &[C64],
    k: &mut [Vec<C64>; 7],
    stage: &mut [C64],
    y_new: &mut [C64],
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len();
    let (k0, rest) = k.split_at_mut(1);
    let k1 = &k0[0];
    let [k2, k3, k4, k5, k6, k7] = rest else {
        unreachable!()
    };

    for i in 0..n {
        stage[i] = y[i] + h * A21 * k1[i];
    }
    f(t + C2 * h, stage, k2)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f(t + C3 * h, stage, k3)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f(t + C4 * h, stage, k4)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f(t + C5 * h, stage, k5)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f(t + h, stage, k6)?;
    for i in 0..n {
        y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
    }
    f(t + h, y_new, k7)?;
    Ok(())
}

fn error_norm(y: &[C64], y_new: &[C64], k: &[Vec<C64>; 7], h: f64, opts: &OdeOptions) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        let e = h
            * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * k[6][i]);
        let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
        let r = e.norm() / sc;
        if !r.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(r);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exponential() {
        let lambda = C64::new(-0.3, 2.0);
        let mut y = vec![C64::new(1.0, 0.5)];
        let stats = integrate(
            |_, y, dy| {
                dy[0] = lambda * y[0];
                Ok(())
            },
            0.0,
            5.0,
            &mut y,
            &OdeOptions::with_tol(1e-12),
            |_, _, _| StepVerdict::Accept,
        )
        .unwrap();
        let want = C64::new(1.0, 0.5) * (lambda * 5.0).exp();
        assert!((y[0] - want).norm() < 1e-10, "{}", (y[0] - want).norm());
        assert!(stats.accepted > 0);
    }

    #[test]
    fn observer_rejection_refines_steps() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut max_jump = 0.0f64;
        integrate(
            |_, y, dy| {
                dy[0] = C64::new(0.0, 10.0) * y[0];
                Ok(())
            },
            0.0,
            3.0,
            &mut y,
            &OdeOptions::with_tol(1e-6),
            |_, old, new| {
                let jump = (new[0] / old[0]).arg().abs();
                if jump > 0.1 {
                    StepVerdict::Reject
                } else {
                    max_jump = max_jump.max(jump);
                    StepVerdict::Accept
                }
            },
        )
        .unwrap();
        assert!(max_jump <= 0.1);
        assert!((y[0] - C64::from_polar(1.0, 30.0)).norm() < 1e-5);
    }

    #[test]
    fn blow_up_reports_underflow() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            2.0,
            &mut y,
            &OdeOptions::with_tol(1e-10),
            |_, _, _| StepVerdict::Accept,
        );
        assert!(matches!(
            r,
            Err(Error::StepUnderflow { .. })
                | Err(Error::NonFinite { .. })
                | Err(Error::TooManySteps { .. })
        ));
    }

    #[test]
    fn zero_span_is_a_no_op() {
        let mut y = vec![C64::new(2.0, 0.0)];
        let s = integrate(
            |_, _, _| Ok(()),
            1.0,
            1.0,
            &mut y,
            &OdeOptions::default(),
            |_, _, _| StepVerdict::Accept,
        )
        .unwrap();
        assert_eq!(s.accepted, 0);
        assert_eq!(y[0], C64::new(2.0, 0.0));
    }
}
