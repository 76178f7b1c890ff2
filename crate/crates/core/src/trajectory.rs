//! Complexified classical trajectories with their tangent matrix, action and
//! Solari-Kochetov integral.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::hamiltonian::{sk_from_jet, Hamiltonian, HamiltonianKind};
use crate::ode::{self, OdeOptions, OdeStats, StepVerdict};
use crate::spin::{PhasePoint, SpinContext, C64};

/// Energy drift beyond this multiple of the tolerance raises the drift flag.
pub const ENERGY_DRIFT_FACTOR: f64 = 1e3;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this `|M_zbarzbar|` the phase of `M` is not resolved and its jump is
/// not used to reject steps. Samples this close to a caustic are excluded
/// from the sum anyway.
const M_PHASE_FLOOR: f64 = 1e-9;

/// Endpoints that enter the boundary term: the initial `z_i` and the final
/// `zbar_f = conj(z_f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub z_i: C64,
    pub zbar_f: C64,
}

impl Boundary {
    pub fn new(z_i: C64, z_f: C64) -> Self {
        Self {
            z_i,
            zbar_f: z_f.conj(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub tol: f64,
    pub max_steps: usize,
}

impl TrajectoryOptions {
    pub fn new(tol: f64) -> Result<Self> {
        if !(1e-13..=1e-6).contains(&tol) {
            return Err(Error::InvalidArgument(format!(
                "ode tolerance {tol:e} outside [1e-13, 1e-6]"
            )));
        }
        Ok(Self {
            tol,
            max_steps: 200_000,
        })
    }
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 200_000,
        }
    }
}

/// A solved trajectory from `t = 0` to `t = T`.
///
/// `ln_first` and `ln_last` are the logarithms of `1 + zbar(0) z_i` and
/// `1 + zbar_f z(T)`. The first is principal; the second continues
/// `ln(1 + z zbar)` along the trajectory, so it stays on the same sheet as
/// the flow winds around the pole.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: f64,
    pub z0: C64,
    pub zbar0: C64,
    pub z_t: C64,
    pub zbar_t: C64,
    /// Rows `(z, zbar)`, columns `(z0, zbar0)`.
    pub m: [[C64; 2]; 2],
    /// `int (kinetic - H) dt`
    pub s_dyn: C64,
    /// `int i hbar j (zbar zdot - zbardot z)/(1 + z zbar) dt`
    pub kinetic: C64,
    /// `int A dt`
    pub sk: C64,
    pub boundary: C64,
    /// Full action `s_dyn + boundary`.
    pub s: C64,
    pub ln_first: C64,
    pub ln_last: C64,
    /// Phase of `M_zbarzbar` followed continuously from zero.
    pub arg_m: f64,
    pub energy0: C64,
    pub energy_t: C64,
    pub energy_drift: bool,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn m_zbarzbar(&self) -> C64 {
        self.m[1][1]
    }

    /// `ln M_zbarzbar` on the sheet fixed by `arg_m`.
    pub fn ln_m(&self) -> C64 {
        C64::new(self.m_zbarzbar().norm().ln(), self.arg_m)
    }

    /// `(1 + zbar_f z(T)) / [(1 + z_i zbar(0)) M_zbarzbar]`.
    pub fn prefactor(&self) -> C64 {
        (self.ln_last - self.ln_first).exp() / self.m_zbarzbar()
    }

    /// Phase of the square-root prefactor on the continued sheet.
    pub fn prefactor_phase(&self) -> f64 {
        0.5 * ((self.ln_last - self.ln_first).im - self.arg_m)
    }
}

/// Boundary logarithms and the boundary term from endpoint data.
fn boundary_logs(
    ctx: &SpinContext,
    b: Boundary,
    z0: C64,
    zbar0: C64,
    z_t: C64,
    zbar_t: C64,
    ln_w_change: C64,
) -> (C64, C64, C64) {
    let w0 = 1.0 + z0 * zbar0;
    let w_t = 1.0 + z_t * zbar_t;
    let ln_w0 = w0.ln();
    let ln_first = ln_w0 + ((1.0 + zbar0 * b.z_i) / w0).ln();
    let ln_last = ln_w0 + ln_w_change + ((1.0 + b.zbar_f * z_t) / w_t).ln();
    let boundary = -I * ctx.hbar() * ctx.j() * (ln_first + ln_last);
    (ln_first, ln_last, boundary)
}

fn flow(ham: &Hamiltonian, y: &[C64], dy: &mut [C64]) -> Result<C64> {
    let ctx = ham.ctx();
    let p = PhasePoint::new(y[0], y[1]);
    let s = p.checked_one_plus_product()?;
    let jet = ham.jet(p)?;
    let hbar = ctx.hbar();
    let two_j = ctx.two_j() as f64;
    let g = s * s / two_j;
    let g_z = 2.0 * s * p.zbar / two_j;
    let g_zb = 2.0 * s * p.z / two_j;
    let ih = I / hbar;

    let zdot = -ih * g * jet.h_zbar;
    let zbardot = ih * g * jet.h_z;
    let a = -ih * (g_z * jet.h_zbar + g * jet.h_zzbar);
    let b = -ih * (g_zb * jet.h_zbar + g * jet.h_zbarzbar);
    let c = ih * (g_z * jet.h_z + g * jet.h_zz);
    let d = ih * (g_zb * jet.h_z + g * jet.h_zzbar);

    dy[0] = zdot;
    dy[1] = zbardot;
    // M' = J M with M stored row-major in y[2..6]
    dy[2] = a * y[2] + b * y[4];
    dy[3] = a * y[3] + b * y[5];
    dy[4] = c * y[2] + d * y[4];
    dy[5] = c * y[3] + d * y[5];
    let kinetic = I * hbar * ctx.j() * (p.zbar * zdot - zbardot * p.z) / s;
    dy[6] = kinetic - jet.h;
    dy[7] = kinetic;
    dy[8] = sk_from_jet(&jet, p, ctx);
    Ok(jet.h)
}

fn phase_step(new: C64, old: C64) -> f64 {
    (new / old).arg()
}

/// Integrates the complexified Hamilton equations from `(z0, zbar0)` over
/// physical time `t`.
pub fn integrate(
    ham: &Hamiltonian,
    z0: C64,
    zbar0: C64,
    t: f64,
    opts: &TrajectoryOptions,
    boundary: Boundary,
) -> Result<Trajectory> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integration time {t} must be >= 0"
        )));
    }
    let ctx = *ham.ctx();
    let p0 = PhasePoint::new(z0, zbar0);
    p0.checked_one_plus_product()?;
    let energy0 = ham.energy(p0)?;

    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut y = [z0, zbar0, one, zero, zero, one, zero, zero, zero];
    let mut arg_m = 0.0f64;
    let mut arg_w = 0.0f64;
    let mut max_drift = 0.0f64;
    let drift_scale = energy0.norm() + 1.0;

    let ode_opts = OdeOptions {
        rtol: opts.tol,
        atol: opts.tol,
        max_steps: opts.max_steps,
        ..OdeOptions::default()
    };
    let stats = ode::integrate(
        |_, y, dy| flow(ham, y, dy).map(|_| ()),
        0.0,
        t,
        &mut y,
        &ode_opts,
        |_, old, new| {
            let dm = phase_step(new[5], old[5]);
            let w_old = 1.0 + old[0] * old[1];
            let w_new = 1.0 + new[0] * new[1];
            let dw = phase_step(w_new, w_old);
            let m_resolved = new[5].norm() > M_PHASE_FLOOR;
            if (m_resolved && dm.abs() > FRAC_PI_2)
                || dw.abs() > FRAC_PI_2
                || !dm.is_finite()
                || !dw.is_finite()
            {
                return StepVerdict::Reject;
            }
            arg_m += dm;
            arg_w += dw;
            if let Ok(e) = ham.energy(PhasePoint::new(new[0], new[1])) {
                max_drift = max_drift.max((e - energy0).norm());
            }
            StepVerdict::Accept
        },
    )?;

    let [z_t, zbar_t, m00, m01, m10, m11, s_dyn, kinetic, sk] = y;
    let p_t = PhasePoint::new(z_t, zbar_t);
    let w0 = p0.one_plus_product();
    let w_t = p_t.checked_one_plus_product()?;
    let ln_w_change = C64::new((w_t.norm() / w0.norm()).ln(), arg_w);
    let (ln_first, ln_last, bterm) =
        boundary_logs(&ctx, boundary, z0, zbar0, z_t, zbar_t, ln_w_change);
    let energy_t = ham.energy(p_t)?;
    max_drift = max_drift.max((energy_t - energy0).norm());

    Ok(Trajectory {
        t,
        z0,
        zbar0,
        z_t,
        zbar_t,
        m: [[m00, m01], [m10, m11]],
        s_dyn,
        kinetic,
        sk,
        boundary: bterm,
        s: s_dyn + bterm,
        ln_first,
        ln_last,
        arg_m,
        energy0,
        energy_t,
        energy_drift: max_drift > ENERGY_DRIFT_FACTOR * opts.tol * drift_scale,
        stats,
    })
}

/// `2 mu / j * (x - 1)/(x + 1)`, the `J_z^2` angular frequency in units of
/// `hbar nu`, for `x = z zbar`.
pub fn jz2_frequency(x: C64, ctx: &SpinContext) -> C64 {
    2.0 * ctx.mu() / ctx.j() * (x - 1.0) / (x + 1.0)
}

/// Closed-form trajectory of `hbar^2 nu J_z^2`.
pub fn analytic_jz2_trajectory(
    ham: &Hamiltonian,
    z0: C64,
    zbar0: C64,
    t: f64,
    boundary: Boundary,
) -> Result<Trajectory> {
    if ham.spec().kind != HamiltonianKind::JzSquared {
        return Err(Error::InvalidArgument(
            "analytic trajectory requires the J_z^2 hamiltonian".to_string(),
        ));
    }
    let ctx = *ham.ctx();
    let p0 = PhasePoint::new(z0, zbar0);
    let s = p0.checked_one_plus_product()?;
    let hbar = ctx.hbar();
    let j = ctx.j();
    let mu = ctx.mu();
    let tau = hbar * ham.nu() * t;
    let x = z0 * zbar0;
    let u = (x - 1.0) / s;
    let omega = jz2_frequency(x, &ctx);
    let omega1 = 4.0 * mu / j / (s * s);
    let rot = (-I * tau * omega).exp();
    let z_t = rot * z0;
    let zbar_t = zbar0 / rot;
    let m = [
        [
            rot * (1.0 - I * tau * omega1 * x),
            -I * tau * omega1 * z0 * z0 * rot,
        ],
        [
            I * tau * omega1 * zbar0 * zbar0 / rot,
            (1.0 + I * tau * omega1 * x) / rot,
        ],
    ];
    let arg_m = (tau * omega).re + (1.0 + I * tau * omega1 * x).arg();

    let kinetic = hbar * tau * j * omega * (1.0 + j * omega / (2.0 * mu));
    let h_int = hbar * tau * (mu * u * u + 0.5 * j);
    let sk = hbar * tau * ((j * omega + mu) / (2.0 * j) - j * omega * omega / (8.0 * mu));
    let s_dyn = kinetic - h_int;
    let (ln_first, ln_last, bterm) =
        boundary_logs(&ctx, boundary, z0, zbar0, z_t, zbar_t, C64::new(0.0, 0.0));
    let energy = ham.energy(p0)?;
    Ok(Trajectory {
        t,
        z0,
        zbar0,
        z_t,
        zbar_t,
        m,
        s_dyn,
        kinetic,
        sk,
        boundary: bterm,
        s: s_dyn + bterm,
        ln_first,
        ln_last,
        arg_m,
        energy0: energy,
        energy_t: energy,
        energy_drift: false,
        stats: OdeStats::default(),
    })
}

/// Geometric phase `phi_p + Re{B + int[kinetic + A] dt} / hbar`.
pub fn geometric_phase(traj: &Trajectory, phi_p: f64, ctx: &SpinContext) -> f64 {
    phi_p + (traj.boundary + traj.kinetic + traj.sk).re / ctx.hbar()
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianSpec;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn jz2(j: f64) -> Hamiltonian {
        Hamiltonian::new(
            HamiltonianSpec::jz_squared(1.0),
            SpinContext::from_j(j).unwrap(),
        )
        .unwrap()
    }

    fn opts(tol: f64) -> TrajectoryOptions {
        TrajectoryOptions::new(tol).unwrap()
    }

    #[test]
    fn linear_flow_and_tangent_matrix() {
        let ctx = SpinContext::from_j(4.0).unwrap();
        let nu = 1.7;
        let ham = Hamiltonian::new(HamiltonianSpec::linear_jz(nu), ctx).unwrap();
        let (z0, zb0) = (c(0.4, -0.9), c(1.3, 0.2));
        let t = 3.1;
        let tr = integrate(
            &ham,
            z0,
            zb0,
            t,
            &opts(1e-11),
            Boundary::new(z0, zb0.conj()),
        )
        .unwrap();
        let rot = C64::from_polar(1.0, -nu * t);
        assert!((tr.z_t - rot * z0).norm() < 1e-9);
        assert!((tr.zbar_t - zb0 / rot).norm() < 1e-9);
        assert!((tr.m_zbarzbar() - C64::from_polar(1.0, nu * t)).norm() < 1e-9);
        assert!((tr.arg_m - nu * t).abs() < 1e-9);
        // constant SK integrand hbar nu / 2
        assert!((tr.sk - c(ctx.hbar() * nu * t / 2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_time_is_identity() {
        let ham = jz2(10.0);
        let z_i = c(0.5, 0.1);
        let b = Boundary::new(z_i, z_i);
        let tr = integrate(&ham, z_i, z_i.conj(), 0.0, &opts(1e-10), b).unwrap();
        assert_eq!(
            tr.m,
            [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
        );
        assert_eq!(tr.sk, c(0.0, 0.0));
        assert_eq!(tr.s, tr.boundary);
        assert!(tr.boundary.re.abs() < 1e-15);
        assert!(geometric_phase(&tr, tr.prefactor_phase(), ham.ctx()).abs() < 1e-15);
    }

    #[test]
    fn static_trajectory_on_the_equator() {
        let ham = jz2(10.0);
        let z0 = C64::from_polar(1.0, 0.3);
        let tr = analytic_jz2_trajectory(&ham, z0, z0.conj(), 2.0, Boundary::new(z0, z0)).unwrap();
        assert!((tr.z_t - z0).norm() < 1e-15);
        assert!(tr.kinetic.norm() < 1e-15);
        let num = integrate(
            &ham,
            z0,
            z0.conj(),
            2.0,
            &opts(1e-11),
            Boundary::new(z0, z0),
        )
        .unwrap();
        assert!(num.kinetic.norm() < 1e-9);
        assert!((num.zbar_t - z0.conj()).norm() < 1e-9);
    }

    #[test]
    fn linear_geometric_phase_over_a_period() {
        let ctx = SpinContext::from_j(3.5).unwrap();
        let nu = 0.8;
        let ham = Hamiltonian::new(HamiltonianSpec::linear_jz(nu), ctx).unwrap();
        for theta in [0.3, 1.1, 2.0, 2.9] {
            let z_i = crate::spin::stereographic(theta, 0.7).unwrap();
            let t = 2.0 * PI / nu;
            let tr = integrate(
                &ham,
                z_i,
                z_i.conj(),
                t,
                &opts(1e-12),
                Boundary::new(z_i, z_i),
            )
            .unwrap();
            let phase = geometric_phase(&tr, tr.prefactor_phase(), &ctx);
            let want = 2.0 * PI * ctx.j() * (1.0 - theta.cos());
            assert!(
                wrap_angle(phase - want).abs() < 1e-8,
                "theta {theta}: {phase} vs {want}"
            );
        }
    }

    #[test]
    fn caustic_locations() {
        let ctx = SpinContext::from_j(10.0).unwrap();
        let ham = Hamiltonian::new(HamiltonianSpec::jz_squared(1.0), ctx).unwrap();
        let (j, mu) = (ctx.j(), ctx.mu());
        let z_i = c(0.8, 0.3);
        let t = 0.35;
        let tau = ctx.hbar() * t;
        let sigma = 2.0 * mu / j * tau;
        for sign in [1.0, -1.0] {
            let root = (2.0 * I * sigma - sigma * sigma).sqrt();
            let zbar0 = -(1.0 + I * sigma - sign * root) / z_i;
            let tr = analytic_jz2_trajectory(&ham, z_i, zbar0, t, Boundary::new(z_i, z_i)).unwrap();
            assert!(tr.m_zbarzbar().norm() <= 1e-6);
            // the unscaled time does not locate the zero
            let root = (2.0 * I * tau - tau * tau).sqrt();
            let zbar0 = -(1.0 + I * tau - sign * root) / z_i;
            let tr = analytic_jz2_trajectory(&ham, z_i, zbar0, t, Boundary::new(z_i, z_i)).unwrap();
            assert!(tr.m_zbarzbar().norm() > 1e-3);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let ham = jz2(2.0);
        let b = Boundary::new(c(1.0, 0.0), c(1.0, 0.0));
        assert!(matches!(
            integrate(&ham, c(1.0, 0.0), c(-1.0, 0.0), 1.0, &opts(1e-10), b),
            Err(Error::Pole { .. })
        ));
        assert!(integrate(&ham, c(1.0, 0.0), c(1.0, 0.0), -1.0, &opts(1e-10), b).is_err());
        assert!(TrajectoryOptions::new(1e-3).is_err());
        let lin = Hamiltonian::new(HamiltonianSpec::linear_jz(1.0), *ham.ctx()).unwrap();
        assert!(analytic_jz2_trajectory(&lin, c(1.0, 0.0), c(1.0, 0.0), 1.0, b).is_err());
    }

    fn small_point() -> impl Strategy<Value = (C64, C64)> {
        (-1.2f64..1.2, -1.2f64..1.2, -1.2f64..1.2, -1.2f64..1.2)
            .prop_map(|(a, b, cc, d)| (c(a, b), c(cc, d)))
            .prop_filter("away from the pole", |(z, zb)| (1.0 + z * zb).norm() > 0.5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn integrate_matches_analytic((z0, zb0) in small_point(), t in 0.0f64..2.0) {
            let ham = jz2(5.0);
            let b = Boundary::new(z0, c(0.3, 0.4));
            let a = analytic_jz2_trajectory(&ham, z0, zb0, t, b).unwrap();
            let n = integrate(&ham, z0, zb0, t, &opts(1e-12), b).unwrap();
            let close = |x: C64, y: C64| (x - y).norm() <= 1e-8 * (1.0 + y.norm());
            prop_assert!(close(n.z_t, a.z_t) && close(n.zbar_t, a.zbar_t));
            for r in 0..2 {
                for col in 0..2 {
                    prop_assert!(close(n.m[r][col], a.m[r][col]));
                }
            }
            prop_assert!(close(n.kinetic, a.kinetic));
            prop_assert!(close(n.s_dyn, a.s_dyn));
            prop_assert!(close(n.sk, a.sk));
            prop_assert!(close(n.s, a.s));
            prop_assert!((n.arg_m - a.arg_m).abs() <= 1e-8 * (1.0 + a.arg_m.abs()));
        }

        #[test]
        fn energy_is_conserved((z0, zb0) in small_point(), t in 0.0f64..3.0, kind in 0usize..3) {
            let ctx = SpinContext::from_j(5.0).unwrap();
            let spec = [
                HamiltonianSpec::jz_squared(1.0),
                HamiltonianSpec::linear_jz(1.0),
                HamiltonianSpec::anisotropic(1.0, PI),
            ][kind].clone();
            let ham = Hamiltonian::new(spec, ctx).unwrap();
            let tol = 1e-11;
            if let Ok(tr) = integrate(&ham, z0, zb0, t, &opts(tol), Boundary::new(z0, z0)) {
                let drift = (tr.energy_t - tr.energy0).norm();
                prop_assert!(drift <= 10.0 * tol * tr.energy0.norm() + 10.0 * tol, "drift {drift:e}");
                prop_assert!(!tr.energy_drift);
            }
        }

        #[test]
        fn tangent_matrix_is_the_linearization((z0, zb0) in small_point(), t in 0.1f64..2.0) {
            let ctx = SpinContext::from_j(5.0).unwrap();
            let ham = Hamiltonian::new(HamiltonianSpec::anisotropic(1.0, 1.3), ctx).unwrap();
            let o = opts(1e-13);
            let b = Boundary::new(z0, z0);
            let base = integrate(&ham, z0, zb0, t, &o, b).unwrap();
            let resid = |eps: f64| {
                let moved = integrate(&ham, z0, zb0 + eps, t, &o, b).unwrap();
                (moved.zbar_t - base.zbar_t - base.m_zbarzbar() * eps).norm()
            };
            let (r1, r2) = (resid(1e-4), resid(5e-5));
            // second order: halving eps quarters the residual
            prop_assert!(r2 <= 0.35 * r1 + 1e-11, "{r1:e} {r2:e}");
        }

        #[test]
        fn reversed_flow_returns((z0, zb0) in small_point(), t in 0.0f64..2.0) {
            let ctx = SpinContext::from_j(5.0).unwrap();
            let tol = 1e-11;
            let fwd = Hamiltonian::new(HamiltonianSpec::anisotropic(1.0, 0.7), ctx).unwrap();
            let back = Hamiltonian::new(HamiltonianSpec::anisotropic(-1.0, 0.7), ctx).unwrap();
            let b = Boundary::new(z0, z0);
            let a = integrate(&fwd, z0, zb0, t, &opts(tol), b).unwrap();
            let r = integrate(&back, a.z_t, a.zbar_t, t, &opts(tol), b).unwrap();
            prop_assert!((r.z_t - z0).norm() <= 100.0 * tol * (1.0 + z0.norm()));
            prop_assert!((r.zbar_t - zb0).norm() <= 100.0 * tol * (1.0 + zb0.norm()));
        }
    }
}
