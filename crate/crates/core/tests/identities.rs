//! Finite-difference checks of the action's boundary derivatives and of the
//! prefactor identity on numerically integrated `J_z^2` trajectories.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinsc::branch::{refine_root, RootProblem, SearchConfig};
use spinsc::trajectory::{integrate, Boundary, Trajectory, TrajectoryOptions};
use spinsc::{Hamiltonian, HamiltonianSpec, SpinContext};

const I: C64 = C64::new(0.0, 1.0);

struct Case {
    ham: Hamiltonian,
    z_i: C64,
    zbar_f: C64,
    tau: f64,
    root: Trajectory,
}

fn opts() -> TrajectoryOptions {
    TrajectoryOptions::new(1e-12).unwrap()
}

fn cfg() -> SearchConfig {
    SearchConfig {
        newton_tol: 1e-12,
        max_newton: 50,
        ..Default::default()
    }
}

/// Root trajectory for `(z_i, zbar_f, tau)` continued from `guess`.
fn solve(ham: &Hamiltonian, z_i: C64, zbar_f: C64, tau: f64, guess: C64) -> Trajectory {
    let p = RootProblem::new(ham, z_i, zbar_f.conj(), opts()).unwrap();
    let (_, t) = refine_root(&p, tau, guess, &cfg()).unwrap();
    t
}

/// Random trajectories: pick `z_i`, `zbar(0)` and `tau`, integrate, and take
/// `zbar_f = zbar(T)` so the trajectory is a root by construction.
fn cases(n: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < n {
        let j = [5.0, 10.0, 20.0][rng.gen_range(0..3)];
        let ctx = SpinContext::from_j(j).unwrap();
        let ham = Hamiltonian::new(HamiltonianSpec::jz_squared(1.0), ctx).unwrap();
        let z_i = C64::from_polar(
            rng.gen_range(0.3..1.5),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let zbar0 =
            z_i.conj() * (1.0 + C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)));
        let tau = rng.gen_range(0.05..1.0) / j;
        let t = tau / ctx.hbar();
        let Ok(traj) = integrate(
            &ham,
            z_i,
            zbar0,
            t,
            &opts(),
            Boundary {
                z_i,
                zbar_f: C64::new(0.0, 0.0),
            },
        ) else {
            continue;
        };
        let zbar_f = traj.zbar_t;
        if traj.m_zbarzbar().norm() < 1e-2 {
            continue;
        }
        let root = solve(&ham, z_i, zbar_f, tau, zbar0);
        out.push(Case {
            ham,
            z_i,
            zbar_f,
            tau,
            root,
        });
    }
    out
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn hamilton_jacobi_relations_hold_by_finite_differences() {
    let h = 1e-4;
    for (k, c) in cases(20).iter().enumerate() {
        let ctx = *c.ham.ctx();
        let (hbar, j) = (ctx.hbar(), ctx.j());
        let g = c.root.zbar0;
        let s = |z_i: C64, zbar_f: C64, tau: f64| solve(&c.ham, z_i, zbar_f, tau, g).s;

        let ds_dzf = (s(c.z_i, c.zbar_f + h, c.tau) - s(c.z_i, c.zbar_f - h, c.tau)) / (2.0 * h);
        let want = 2.0 * j * c.root.z_t / (1.0 + c.zbar_f * c.root.z_t);
        assert!(rel(I / hbar * ds_dzf, want) < 1e-4, "case {k}: dS/dzbar_f");

        let ds_dzi = (s(c.z_i + h, c.zbar_f, c.tau) - s(c.z_i - h, c.zbar_f, c.tau)) / (2.0 * h);
        let want = 2.0 * j * c.root.zbar0 / (1.0 + c.root.zbar0 * c.z_i);
        assert!(rel(I / hbar * ds_dzi, want) < 1e-4, "case {k}: dS/dz_i");

        // d/dT at fixed endpoints; tau = hbar nu T with nu = 1
        let ht = 1e-4 * c.tau;
        let ds_dt =
            (s(c.z_i, c.zbar_f, c.tau + ht) - s(c.z_i, c.zbar_f, c.tau - ht)) / (2.0 * ht / hbar);
        assert!(rel(ds_dt, -c.root.energy0) < 1e-4, "case {k}: dS/dT");
    }
}

#[test]
fn mixed_second_derivative_matches_the_tangent_matrix() {
    let h = 1e-3;
    for (k, c) in cases(20).iter().enumerate() {
        let ctx = *c.ham.ctx();
        let g = c.root.zbar0;
        let s = |dz: f64, dzf: f64| solve(&c.ham, c.z_i + dz, c.zbar_f + dzf, c.tau, g).s;
        let d2 = (s(h, h) - s(h, -h) - s(-h, h) + s(-h, -h)) / (4.0 * h * h);
        let lhs = I / ctx.hbar() * d2;
        let w = 1.0 + c.z_i * c.root.zbar0;
        let rhs = 2.0 * ctx.j() / (w * w * c.root.m_zbarzbar());
        assert!(rel(lhs, rhs) < 1e-4, "case {k}: {lhs} vs {rhs}");
    }
}
