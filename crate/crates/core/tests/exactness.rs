//! For a Hamiltonian linear in the su(2) generators the semiclassical
//! amplitude is exact at every spin.

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use spinsc::assembler::{branch_amplitude, AmplitudeOptions};
use spinsc::branch::{refine_root, RootProblem, SearchConfig};
use spinsc::exact::ExactPropagator;
use spinsc::trajectory::TrajectoryOptions;
use spinsc::{Hamiltonian, HamiltonianSpec, SpinContext};

fn point() -> impl Strategy<Value = C64> {
    (0.05f64..2.5, 0.0f64..std::f64::consts::TAU).prop_map(|(r, a)| C64::from_polar(r, a))
}

/// `<z_f| exp(-i theta J_z) |z_i>` for normalized coherent states, evaluated
/// as an integer power so it keeps full relative accuracy when tiny.
fn linear_closed_form(z_i: C64, z_f: C64, theta: f64, ctx: &SpinContext) -> C64 {
    let raw = (C64::from_polar(1.0, 0.5 * theta)
        * (1.0 + z_f.conj() * z_i * C64::from_polar(1.0, -theta)))
    .powu(ctx.two_j());
    raw / ((1.0 + z_i.norm_sqr()) * (1.0 + z_f.norm_sqr())).powf(ctx.j())
}

fn check(j: f64, nu: f64, z_i: C64, z_f: C64, tau: f64) -> Result<(), TestCaseError> {
    let ctx = SpinContext::from_j(j).unwrap();
    let spec = HamiltonianSpec::linear_jz(nu);
    let ham = Hamiltonian::new(spec.clone(), ctx).unwrap();
    let p = RootProblem::new(&ham, z_i, z_f, TrajectoryOptions::new(1e-12).unwrap()).unwrap();
    let guess = z_f.conj() * C64::from_polar(1.0, -nu * p.time(tau)) * 1.01;
    let cfg = SearchConfig {
        newton_tol: 1e-12,
        ..Default::default()
    };
    let (_, traj) = refine_root(&p, tau, guess, &cfg).unwrap();
    let sc =
        branch_amplitude(&traj, 0, tau, &ham, z_i, z_f, &AmplitudeOptions::default()).amplitude;
    let exact = ExactPropagator::new(&spec, &ctx)
        .unwrap()
        .series(z_i, z_f, &[tau])
        .unwrap()
        .values[0]
        .unwrap();
    let closed = linear_closed_form(z_i, z_f, tau / ctx.hbar(), &ctx);
    // the eigenbasis sum loses relative accuracy once |K| nears its roundoff
    if exact.norm() > 1e-6 {
        prop_assert!((closed - exact).norm() < 1e-10 * exact.norm().max(1.0));
    }
    let err = (sc - closed).norm() / closed.norm();
    prop_assert!(err < 1e-8, "j {j}: {sc} vs {closed}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn linear_jz_is_exact(
        j in prop::sample::select(vec![0.5, 5.0, 20.0]),
        nu in 0.2f64..3.0,
        z_i in point(),
        z_f in point(),
        tau in 0.0f64..6.0,
    ) {
        check(j, nu, z_i, z_f, tau)?;
    }
}
