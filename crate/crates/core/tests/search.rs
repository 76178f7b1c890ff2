//! Branch search on `J_z^2`: seeding completeness against the frequency
//! condition, re-validation of traced samples, and amplitude continuity.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use spinsc::assembler::{branch_amplitudes, AmplitudeOptions, BranchAmplitude};
use spinsc::branch::{find_roots, jz2_frequencies, search_branches, RootProblem, SearchConfig};
use spinsc::exact::tau_grid;
use spinsc::trajectory::TrajectoryOptions;
use spinsc::{Hamiltonian, HamiltonianSpec, SpinContext};

fn setup() -> (Hamiltonian, C64) {
    let ctx = SpinContext::from_j(5.0).unwrap();
    let ham = Hamiltonian::new(HamiltonianSpec::jz_squared(1.0), ctx).unwrap();
    (ham, C64::new(0.5, 0.0))
}

fn cfg() -> SearchConfig {
    SearchConfig {
        half_width: Some(2.0),
        spacing: 0.05,
        ..Default::default()
    }
}

#[test]
fn grid_seeding_finds_every_frequency_root_inside_the_grid() {
    let (ham, z_i) = setup();
    let ctx = *ham.ctx();
    let p = RootProblem::new(&ham, z_i, z_i, TrajectoryOptions::default()).unwrap();
    let cfg = cfg();
    let half = cfg.half_width.unwrap();
    for tau in [0.3, 0.7] {
        let found: Vec<C64> = find_roots(&p, tau, &cfg)
            .into_iter()
            .map(|(z, _)| z)
            .collect();
        let r = z_i * z_i.conj();
        let expected: Vec<C64> = jz2_frequencies(r, tau, &ctx, 12)
            .into_iter()
            .map(|w| z_i.conj() * (C64::new(0.0, -tau) * w).exp())
            .filter(|z| {
                let d = z - z_i.conj();
                // well inside the grid and away from the pole
                d.re.abs() < half - 0.2 && d.im.abs() < half - 0.2 && (1.0 + z_i * z).norm() > 0.2
            })
            .collect();
        assert!(!expected.is_empty());
        for e in &expected {
            assert!(
                found.iter().any(|f| (f - e).norm() < 1e-6),
                "tau {tau}: root {e} missing from {found:?}"
            );
        }
    }
}

#[test]
fn traced_samples_are_roots_and_amplitudes_are_continuous() {
    let (ham, z_i) = setup();
    let p = RootProblem::new(&ham, z_i, z_i, TrajectoryOptions::default()).unwrap();
    let cfg = cfg();
    let taus = tau_grid(0.0, 0.4, 81);
    let report = search_branches(&p, &taus, &cfg).unwrap();
    assert!(report.branches.len() >= 3);
    let amps = branch_amplitudes(
        &report.branches,
        &ham,
        z_i,
        z_i,
        &AmplitudeOptions::default(),
    )
    .unwrap();
    let mut checked = 0;
    for (b, row) in report.branches.iter().zip(&amps) {
        for s in &b.samples {
            let t = p.solve(s.zbar0, s.tau).unwrap();
            assert!(
                p.residual(&t).norm() <= 10.0 * cfg.newton_tol,
                "branch {} at {}",
                b.id,
                s.tau
            );
            assert_eq!(taus[s.index], s.tau);
        }
        // divergent samples near tau -> 0 carry a 1/tau phase rate
        let bounded = |x: &BranchAmplitude| x.excluded.is_none() && x.log_amplitude.re < 1.0;
        for w in row.windows(3) {
            if !w.iter().all(bounded) {
                continue;
            }
            checked += 1;
            let d1 = w[1].log_amplitude.im - w[0].log_amplitude.im;
            let d2 = w[2].log_amplitude.im - w[1].log_amplitude.im;
            assert!(
                d2.abs() < PI,
                "branch {} phase jump {d2} at tau {}",
                b.id,
                w[2].tau
            );
            // a sign flip or a 2 pi slip shows up as a kink in the phase
            assert!(
                (d2 - d1).abs() < 0.5,
                "branch {} phase kink at tau {}",
                b.id,
                w[2].tau
            );
            let turn = (w[2].amplitude / w[1].amplitude).arg();
            assert!(
                (turn - d2).abs() < 1e-6,
                "branch {} amplitude and phase disagree",
                b.id
            );
        }
    }
    assert!(checked > 100);
}
