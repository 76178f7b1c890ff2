//! Per-branch semiclassical amplitudes and their coherent sum.

use rayon::prelude::*;

use crate::branch::Branch;
use crate::error::{Error, Result};
use crate::exact::{PropagatorSeries, SeriesMeta};
use crate::hamiltonian::{Hamiltonian, HamiltonianKind};
use crate::spin::{log_normalization, SpinContext, C64};
use crate::trajectory::{jz2_frequency, Trajectory};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeOptions {
    /// Multiply `J_z^2` amplitudes by `e^{i tau / 4}`.
    pub mu_to_j2: bool,
    pub caustic_threshold: f64,
    /// Exclude hills of a branch whose normalized modulus exceeds `1 + margin`.
    pub stokes_guard: Option<f64>,
    /// Count `+-omega` pairs once with weight 2 (`J_z^2` on the equator).
    pub equator_mode: bool,
}

impl Default for AmplitudeOptions {
    fn default() -> Self {
        Self {
            mu_to_j2: false,
            caustic_threshold: 1e-6,
            stokes_guard: None,
            equator_mode: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    Caustic,
    NonFinite,
    EnergyDrift,
    Stokes,
    /// The `-omega` partner of a doubled equator pair.
    Partner,
}

impl Exclusion {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Caustic => "caustic",
            Self::NonFinite => "non-finite",
            Self::EnergyDrift => "energy-drift",
            Self::Stokes => "stokes",
            Self::Partner => "equator-partner",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchAmplitude {
    pub branch_id: usize,
    pub tau: f64,
    /// Normalized amplitude, including the multiplicity weight.
    pub amplitude: C64,
    /// `ln` of the unweighted normalized amplitude.
    pub log_amplitude: C64,
    pub prefactor: C64,
    /// `(S + int A dt) / hbar`
    pub phase: C64,
    pub phi_p: f64,
    pub weight: f64,
    pub excluded: Option<Exclusion>,
}

impl BranchAmplitude {
    pub fn contribution(&self) -> C64 {
        if self.excluded.is_some() {
            C64::new(0.0, 0.0)
        } else {
            self.amplitude
        }
    }
}

/// Normalized amplitude of one trajectory satisfying the boundary conditions.
pub fn branch_amplitude(
    traj: &Trajectory,
    branch_id: usize,
    tau: f64,
    ham: &Hamiltonian,
    z_i: C64,
    z_f: C64,
    opts: &AmplitudeOptions,
) -> BranchAmplitude {
    let ctx = ham.ctx();
    let hbar = ctx.hbar();
    let j = ctx.j();
    let phase = (traj.s + traj.sk) / hbar;
    let mut log_amp =
        I * (traj.s_dyn + traj.sk) / hbar + (j + 0.5) * traj.ln_last + (j - 0.5) * traj.ln_first
            - 0.5 * traj.ln_m()
            - log_normalization(z_i, z_f, ctx);
    if opts.mu_to_j2 && ham.spec().kind == HamiltonianKind::JzSquared {
        log_amp += I * (tau / 4.0);
    }
    let excluded = if traj.m_zbarzbar().norm() < opts.caustic_threshold {
        Some(Exclusion::Caustic)
    } else if !(log_amp.re.is_finite() && log_amp.im.is_finite()) || log_amp.re > 700.0 {
        Some(Exclusion::NonFinite)
    } else if traj.energy_drift {
        Some(Exclusion::EnergyDrift)
    } else {
        None
    };
    let amplitude = if log_amp.re.is_finite() && log_amp.re <= 700.0 {
        log_amp.exp()
    } else {
        C64::new(f64::INFINITY, 0.0)
    };
    BranchAmplitude {
        branch_id,
        tau,
        amplitude,
        log_amplitude: log_amp,
        prefactor: traj.prefactor(),
        phase,
        phi_p: traj.prefactor_phase(),
        weight: 1.0,
        excluded,
    }
}

/// Indices of samples on hills of `log_mod` that contain a value above
/// `limit`. A hill extends from a violating sample down to the nearest local
/// minimum on each side, or to the end of the trace.
pub fn stokes_hills(log_mod: &[f64], limit: f64) -> Vec<bool> {
    let n = log_mod.len();
    let mut out = vec![false; n];
    for v in 0..n {
        if !(log_mod[v] > limit) || out[v] {
            continue;
        }
        let mut lo = v;
        while lo > 0 && log_mod[lo - 1] < log_mod[lo] {
            lo -= 1;
        }
        let mut hi = v;
        while hi + 1 < n && log_mod[hi + 1] < log_mod[hi] {
            hi += 1;
        }
        // keep the bounding minima unless they are trace ends
        let from = if lo == v || lo == 0 { lo } else { lo + 1 };
        let to = if hi == v || hi + 1 == n { hi } else { hi - 1 };
        for flag in &mut out[from..=to] {
            *flag = true;
        }
    }
    out
}

/// Amplitudes of every sample of every branch, with Stokes and equator
/// weighting applied.
pub fn branch_amplitudes(
    branches: &[Branch],
    ham: &Hamiltonian,
    z_i: C64,
    z_f: C64,
    opts: &AmplitudeOptions,
) -> Result<Vec<Vec<BranchAmplitude>>> {
    if opts.equator_mode {
        if ham.spec().kind != HamiltonianKind::JzSquared {
            return Err(Error::InvalidArgument(
                "equator mode requires the J_z^2 hamiltonian".to_string(),
            ));
        }
        if (z_i.norm() - 1.0).abs() > 1e-9 || (z_f - z_i).norm() > 1e-12 {
            return Err(Error::InvalidArgument(
                "equator mode requires z_i = z_f on the unit circle".to_string(),
            ));
        }
    }
    let mut amps: Vec<Vec<BranchAmplitude>> = branches
        .par_iter()
        .map(|b| {
            b.samples
                .iter()
                .map(|s| branch_amplitude(&s.traj, b.id, s.tau, ham, z_i, z_f, opts))
                .collect()
        })
        .collect();

    if let Some(margin) = opts.stokes_guard {
        let limit = (1.0 + margin).ln();
        for row in amps.iter_mut() {
            let log_mod: Vec<f64> = row.iter().map(|a| a.log_amplitude.re).collect();
            for (a, hit) in row.iter_mut().zip(stokes_hills(&log_mod, limit)) {
                if hit && a.excluded.is_none() {
                    a.excluded = Some(Exclusion::Stokes);
                }
            }
        }
    }

    if opts.equator_mode {
        apply_equator_weights(branches, &mut amps, ham.ctx(), z_i);
    }
    Ok(amps)
}

/// Keeps one member of each `+-omega` pair at every `tau` with weight 2; the
/// static solution keeps weight 1.
fn apply_equator_weights(
    branches: &[Branch],
    amps: &mut [Vec<BranchAmplitude>],
    ctx: &SpinContext,
    z_i: C64,
) {
    let scale = 2.0 * ctx.mu() / ctx.j();
    let mut by_index: std::collections::BTreeMap<usize, Vec<(usize, usize, C64)>> =
        Default::default();
    for (bi, b) in branches.iter().enumerate() {
        for (si, s) in b.samples.iter().enumerate() {
            let w = jz2_frequency(z_i * s.zbar0, ctx);
            by_index.entry(s.index).or_default().push((bi, si, w));
        }
    }
    for group in by_index.values() {
        for &(bi, si, w) in group {
            let a = &mut amps[bi][si];
            if w.norm() < 1e-7 * scale {
                a.weight = 1.0;
                continue;
            }
            let canonical = w.re > 1e-9 * scale || (w.re.abs() <= 1e-9 * scale && w.im > 0.0);
            let has_partner = group
                .iter()
                .any(|&(b2, _, w2)| b2 != bi && (w + w2).norm() < 1e-6 * (1.0 + w.norm()));
            if canonical || !has_partner {
                a.weight = 2.0;
                a.amplitude *= 2.0;
            } else {
                a.weight = 0.0;
                if a.excluded.is_none() {
                    a.excluded = Some(Exclusion::Partner);
                }
            }
        }
    }
}

/// Coherent sum of branch amplitudes on the branch tau grid. Samples with no
/// contributing branch are `None`.
pub fn coherent_sum(
    amps: &[Vec<BranchAmplitude>],
    branches: &[Branch],
    taus: &[f64],
    z_i: C64,
    z_f: C64,
    ctx: &SpinContext,
    spec_id: String,
) -> PropagatorSeries {
    let mut sums: Vec<Option<C64>> = vec![None; taus.len()];
    for (b, row) in branches.iter().zip(amps) {
        for (s, a) in b.samples.iter().zip(row) {
            if a.excluded.is_none() {
                let slot = sums[s.index].get_or_insert(C64::new(0.0, 0.0));
                *slot += a.amplitude;
            }
        }
    }
    PropagatorSeries {
        taus: taus.to_vec(),
        values: sums,
        meta: SeriesMeta {
            z_i,
            z_f,
            two_j: ctx.two_j(),
            spec_id,
            normalized: true,
        },
    }
}

/// Branches whose largest included weighted modulus reaches `threshold`.
pub fn contributing_branches(amps: &[Vec<BranchAmplitude>], threshold: f64) -> Vec<usize> {
    amps.iter()
        .filter(|row| {
            row.iter()
                .filter(|a| a.excluded.is_none())
                .any(|a| a.amplitude.norm() >= threshold)
        })
        .filter_map(|row| row.first().map(|a| a.branch_id))
        .collect()
}

/// Largest included weighted modulus of each branch.
pub fn peak_contributions(amps: &[Vec<BranchAmplitude>]) -> Vec<f64> {
    amps.iter()
        .map(|row| {
            row.iter()
                .filter(|a| a.excluded.is_none())
                .map(|a| a.amplitude.norm())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Closed-form equator contribution of one frequency, without multiplicity.
///
/// `[1 - i tau (omega^2 j^2 - 4 mu^2)/(4 mu j)]^{-1/2} cos^{2j}(omega tau / 2)
///  exp{(i tau j / 2)(omega^2 / 2j + mu / j^2 - 1)}`
pub fn equator_term(omega: C64, tau: f64, ctx: &SpinContext, mu_to_j2: bool) -> C64 {
    let j = ctx.j();
    let mu = ctx.mu();
    let pre = (1.0 - I * tau * (omega * omega * j * j - 4.0 * mu * mu) / (4.0 * mu * j)).powf(-0.5);
    let cos = (omega * tau / 2.0).cos().powf(2.0 * j);
    let shift = if mu_to_j2 { 0.0 } else { mu / (j * j) - 1.0 };
    let phase = (I * tau * j / 2.0 * (omega * omega / (2.0 * j) + shift)).exp();
    pre * cos * phase
}

/// Sum of closed-form equator terms; `omegas[k]` holds `(omega, multiplicity)`
/// for `taus[k]`.
pub fn equator_closed_form(
    z_i: C64,
    omegas: &[Vec<(C64, u32)>],
    taus: &[f64],
    ctx: &SpinContext,
    mu_to_j2: bool,
) -> Result<PropagatorSeries> {
    if (z_i.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "|z_i| = {} is not on the equator",
            z_i.norm()
        )));
    }
    if omegas.len() != taus.len() {
        return Err(Error::InvalidArgument(
            "one frequency list per tau is required".to_string(),
        ));
    }
    let values = taus
        .iter()
        .zip(omegas)
        .map(|(&tau, ws)| {
            if ws.is_empty() {
                return None;
            }
            Some(
                ws.iter()
                    .map(|&(w, m)| m as f64 * equator_term(w, tau, ctx, mu_to_j2))
                    .sum(),
            )
        })
        .collect();
    Ok(PropagatorSeries {
        taus: taus.to_vec(),
        values,
        meta: SeriesMeta {
            z_i,
            z_f: z_i,
            two_j: ctx.two_j(),
            spec_id: "jz_squared(nu=1)".to_string(),
            normalized: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stokes_hills_cover_the_violating_region() {
        // high start, deep minimum, physical bump
        let m = [5.0, 3.0, 1.0, -4.0, -9.0, -2.0, -0.5, -1.0, -3.0];
        let hit = stokes_hills(&m, 0.05);
        assert_eq!(
            hit,
            [true, true, true, true, false, false, false, false, false]
        );
        let m = [-1.0, -0.5, 0.3, -0.2, -2.0, -1.0];
        let hit = stokes_hills(&m, 0.05);
        assert_eq!(hit, [true, true, true, true, false, false]);
        let m = [-3.0, -2.0, -4.0, 0.2, 0.4];
        let hit = stokes_hills(&m, 0.05);
        assert_eq!(hit, [false, false, false, true, true]);
        assert!(stokes_hills(&[-1.0, -2.0], 0.05).iter().all(|h| !h));
    }

    #[test]
    fn equator_static_term() {
        let ctx = SpinContext::from_j(10.0).unwrap();
        let t = equator_term(C64::new(0.0, 0.0), 0.1, &ctx, false);
        assert!((t.norm_sqr() - (1.0f64 + 0.01 * 9.5 * 9.5).powf(-0.5)).abs() < 1e-12);
        assert!((t.norm_sqr() - 0.72500).abs() < 5e-6);
        let t0 = equator_term(C64::new(0.0, 0.0), 0.0, &ctx, false);
        assert!((t0 - 1.0).norm() < 1e-15);
        // mu -> j^2 only rotates the phase
        let a = equator_term(C64::new(3.0, 0.2), 0.7, &ctx, false);
        let b = equator_term(C64::new(3.0, 0.2), 0.7, &ctx, true);
        assert!((a.norm() - b.norm()).abs() < 1e-12);
        assert!((b / a - C64::from_polar(1.0, 0.7 / 4.0)).norm() < 1e-12);
    }
}
