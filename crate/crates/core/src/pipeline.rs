//! Branch search, amplitude assembly and coherent sum in one call.

use crate::assembler::{branch_amplitudes, coherent_sum, AmplitudeOptions, BranchAmplitude};
use crate::branch::{search_branches, RootProblem, SearchConfig, SearchReport};
use crate::error::Result;
use crate::exact::PropagatorSeries;
use crate::hamiltonian::Hamiltonian;
use crate::spin::C64;
use crate::trajectory::TrajectoryOptions;

#[derive(Debug, Clone)]
pub struct SemiclassicalRun {
    pub search: SearchReport,
    pub amplitudes: Vec<Vec<BranchAmplitude>>,
    pub series: PropagatorSeries,
}

pub fn semiclassical_series(
    ham: &Hamiltonian,
    z_i: C64,
    z_f: C64,
    taus: &[f64],
    search: &SearchConfig,
    amp: &AmplitudeOptions,
    traj: TrajectoryOptions,
) -> Result<SemiclassicalRun> {
    let problem = RootProblem::new(ham, z_i, z_f, traj)?;
    let report = search_branches(&problem, taus, search)?;
    let amplitudes = branch_amplitudes(&report.branches, ham, z_i, z_f, amp)?;
    let series = coherent_sum(
        &amplitudes,
        &report.branches,
        taus,
        z_i,
        z_f,
        ham.ctx(),
        ham.spec().id(),
    );
    Ok(SemiclassicalRun {
        search: report,
        amplitudes,
        series,
    })
}

/// Largest `|a - b|` of a per-sample quantity over samples where both exist.
pub fn max_abs_error<F>(a: &PropagatorSeries, b: &PropagatorSeries, f: F) -> Option<f64>
where
    F: Fn(C64) -> f64,
{
    a.values
        .iter()
        .zip(&b.values)
        .filter_map(|(x, y)| Some((f(x.as_ref().copied()?) - f(y.as_ref().copied()?)).abs()))
        .reduce(f64::max)
}
