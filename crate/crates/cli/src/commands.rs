//! Command implementations. Each writes its files into an output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spinsc::assembler::{
    branch_amplitudes, coherent_sum, contributing_branches, equator_closed_form,
    peak_contributions, BranchAmplitude,
};
use spinsc::branch::{equator_frequencies, search_branches, Branch, RootProblem, SearchReport};
use spinsc::exact::{ExactPropagator, PropagatorSeries};
use spinsc::trajectory::TrajectoryOptions;
use spinsc::{Hamiltonian, C64};

use crate::config::{ConfigSummary, RunConfig};
use crate::output::{
    read_propagator_csv, version_string, write_amplitudes_csv, write_branches_csv, write_json,
    write_propagator_csv, PropagatorTable,
};

/// Two propagator tables sampled on different grids.
#[derive(Debug, thiserror::Error)]
#[error("tau grids differ: {0}")]
pub struct GridMismatch(pub String);

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Comparison {
    pub samples: usize,
    pub compared: usize,
    pub skipped_missing: usize,
    pub skipped_caustic: usize,
    pub max_abs_error_re: Option<f64>,
    pub max_abs_error_im: Option<f64>,
    pub max_abs_error_abs2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub id: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub samples: usize,
    pub caustic_samples: usize,
    pub peak_abs_amplitude: f64,
    pub contributing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub tau: f64,
    pub roots_found: usize,
    pub branches_added: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: ConfigSummary,
    pub branches_found: usize,
    pub branches_contributing: usize,
    pub contribution_threshold: f64,
    pub branches: Vec<BranchSummary>,
    pub seeding: Vec<SeedSummary>,
    pub caustic_warnings: usize,
    pub caustic_tau_samples: usize,
    pub excluded: BTreeMap<String, usize>,
    pub missing_samples: usize,
    pub exact_available: bool,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub version: String,
    pub exact: String,
    pub semiclassical: String,
    pub comparison: Comparison,
}

/// Result of a semiclassical run, kept in memory for callers and tests.
pub struct SemiclassicalOutcome {
    pub report: RunReport,
    pub series: PropagatorSeries,
    pub exact: Option<PropagatorSeries>,
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn finish(series: PropagatorSeries, normalize: bool) -> PropagatorSeries {
    if normalize {
        series
    } else {
        series.denormalized()
    }
}

fn exact_for(cfg: &RunConfig) -> Result<PropagatorSeries> {
    let ctx = cfg.ctx();
    let prop = ExactPropagator::with_max_dim(&cfg.hamiltonian, &ctx, cfg.max_dim)?;
    Ok(prop.series(cfg.z_i, cfg.z_f, &cfg.taus())?)
}

pub fn command_exact(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let series = finish(exact_for(cfg)?, cfg.normalize);
    ensure_dir(out)?;
    let path = out.join("exact.csv");
    write_propagator_csv(&path, &series)?;
    Ok(path)
}

fn search(cfg: &RunConfig, ham: &Hamiltonian) -> Result<SearchReport> {
    let problem = RootProblem::new(ham, cfg.z_i, cfg.z_f, TrajectoryOptions::new(cfg.ode_tol)?)?;
    Ok(search_branches(
        &problem,
        &cfg.taus(),
        &cfg.effective_search(),
    )?)
}

fn caustic_mask(branches: &[Branch], n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for s in branches.iter().flat_map(|b| &b.samples) {
        if s.flags.caustic_near {
            mask[s.index] = true;
        }
    }
    mask
}

fn build_report(
    command: &str,
    cfg: &RunConfig,
    search: &SearchReport,
    amps: Option<&[Vec<BranchAmplitude>]>,
    series: Option<&PropagatorSeries>,
    comparison: Option<Comparison>,
    exact_available: bool,
) -> RunReport {
    let peaks = amps.map(peak_contributions);
    let contributing = amps
        .map(|a| contributing_branches(a, cfg.contribution_threshold))
        .unwrap_or_default();
    let branches: Vec<BranchSummary> = search
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let (tau_min, tau_max) = b.tau_range().unwrap_or((f64::NAN, f64::NAN));
            BranchSummary {
                id: b.id,
                tau_min,
                tau_max,
                samples: b.samples.len(),
                caustic_samples: b.samples.iter().filter(|s| s.flags.caustic_near).count(),
                peak_abs_amplitude: peaks.as_ref().map_or(f64::NAN, |p| p[k]),
                contributing: contributing.contains(&b.id),
            }
        })
        .collect();
    let mut excluded = BTreeMap::new();
    for a in amps.into_iter().flatten().flatten() {
        if let Some(e) = a.excluded {
            *excluded.entry(e.label().to_string()).or_insert(0) += 1;
        }
    }
    RunReport {
        command: command.to_string(),
        version: version_string(),
        config: cfg.summary(),
        branches_found: search.branches.len(),
        branches_contributing: contributing.len(),
        contribution_threshold: cfg.contribution_threshold,
        branches,
        seeding: search
            .seeding
            .iter()
            .map(|&(tau, roots_found, branches_added)| SeedSummary {
                tau,
                roots_found,
                branches_added,
            })
            .collect(),
        caustic_warnings: search
            .branches
            .iter()
            .flat_map(|b| &b.samples)
            .filter(|s| s.flags.caustic_near)
            .count(),
        caustic_tau_samples: caustic_mask(&search.branches, cfg.samples)
            .iter()
            .filter(|&&c| c)
            .count(),
        excluded,
        missing_samples: series.map_or(0, |s| s.values.iter().filter(|v| v.is_none()).count()),
        exact_available,
        comparison,
    }
}

pub fn command_semiclassical(cfg: &RunConfig, out: &Path) -> Result<SemiclassicalOutcome> {
    let ham = Hamiltonian::new(cfg.hamiltonian.clone(), cfg.ctx())?;
    let taus = cfg.taus();
    let found = search(cfg, &ham)?;
    let amps = branch_amplitudes(
        &found.branches,
        &ham,
        cfg.z_i,
        cfg.z_f,
        &cfg.amplitude_options(),
    )?;
    let series = coherent_sum(
        &amps,
        &found.branches,
        &taus,
        cfg.z_i,
        cfg.z_f,
        ham.ctx(),
        ham.spec().id(),
    );
    let exact = match exact_for(cfg) {
        Ok(e) => Some(e),
        Err(e) if is_dimension_limit(&e) => None,
        Err(e) => return Err(e),
    };
    let comparison = exact.as_ref().map(|e| {
        let mask = caustic_mask(&found.branches, taus.len());
        compare_values(&series.values, &e.values, Some(&mask))
    });
    let report = build_report(
        "semiclassical",
        cfg,
        &found,
        Some(&amps),
        Some(&series),
        comparison,
        exact.is_some(),
    );
    let series = finish(series, cfg.normalize);
    let exact = exact.map(|e| finish(e, cfg.normalize));

    ensure_dir(out)?;
    write_propagator_csv(&out.join("semiclassical.csv"), &series)?;
    write_branches_csv(&out.join("branches.csv"), &found.branches)?;
    write_amplitudes_csv(&out.join("amplitudes.csv"), &amps)?;
    if let Some(e) = &exact {
        write_propagator_csv(&out.join("exact.csv"), e)?;
    }
    write_json(&out.join("report.json"), &report)?;
    Ok(SemiclassicalOutcome {
        report,
        series,
        exact,
    })
}

pub fn command_branches(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    let ham = Hamiltonian::new(cfg.hamiltonian.clone(), cfg.ctx())?;
    let found = search(cfg, &ham)?;
    let report = build_report("branches", cfg, &found, None, None, None, false);
    ensure_dir(out)?;
    write_branches_csv(&out.join("branches.csv"), &found.branches)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Closed-form equator sum over all `+-omega` pairs and the static root.
pub fn command_equator(cfg: &RunConfig, out: &Path) -> Result<PropagatorSeries> {
    let ctx = cfg.ctx();
    let taus = cfg.taus();
    let count = cfg.search.frequency_max_n.unwrap_or(cfg.two_j as usize);
    let omegas = taus
        .iter()
        .map(|&t| equator_frequencies(cfg.z_i, t, &ctx, count))
        .collect::<spinsc::Result<Vec<_>>>()?;
    let series = finish(
        equator_closed_form(cfg.z_i, &omegas, &taus, &ctx, cfg.mu_to_j2)?,
        cfg.normalize,
    );
    ensure_dir(out)?;
    write_propagator_csv(&out.join("equator.csv"), &series)?;
    let mut w = csv::Writer::from_path(out.join("frequencies.csv"))?;
    w.write_record(["tau", "re_omega", "im_omega", "multiplicity"])?;
    for (&tau, ws) in taus.iter().zip(&omegas) {
        for &(o, m) in ws {
            let mut row: Vec<String> = [tau, o.re, o.im].map(crate::output::fmt_f64).to_vec();
            row.push(m.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(series)
}

pub fn command_compare(exact: &Path, semiclassical: &Path, out: &Path) -> Result<CompareReport> {
    let a = read_propagator_csv(exact)?;
    let b = read_propagator_csv(semiclassical)?;
    check_grids(&a, &b)?;
    let comparison = compare_values(&b.values, &a.values, None);
    ensure_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("residuals.csv"))?;
    w.write_record(["tau", "d_re_K", "d_im_K", "d_abs2_K"])?;
    for ((&tau, x), y) in a.taus.iter().zip(&a.values).zip(&b.values) {
        let d = match (x, y) {
            (Some(x), Some(y)) => [y.re - x.re, y.im - x.im, y.norm_sqr() - x.norm_sqr()],
            _ => [f64::NAN; 3],
        };
        w.write_record([tau, d[0], d[1], d[2]].map(crate::output::fmt_f64))?;
    }
    w.flush()?;
    let report = CompareReport {
        version: version_string(),
        exact: exact.display().to_string(),
        semiclassical: semiclassical.display().to_string(),
        comparison,
    };
    write_json(&out.join("compare.json"), &report)?;
    Ok(report)
}

fn check_grids(a: &PropagatorTable, b: &PropagatorTable) -> Result<(), GridMismatch> {
    if a.taus.len() != b.taus.len() {
        return Err(GridMismatch(format!(
            "{} vs {} samples",
            a.taus.len(),
            b.taus.len()
        )));
    }
    for (k, (x, y)) in a.taus.iter().zip(&b.taus).enumerate() {
        if (x - y).abs() > 1e-12 * (1.0 + x.abs()) {
            return Err(GridMismatch(format!("sample {k}: tau {x} vs {y}")));
        }
    }
    Ok(())
}

/// Max abs errors of `approx` against `reference`, skipping missing samples and
/// samples where `skip` is set.
pub fn compare_values(
    approx: &[Option<C64>],
    reference: &[Option<C64>],
    skip: Option<&[bool]>,
) -> Comparison {
    let mut c = Comparison {
        samples: reference.len(),
        compared: 0,
        skipped_missing: 0,
        skipped_caustic: 0,
        max_abs_error_re: None,
        max_abs_error_im: None,
        max_abs_error_abs2: None,
    };
    let bump = |slot: &mut Option<f64>, e: f64| *slot = Some(slot.map_or(e, |m| m.max(e)));
    for (k, (a, r)) in approx.iter().zip(reference).enumerate() {
        if skip.is_some_and(|s| s[k]) {
            c.skipped_caustic += 1;
            continue;
        }
        let (Some(a), Some(r)) = (a, r) else {
            c.skipped_missing += 1;
            continue;
        };
        c.compared += 1;
        bump(&mut c.max_abs_error_re, (a.re - r.re).abs());
        bump(&mut c.max_abs_error_im, (a.im - r.im).abs());
        bump(
            &mut c.max_abs_error_abs2,
            (a.norm_sqr() - r.norm_sqr()).abs(),
        );
    }
    c
}

fn is_dimension_limit(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<spinsc::Error>(),
        Some(spinsc::Error::DimensionLimit { .. })
    )
}
