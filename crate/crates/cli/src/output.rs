//! CSV and JSON emission with fixed formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spinsc::assembler::BranchAmplitude;
use spinsc::branch::Branch;
use spinsc::exact::PropagatorSeries;
use spinsc::C64;

pub const PROPAGATOR_HEADER: [&str; 4] = ["tau", "re_K", "im_K", "abs2_K"];

/// 17 significant digits; missing values print as `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

pub fn write_propagator_csv(path: &Path, series: &PropagatorSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PROPAGATOR_HEADER)?;
    for (&tau, v) in series.taus.iter().zip(&series.values) {
        let k = v.unwrap_or(C64::new(f64::NAN, f64::NAN));
        w.write_record([tau, k.re, k.im, k.norm_sqr()].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// A propagator CSV read back; `values[k]` is `None` where the file holds `nan`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorTable {
    pub taus: Vec<f64>,
    pub values: Vec<Option<C64>>,
}

pub fn read_propagator_csv(path: &Path) -> Result<PropagatorTable> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PROPAGATOR_HEADER {
        bail!(
            "{}: expected header {}, found {}",
            path.display(),
            PROPAGATOR_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut taus = Vec::new();
    let mut values = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .context("short row")?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{}: row {}", path.display(), n + 2))
        };
        let (tau, re, im) = (field(0)?, field(1)?, field(2)?);
        taus.push(tau);
        values.push((re.is_finite() && im.is_finite()).then(|| C64::new(re, im)));
    }
    Ok(PropagatorTable { taus, values })
}

pub fn write_branches_csv(path: &Path, branches: &[Branch]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "branch_id",
        "tau",
        "re_zbar0",
        "im_zbar0",
        "re_Mzz",
        "im_Mzz",
        "re_S",
        "im_S",
        "re_SK",
        "im_SK",
        "argM_unwrapped",
        "flags",
    ])?;
    for b in branches {
        for s in &b.samples {
            let t = &s.traj;
            let m = t.m_zbarzbar();
            let mut row = vec![b.id.to_string()];
            row.extend(
                [
                    s.tau, s.zbar0.re, s.zbar0.im, m.re, m.im, t.s.re, t.s.im, t.sk.re, t.sk.im,
                    t.arg_m,
                ]
                .map(fmt_f64),
            );
            row.push(s.flags.label().to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_amplitudes_csv(path: &Path, amps: &[Vec<BranchAmplitude>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "branch_id",
        "tau",
        "re_amp",
        "im_amp",
        "abs2_amp",
        "phi_p",
        "excluded",
        "reason",
    ])?;
    for a in amps.iter().flatten() {
        let mut row = vec![a.branch_id.to_string()];
        row.extend(
            [
                a.tau,
                a.amplitude.re,
                a.amplitude.im,
                a.amplitude.norm_sqr(),
                a.phi_p,
            ]
            .map(fmt_f64),
        );
        row.push(u8::from(a.excluded.is_some()).to_string());
        row.push(a.excluded.map_or("", |e| e.label()).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Package version with the git description captured at build time.
pub fn version_string() -> String {
    match option_env!("SPINSC_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}
