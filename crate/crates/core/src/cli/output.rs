//! CSV and manifest writers. Reals use the shortest lossless representation.

use std::fs::File;
use std::path::{Path, PathBuf};

use csv::Writer;

use super::config::{fmt_real, RunConfig};
use crate::error::Result;
use crate::estimates::EstimateReport;
use crate::identities::CertificateReport;
use crate::model::State;
use crate::solver::{Diagnostics, Trajectory};

pub(crate) fn writer(dir: &Path, name: &str) -> Result<(Writer<File>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((Writer::from_path(&path)?, path))
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("manifest.cfg");
    let text = format!(
        "# chemotaxis {} ({command})\n# config echo; pass back with --config to re-run\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    );
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_diagnostics(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    let (mut w, path) = writer(dir, "diagnostics.csv")?;
    w.write_record(Diagnostics::HEADER)?;
    for d in &traj.diagnostics {
        w.write_record(d.row().map(fmt_real))?;
    }
    w.flush()?;
    Ok(path)
}

/// `fields_<t>.csv` with cell centers and the three fields.
pub fn write_fields(dir: &Path, state: &State) -> Result<PathBuf> {
    let g = state.grid();
    let (mut w, path) = writer(dir, &format!("fields_{}.csv", fmt_real(state.time)))?;
    if g.dim() == 1 {
        w.write_record(["x", "u", "v", "w"])?;
    } else {
        w.write_record(["x", "y", "u", "v", "w"])?;
    }
    for i in 0..g.len() {
        let c = g.center(i);
        let mut row: Vec<String> = c[..g.dim()].iter().map(|&x| fmt_real(x)).collect();
        row.extend([&state.u, &state.v, &state.w].map(|f| fmt_real(f.values()[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_estimates(dir: &Path, report: &EstimateReport) -> Result<PathBuf> {
    let (mut w, path) = writer(dir, "estimates.csv")?;
    w.write_record(EstimateReport::HEADER)?;
    for r in &report.records {
        w.write_record([
            r.name.clone(),
            r.case.clone(),
            fmt_real(r.value),
            r.bound.map(fmt_real).unwrap_or_default(),
            fmt_real(r.slack),
            fmt_real(r.tol),
            r.pass.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_certificates(dir: &Path, name: &str, report: &CertificateReport) -> Result<PathBuf> {
    let (mut w, path) = writer(dir, name)?;
    w.write_record(CertificateReport::HEADER)?;
    for r in &report.records {
        w.write_record([
            r.certificate.clone(),
            r.case.clone(),
            r.relation.as_str().to_string(),
            fmt_real(r.lhs),
            fmt_real(r.rhs),
            fmt_real(r.residual),
            fmt_real(r.tol),
            r.pass.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}
