//! File formats: CSV with `#` comment lines and mandatory headers, JSON
//! results, SHA-256 digests and the run manifest. All numeric text output
//! uses 17 significant digits so files round-trip bit-exactly.

use crate::acf::CorrelationSeries;
use crate::error::{PhasememError, Result};
use crate::estimator::ExcitationFunction;
use crate::tps::TimePowerSpectrum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Round-trip-safe decimal rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Provenance record written alongside every CLI run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: String,
    pub config_digest: String,
    pub base_seed: u64,
    pub input_file_digests: Vec<FileDigest>,
    pub output_files: Vec<String>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn acf_csv(series: &CorrelationSeries, comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        for line in comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let with_err = series.stderr_values.is_some();
    out.push_str(if with_err {
        "epsilon_MeV,C,stderr\n"
    } else {
        "epsilon_MeV,C\n"
    });
    for i in 0..series.len() {
        let _ = write!(out, "{},{}", fmt_f64(series.epsilon_values[i]), fmt_f64(series.c_values[i]));
        if let Some(s) = &series.stderr_values {
            let _ = write!(out, ",{}", fmt_f64(s[i]));
        }
        out.push('\n');
    }
    out
}

fn split_csv_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect())
        .collect()
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| PhasememError::Parse(format!("bad number {field:?} in {context}")))
}

pub fn parse_acf_csv(text: &str) -> Result<CorrelationSeries> {
    let rows = split_csv_lines(text);
    if rows.is_empty() {
        return Err(PhasememError::Parse("empty ACF file".into()));
    }
    let header = &rows[0];
    if header.len() < 2 || header[0] != "epsilon_MeV" || header[1] != "C" {
        return Err(PhasememError::Parse(
            "ACF header must start with epsilon_MeV,C".into(),
        ));
    }
    let with_err = header.len() >= 3 && header[2] == "stderr";
    let mut eps = Vec::new();
    let mut c = Vec::new();
    let mut se = Vec::new();
    for row in &rows[1..] {
        if row.len() < 2 + with_err as usize {
            return Err(PhasememError::Parse(format!("short ACF row {row:?}")));
        }
        eps.push(parse_f64(&row[0], "ACF epsilon")?);
        c.push(parse_f64(&row[1], "ACF C")?);
        if with_err {
            se.push(parse_f64(&row[2], "ACF stderr")?);
        }
    }
    CorrelationSeries::new(eps, c, if with_err { Some(se) } else { None })
}

pub fn excitation_csv(functions: &[ExcitationFunction], comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        for line in comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("E_cm_MeV,sigma,channel\n");
    for xf in functions {
        for (e, s) in xf.energies.iter().zip(&xf.sigma) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*e), fmt_f64(*s), xf.channel_label);
        }
    }
    out
}

pub fn parse_excitation_csv(text: &str) -> Result<Vec<ExcitationFunction>> {
    let rows = split_csv_lines(text);
    if rows.is_empty() {
        return Err(PhasememError::Parse("empty excitation file".into()));
    }
    if rows[0] != ["E_cm_MeV", "sigma", "channel"] {
        return Err(PhasememError::Parse(
            "excitation header must be E_cm_MeV,sigma,channel".into(),
        ));
    }
    // preserve channel order of first appearance
    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::HashMap<String, (Vec<f64>, Vec<f64>)> =
        std::collections::HashMap::new();
    for row in &rows[1..] {
        if row.len() != 3 {
            return Err(PhasememError::Parse(format!("bad excitation row {row:?}")));
        }
        let e = parse_f64(&row[0], "excitation energy")?;
        let s = parse_f64(&row[1], "excitation sigma")?;
        let entry = grouped.entry(row[2].clone()).or_insert_with(|| {
            order.push(row[2].clone());
            (Vec::new(), Vec::new())
        });
        entry.0.push(e);
        entry.1.push(s);
    }
    order
        .into_iter()
        .map(|ch| {
            let (e, s) = grouped.remove(&ch).unwrap();
            ExcitationFunction::new(e, s, ch)
        })
        .collect()
}

/// TPS grid as CSV; times reported as fractions of the revolution period T.
pub fn tps_csv(spectrum: &TimePowerSpectrum, period: f64, comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        for line in comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("t_over_T,theta_deg,P,P_diag,ratio\n");
    for (ti, &t) in spectrum.t_values.iter().enumerate() {
        for (ki, &theta) in spectrum.theta_grid.values().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(t / period),
                fmt_f64(theta.to_degrees()),
                fmt_f64(spectrum.p[ti][ki]),
                fmt_f64(spectrum.p_diag[ti][ki]),
                fmt_f64(spectrum.ratio[ti][ki]),
            );
        }
    }
    out
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        PhasememError::Parse(format!("cannot read {}: {e}", path.display()))
    })
}

/// Output path helper: `<stem>.manifest.json` next to the primary output.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let stem = primary_output
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run");
    primary_output.with_file_name(format!("{stem}.manifest.json"))
}
