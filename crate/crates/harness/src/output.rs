//! Result files: constants, profile, trajectories, series and the report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use isoflow_core::{CorrelationProfile, FlowConstants, FlowEnsemble, ProfileSource};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: &str = "1.0";
pub const SCHEMA_MAJOR: u32 = 1;

pub const REPORT_FILE: &str = "report.json";
pub const CONSTANTS_FILE: &str = "constants.json";
pub const PROFILE_FILE: &str = "profile.csv";

/// Serde for floats that may be NaN, written as `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Value(f64),
    Interval([f64; 2]),
}

impl Target {
    pub fn describe(&self) -> String {
        match *self {
            Target::Value(v) => fmt_num(v),
            Target::Interval([lo, hi]) => format!("[{}, {}]", fmt_num(lo), fmt_num(hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    /// The limit statement being checked.
    pub anchor: String,
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(with = "nullable")]
    pub estimate: f64,
    #[serde(with = "nullable")]
    pub std_error: f64,
    pub target: Target,
    pub tolerance: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub base_seed: u64,
    pub replications: usize,
    pub antithetic: bool,
    pub dt: f64,
    pub t_max: f64,
    pub particles: Vec<f64>,
    pub constants: FlowConstants,
    pub claims: Vec<ClaimRecord>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.claims.iter().filter(|c| !c.pass).count()
    }
}

/// One row of a plot-ready time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: Target,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub schema_version: String,
    pub source: ProfileSource,
    #[serde(flatten)]
    pub constants: FlowConstants,
}

impl ConstantsFile {
    pub fn new(profile: &CorrelationProfile, constants: FlowConstants) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            source: profile.source(),
            constants,
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Invalid(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| HarnessError::io(path, e))
}

/// A CSV file, gzip-compressed when `gzip` is set, opened with the schema
/// comment line and the given header.
pub struct CsvWriter {
    path: PathBuf,
    out: Box<dyn Write>,
}

impl CsvWriter {
    pub fn create(path: &Path, gzip: bool, header: &str) -> Result<Self> {
        let path = if gzip {
            let mut p = path.as_os_str().to_owned();
            p.push(".gz");
            PathBuf::from(p)
        } else {
            path.to_path_buf()
        };
        let file = BufWriter::new(File::create(&path).map_err(|e| HarnessError::io(&path, e))?);
        let out: Box<dyn Write> = if gzip {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        let mut w = Self { path, out };
        w.line(format_args!("# schema_version = {SCHEMA_VERSION}"))?;
        w.line(format_args!("{header}"))?;
        Ok(w)
    }

    pub fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        writeln!(self.out, "{args}").map_err(|e| HarnessError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().map_err(|e| HarnessError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn write_profile(dir: &Path, profile: &CorrelationProfile) -> Result<PathBuf> {
    let mut w = CsvWriter::create(&dir.join(PROFILE_FILE), false, "z,phi")?;
    for (z, phi) in profile.grid().iter().zip(profile.phi_values()) {
        w.line(format_args!("{z},{phi}"))?;
    }
    w.finish()
}

/// Writes `(replication, time, particle_index, position)` rows.  `order[i]`
/// is the listed index of the ensemble's particle `i`.
pub fn write_trajectories(path: &Path, gzip: bool, ens: &FlowEnsemble, order: &[usize]) -> Result<PathBuf> {
    let mut w = CsvWriter::create(path, gzip, "replication,time,particle_index,position")?;
    let n = ens.particles();
    let mut listed = vec![0usize; n];
    for (i, &o) in order.iter().enumerate() {
        listed[o] = i;
    }
    for r in 0..ens.replications {
        for (k, t) in ens.times.iter().enumerate() {
            let row = ens.row(r, k);
            for (p, &i) in listed.iter().enumerate() {
                w.line(format_args!("{r},{t},{p},{}", row[i]))?;
            }
        }
    }
    w.finish()
}

pub fn write_series(path: &Path, series: &[SeriesPoint]) -> Result<PathBuf> {
    let interval = series.iter().any(|p| matches!(p.target, Target::Interval(_)));
    let header = if interval {
        "t,estimate,stderr,target,target_upper"
    } else {
        "t,estimate,stderr,target"
    };
    let mut w = CsvWriter::create(path, false, header)?;
    for p in series {
        match p.target {
            Target::Value(v) => w.line(format_args!("{},{},{},{v}", p.t, p.estimate, p.stderr))?,
            Target::Interval([lo, hi]) => w.line(format_args!("{},{},{},{lo},{hi}", p.t, p.estimate, p.stderr))?,
        }
    }
    w.finish()
}

/// Reads `dir/report.json`, rejecting unknown major schema versions.
pub fn read_report(dir: &Path) -> Result<Report> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let corrupt = |e: serde_json::Error| HarnessError::Corrupt {
        path: path.clone(),
        message: format!("corrupt report: {e}"),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(corrupt)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| HarnessError::Corrupt {
            path: path.clone(),
            message: "corrupt report: no schema_version".into(),
        })?;
    check_schema(&path, version)?;
    serde_json::from_value(value).map_err(corrupt)
}

pub fn check_schema(path: &Path, version: &str) -> Result<()> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major == Some(SCHEMA_MAJOR) {
        Ok(())
    } else {
        Err(HarnessError::Schema {
            path: path.to_path_buf(),
            found: version.to_string(),
            supported: SCHEMA_MAJOR,
        })
    }
}

pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".into();
    }
    let a = x.abs();
    if a == 0.0 || (1e-3..1e5).contains(&a) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

/// Column-aligned summary, one row per claim.
pub fn render_report(report: &Report) -> String {
    if report.claims.is_empty() {
        return "no claims requested\n".into();
    }
    let header = ["claim", "target", "estimate ± 95% CI", "result", "anchor"];
    let rows: Vec<[String; 5]> = report
        .claims
        .iter()
        .map(|c| {
            [
                c.claim_id.clone(),
                c.target.describe(),
                format!("{} ± {}", fmt_num(c.estimate), fmt_num(1.96 * c.std_error)),
                if c.pass { "PASS" } else { "FAIL" }.to_string(),
                c.anchor.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut push_row = |cells: &[&str]| {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    push_row(&header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    push_row(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for r in &rows {
        push_row(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let failed = report.failures();
    out.push_str(&format!(
        "\n{} of {} claims passed\n",
        report.claims.len() - failed,
        report.claims.len()
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_render_compactly() {
        assert_eq!(fmt_num(1.5), "1.5000");
        assert_eq!(fmt_num(-1.5e-6), "-1.500e-6");
        assert_eq!(fmt_num(f64::NAN), "n/a");
    }

    #[test]
    fn schema_major_is_enforced() {
        assert!(check_schema(Path::new("r"), "1.3").is_ok());
        assert!(check_schema(Path::new("r"), "2.0").is_err());
        assert!(check_schema(Path::new("r"), "x").is_err());
    }
}
