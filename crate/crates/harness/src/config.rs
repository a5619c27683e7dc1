//! Experiment configs: TOML text, validation with source positions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::claims::ClaimId;
use crate::error::{HarnessError, Result};

/// Major version of the config schema this build reads.
pub const CONFIG_SCHEMA_MAJOR: u32 = 1;
pub const CONFIG_SCHEMA_VERSION: &str = "1.0";

pub const MIN_REPLICATIONS: usize = 100;

/// Points in the default record grid on `(0, t_max]`.
pub const DEFAULT_RECORD_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: String,
    #[serde(default)]
    pub claims: Vec<ClaimId>,
    /// Initial particle positions, in the order claims refer to them.
    pub particles: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arratia: Option<ArratiaConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Bump,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(rename = "type")]
    pub kind: KernelKind,
    /// Bump scale; 1 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// CSV of `z,b(z)` rows for table profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Bump,
            epsilon: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Euler step; `1e-3·min(1, 1/L′)` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_times: Option<Vec<f64>>,
}

fn default_t_max() -> f64 {
    100.0
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_max: default_t_max(),
            record_times: None,
        }
    }
}

impl DynamicsConfig {
    /// The configured record times, or `DEFAULT_RECORD_POINTS` evenly spaced
    /// ones ending at `t_max`.
    pub fn record_grid(&self) -> Vec<f64> {
        match &self.record_times {
            Some(t) => t.clone(),
            None => (1..=DEFAULT_RECORD_POINTS)
                .map(|k| self.t_max * k as f64 / DEFAULT_RECORD_POINTS as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub antithetic: bool,
}

fn default_replications() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            base_seed: 0,
            antithetic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Replications written to the trajectory CSV.
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub gzip: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("results")
}

fn default_trajectories() -> usize {
    100
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            trajectories: default_trajectories(),
            gzip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArratiaConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_arratia_time")]
    pub time: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Step of the coalescing reference system.
    #[serde(default = "default_reference_dt")]
    pub reference_dt: f64,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.5, 0.2, 0.1, 0.05]
}

fn default_arratia_time() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    0.02
}

fn default_reference_dt() -> f64 {
    1e-3
}

impl Default for ArratiaConfig {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            time: default_arratia_time(),
            threshold: default_threshold(),
            reference_dt: default_reference_dt(),
        }
    }
}

/// One step of a path into the config document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Key {
    Name(&'static str),
    Index(usize),
}

/// A validation failure and the config entry it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub at: Vec<Key>,
    pub message: String,
}

impl ConfigIssue {
    fn new(at: &[Key], message: impl Into<String>) -> Self {
        Self {
            at: at.to_vec(),
            message: message.into(),
        }
    }
}

/// Config text kept for mapping issues back to lines.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    pub origin: String,
    pub text: String,
}

impl ConfigSource {
    /// 1-based line and column of the entry at `at`, falling back to the
    /// nearest enclosing entry that has a position.
    pub fn locate(&self, at: &[Key]) -> (usize, usize) {
        let offset = toml_edit::ImDocument::parse(self.text.as_str())
            .ok()
            .and_then(|doc| {
                let mut item = doc.as_item();
                let mut best = None;
                for key in at {
                    let next = match *key {
                        Key::Name(name) => item.get(name),
                        Key::Index(i) => item.get(i),
                    };
                    match next {
                        Some(n) => {
                            item = n;
                            best = n.span().map(|s| s.start).or(best);
                        }
                        None => break,
                    }
                }
                best
            })
            .unwrap_or(0);
        line_column(&self.text, offset)
    }

    pub fn error(&self, issue: ConfigIssue) -> HarnessError {
        let (line, column) = self.locate(&issue.at);
        HarnessError::Config {
            origin: self.origin.clone(),
            line,
            column,
            message: issue.message,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ExperimentConfig {
    /// Parses and validates `text`; `origin` names it in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<(Self, ConfigSource)> {
        let source = ConfigSource {
            origin: origin.to_string(),
            text: text.to_string(),
        };
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = line_column(text, e.span().map_or(0, |s| s.start));
            HarnessError::Config {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().trim_end().to_string(),
            }
        })?;
        config.validate().map_err(|issue| source.error(issue))?;
        Ok((config, source))
    }

    pub fn load(path: &Path) -> Result<(Self, ConfigSource)> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Invalid(format!("config does not serialize: {e}")))
    }

    /// Checks every rule that does not need the correlation profile.
    pub fn validate(&self) -> std::result::Result<(), ConfigIssue> {
        use Key::{Index, Name};

        let major = self.schema_version.split('.').next().and_then(|m| m.parse::<u32>().ok());
        if major != Some(CONFIG_SCHEMA_MAJOR) {
            return Err(ConfigIssue::new(
                &[Name("schema_version")],
                format!(
                    "unsupported schema_version {:?}, expected {CONFIG_SCHEMA_MAJOR}.x",
                    self.schema_version
                ),
            ));
        }

        if self.particles.is_empty() {
            return Err(ConfigIssue::new(&[Name("particles")], "at least one particle is required"));
        }
        for (i, &p) in self.particles.iter().enumerate() {
            if !p.is_finite() {
                return Err(ConfigIssue::new(&[Name("particles"), Index(i)], "particle position must be finite"));
            }
            if self.particles[..i].contains(&p) {
                return Err(ConfigIssue::new(
                    &[Name("particles"), Index(i)],
                    format!("particle position {p} is listed twice"),
                ));
            }
        }
        for (i, claim) in self.claims.iter().enumerate() {
            let need = claim.particles_needed();
            if self.particles.len() < need {
                return Err(ConfigIssue::new(
                    &[Name("claims"), Index(i)],
                    format!(
                        "claim {claim} needs {need} particles, config lists {}",
                        self.particles.len()
                    ),
                ));
            }
            if self.claims[..i].contains(claim) {
                return Err(ConfigIssue::new(&[Name("claims"), Index(i)], format!("claim {claim} is listed twice")));
            }
        }

        let k = &self.kernel;
        match k.kind {
            KernelKind::Bump => {
                if let Some(eps) = k.epsilon {
                    if !(eps > 0.0 && eps.is_finite()) {
                        return Err(ConfigIssue::new(
                            &[Name("kernel"), Name("epsilon")],
                            format!("epsilon must be positive and finite, got {eps}"),
                        ));
                    }
                }
                if k.path.is_some() {
                    return Err(ConfigIssue::new(
                        &[Name("kernel"), Name("path")],
                        "path is only valid for table kernels",
                    ));
                }
            }
            KernelKind::Table => {
                if k.path.is_none() {
                    return Err(ConfigIssue::new(&[Name("kernel")], "table kernel needs a path"));
                }
                if k.epsilon.is_some() {
                    return Err(ConfigIssue::new(
                        &[Name("kernel"), Name("epsilon")],
                        "epsilon is only valid for bump kernels",
                    ));
                }
            }
        }

        let d = &self.dynamics;
        if !(d.t_max > 0.0 && d.t_max.is_finite()) {
            return Err(ConfigIssue::new(
                &[Name("dynamics"), Name("t_max")],
                format!("t_max must be positive and finite, got {}", d.t_max),
            ));
        }
        if let Some(dt) = d.dt {
            if !(dt > 0.0 && dt < d.t_max) {
                return Err(ConfigIssue::new(
                    &[Name("dynamics"), Name("dt")],
                    format!("dt must lie in (0, t_max), got {dt}"),
                ));
            }
        }
        if let Some(times) = &d.record_times {
            for (i, &t) in times.iter().enumerate() {
                let at = [Name("dynamics"), Name("record_times"), Index(i)];
                if !(0.0..=d.t_max).contains(&t) {
                    return Err(ConfigIssue::new(&at, format!("record time {t} outside [0, {}]", d.t_max)));
                }
                if i > 0 && t <= times[i - 1] {
                    return Err(ConfigIssue::new(&at, "record times must be strictly increasing"));
                }
            }
        }

        if self.ensemble.replications < MIN_REPLICATIONS {
            return Err(ConfigIssue::new(
                &[Name("ensemble"), Name("replications")],
                format!(
                    "replications below minimum ({} < {MIN_REPLICATIONS})",
                    self.ensemble.replications
                ),
            ));
        }

        if self.output.directory.as_os_str().is_empty() {
            return Err(ConfigIssue::new(&[Name("output"), Name("directory")], "output directory is empty"));
        }

        if let Some(a) = &self.arratia {
            if a.epsilons.is_empty() {
                return Err(ConfigIssue::new(&[Name("arratia"), Name("epsilons")], "no epsilons given"));
            }
            for (i, &e) in a.epsilons.iter().enumerate() {
                let at = [Name("arratia"), Name("epsilons"), Index(i)];
                if !(e > 0.0 && e.is_finite()) {
                    return Err(ConfigIssue::new(&at, format!("epsilon must be positive, got {e}")));
                }
                if i > 0 && e >= a.epsilons[i - 1] {
                    return Err(ConfigIssue::new(&at, "epsilons must be strictly decreasing"));
                }
            }
            for (name, v) in [("time", a.time), ("threshold", a.threshold), ("reference_dt", a.reference_dt)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigIssue::new(
                        &[Name("arratia"), Name(name)],
                        format!("{name} must be positive, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The `[arratia]` section or its defaults.
    pub fn arratia_or_default(&self) -> ArratiaConfig {
        self.arratia.clone().unwrap_or_default()
    }

    /// One-line description for logs.
    pub fn summary(&self) -> String {
        format!(
            "{} particles, M = {}, t_max = {}, {} claims",
            self.particles.len(),
            self.ensemble.replications,
            self.dynamics.t_max,
            self.claims.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = \"1.0\"\nparticles = [1.0, 0.0]\n";

    #[test]
    fn defaults_fill_in() {
        let (c, _) = ExperimentConfig::parse(MINIMAL, "x.toml").unwrap();
        assert_eq!(c.ensemble.replications, 10_000);
        assert!(c.ensemble.antithetic);
        assert_eq!(c.dynamics.t_max, 100.0);
        assert_eq!(c.dynamics.record_grid().len(), DEFAULT_RECORD_POINTS);
        assert_eq!(*c.dynamics.record_grid().last().unwrap(), 100.0);
        assert_eq!(c.kernel.kind, KernelKind::Bump);
    }

    #[test]
    fn issues_point_at_their_line() {
        let text = format!("{MINIMAL}\n[ensemble]\nbase_seed = 4\nreplications = 50\n");
        let err = ExperimentConfig::parse(&text, "x.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("x.toml:6:"), "{msg}");
        assert!(msg.contains("replications below minimum"), "{msg}");
    }

    #[test]
    fn array_elements_are_located() {
        let text = format!("{MINIMAL}[dynamics]\nt_max = 10\nrecord_times = [1.0,\n  20.0]\n");
        let msg = ExperimentConfig::parse(&text, "c").unwrap_err().to_string();
        assert!(msg.starts_with("c:6:3:"), "{msg}");
    }

    #[test]
    fn unknown_claims_and_keys_are_rejected_with_position() {
        let text = "schema_version = \"1.0\"\nparticles = [1.0, 0.0]\nclaims = [\"thm2.2\", \"thm9.9\"]\n";
        let msg = ExperimentConfig::parse(text, "c").unwrap_err().to_string();
        assert!(msg.starts_with("c:3:"), "{msg}");
        assert!(msg.contains("thm9.9"), "{msg}");
        let text = format!("{MINIMAL}[ensemble]\nreplicatons = 500\n");
        let msg = ExperimentConfig::parse(&text, "c").unwrap_err().to_string();
        assert!(msg.starts_with("c:4:"), "{msg}");
    }

    #[test]
    fn claims_check_particle_counts() {
        let text = "schema_version = \"1.0\"\nparticles = [1.0, 0.0]\nclaims = [\"thm3.3.even.n2\"]\n";
        let msg = ExperimentConfig::parse(text, "c").unwrap_err().to_string();
        assert!(msg.contains("needs 4 particles"), "{msg}");
    }

    #[test]
    fn schema_major_is_checked() {
        let text = "schema_version = \"2.0\"\nparticles = [0.0]\n";
        let msg = ExperimentConfig::parse(text, "c").unwrap_err().to_string();
        assert!(msg.starts_with("c:1:"), "{msg}");
    }
}
