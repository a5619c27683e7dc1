//! Correlation profile and constants for a kernel section or a table file.

use std::path::Path;

use isoflow_core::constants::GAMMA_LIMIT;
use isoflow_core::kernel::DEFAULT_GRID_INTERVALS;
use isoflow_core::{
    build_profile, moment_constants_with_gamma, profile_from_table, CorrelationProfile, FlowConstants, Kernel,
};

use crate::config::{KernelConfig, KernelKind};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct ModelSetup {
    pub kernel: Option<Kernel>,
    pub profile: CorrelationProfile,
    pub constants: FlowConstants,
}

impl ModelSetup {
    pub fn bump(epsilon: f64, gamma: f64) -> Result<Self> {
        let kernel = Kernel::bump(epsilon)?;
        let step = 2.0 * kernel.support_radius() / DEFAULT_GRID_INTERVALS as f64;
        let profile = build_profile(&kernel, step)?;
        let constants = moment_constants_with_gamma(&profile, Some(&kernel), gamma)?;
        Ok(Self {
            kernel: Some(kernel),
            profile,
            constants,
        })
    }

    pub fn table(path: &Path, gamma: f64) -> Result<Self> {
        let (z, b) = read_table(path)?;
        let profile = profile_from_table(&z, &b)?;
        let constants = moment_constants_with_gamma(&profile, None, gamma)?;
        Ok(Self {
            kernel: None,
            profile,
            constants,
        })
    }

    /// Table paths resolve against `base` when relative.
    pub fn from_config(k: &KernelConfig, base: Option<&Path>) -> Result<Self> {
        match k.kind {
            KernelKind::Bump => Self::bump(k.epsilon.unwrap_or(1.0), GAMMA_LIMIT),
            KernelKind::Table => {
                let path = k
                    .path
                    .as_deref()
                    .ok_or_else(|| HarnessError::Invalid("table kernel needs a path".into()))?;
                match base {
                    Some(b) if path.is_relative() => Self::table(&b.join(path), GAMMA_LIMIT),
                    _ => Self::table(path, GAMMA_LIMIT),
                }
            }
        }
    }

    pub fn lprime(&self) -> f64 {
        self.constants.l_prime
    }
}

/// Reads `z,b` rows.  Blank lines and `#` comments are skipped, as is a
/// leading header row.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_table(&text).map_err(|(line, message)| HarnessError::Corrupt {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    })
}

fn parse_table(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), (usize, String)> {
    let (mut z, mut b) = (Vec::new(), Vec::new());
    let mut seen_row = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ' ', '\t', ';']).filter(|f| !f.is_empty()).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                z.push(v[0]);
                b.push(v[1]);
            }
            None if !seen_row => {}
            _ => return Err((i + 1, format!("expected two numbers, found {line:?}"))),
        }
        seen_row = true;
    }
    if z.is_empty() {
        return Err((1, "table has no rows".into()));
    }
    Ok((z, b))
}
