//! TOML study configuration with one table per library module, plus
//! command-line overrides.
//!
//! ```toml
//! [mesh_fe]
//! family = "P2"
//!
//! [kernel]
//! name = "K"            # "K", "H" or "none"
//!
//! [quadrature]
//! simpson_m = 100000
//!
//! [experiment]
//! draws = 1000
//! seed = 42
//! test_function = "damped_sine"
//! sobolev_radius = 1.0  # metadata only
//!
//! [rates]
//! lambda_grid = [0.0, 0.5, 1.0]
//! n_values = [11, 101, 1001]
//! ```

use std::path::Path;

use clap::Args;
use mollifem::{Family, KernelKind, StudyConfig, TestFunction};
use serde::Deserialize;

use crate::error::CliError;

/// Environment variable that replaces the built-in default seed.
pub const SEED_ENV: &str = "MOLLIFEM_SEED";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub mesh_fe: MeshSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub rates: RatesSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub family: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub simpson_m: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub draws: Option<usize>,
    pub seed: Option<u64>,
    pub test_function: Option<TestFunction>,
    pub sobolev_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub lambda_grid: Option<Vec<f64>>,
    pub n_values: Option<Vec<usize>>,
}

/// Flags mirroring the config keys; each one beats the file.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Element family (P1 or P2)
    #[arg(long)]
    pub family: Option<String>,
    /// Kernel (K, H or none)
    #[arg(long)]
    pub kernel: Option<String>,
    /// Comma-separated noise exponents (an empty string is an empty grid)
    // full path keeps clap from treating this as a multi-value flag
    #[arg(long, value_parser = parse_list::<f64>)]
    pub lambda_grid: Option<::std::vec::Vec<f64>>,
    /// Comma-separated node counts
    #[arg(long, value_parser = parse_list::<usize>)]
    pub n_values: Option<::std::vec::Vec<usize>>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simpson subintervals for error norms
    #[arg(long)]
    pub simpson_m: Option<usize>,
    #[arg(long)]
    pub sobolev_radius: Option<f64>,
}

/// `"1, 2,3"` to a list; the empty string is the empty list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|e| format!("{item:?}: {e}"))
        })
        .collect()
}

/// Reads and parses `path`.
pub fn load_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile(path.display().to_string()),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })?;
    parse_str(&text).map_err(|e| match e {
        CliError::Parse { line, message, .. } => CliError::Parse {
            source_name: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

pub fn parse_str(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Parse {
            source_name: "<config>".into(),
            line,
            message: e.message().to_string(),
        }
    })
}

pub fn parse_family(s: &str) -> Result<Family, CliError> {
    s.parse()
        .map_err(|e: mollifem::MeshError| CliError::Validation(e.to_string()))
}

pub fn parse_kernel(s: &str) -> Result<Option<KernelKind>, CliError> {
    if s.trim().eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|e: mollifem::KernelError| CliError::Validation(e.to_string()))
}

/// Seed used when neither file nor flag sets one.
pub fn default_seed() -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Parse {
            source_name: SEED_ENV.into(),
            line: None,
            message: format!("not an unsigned integer: {v:?}"),
        }),
        Err(_) => Ok(mollifem::rates::DEFAULT_SEED),
    }
}

/// Merges defaults, file and overrides, normalises P2 node counts and
/// validates. Returns the config and the normalisation notes.
pub fn resolve(
    file: Option<&ConfigFile>,
    ov: &Overrides,
) -> Result<(StudyConfig, Vec<String>), CliError> {
    let empty = ConfigFile::default();
    let file = file.unwrap_or(&empty);
    let mut cfg = StudyConfig {
        seed: default_seed()?,
        ..StudyConfig::default()
    };

    if let Some(f) = ov.family.as_deref().or(file.mesh_fe.family.as_deref()) {
        cfg.family = parse_family(f)?;
    }
    if let Some(k) = ov.kernel.as_deref().or(file.kernel.name.as_deref()) {
        cfg.kernel = parse_kernel(k)?;
    }
    if let Some(m) = ov.simpson_m.or(file.quadrature.simpson_m) {
        cfg.simpson_m = m;
    }
    let exp = &file.experiment;
    if let Some(d) = ov.draws.or(exp.draws) {
        cfg.draws = d;
    }
    if let Some(s) = ov.seed.or(exp.seed) {
        cfg.seed = s;
    }
    if let Some(t) = exp.test_function {
        cfg.test_function = t;
    }
    cfg.sobolev_radius = ov.sobolev_radius.or(exp.sobolev_radius);
    if let Some(g) = ov
        .lambda_grid
        .clone()
        .or_else(|| file.rates.lambda_grid.clone())
    {
        cfg.lambda_grid = g;
    }
    if let Some(n) = ov.n_values.clone().or_else(|| file.rates.n_values.clone()) {
        cfg.n_values = n;
    }

    let notes = cfg.normalise();
    cfg.validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((cfg, notes))
}
