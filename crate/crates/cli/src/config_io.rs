//! Reading, resolving and echoing campaign configuration files.

use std::path::{Path, PathBuf};

use locprec::config::RxPatternConfig;
use locprec::CampaignConfig;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Parses and validates a TOML campaign file. Missing keys take their
/// defaults, unknown keys are rejected, and relative file paths inside the
/// configuration are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<CampaignConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_paths(&mut config, base);
    Ok(config)
}

/// Parses and validates configuration text. Relative paths are kept as is.
pub fn parse_config_str(text: &str) -> Result<CampaignConfig> {
    let config: CampaignConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn resolve_paths(config: &mut CampaignConfig, base: &Path) {
    if let Some(p) = config.channel.loss_table_file.as_mut() {
        resolve(base, p);
    }
    for profile in [&mut config.terminal.vsat, &mut config.terminal.handheld] {
        if let RxPatternConfig::Table { file } = &mut profile.pattern {
            resolve(base, file);
        }
    }
}

/// Fully materialized configuration as TOML.
pub fn echo_config(config: &CampaignConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| CliError::Runtime(format!("cannot serialize configuration: {e}")))
}

/// Hex SHA-256 of the materialized configuration.
pub fn config_digest(config: &CampaignConfig) -> Result<String> {
    let digest = Sha256::digest(echo_config(config)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
