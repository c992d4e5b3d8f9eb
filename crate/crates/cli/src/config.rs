//! Service configuration: defaults, a flat key=value config file, and
//! flag/environment overrides layered on top by the CLI.

use std::path::{Path, PathBuf};

use amiedot_core::error::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub log_path: PathBuf,
    pub bind_address: String,
    pub strict_lending: bool,
    pub stopword_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            log_path: PathBuf::from("amiedot.jsonl"),
            bind_address: "127.0.0.1:8080".to_string(),
            strict_lending: false,
            stopword_path: None,
        }
    }
}

impl ServiceConfig {
    /// Defaults, overridden by the config file when given. Flags and the
    /// AMIEDOT_LOG / AMIEDOT_BIND environment variables are layered on by
    /// the CLI afterwards and win over the file.
    pub fn load(config_file: Option<&Path>) -> Result<Self, Error> {
        let mut config = Self::default();
        if let Some(path) = config_file {
            config.apply_file(path)?;
        }
        Ok(config)
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let raw = std::fs::read_to_string(path)?;
        for (idx, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::validation(
                    "config",
                    format!("line {}: expected key=value, got {line:?}", idx + 1),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "log_path" => self.log_path = PathBuf::from(value),
                "bind_address" => self.bind_address = value.to_string(),
                "strict_lending" => {
                    self.strict_lending = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::validation(
                                "strict_lending",
                                format!("expected true or false, got {other:?}"),
                            ))
                        }
                    }
                }
                "stopword_path" => self.stopword_path = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::validation(
                        "config",
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.log_path.as_os_str().is_empty() {
            return Err(Error::validation("log_path", "must not be empty"));
        }
        let port = self
            .bind_address
            .rsplit_once(':')
            .map(|(_, p)| p)
            .ok_or_else(|| Error::validation("bind_address", "expected host:port"))?;
        match port.parse::<u16>() {
            Ok(0) | Err(_) => Err(Error::validation(
                "bind_address",
                format!("port {port:?} not in [1, 65535]"),
            )),
            Ok(_) => Ok(()),
        }
    }
}
