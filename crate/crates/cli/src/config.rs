use std::fs;
use std::path::{Path, PathBuf};

use biokey::commitment::CommitParams;
use biokey::ecc::EccParams;
use serde::Deserialize;

/// Optional settings shared across invocations. Every field can also be
/// given on the command line, which takes precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub escrow_store: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub tagmap: Option<PathBuf>,
    pub ecc: Option<EccParams>,
    pub commit_threshold: Option<f64>,
    pub vault_threshold: Option<f64>,
    /// Hex AES-256 key; when set the escrow store keeps key digits sealed.
    pub escrow_seal_key: Option<String>,
    pub now: Option<i64>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        let cfg: CliConfig = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects bad overrides before any command touches state.
    pub fn validate(&self) -> Result<(), String> {
        self.commit_params(None).validate().map_err(|e| format!("config: {e}"))?;
        if let Some(t) = self.vault_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(format!("config: vault_threshold must lie in (0, 1], got {t}"));
            }
        }
        self.seal_key()?;
        Ok(())
    }

    pub fn commit_params(&self, threshold: Option<f64>) -> CommitParams {
        let mut p = CommitParams::default();
        if let Some(ecc) = self.ecc {
            p.ecc = ecc;
        }
        if let Some(t) = threshold.or(self.commit_threshold) {
            p.threshold = t;
        }
        p
    }

    pub fn seal_key(&self) -> Result<Option<[u8; 32]>, String> {
        self.escrow_seal_key
            .as_deref()
            .map(|h| {
                hex::decode(h)
                    .ok()
                    .and_then(|b| <[u8; 32]>::try_from(b).ok())
                    .ok_or_else(|| "config: escrow_seal_key must be 64 hex digits".to_owned())
            })
            .transpose()
    }
}
