//! Run manifest: config snapshot, input hashes, and output paths, written
//! atomically at run start and finalized at run end.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gqe_core::trainer::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestOutputs {
    pub trace_csv: PathBuf,
    pub records: PathBuf,
    pub final_checkpoint: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub hamiltonian_file: PathBuf,
    pub hamiltonian_sha256: String,
    pub pool_file: PathBuf,
    pub pool_sha256: String,
    pub pretrain_file: Option<PathBuf>,
    pub pretrain_sha256: Option<String>,
    pub outputs: ManifestOutputs,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn start(
        seed: u64,
        config: TrainConfig,
        hamiltonian_file: &Path,
        pool_file: &Path,
        pretrain_file: Option<&Path>,
        outputs: ManifestOutputs,
    ) -> Result<RunManifest> {
        Ok(RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            hamiltonian_file: hamiltonian_file.to_path_buf(),
            hamiltonian_sha256: sha256_file(hamiltonian_file)?,
            pool_file: pool_file.to_path_buf(),
            pool_sha256: sha256_file(pool_file)?,
            pretrain_sha256: pretrain_file.map(sha256_file).transpose()?,
            pretrain_file: pretrain_file.map(Path::to_path_buf),
            outputs,
            started_unix: unix_now(),
            finished_unix: None,
        })
    }

    /// Write via a temp file plus rename so readers never see a partial file.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn finalize(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = Some(unix_now());
        self.write_atomic(path)
    }
}
