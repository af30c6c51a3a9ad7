use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineConfig, PipelineError, Result};
use crate::runner::ExperimentConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

/// Everything needed to reconstruct and check a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub config: PipelineConfig,
    pub experiments: Vec<ExperimentConfig>,
    pub seed: u64,
    pub output_root: PathBuf,
    pub commands: Vec<CommandRecord>,
    /// Output-relative path → SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_path: Option<&Path>, config: &PipelineConfig) -> Self {
        Self {
            config_path: config_path.map(Path::to_path_buf),
            config: config.clone(),
            experiments: Vec::new(),
            seed: config.seed,
            output_root: config.output.root.clone(),
            commands: Vec::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn load(root: &Path) -> Result<Option<Self>> {
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_slice(&text)
            .map(Some)
            .map_err(|e| PipelineError::Data(crate::data::DataError::InvalidPanel(format!("{}: {e}", path.display()))))
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST);
        let text = serde_json::to_vec_pretty(self).expect("manifest serialises");
        fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    }

    /// Re-hashes every file under `root` except the manifest and checkpoints.
    pub fn refresh(&mut self, root: &Path) -> Result<()> {
        self.artifacts = hash_tree(root)?;
        Ok(())
    }

    /// Problems found when re-checking the recorded digests.
    pub fn verify(&self, root: &Path) -> Result<Vec<String>> {
        let now = hash_tree(root)?;
        let mut problems = Vec::new();
        for (path, digest) in &self.artifacts {
            match now.get(path) {
                None => problems.push(format!("missing: {path}")),
                Some(d) if d != digest => problems.push(format!("changed: {path}")),
                _ => {}
            }
        }
        for path in now.keys().filter(|p| !self.artifacts.contains_key(*p)) {
            problems.push(format!("unrecorded: {path}"));
        }
        Ok(problems)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| PipelineError::io(&dir, e))?;
            let path = entry.path();
            let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            if rel == MANIFEST || rel == "checkpoints" {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(rel, sha256_file(&path)?);
            }
        }
    }
    Ok(out)
}
