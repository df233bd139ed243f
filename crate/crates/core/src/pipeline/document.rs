use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::intersection::Intersection;
use crate::regressor::AtomicRoad;
use crate::skeleton::{EdgeId, NodeId, SkeletonMap};

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonRef {
    /// Path as written in the build config.
    pub file: String,
    pub sha256: String,
}

impl SkeletonRef {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        SkeletonRef {
            file: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let canonical = serde_json::to_vec(cfg).expect("config serializes");
        Provenance {
            config_hash: sha256_hex(&canonical),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// The reconstructed map: lane-level roads per skeleton edge and lane
/// connections per intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HDMapDocument {
    pub skeleton: SkeletonRef,
    pub roads: BTreeMap<EdgeId, AtomicRoad>,
    pub intersections: BTreeMap<NodeId, Intersection>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl HDMapDocument {
    pub fn empty() -> Self {
        HDMapDocument {
            skeleton: SkeletonRef {
                file: String::new(),
                sha256: String::new(),
            },
            roads: BTreeMap::new(),
            intersections: BTreeMap::new(),
            warnings: Vec::new(),
            provenance: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every road and intersection must exist in the skeleton.
    pub fn validate(&self, skeleton: &SkeletonMap) -> Result<()> {
        let mut unknown: Vec<String> = self
            .roads
            .keys()
            .filter(|e| !skeleton.edges.contains_key(e))
            .map(|e| format!("road {e}"))
            .collect();
        unknown.extend(
            self.intersections
                .keys()
                .filter(|n| !skeleton.intersections.contains_key(n))
                .map(|n| format!("intersection {n}")),
        );
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Association(unknown))
        }
    }
}
