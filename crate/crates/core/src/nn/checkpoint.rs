use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Dense, LayerSpec, Mlp};
use crate::error::{Error, Result};

const FORMAT: &str = "ddq-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    shapes: Vec<LayerSpec>,
    layers: Vec<Dense>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    networks: BTreeMap<String, NetworkRecord>,
}

/// Named set of networks persisted as one JSON document. Every network
/// carries a layer-shape header that is checked on load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    networks: BTreeMap<String, Mlp>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, net: &Mlp) {
        self.networks.insert(name.into(), net.clone());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.networks.keys().map(String::as_str)
    }

    /// The network stored under `name`, provided its shapes equal `expected`.
    pub fn get(&self, name: &str, expected: &[LayerSpec]) -> Result<Mlp> {
        let net = self
            .networks
            .get(name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no network {name:?}")))?;
        if net.specs() != expected {
            return Err(Error::Format(format!(
                "network {name:?} shapes {:?} do not match expected {:?}",
                net.specs(),
                expected
            )));
        }
        Ok(net.clone())
    }

    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            networks: self
                .networks
                .iter()
                .map(|(k, net)| {
                    (
                        k.clone(),
                        NetworkRecord {
                            shapes: net.specs(),
                            layers: net.layers().to_vec(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format != FORMAT || file.version > VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        let mut networks = BTreeMap::new();
        for (name, record) in file.networks {
            let specs: Vec<LayerSpec> = record.layers.iter().map(|l| l.spec).collect();
            if specs != record.shapes {
                return Err(Error::Format(format!("network {name:?} shape header disagrees with its layers")));
            }
            let net = Mlp::from_layers(record.layers)
                .map_err(|e| Error::Format(format!("network {name:?}: {e}")))?;
            networks.insert(name, net);
        }
        Ok(Checkpoint { networks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
