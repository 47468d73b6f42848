use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{DisaggregationModel, NndConfig};
use super::strategy::{NndModels, NndStrategy};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::neuralnet::{load_weights, save_weights, EpochLoss};

const MANIFEST: &str = "manifest.json";
const FORMAT: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelEntry {
    parent: String,
    children: Vec<String>,
    weights: String,
    seed: u64,
    best_epoch: usize,
    history: Vec<EpochLoss>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    hierarchy_hash: String,
    strategy: NndStrategy,
    config: NndConfig,
    models: Vec<ModelEntry>,
}

/// Write every network and a manifest with the hierarchy hash, the
/// configuration, seeds and loss curves into `dir`.
pub fn save_bundle(models: &NndModels, h: &Hierarchy, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut entries = Vec::new();
    for (i, m) in models.models.iter().enumerate() {
        let file = format!("model_{i:03}.bin");
        save_weights(&m.network, &dir.join(&file))?;
        entries.push(ModelEntry {
            parent: m.parent_id.clone(),
            children: m.child_ids.clone(),
            weights: file,
            seed: m.seed,
            best_epoch: m.best_epoch,
            history: m.history.clone(),
        });
    }
    let manifest = Manifest {
        format: FORMAT,
        hierarchy_hash: h.structure_hash(),
        strategy: models.strategy,
        config: models.config.clone(),
        models: entries,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read a bundle written by [`save_bundle`] for the same hierarchy.
pub fn load_bundle(h: &Hierarchy, dir: &Path) -> Result<NndModels> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    if manifest.format != FORMAT {
        return Err(Error::Data(format!("unsupported bundle format {}", manifest.format)));
    }
    if manifest.hierarchy_hash != h.structure_hash() {
        return Err(Error::Data("model bundle was trained on a different hierarchy".into()));
    }
    let lookup = |id: &str| h.index_of(id).ok_or_else(|| Error::Data(format!("bundle references unknown node {id}")));
    let mut models = Vec::new();
    for e in manifest.models {
        let network = load_weights(&dir.join(&e.weights))?;
        let children = e.children.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?;
        if network.spec().outputs != children.len() {
            return Err(Error::Data(format!("{}: network width does not match its targets", e.parent)));
        }
        models.push(DisaggregationModel {
            parent: lookup(&e.parent)?,
            parent_id: e.parent,
            children,
            child_ids: e.children,
            window: manifest.config.window,
            use_calendar: manifest.config.use_calendar,
            network,
            history: e.history,
            best_epoch: e.best_epoch,
            seed: e.seed,
        });
    }
    Ok(NndModels { strategy: manifest.strategy, config: manifest.config, models })
}
