//! Model checkpoints: a JSON manifest naming every parameter with its shape
//! and byte offset, plus a blob of little-endian `f64` values in manifest
//! order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::classifier::{Classifier, ClassifierConfig};
use crate::error::{Error, Result};
use crate::io::{sha256_hex, write_atomic, write_json};
use crate::sacg::{SacgConfig, SacgModel};
use crate::vocab::Vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SyntaxClassifier,
    TextcnnClassifier,
    Sacg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ModelKind,
    pub frozen: bool,
    pub config: serde_json::Value,
    pub vocab: Vec<String>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub params: Vec<ParamEntry>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// `<stem>.json` for any of `<stem>`, `<stem>.json` or `<stem>.bin`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn blob_path(manifest: &Path, m: &Manifest) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(&m.blob)
}

fn encode_store(store: &ParamStore) -> (Vec<ParamEntry>, Vec<u8>) {
    let mut entries = Vec::with_capacity(store.len());
    let mut blob = Vec::with_capacity(store.num_scalars() * 8);
    for (_, name, t) in store.iter() {
        entries.push(ParamEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: blob.len() as u64,
        });
        for &x in t.value().iter() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    (entries, blob)
}

fn save(
    path: &Path,
    kind: ModelKind,
    config: serde_json::Value,
    vocab: &Vocab,
    store: &ParamStore,
    metadata: BTreeMap<String, String>,
) -> Result<PathBuf> {
    let manifest_file = manifest_path(path);
    let blob_file = manifest_file.with_extension("bin");
    let (params, blob) = encode_store(store);
    let manifest = Manifest {
        kind,
        frozen: store.is_frozen(),
        config,
        vocab: vocab.words().to_vec(),
        blob: blob_file
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Checkpoint(format!("bad checkpoint path {}", path.display())))?
            .to_string(),
        params,
        metadata,
    };
    write_atomic(&blob_file, &blob)?;
    write_json(&manifest_file, &manifest)?;
    Ok(manifest_file)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = manifest_path(path);
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", file.display())))
}

/// Overwrites every tensor of `store` from the blob, checking names and
/// shapes against the manifest.
fn restore(store: &mut ParamStore, manifest: &Manifest, blob: &[u8]) -> Result<()> {
    if manifest.params.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, model expects {}",
            manifest.params.len(),
            store.len()
        )));
    }
    for entry in &manifest.params {
        let id = store
            .id(&entry.name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{}`", entry.name)))?;
        let t = store.get_mut(id);
        if t.shape() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "tensor `{}` has shape {:?}, model expects {:?}",
                entry.name,
                entry.shape,
                t.shape()
            )));
        }
        let start = entry.offset as usize;
        let end = start + t.len() * 8;
        let bytes = blob
            .get(start..end)
            .ok_or_else(|| Error::Checkpoint(format!("blob too short for `{}`", entry.name)))?;
        for (dst, chunk) in t.value_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    if manifest.frozen {
        store.freeze();
    }
    Ok(())
}

fn load_parts(path: &Path) -> Result<(Manifest, Vec<u8>, Vocab)> {
    let file = manifest_path(path);
    let manifest = read_manifest(&file)?;
    let blob_file = blob_path(&file, &manifest);
    let blob = std::fs::read(&blob_file).map_err(|e| Error::io(&blob_file, e))?;
    let vocab = Vocab::from_words(manifest.vocab.clone())?;
    Ok((manifest, blob, vocab))
}

fn config_value<T: Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("configs serialize")
}

fn config_from<T: serde::de::DeserializeOwned>(m: &Manifest) -> Result<T> {
    serde_json::from_value(m.config.clone()).map_err(|e| Error::Checkpoint(format!("config: {e}")))
}

impl Classifier {
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        let kind = if self.uses_syntax() {
            ModelKind::SyntaxClassifier
        } else {
            ModelKind::TextcnnClassifier
        };
        save(path, kind, config_value(&self.config), &self.vocab, &self.store, BTreeMap::new())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (manifest, blob, vocab) = load_parts(path)?;
        let config: ClassifierConfig = config_from(&manifest)?;
        let mut model = match manifest.kind {
            ModelKind::SyntaxClassifier => Classifier::syntax(config, vocab)?,
            ModelKind::TextcnnClassifier => Classifier::textcnn(config, vocab)?,
            ModelKind::Sacg => {
                return Err(Error::Checkpoint("expected a classifier checkpoint, found a generator".into()))
            }
        };
        restore(&mut model.store, &manifest, &blob)?;
        Ok(model)
    }
}

impl SacgModel {
    pub fn save(&self, path: &Path, metadata: BTreeMap<String, String>) -> Result<PathBuf> {
        save(path, ModelKind::Sacg, config_value(&self.config), &self.vocab, &self.store, metadata)
    }

    /// Loads the model and the metadata stored with it.
    pub fn load(path: &Path) -> Result<(Self, BTreeMap<String, String>)> {
        let (manifest, blob, vocab) = load_parts(path)?;
        if manifest.kind != ModelKind::Sacg {
            return Err(Error::Checkpoint("expected a generator checkpoint".into()));
        }
        let config: SacgConfig = config_from(&manifest)?;
        let mut model = SacgModel::new(config, vocab)?;
        restore(&mut model.store, &manifest, &blob)?;
        Ok((model, manifest.metadata))
    }
}

/// SHA-256 over the manifest bytes followed by the blob bytes.
pub fn checkpoint_sha256(path: &Path) -> Result<String> {
    let file = manifest_path(path);
    let mut bytes = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
    let manifest = read_manifest(&file)?;
    let blob_file = blob_path(&file, &manifest);
    bytes.extend(std::fs::read(&blob_file).map_err(|e| Error::io(&blob_file, e))?);
    Ok(sha256_hex(&bytes))
}

/// SHA-256 of a store's names, shapes and values, independent of any file.
pub fn parameter_hash(store: &ParamStore) -> String {
    let (entries, mut blob) = encode_store(store);
    for e in entries {
        blob.extend_from_slice(e.name.as_bytes());
        for d in e.shape {
            blob.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    sha256_hex(&blob)
}
