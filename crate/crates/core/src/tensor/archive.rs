use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{LayerKind, LayerSpec, ModelManifest};
use super::{npy, WeightTensor};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
    RunningMean,
    RunningVar,
}

impl TensorRole {
    pub fn suffix(self) -> &'static str {
        match self {
            TensorRole::Weight => "weight",
            TensorRole::Bias => "bias",
            TensorRole::RunningMean => "running_mean",
            TensorRole::RunningVar => "running_var",
        }
    }

    pub fn tensor_name(self, layer: &str) -> String {
        format!("{layer}.{}", self.suffix())
    }

    /// Tensors a layer must carry, with their shapes.
    pub fn expected(layer: &LayerSpec) -> Vec<(TensorRole, Vec<usize>)> {
        let c = layer.out_channels;
        match layer.kind {
            LayerKind::Conv | LayerKind::Fc => {
                let mut v = vec![(TensorRole::Weight, layer.weight_shape().expect("weighted layer"))];
                if layer.bias {
                    v.push((TensorRole::Bias, vec![c]));
                }
                v
            }
            LayerKind::Bn => vec![
                (TensorRole::Weight, vec![c]),
                (TensorRole::Bias, vec![c]),
                (TensorRole::RunningMean, vec![c]),
                (TensorRole::RunningVar, vec![c]),
            ],
            _ => Vec::new(),
        }
    }
}

/// One tensor declaration in `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Serialize, Deserialize)]
struct ArchiveFile {
    #[serde(flatten)]
    manifest: ModelManifest,
    #[serde(default)]
    tensors: Vec<TensorEntry>,
}

/// A manifest plus all of its tensors, keyed by tensor name
/// (`<layer>.<role>`).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorArchive {
    pub manifest: ModelManifest,
    pub tensors: BTreeMap<String, WeightTensor>,
}

impl TensorArchive {
    pub fn new(manifest: ModelManifest, tensors: impl IntoIterator<Item = WeightTensor>) -> Result<Self> {
        let tensors = tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        let archive = Self { manifest, tensors };
        archive.validate()?;
        Ok(archive)
    }

    pub fn tensor(&self, layer: &str, role: TensorRole) -> Option<&WeightTensor> {
        self.tensors.get(&role.tensor_name(layer))
    }

    pub fn weight(&self, layer: &str) -> Option<&WeightTensor> {
        self.tensor(layer, TensorRole::Weight)
    }

    /// Tensor declarations in manifest layer order.
    pub fn entries(&self) -> Vec<TensorEntry> {
        self.manifest
            .layers
            .iter()
            .flat_map(|l| TensorRole::expected(l).into_iter().map(move |(role, shape)| (role.tensor_name(&l.name), shape)))
            .map(|(name, shape)| TensorEntry { file: format!("{name}.npy"), name, shape })
            .collect()
    }

    /// Manifest invariants, tensor presence and shapes, finiteness.
    pub fn validate(&self) -> Result<()> {
        self.manifest.validate()?;
        let entries = self.entries();
        for entry in &entries {
            let t = self
                .tensors
                .get(&entry.name)
                .ok_or_else(|| Error::InvalidManifest(format!("layer tensor `{}` is missing", entry.name)))?;
            if t.shape != entry.shape {
                return Err(Error::ShapeMismatch { name: entry.name.clone(), expected: entry.shape.clone(), found: t.shape.clone() });
            }
            if t.data.len() != t.shape.iter().product::<usize>() {
                return Err(Error::ShapeMismatch { name: entry.name.clone(), expected: entry.shape.clone(), found: vec![t.data.len()] });
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(entry.name.clone()));
            }
        }
        if self.tensors.len() != entries.len() {
            let extra = self.tensors.keys().find(|k| !entries.iter().any(|e| &e.name == *k));
            return Err(Error::InvalidManifest(format!("undeclared tensor `{}`", extra.map(String::as_str).unwrap_or("?"))));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(WeightTensor::len).sum()
    }
}

/// Reads `manifest.json` and every declared `.npy` file under `dir`.
pub fn load_archive(dir: impl AsRef<Path>) -> Result<TensorArchive> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = read(&manifest_path)?;
    let file: ArchiveFile =
        serde_json::from_slice(&text).map_err(|source| Error::Json { path: manifest_path.clone(), source })?;
    let mut tensors = Vec::with_capacity(file.tensors.len());
    for entry in &file.tensors {
        if entry.file.contains(['/', '\\']) || entry.file.starts_with('.') {
            return Err(Error::InvalidManifest(format!("tensor file `{}` escapes the archive directory", entry.file)));
        }
        let path = dir.join(&entry.file);
        let bytes = read(&path)?;
        let (shape, data) = npy::decode(&bytes, &path)?;
        if shape != entry.shape {
            return Err(Error::ShapeMismatch { name: entry.name.clone(), expected: entry.shape.clone(), found: shape });
        }
        tensors.push(WeightTensor { name: entry.name.clone(), shape, data });
    }
    TensorArchive::new(file.manifest, tensors)
}

/// Writes the archive; output bytes depend only on the archive contents.
pub fn save_archive(archive: &TensorArchive, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    archive.validate()?;
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let entries = archive.entries();
    for entry in &entries {
        let t = &archive.tensors[&entry.name];
        write(&dir.join(&entry.file), &npy::encode(&t.shape, &t.data))?;
    }
    let file = ArchiveFile { manifest: archive.manifest.clone(), tensors: entries };
    let mut text = serde_json::to_vec_pretty(&file).expect("manifest serializes");
    text.push(b'\n');
    write(&dir.join(MANIFEST_FILE), &text)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path: path.to_path_buf() }
        } else {
            Error::Io { path: path.to_path_buf(), source }
        }
    })
}

fn write(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.clone(), source })
}
