use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{load_matrix, read_labels, write_atomic, MatrixFormat};
use super::{Dataset, Geometry, Normalization, SampleMatrix};
use crate::{Error, Result};

/// JSON description of a dataset on disk. Relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Feature matrix, n rows × N columns (CSV or RAWF64).
    pub features: PathBuf,
    /// One 0-based label per line.
    pub labels: PathBuf,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default)]
    pub normalize: Normalization,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }

    pub fn geometry(&self) -> Result<Option<Geometry>> {
        match (self.height, self.width) {
            (Some(height), Some(width)) => Ok(Some(Geometry { height, width })),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidParameter("manifest must give both height and width or neither".into())),
        }
    }

    /// Loads features and labels; the normalization directive is carried on
    /// the dataset, not applied.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let features = resolve(&self.features);
        let x = load_matrix(&features, MatrixFormat::from_path(&features))?;
        let labels = read_labels(&resolve(&self.labels))?;
        let samples = SampleMatrix::new(x, self.geometry()?)?;
        let mut ds = Dataset::new(samples, labels, self.classes)?;
        ds.normalize = self.normalize;
        Ok(ds)
    }

    /// Reads the manifest at `path` and loads the dataset it names.
    pub fn load_from(path: &Path) -> Result<Dataset> {
        let manifest = Self::read(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        manifest.load(base)
    }
}
