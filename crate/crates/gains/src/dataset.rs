//! Dataset files: the JSON container used for public sets and IDX ubyte
//! pairs for real digit data.
//!
//! ```json
//! {"format":"gains-dataset","version":1,"dataset":{…}}
//! ```

use std::fs;
use std::path::Path;

use gains_core::data::{parse_idx, LabeledDataset, Split};
use serde::{Deserialize, Serialize};

use crate::{AppError, AppResult};

pub const DATASET_FORMAT: &str = "gains-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    dataset: LabeledDataset,
}

pub fn save_dataset(path: &Path, ds: &LabeledDataset) -> AppResult<()> {
    let c = Container {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        dataset: ds.clone(),
    };
    fs::write(path, serde_json::to_string(&c).expect("dataset serializes"))
        .map_err(|e| AppError::io(path, e))
}

pub fn load_dataset(path: &Path) -> AppResult<LabeledDataset> {
    let bad = |message: String| AppError::Format {
        path: path.into(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let c: Container = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if c.format != DATASET_FORMAT || c.version != DATASET_VERSION {
        return Err(bad(format!(
            "expected {DATASET_FORMAT} v{DATASET_VERSION}, found {} v{}",
            c.format, c.version
        )));
    }
    let ds = c.dataset;
    if ds.samples.rows() != ds.labels.len() {
        return Err(bad(format!(
            "{} rows but {} labels",
            ds.samples.rows(),
            ds.labels.len()
        )));
    }
    Ok(ds)
}

/// Reads an image/label IDX pair, e.g. `t10k-images-idx3-ubyte` and
/// `t10k-labels-idx1-ubyte`.
pub fn load_idx_pair(images: &Path, labels: &Path, split: Split) -> AppResult<LabeledDataset> {
    let img = fs::read(images).map_err(|e| AppError::io(images, e))?;
    let lab = fs::read(labels).map_err(|e| AppError::io(labels, e))?;
    let domain = images
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    parse_idx(&img, &lab, domain, split).map_err(|e| AppError::Format {
        path: images.into(),
        message: e.to_string(),
    })
}
