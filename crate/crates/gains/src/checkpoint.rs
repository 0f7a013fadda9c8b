//! JSON model checkpoints.
//!
//! ```json
//! {"format":"gains-checkpoint","version":1,"digest":"…","model":{…}}
//! ```
//!
//! `digest` is the model's parameter hash; it is recomputed on load.

use std::fs;
use std::path::Path;

use gains_core::nn::SplitModel;
use serde::{Deserialize, Serialize};

use crate::{AppError, AppResult};

pub const CHECKPOINT_FORMAT: &str = "gains-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    digest: String,
    model: SplitModel,
}

pub fn save_checkpoint(path: &Path, model: &SplitModel) -> AppResult<()> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        digest: model.digest(),
        model: model.clone(),
    };
    let text = serde_json::to_string(&ck).expect("checkpoint serializes");
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> AppResult<SplitModel> {
    let bad = |message: String| AppError::Format {
        path: path.into(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(bad(format!("not a checkpoint (format {:?})", ck.format)));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported checkpoint version {}",
            ck.version
        )));
    }
    for l in ck
        .model
        .encoder
        .iter()
        .chain(std::iter::once(&ck.model.classifier))
    {
        if l.bias.len() != l.outputs() {
            return Err(bad(format!(
                "bias of length {} for {} outputs",
                l.bias.len(),
                l.outputs()
            )));
        }
    }
    ck.model.shape().validate()?;
    if !ck.model.all_finite() {
        return Err(
            gains_core::Error::Numeric("checkpoint holds non-finite parameters".into()).into(),
        );
    }
    if ck.model.digest() != ck.digest {
        return Err(bad("parameter digest mismatch".into()));
    }
    Ok(ck.model)
}
