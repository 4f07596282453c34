use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::params::{LearnerParams, ParamLayout};
use super::{Classifier, TrainConfig};
use crate::knot_table::ClassLabel;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("parameter {name}: {message}")]
    Shape { name: String, message: String },
    #[error("unknown class {0:?} in checkpoint")]
    UnknownClass(String),
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    dtype: String,
    config: TrainConfig,
    classes: Vec<String>,
    layout: ParamLayout,
    params: Map<String, Value>,
}

fn shape_err(name: &str, message: impl Into<String>) -> CheckpointError {
    CheckpointError::Shape {
        name: name.to_string(),
        message: message.into(),
    }
}

/// Writes the model as versioned JSON. Matrices are nested row arrays,
/// bias vectors flat arrays; values are stored as f64.
pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    model: &Classifier<F>,
    config: &TrainConfig,
) -> Result<(), CheckpointError> {
    let mut params = Map::new();
    for g in model.params.layout.groups() {
        let vals: Vec<f64> = model.params.data[g.range.clone()]
            .iter()
            .map(|v| v.to_f64_lossless())
            .collect();
        let value = if g.cols == 1 {
            Value::from(vals)
        } else {
            Value::from(vals.chunks(g.cols).map(|r| Value::from(r.to_vec())).collect::<Vec<_>>())
        };
        params.insert(g.name, value);
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        dtype: F::DTYPE.to_string(),
        config: config.clone(),
        classes: model.classes.iter().map(|c| c.name().to_string()).collect(),
        layout: model.params.layout,
        params,
    };
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

fn as_f64(name: &str, v: &Value) -> Result<f64, CheckpointError> {
    v.as_f64().ok_or_else(|| shape_err(name, "non-numeric entry"))
}

/// Scalar type a checkpoint was trained in (`"f32"` or `"f64"`).
pub fn checkpoint_dtype(path: &Path) -> Result<String, CheckpointError> {
    #[derive(Deserialize)]
    struct Header {
        version: u32,
        dtype: String,
    }
    let header: Header = serde_json::from_str(&fs::read_to_string(path)?)?;
    if header.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: header.version });
    }
    Ok(header.dtype)
}

/// Loads a checkpoint into the requested scalar type.
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<(Classifier<F>, TrainConfig), CheckpointError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: file.version });
    }
    let classes = file
        .classes
        .iter()
        .map(|n| n.parse::<ClassLabel>().map_err(|_| CheckpointError::UnknownClass(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let layout = file.layout;
    if layout.classes != classes.len() || layout.hidden != file.config.hidden_dim || layout.input != 2 {
        return Err(shape_err("layout", "inconsistent with config or class list"));
    }
    let mut params = LearnerParams::<F>::zeros(layout);
    for g in layout.groups() {
        let value = file
            .params
            .get(&g.name)
            .ok_or_else(|| shape_err(&g.name, "missing"))?;
        let mut flat = Vec::with_capacity(g.range.len());
        let rows = value.as_array().ok_or_else(|| shape_err(&g.name, "not an array"))?;
        if g.cols == 1 {
            for v in rows {
                flat.push(as_f64(&g.name, v)?);
            }
        } else {
            for r in rows {
                let r = r.as_array().ok_or_else(|| shape_err(&g.name, "row is not an array"))?;
                if r.len() != g.cols {
                    return Err(shape_err(&g.name, format!("row has {} entries, expected {}", r.len(), g.cols)));
                }
                for v in r {
                    flat.push(as_f64(&g.name, v)?);
                }
            }
        }
        if flat.len() != g.range.len() {
            return Err(shape_err(
                &g.name,
                format!("{} values, expected {}x{}", flat.len(), g.rows, g.cols),
            ));
        }
        for (dst, v) in params.data[g.range.clone()].iter_mut().zip(flat) {
            *dst = F::lit(v);
        }
    }
    if file.params.len() != layout.groups().len() {
        return Err(shape_err("params", "unexpected extra tensors"));
    }
    let model = Classifier {
        params,
        classes,
        encoding: file.config.encoding,
        normalization: file.config.normalization,
    };
    Ok((model, file.config))
}
