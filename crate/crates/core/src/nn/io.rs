//! Versioned JSON checkpoints: layer spec, head layout, then every
//! parameter in the row-major order of [`QNet::flat_params`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::HeadLayout;
use super::qnet::{LayerSpec, QNet};
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};

pub const CHECKPOINT_FORMAT: &str = "xapp-qnet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    layer_spec: LayerSpec,
    head_layout: HeadLayout,
    params: Vec<f64>,
}

pub fn to_json(net: &QNet) -> Result<String> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        layer_spec: net.spec().clone(),
        head_layout: net.layout().clone(),
        params: net.flat_params(),
    };
    Ok(serde_json::to_string(&ck)?)
}

pub fn save(net: &QNet, path: &Path) -> Result<()> {
    write_atomic(path, to_json(net)?.as_bytes())
}

/// Load a checkpoint. When `expected` is given, the stored head layout must
/// match it exactly.
pub fn load(path: &Path, expected: Option<&HeadLayout>) -> Result<QNet> {
    let bytes = read_file(path)?;
    let ck: Checkpoint =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint {} v{}", ck.format, ck.version),
        ));
    }
    if let Some(layout) = expected {
        if layout != &ck.head_layout {
            return Err(Error::Layout(format!(
                "checkpoint {} has a different head layout",
                path.display()
            )));
        }
    }
    QNet::from_parts(ck.layer_spec, ck.head_layout, &ck.params)
        .map_err(|e| Error::format(path, e.to_string()))
}
