//! Text checkpoint format for hazard models.
//!
//! Line 1 is the version tag `drsr-ckpt v1`, line 2 the model dimensions,
//! then one `name rows cols` header per parameter block followed by its
//! row-major values on a single line. Plain text keeps checkpoints
//! diffable; `{}` formatting round-trips f64 exactly.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{HazardModel, Params, BLOCK_NAMES};

const MAGIC: &str = "drsr-ckpt v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
}

pub fn to_string(model: &HazardModel) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("dims {} {}\n", model.input_dim(), model.hidden_dim()));
    for (idx, name) in BLOCK_NAMES.iter().enumerate() {
        let (rows, cols) = model.params.block_shape(idx);
        out.push_str(&format!("{name} {rows} {cols}\n"));
        let block = model.params.block(idx);
        let mut first = true;
        for v in block {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn from_str(text: &str) -> Result<HazardModel, CheckpointError> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| CheckpointError::Format("empty file".into()))?;
    if magic != MAGIC {
        return Err(CheckpointError::Format(format!("unknown format tag `{magic}`")));
    }
    let dims_line = lines
        .next()
        .ok_or_else(|| CheckpointError::Format("missing dims line".into()))?;
    let mut parts = dims_line.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(CheckpointError::Format("expected dims line".into()));
    }
    let input_dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CheckpointError::Format("bad input dim".into()))?;
    let hidden_dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CheckpointError::Format("bad hidden dim".into()))?;
    if input_dim == 0 || hidden_dim == 0 {
        return Err(CheckpointError::Format("zero dimension".into()));
    }

    let mut params = Params::zeros(input_dim, hidden_dim);
    for (idx, name) in BLOCK_NAMES.iter().enumerate() {
        let header = lines
            .next()
            .ok_or_else(|| CheckpointError::Format(format!("missing header for {name}")))?;
        let mut hp = header.split_whitespace();
        let got_name = hp.next().unwrap_or("");
        let rows: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CheckpointError::Format(format!("bad rows for {name}")))?;
        let cols: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CheckpointError::Format(format!("bad cols for {name}")))?;
        let (want_rows, want_cols) = params.block_shape(idx);
        if got_name != *name || rows != want_rows || cols != want_cols {
            return Err(CheckpointError::Format(format!(
                "block header `{header}` does not match expected `{name} {want_rows} {want_cols}`"
            )));
        }
        let values_line = lines
            .next()
            .ok_or_else(|| CheckpointError::Format(format!("missing values for {name}")))?;
        let block = params.block_mut(idx);
        let mut count = 0usize;
        for tok in values_line.split_whitespace() {
            if count >= block.len() {
                return Err(CheckpointError::Format(format!("too many values for {name}")));
            }
            block[count] = tok
                .parse()
                .map_err(|_| CheckpointError::Format(format!("bad value `{tok}` in {name}")))?;
            count += 1;
        }
        if count != block.len() {
            return Err(CheckpointError::Format(format!(
                "{name}: expected {} values, got {count}",
                block.len()
            )));
        }
    }
    Ok(HazardModel { params })
}

/// Write atomically (temp file in the same directory, then rename).
pub fn save(model: &HazardModel, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, to_string(model))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<HazardModel, CheckpointError> {
    from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    #[test]
    fn round_trips_exactly() {
        let m = init_model(5, 7, 123).unwrap();
        let text = to_string(&m);
        let back = from_str(&text).unwrap();
        assert_eq!(m.params.data, back.params.data);
        assert_eq!(back.input_dim(), 5);
        assert_eq!(back.hidden_dim(), 7);
    }

    #[test]
    fn rejects_corrupt_inputs() {
        let m = init_model(2, 3, 1).unwrap();
        let text = to_string(&m);
        assert!(from_str("nonsense v9\n").is_err());
        assert!(from_str(&text.replace("w_forget 3 5", "w_forget 3 6")).is_err());
        let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(from_str(&truncated).is_err());
    }

    #[test]
    fn save_load_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let m = init_model(3, 4, 9).unwrap();
        save(&m, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(m.params.data, back.params.data);
    }
}
