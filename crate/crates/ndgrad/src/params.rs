//! Named parameter collections and their on-disk checkpoint format.
//!
//! Checkpoints are a single JSON object mapping parameter name to
//! `{"shape": [...], "data": [...]}` with row-major f64 data. serde_json
//! prints f64 with shortest round-trip precision, so save/load is exact and
//! files written from identical parameters are byte-identical (BTreeMap keeps
//! key order stable).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Array, NdError};

pub type ParamMap = BTreeMap<String, Array>;

pub fn save_params(params: &ParamMap, path: &Path) -> Result<(), NdError> {
    let json = serde_json::to_string_pretty(params).map_err(|e| NdError::Checkpoint {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    fs::write(path, json).map_err(|e| NdError::Checkpoint {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn load_params(path: &Path) -> Result<ParamMap, NdError> {
    let raw = fs::read_to_string(path).map_err(|e| NdError::Checkpoint {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let map: ParamMap = serde_json::from_str(&raw).map_err(|e| NdError::Checkpoint {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    for (name, a) in &map {
        if !a.all_finite() {
            return Err(NdError::Checkpoint {
                path: path.display().to_string(),
                detail: format!("parameter {name} contains non-finite values"),
            });
        }
    }
    Ok(map)
}

/// Fetch a parameter and check its shape in one step; loaders use this so a
/// truncated or reshaped checkpoint fails loudly instead of misindexing.
pub fn expect_param(map: &ParamMap, name: &str, shape: &[usize]) -> Result<Array, NdError> {
    let a = map.get(name).ok_or_else(|| NdError::MissingParam { name: name.to_string() })?;
    if a.shape() != shape {
        return Err(NdError::ParamShape {
            name: name.to_string(),
            expected: shape.to_vec(),
            got: a.shape().to_vec(),
        });
    }
    Ok(a.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let mut map = ParamMap::new();
        map.insert("w".into(), Array::matrix(2, 2, vec![0.1, -1e-300, 3.5e17, 0.3]).unwrap());
        map.insert("b".into(), Array::vector(&[f64::MIN_POSITIVE, 1.0 / 3.0]));
        save_params(&map, &path).unwrap();
        let loaded = load_params(&path).unwrap();
        assert_eq!(map, loaded);

        let first = fs::read(&path).unwrap();
        save_params(&loaded, &path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn shape_check_catches_mismatch() {
        let mut map = ParamMap::new();
        map.insert("w".into(), Array::zeros(&[2, 3]));
        assert!(expect_param(&map, "w", &[2, 3]).is_ok());
        assert!(matches!(
            expect_param(&map, "w", &[3, 2]),
            Err(NdError::ParamShape { .. })
        ));
        assert!(matches!(
            expect_param(&map, "missing", &[1]),
            Err(NdError::MissingParam { .. })
        ));
    }
}
