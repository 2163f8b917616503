use std::fs;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::models::json::MatrixDoc;
use crate::operator_space::DensityOperator;

#[derive(Deserialize)]
#[serde(untagged)]
enum StateDoc {
    Wrapped { dimension: usize, matrix: MatrixDoc },
    Bare(MatrixDoc),
}

/// `basis:i`, `mixed`, or a JSON file holding `{"dimension", "matrix"}` or a
/// bare matrix.
pub fn parse_state(spec: &str, dim: usize) -> Result<DensityOperator> {
    if spec == "mixed" {
        return Ok(DensityOperator::maximally_mixed(dim));
    }
    if let Some(index) = spec.strip_prefix("basis:") {
        let i: usize = index
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad basis index {index:?}")))?;
        return DensityOperator::basis(dim, i);
    }
    let text = fs::read_to_string(spec).map_err(|e| Error::InvalidInput(format!("cannot read state file {spec}: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let doc: StateDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: format!("{spec}: {}", e.path()),
        message: e.inner().to_string(),
    })?;
    let (declared, matrix) = match doc {
        StateDoc::Wrapped { dimension, matrix } => (Some(dimension), matrix.to_matrix("matrix")?),
        StateDoc::Bare(matrix) => (None, matrix.to_matrix("")?),
    };
    if let Some(d) = declared {
        if d != matrix.nrows() {
            return Err(Error::dims("state dimension field", d, matrix.nrows()));
        }
    }
    if matrix.nrows() != dim || matrix.ncols() != dim {
        return Err(Error::dims("initial state", dim, matrix.nrows()));
    }
    DensityOperator::with_tolerance(matrix, 1e-9)
}
