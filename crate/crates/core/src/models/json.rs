//! JSON model documents.
//!
//! ```json
//! { "dimension": 2, "name": "amplitude-damping",
//!   "hamiltonian": [[[0,0],[0,0]], [[0,0],[0,0]]], "hamiltonian_rate": {"kind":"constant","value":1},
//!   "terms": [ { "rate": {"kind":"constant","value":1}, "jump": [[[0,0],[1,0]], [[0,0],[0,0]]] } ] }
//! ```
//!
//! Matrices are row-major: an array of rows, each an array of `[re, im]`
//! pairs. A flat row-major array of `d²` pairs is accepted on input for
//! square matrices.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rate::RateDoc;
use super::{GeneratorModel, GeneratorTerm, RateFunction, TermSource};
use crate::error::{Error, Result};
use crate::operator_space::linalg::c;
use crate::operator_space::ComplexMatrix;

pub const MAX_DIMENSION: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixDoc {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl MatrixDoc {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixDoc::Rows(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_matrix(&self, path: &str) -> Result<ComplexMatrix> {
        match self {
            MatrixDoc::Rows(rows) => {
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                if let Some(bad) = rows.iter().position(|r| r.len() != m) {
                    return Err(Error::Schema {
                        path: format!("{path}[{bad}]"),
                        message: format!("ragged row: expected {m} entries, found {}", rows[bad].len()),
                    });
                }
                Ok(ComplexMatrix::from_row_iterator(
                    n,
                    m,
                    rows.iter().flatten().map(|[re, im]| c(*re, *im)),
                ))
            }
            MatrixDoc::Flat(entries) => {
                let d = (entries.len() as f64).sqrt().round() as usize;
                if d * d != entries.len() {
                    return Err(Error::Schema {
                        path: path.to_string(),
                        message: format!("flat matrix with {} entries is not square", entries.len()),
                    });
                }
                Ok(ComplexMatrix::from_row_iterator(
                    d,
                    d,
                    entries.iter().map(|[re, im]| c(*re, *im)),
                ))
            }
        }
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    serde_json::to_value(MatrixDoc::from_matrix(m)).expect("matrices serialize")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub rate: RateDoc,
    pub jump: MatrixDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_rate: Option<RateDoc>,
    pub terms: Vec<TermDoc>,
}

fn check_shape(m: &ComplexMatrix, d: usize, path: &str) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        let found = if m.nrows() != d { m.nrows() } else { m.ncols() };
        return Err(Error::dims(path, d, found));
    }
    Ok(())
}

impl ModelDoc {
    pub fn into_model(self) -> Result<GeneratorModel> {
        let d = self.dimension;
        if d == 0 || d > MAX_DIMENSION {
            return Err(Error::Schema {
                path: "dimension".into(),
                message: format!("must be between 1 and {MAX_DIMENSION}, got {d}"),
            });
        }
        let mut model = GeneratorModel::new(d, self.name.unwrap_or_default());
        model.description = self.description.unwrap_or_default();
        match (self.hamiltonian, self.hamiltonian_rate) {
            (Some(h), rate) => {
                let h = h.to_matrix("hamiltonian")?;
                check_shape(&h, d, "hamiltonian")?;
                let rate = match rate {
                    Some(r) => r.to_rate("hamiltonian_rate")?,
                    None => RateFunction::Constant(1.0),
                };
                model.push(GeneratorTerm::hamiltonian(h, rate)?)?;
            }
            (None, Some(_)) => {
                return Err(Error::Schema {
                    path: "hamiltonian_rate".into(),
                    message: "given without a hamiltonian".into(),
                })
            }
            (None, None) => {}
        }
        for (i, term) in self.terms.into_iter().enumerate() {
            let path = format!("terms[{i}]");
            let jump = term.jump.to_matrix(&format!("{path}.jump"))?;
            check_shape(&jump, d, &format!("{path}.jump"))?;
            let rate = term.rate.to_rate(&format!("{path}.rate"))?;
            model.push(GeneratorTerm::dissipator(jump, rate)?)?;
        }
        Ok(model)
    }

    pub fn from_model(model: &GeneratorModel) -> Result<Self> {
        let mut doc = ModelDoc {
            dimension: model.hilbert_dim(),
            name: (!model.name.is_empty()).then(|| model.name.clone()),
            description: (!model.description.is_empty()).then(|| model.description.clone()),
            hamiltonian: None,
            hamiltonian_rate: None,
            terms: Vec::new(),
        };
        for (i, term) in model.terms().iter().enumerate() {
            match term.source() {
                TermSource::Hamiltonian(h) => {
                    if doc.hamiltonian.is_some() || i != 0 {
                        return Err(Error::InvalidInput(
                            "the model schema holds one Hamiltonian term, listed first".into(),
                        ));
                    }
                    doc.hamiltonian = Some(MatrixDoc::from_matrix(h));
                    doc.hamiltonian_rate = Some(RateDoc::from(term.rate()));
                }
                TermSource::Dissipator(a) => doc.terms.push(TermDoc {
                    rate: RateDoc::from(term.rate()),
                    jump: MatrixDoc::from_matrix(a),
                }),
            }
        }
        Ok(doc)
    }
}

pub fn load_model(text: &str) -> Result<GeneratorModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ModelDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    doc.into_model()
}

pub fn save_model(model: &GeneratorModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDoc::from_model(model)?)?)
}

#[cfg(test)]
mod tests {
    use super::super::presets;
    use super::super::parse_rate_expression;
    use super::*;

    const MINIMAL: &str = r#"{
        "dimension": 2,
        "terms": [ { "rate": {"kind": "constant", "value": 1}, "jump": [[[0,0],[1,0]], [[0,0],[0,0]]] } ]
    }"#;

    #[test]
    fn minimal_document_is_amplitude_damping() {
        let model = load_model(MINIMAL).unwrap();
        let reference = presets::amplitude_damping(RateFunction::Constant(1.0));
        assert_eq!(model.generator_at(0.0).unwrap(), reference.generator_at(0.0).unwrap());
        assert_eq!(model.terms()[0].source(), reference.terms()[0].source());
    }

    #[test]
    fn flat_matrices_are_accepted() {
        let flat = r#"{"dimension":2,"terms":[{"rate":{"kind":"expr","expr":"exp(-t)"},"jump":[[0,0],[1,0],[0,0],[0,0]]}]}"#;
        let model = load_model(flat).unwrap();
        assert_eq!(model.terms()[0].rate(), &RateFunction::expression("exp(-t)").unwrap());
    }

    #[test]
    fn round_trip_of_presets() {
        let models = [
            presets::two_qubit_dephasing(RateFunction::Constant(1.0), parse_rate_expression("exp(-t)").unwrap()),
            presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0)),
            presets::double_dot(presets::DoubleDotParams {
                phase: 0.3,
                energy: 1.5,
                kappa: RateFunction::sinusoidal(1.0, 0.5, 2.0),
                kappa_tilde: RateFunction::Constant(0.0),
                include_hamiltonian: true,
            }),
            presets::pure_dephasing(3, &vec![RateFunction::exp_decay(1.0, 0.1); 3]).unwrap(),
        ];
        for m in models {
            let text = save_model(&m).unwrap();
            let back = load_model(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(save_model(&back).unwrap(), text);
        }
    }

    #[test]
    fn oversized_jump_names_the_term() {
        let doc = r#"{"dimension":2,"terms":[
            {"rate":{"kind":"constant","value":1},"jump":[[[0,0],[1,0]],[[0,0],[0,0]]]},
            {"rate":{"kind":"constant","value":1},"jump":[[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]}]}"#;
        match load_model(doc) {
            Err(Error::DimensionMismatch { context, expected, found }) => {
                assert_eq!(context, "terms[1].jump");
                assert_eq!((expected, found), (2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let doc = r#"{"dimension":2,"terms":[{"rate":{"kind":"constant"},"jump":[]}]}"#;
        match load_model(doc) {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("terms[0].rate"), "{path}"),
            other => panic!("{other:?}"),
        }
        let doc = r#"{"dimension":2,"terms":[{"rate":{"kind":"expr","expr":"sin(t"},"jump":[[0,0],[1,0],[0,0],[0,0]]}]}"#;
        match load_model(doc) {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "terms[0].rate.expr");
                assert!(message.contains("expected ')'"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_model(r#"{"terms":[]}"#), Err(Error::Schema { .. })));
        assert!(matches!(load_model(r#"{"dimension":0,"terms":[]}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let doc = r#"{"dimension":2,"hamiltonian":[[[0,0],[1,0]],[[0,0],[0,0]]],"terms":[]}"#;
        assert!(matches!(load_model(doc), Err(Error::NotHermitian(_))));
    }
}
