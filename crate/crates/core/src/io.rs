//! JSON encodings of datasets, states, observables and calibration data.
//!
//! Complex matrices are stored as paired real and imaginary 2-D arrays
//! (`re`, `im`; `im` may be omitted for real matrices), row by row. Doubles
//! are written in shortest round-trip form, so reading a file back yields the
//! identical bits.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{QebError, Result};
use crate::scalar::{cplx, CMatrix, Real};
use crate::statespace::{DensityMatrix, PureState};
use crate::tomodata::{CalibrationReadout, PovmEffect, SettingRecord, TomographyDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingJson {
    /// Indices into `effects`.
    pub effects: Vec<usize>,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetJson {
    pub dim: usize,
    pub effects: Vec<MatrixJson>,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<Vec<SettingJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureStateJson {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationJson {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub rotations: Vec<MatrixJson>,
}

fn schema(context: impl Into<String>, message: impl Into<String>) -> QebError {
    QebError::Schema {
        context: context.into(),
        message: message.into(),
    }
}

/// Parses JSON, reporting the line and column of syntax or type errors.
pub fn parse_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| schema(context, e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse_json(&text, &path.display().to_string())
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn matrix_from_parts<S: Real>(
    re: &[Vec<f64>],
    im: Option<&[Vec<f64>]>,
    dim: usize,
    field: &str,
) -> Result<CMatrix<S>> {
    let check = |rows: &[Vec<f64>], part: &str| -> Result<()> {
        if rows.len() != dim {
            return Err(schema(
                field,
                format!("{part} has {} rows, expected {dim}", rows.len()),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(schema(
                    field,
                    format!("{part}[{i}] has {} entries, expected {dim}", row.len()),
                ));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(schema(field, format!("{part}[{i}][{j}] is not finite")));
            }
        }
        Ok(())
    };
    check(re, "re")?;
    if let Some(im) = im {
        check(im, "im")?;
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let imag = im.map_or(0.0, |m| m[i][j]);
        cplx(S::of(re[i][j]), S::of(imag))
    }))
}

pub fn matrix_from_json<S: Real>(m: &MatrixJson, dim: usize, field: &str) -> Result<CMatrix<S>> {
    matrix_from_parts(&m.re, m.im.as_deref(), dim, field)
}

pub fn matrix_to_json<S: Real>(m: &CMatrix<S>) -> MatrixJson {
    let (re, im) = split(m);
    let has_imag = im.iter().flatten().any(|&v| v != 0.0);
    MatrixJson {
        re,
        im: has_imag.then_some(im),
    }
}

fn split<S: Real>(m: &CMatrix<S>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(i, j)).collect())
            .collect()
    };
    (
        rows(&|i, j| m[(i, j)].re.as_f64()),
        rows(&|i, j| m[(i, j)].im.as_f64()),
    )
}

/// Square matrix of dimension inferred from the number of rows.
pub fn square_matrix_from_json<S: Real>(m: &MatrixJson, field: &str) -> Result<CMatrix<S>> {
    matrix_from_json(m, m.re.len(), field)
}

impl DatasetJson {
    pub fn into_dataset<S: Real>(self) -> Result<TomographyDataset<S>> {
        if self.dim == 0 {
            return Err(schema("dataset", "dim must be positive"));
        }
        if self.effects.len() != self.counts.len() {
            return Err(schema(
                "dataset",
                format!(
                    "effects has {} entries but counts has {}",
                    self.effects.len(),
                    self.counts.len()
                ),
            ));
        }
        let mut effects = Vec::with_capacity(self.effects.len());
        for (k, e) in self.effects.iter().enumerate() {
            let m = matrix_from_json::<S>(e, self.dim, &format!("effects[{k}]"))?;
            effects.push(PovmEffect::validated(m, k)?);
        }
        let settings = self.settings.map(|list| {
            list.into_iter()
                .map(|s| SettingRecord {
                    effects: s.effects,
                    shots: s.shots,
                })
                .collect()
        });
        TomographyDataset::build(self.dim, effects, self.counts, self.total, settings)
    }

    pub fn from_dataset<S: Real>(data: &TomographyDataset<S>) -> Self {
        DatasetJson {
            dim: data.dim(),
            effects: data
                .effects()
                .iter()
                .map(|e| matrix_to_json(e.matrix()))
                .collect(),
            counts: data.counts().to_vec(),
            total: Some(data.total_count()),
            settings: data.settings().map(|list| {
                list.iter()
                    .map(|s| SettingJson {
                        effects: s.effects.clone(),
                        shots: s.shots,
                    })
                    .collect()
            }),
        }
    }
}

pub fn parse_dataset<S: Real>(text: &str) -> Result<TomographyDataset<S>> {
    parse_json::<DatasetJson>(text, "dataset")?.into_dataset()
}

pub fn read_dataset<S: Real>(path: &Path) -> Result<TomographyDataset<S>> {
    read_json::<DatasetJson>(path)?.into_dataset()
}

pub fn write_dataset<S: Real>(path: &Path, data: &TomographyDataset<S>) -> Result<()> {
    write_json(path, &DatasetJson::from_dataset(data))
}

impl DensityMatrixJson {
    pub fn into_state<S: Real>(self) -> Result<DensityMatrix<S>> {
        let m = matrix_from_parts(&self.re, self.im.as_deref(), self.dim, "density matrix")?;
        DensityMatrix::new(m)
    }

    pub fn from_state<S: Real>(rho: &DensityMatrix<S>) -> Self {
        let (re, im) = split(rho.matrix());
        DensityMatrixJson {
            dim: rho.dim(),
            re,
            im: Some(im),
        }
    }
}

impl PureStateJson {
    pub fn into_state<S: Real>(self) -> Result<PureState<S>> {
        let n = self.dim;
        if self.re.len() != n || self.im.as_ref().is_some_and(|v| v.len() != n) {
            return Err(schema(
                "pure state",
                format!("amplitude arrays must have length {n}"),
            ));
        }
        let amps = DVector::from_fn(n, |i, _| {
            cplx(
                S::of(self.re[i]),
                S::of(self.im.as_ref().map_or(0.0, |v| v[i])),
            )
        });
        PureState::new(amps)
    }

    pub fn from_state<S: Real>(psi: &PureState<S>) -> Self {
        let a = psi.amplitudes();
        PureStateJson {
            dim: psi.dim(),
            re: a.iter().map(|z| z.re.as_f64()).collect(),
            im: Some(a.iter().map(|z| z.im.as_f64()).collect()),
        }
    }
}

/// A reference state file holds either a pure state (vector amplitudes) or a
/// density matrix (2-D arrays).
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceState<S: Real> {
    Pure(PureState<S>),
    Mixed(DensityMatrix<S>),
}

impl<S: Real> ReferenceState<S> {
    pub fn density_matrix(&self) -> DensityMatrix<S> {
        match self {
            ReferenceState::Pure(p) => DensityMatrix::from_pure(p),
            ReferenceState::Mixed(m) => m.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceState::Pure(p) => p.dim(),
            ReferenceState::Mixed(m) => m.dim(),
        }
    }
}

pub fn parse_reference_state<S: Real>(text: &str) -> Result<ReferenceState<S>> {
    let value: serde_json::Value = parse_json(text, "reference state")?;
    let is_vector = value
        .get("re")
        .and_then(|r| r.as_array())
        .is_some_and(|a| a.first().is_none_or(|x| x.is_number()));
    if is_vector {
        let p: PureStateJson =
            serde_json::from_value(value).map_err(|e| schema("pure state", e.to_string()))?;
        Ok(ReferenceState::Pure(p.into_state()?))
    } else {
        let m: DensityMatrixJson =
            serde_json::from_value(value).map_err(|e| schema("density matrix", e.to_string()))?;
        Ok(ReferenceState::Mixed(m.into_state()?))
    }
}

pub fn read_reference_state<S: Real>(path: &Path) -> Result<ReferenceState<S>> {
    parse_reference_state(&fs::read_to_string(path)?)
}

/// Observable file: a Hermitian matrix `{re, im?}`.
pub fn read_observable<S: Real>(path: &Path) -> Result<CMatrix<S>> {
    let m: MatrixJson = read_json(path)?;
    square_matrix_from_json(&m, "observable")
}

impl CalibrationJson {
    pub fn into_calibration<S: Real>(self) -> Result<CalibrationReadout<S>> {
        let rotations = self
            .rotations
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_json::<S>(m, 2, &format!("rotations[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        CalibrationReadout::new(
            self.q0.into_iter().map(S::of).collect(),
            self.q1.into_iter().map(S::of).collect(),
            rotations,
        )
    }
}

pub fn read_calibration<S: Real>(path: &Path) -> Result<CalibrationReadout<S>> {
    read_json::<CalibrationJson>(path)?.into_calibration()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomodata::{simulate_dataset, standard_pauli_settings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_dataset() {
        let d: TomographyDataset<f64> =
            parse_dataset(r#"{"dim": 2, "effects": [{"re": [[1, 0], [0, 1]]}], "counts": [1]}"#)
                .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.total_count(), 1);
    }

    #[test]
    fn length_mismatch_names_both_lengths() {
        let err = parse_dataset::<f64>(
            r#"{"dim": 2, "effects": [{"re": [[1, 0], [0, 1]]}], "counts": [1, 2]}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('1') && msg.contains('2'), "{msg}");
        assert_eq!(err.kind(), "schema");
    }

    #[test]
    fn bad_effect_reports_index() {
        let err = parse_dataset::<f64>(
            r#"{"dim": 2, "effects": [{"re": [[1, 0], [0, 0]]}, {"re": [[1.5, 0], [0, 0]]}], "counts": [1, 2]}"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, QebError::InvalidEffect { index: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn negative_count_is_schema_error_with_position() {
        let err = parse_dataset::<f64>(
            "{\"dim\": 2,\n \"effects\": [{\"re\": [[1, 0], [0, 1]]}],\n \"counts\": [-1]}",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn wrong_shape_names_field() {
        let err = parse_dataset::<f64>(
            r#"{"dim": 2, "effects": [{"re": [[1, 0, 0], [0, 1]]}], "counts": [1]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("effects[0]"), "{err}");
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let settings = standard_pauli_settings::<f64>(2);
        let rho = DensityMatrix::maximally_mixed(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = simulate_dataset(&rho, &settings, 25, &mut rng).unwrap();
        let text = to_json_string(&DatasetJson::from_dataset(&data)).unwrap();
        let back: TomographyDataset<f64> = parse_dataset(&text).unwrap();
        assert_eq!(back, data);
        assert!(back.measurement_plan().is_some());
    }

    #[test]
    fn reference_states() {
        let pure: ReferenceState<f64> =
            parse_reference_state(r#"{"dim": 2, "re": [0.6, 0.0], "im": [0.0, 0.8]}"#).unwrap();
        assert!(matches!(pure, ReferenceState::Pure(_)));
        let mixed: ReferenceState<f64> =
            parse_reference_state(r#"{"dim": 2, "re": [[0.5, 0], [0, 0.5]]}"#).unwrap();
        assert!(matches!(mixed, ReferenceState::Mixed(_)));
        let rho = DensityMatrix::<f64>::diagonal(&[0.1 + 0.2, 0.7]).unwrap();
        let text = to_json_string(&DensityMatrixJson::from_state(&rho)).unwrap();
        let back = parse_reference_state::<f64>(&text)
            .unwrap()
            .density_matrix();
        assert_eq!(back, rho);
    }

    #[test]
    fn calibration_schema() {
        let json =
            r#"{"q0": [0.9, 0.1], "q1": [0.2, 0.8], "rotations": [{"re": [[1, 0], [0, 1]]}]}"#;
        let cal: CalibrationReadout<f64> = parse_json::<CalibrationJson>(json, "calibration")
            .unwrap()
            .into_calibration()
            .unwrap();
        assert_eq!(cal.bins(), 2);
    }
}
