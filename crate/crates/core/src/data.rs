//! Domain types shared by every stage of the pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for symmetry and zero-diagonal checks on stored matrices.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Name of a stimulus; the join key between matrices, embeddings and feature tables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StimulusId(String);

impl StimulusId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let trimmed = id.trim();
        if trimmed.is_empty() {
            return Err(Error::EmptyId);
        }
        Ok(StimulusId(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StimulusId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        StimulusId::new(s)
    }
}

impl From<StimulusId> for String {
    fn from(id: StimulusId) -> String {
        id.0
    }
}

impl fmt::Display for StimulusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for StimulusId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

pub(crate) fn check_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Convenience for tests and generators: `s0, s1, ...`.
pub fn numbered_ids(prefix: &str, n: usize) -> Vec<StimulusId> {
    (0..n)
        .map(|i| StimulusId(format!("{prefix}{i}")))
        .collect()
}

/// Symmetric, nonnegative, zero-diagonal pairwise dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    ids: Vec<StimulusId>,
    values: DMatrix<f64>,
}

impl DissimilarityMatrix {
    /// Validates a matrix that is expected to be symmetric within [`SYMMETRY_TOL`].
    pub fn new(ids: Vec<StimulusId>, values: DMatrix<f64>) -> Result<Self> {
        Self::with_symmetry_tolerance(ids, values, SYMMETRY_TOL)
    }

    /// Validates and symmetrizes by `(v + vᵀ) / 2` when the largest asymmetry is
    /// at most `tol`.
    pub fn with_symmetry_tolerance(
        ids: Vec<StimulusId>,
        mut values: DMatrix<f64>,
        tol: f64,
    ) -> Result<Self> {
        let n = ids.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::NonSquare {
                rows: values.nrows(),
                cols: n,
            });
        }
        if n < 3 {
            return Err(Error::TooFewStimuli { min: 3, got: n });
        }
        check_unique(ids.iter().map(StimulusId::as_str))?;
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { i, j, value: v });
                }
            }
            if values[(i, i)].abs() > SYMMETRY_TOL {
                return Err(Error::NonzeroDiagonal {
                    i,
                    value: values[(i, i)],
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (values[(i, j)] - values[(j, i)]).abs();
                if diff > tol {
                    return Err(Error::Asymmetric { i, j, diff, tol });
                }
            }
        }
        let sym = (&values + values.transpose()) * 0.5;
        values = sym;
        values.fill_diagonal(0.0);
        Ok(DissimilarityMatrix { ids, values })
    }

    /// Exact Euclidean distances between the rows of `coords`.
    pub fn from_points(ids: Vec<StimulusId>, coords: &DMatrix<f64>) -> Result<Self> {
        let values = pairwise_distances(coords);
        Self::new(ids, values)
    }

    pub fn ids(&self) -> &[StimulusId] {
        &self.ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Mean of the off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.len();
        let total: f64 = self.values.iter().sum();
        total / (n * (n - 1)) as f64
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(DissimilarityMatrix {
            ids: self.ids.clone(),
            values: &self.values * factor,
        })
    }
}

/// Pairwise similarity scores; larger means more alike.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<StimulusId>,
    values: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(ids: Vec<StimulusId>, values: DMatrix<f64>) -> Result<Self> {
        let n = ids.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::NonSquare {
                rows: values.nrows(),
                cols: n,
            });
        }
        check_unique(ids.iter().map(StimulusId::as_str))?;
        for i in 0..n {
            for j in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                if j > i {
                    let diff = (values[(i, j)] - values[(j, i)]).abs();
                    if diff > SYMMETRY_TOL {
                        return Err(Error::Asymmetric {
                            i,
                            j,
                            diff,
                            tol: SYMMETRY_TOL,
                        });
                    }
                }
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }

    pub fn ids(&self) -> &[StimulusId] {
        &self.ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionMode {
    /// `δ_ij = max_kl s_kl − s_ij`
    MaxMinus,
    /// `δ_ij = 1 − s_ij`, requires every entry in `[0, 1]`
    OneMinus,
}

impl std::str::FromStr for ConversionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-minus" => Ok(ConversionMode::MaxMinus),
            "one-minus" => Ok(ConversionMode::OneMinus),
            other => Err(Error::InvalidConfig(format!(
                "unknown conversion mode `{other}` (expected max-minus or one-minus)"
            ))),
        }
    }
}

pub fn similarity_to_dissimilarity(
    s: &SimilarityMatrix,
    mode: ConversionMode,
) -> Result<DissimilarityMatrix> {
    let n = s.ids.len();
    let mut out = match mode {
        ConversionMode::MaxMinus => {
            let max = s.values.max();
            s.values.map(|v| max - v)
        }
        ConversionMode::OneMinus => {
            for i in 0..n {
                for j in 0..n {
                    let value = s.values[(i, j)];
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::SimilarityOutOfRange { i, j, value });
                    }
                }
            }
            s.values.map(|v| 1.0 - v)
        }
    };
    out.fill_diagonal(0.0);
    DissimilarityMatrix::new(s.ids.clone(), out)
}

/// Euclidean distance matrix between the rows of `coords`.
pub fn pairwise_distances(coords: &DMatrix<f64>) -> DMatrix<f64> {
    let n = coords.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = row_distance(coords, i, j);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

#[inline]
pub(crate) fn row_distance(coords: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..coords.ncols() {
        let diff = coords[(i, c)] - coords[(j, c)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Stimuli placed as points in a similarity space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    ids: Vec<StimulusId>,
    coords: DMatrix<f64>,
    stress1: f64,
}

impl Embedding {
    pub fn new(ids: Vec<StimulusId>, coords: DMatrix<f64>, stress1: f64) -> Result<Self> {
        if coords.nrows() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                got: coords.nrows(),
            });
        }
        if coords.ncols() < 1 {
            return Err(Error::InvalidConfig("embedding needs dims >= 1".into()));
        }
        if !stress1.is_finite() || stress1 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "stress1 must be finite and >= 0, got {stress1}"
            )));
        }
        check_unique(ids.iter().map(StimulusId::as_str))?;
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                i: pos % coords.nrows(),
                j: pos / coords.nrows(),
            });
        }
        Ok(Embedding {
            ids,
            coords,
            stress1,
        })
    }

    pub fn ids(&self) -> &[StimulusId] {
        &self.ids
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn stress1(&self) -> f64 {
        self.stress1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s.as_str() == id)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn point_of(&self, id: &str) -> Option<Vec<f64>> {
        self.index_of(id).map(|i| self.point(i))
    }

    /// `id → point` for every stimulus.
    pub fn point_map(&self) -> BTreeMap<StimulusId, Vec<f64>> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), self.point(i)))
            .collect()
    }
}

/// Per-item feature vectors, each tagged with the stimulus it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    item_ids: Vec<String>,
    group_ids: Vec<StimulusId>,
    /// items × width
    features: DMatrix<f64>,
}

impl FeatureTable {
    pub fn new(
        item_ids: Vec<String>,
        group_ids: Vec<StimulusId>,
        features: DMatrix<f64>,
    ) -> Result<Self> {
        if item_ids.is_empty() {
            return Err(Error::NoItems);
        }
        if group_ids.len() != item_ids.len() || features.nrows() != item_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: item_ids.len(),
                got: features.nrows().min(group_ids.len()),
            });
        }
        if item_ids.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::EmptyId);
        }
        check_unique(item_ids.iter().map(String::as_str))?;
        Ok(FeatureTable {
            item_ids,
            group_ids,
            features,
        })
    }

    /// Builds a table from rows, rejecting ragged widths.
    pub fn from_rows(rows: Vec<(String, StimulusId, Vec<f64>)>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::NoItems);
        };
        let width = first.2.len();
        let mut item_ids = Vec::with_capacity(rows.len());
        let mut group_ids = Vec::with_capacity(rows.len());
        let mut flat = Vec::with_capacity(rows.len() * width);
        for (item, group, feats) in rows {
            if feats.len() != width {
                return Err(Error::RaggedFeatures {
                    item,
                    expected: width,
                    got: feats.len(),
                });
            }
            flat.extend_from_slice(&feats);
            item_ids.push(item);
            group_ids.push(group);
        }
        let n = item_ids.len();
        let features = DMatrix::from_row_slice(n, width, &flat);
        Self::new(item_ids, group_ids, features)
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn group_ids(&self) -> &[StimulusId] {
        &self.group_ids
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Distinct groups in order of first appearance.
    pub fn groups(&self) -> Vec<StimulusId> {
        let mut seen = HashSet::new();
        self.group_ids
            .iter()
            .filter(|g| seen.insert(g.as_str()))
            .cloned()
            .collect()
    }
}

/// Feature table joined with one target point per group.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: FeatureTable,
    targets: BTreeMap<StimulusId, Vec<f64>>,
    dims: usize,
}

impl LabeledDataset {
    pub fn new(features: FeatureTable, targets: BTreeMap<StimulusId, Vec<f64>>) -> Result<Self> {
        let dims = targets
            .values()
            .next()
            .map(Vec::len)
            .ok_or(Error::EmptyInput)?;
        if dims == 0 {
            return Err(Error::InvalidConfig("targets need dims >= 1".into()));
        }
        for t in targets.values() {
            if t.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: t.len(),
                });
            }
        }
        for g in &features.group_ids {
            if !targets.contains_key(g) {
                return Err(Error::UnknownGroup(g.to_string()));
            }
        }
        Ok(LabeledDataset {
            features,
            targets,
            dims,
        })
    }

    /// Joins features with an embedding's points by `group_id`.
    pub fn from_embedding(features: FeatureTable, embedding: &Embedding) -> Result<Self> {
        let all = embedding.point_map();
        let mut targets = BTreeMap::new();
        for g in features.groups() {
            let p = all
                .get(&g)
                .ok_or_else(|| Error::UnknownGroup(g.to_string()))?;
            targets.insert(g, p.clone());
        }
        Self::new(features, targets)
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn targets(&self) -> &BTreeMap<StimulusId, Vec<f64>> {
        &self.targets
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn target_of_item(&self, item: usize) -> &[f64] {
        &self.targets[&self.features.group_ids[item]]
    }

    /// Items × dims matrix of per-item targets.
    pub fn target_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dims, |i, c| self.target_of_item(i)[c])
    }

    pub fn with_targets(&self, targets: BTreeMap<StimulusId, Vec<f64>>) -> Result<Self> {
        Self::new(self.features.clone(), targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<StimulusId> {
        names.iter().map(|s| StimulusId::new(*s).unwrap()).collect()
    }

    #[test]
    fn one_minus_conversion() {
        let s = SimilarityMatrix::new(
            ids(&["a", "b", "c"]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.1, 0.5, 1.0, 0.4, 0.1, 0.4, 1.0]),
        )
        .unwrap();
        let d = similarity_to_dissimilarity(&s, ConversionMode::OneMinus).unwrap();
        let expected = [0.0, 0.5, 0.9, 0.5, 0.0, 0.6, 0.9, 0.6, 0.0];
        for (got, want) in d.values().transpose().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn one_minus_constant_off_diagonal() {
        let mut v = DMatrix::from_element(4, 4, 0.2);
        v.fill_diagonal(1.0);
        let s = SimilarityMatrix::new(ids(&["a", "b", "c", "d"]), v).unwrap();
        let d = similarity_to_dissimilarity(&s, ConversionMode::OneMinus).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { 0.8 };
                assert!((d.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn max_minus_constant_is_zero() {
        let s = SimilarityMatrix::new(ids(&["a", "b", "c"]), DMatrix::from_element(3, 3, 3.5))
            .unwrap();
        let d = similarity_to_dissimilarity(&s, ConversionMode::MaxMinus).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_minus_rejects_out_of_range() {
        let mut v = DMatrix::from_element(3, 3, 0.5);
        v[(0, 1)] = 1.5;
        v[(1, 0)] = 1.5;
        let s = SimilarityMatrix::new(ids(&["a", "b", "c"]), v).unwrap();
        assert!(matches!(
            similarity_to_dissimilarity(&s, ConversionMode::OneMinus),
            Err(Error::SimilarityOutOfRange { .. })
        ));
    }

    #[test]
    fn dissimilarity_validation() {
        let ok = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(DissimilarityMatrix::new(ids(&["a", "b", "c"]), ok.clone()).is_ok());

        let mut diag = ok.clone();
        diag[(0, 0)] = 0.5;
        assert!(matches!(
            DissimilarityMatrix::new(ids(&["a", "b", "c"]), diag),
            Err(Error::NonzeroDiagonal { .. })
        ));

        let mut neg = ok.clone();
        neg[(0, 1)] = -1.0;
        neg[(1, 0)] = -1.0;
        assert!(matches!(
            DissimilarityMatrix::new(ids(&["a", "b", "c"]), neg),
            Err(Error::NegativeEntry { .. })
        ));

        assert!(matches!(
            DissimilarityMatrix::new(ids(&["a", "a", "c"]), ok.clone()),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            DissimilarityMatrix::new(ids(&["a", "b"]), DMatrix::zeros(2, 2)),
            Err(Error::TooFewStimuli { .. })
        ));
    }

    #[test]
    fn feature_table_rejects_ragged_and_empty() {
        let g = StimulusId::new("a").unwrap();
        let err = FeatureTable::from_rows(vec![
            ("x".into(), g.clone(), vec![0.0; 10]),
            ("y".into(), g.clone(), vec![0.0; 9]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("ragged feature width"));
        assert_eq!(FeatureTable::from_rows(vec![]).unwrap_err().to_string(), "no items");
    }

    #[test]
    fn labeled_dataset_requires_every_group() {
        let table = FeatureTable::from_rows(vec![
            ("x".into(), StimulusId::new("a").unwrap(), vec![1.0]),
            ("y".into(), StimulusId::new("b").unwrap(), vec![2.0]),
        ])
        .unwrap();
        let mut targets = BTreeMap::new();
        targets.insert(StimulusId::new("a").unwrap(), vec![0.0, 1.0]);
        let err = LabeledDataset::new(table, targets).unwrap_err();
        assert!(matches!(err, Error::UnknownGroup(g) if g == "b"));
    }
}
