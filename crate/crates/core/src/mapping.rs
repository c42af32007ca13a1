//! Predictors from feature vectors into a similarity space.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::io::{create, fmt_f64, read_text, split_metadata};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RidgeOptions {
    /// Penalty on `‖W‖²_F`; the intercept is never penalized.
    pub lambda: f64,
    /// Z-score feature columns with training statistics before fitting.
    pub standardize: bool,
}

impl RidgeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ridge lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Affine map `y = Wᵀ x + b` from `k` features to `d` space coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    /// k × d
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub ridge_lambda: f64,
}

impl LinearMap {
    pub fn new(weights: DMatrix<f64>, intercept: DVector<f64>, ridge_lambda: f64) -> Result<Self> {
        if weights.ncols() != intercept.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.ncols(),
                got: intercept.len(),
            });
        }
        if weights.iter().chain(intercept.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("linear map has non-finite entries".into()));
        }
        Ok(LinearMap {
            weights,
            intercept,
            ridge_lambda,
        })
    }

    pub fn input_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dims(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                got: x.len(),
            });
        }
        let d = self.output_dims();
        let mut y: Vec<f64> = self.intercept.iter().copied().collect();
        for (i, &xi) in x.iter().enumerate() {
            for (c, yc) in y.iter_mut().enumerate().take(d) {
                *yc += self.weights[(i, c)] * xi;
            }
        }
        Ok(y)
    }

    /// Predictions for every row of `x` (rows × k), as rows × d.
    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                got: x.ncols(),
            });
        }
        let mut y = x * &self.weights;
        for mut row in y.row_iter_mut() {
            row += self.intercept.transpose();
        }
        Ok(y)
    }

    /// `#ridge_lambda=<v>`, a `term,dim_0,...` header, one `f_<i>` row per
    /// feature, then an `intercept` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("#ridge_lambda={}\nterm", fmt_f64(self.ridge_lambda));
        for c in 0..self.output_dims() {
            let _ = write!(out, ",dim_{c}");
        }
        out.push('\n');
        for i in 0..self.input_width() {
            let _ = write!(out, "f_{i}");
            for c in 0..self.output_dims() {
                let _ = write!(out, ",{}", fmt_f64(self.weights[(i, c)]));
            }
            out.push('\n');
        }
        out.push_str("intercept");
        for c in 0..self.output_dims() {
            let _ = write!(out, ",{}", fmt_f64(self.intercept[c]));
        }
        out.push('\n');
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (meta, body) = split_metadata(text);
        let lambda = meta
            .iter()
            .find(|(k, _)| k == "ridge_lambda")
            .ok_or_else(|| Error::MalformedCsv("missing #ridge_lambda metadata".into()))?
            .1
            .parse::<f64>()
            .map_err(|_| Error::MalformedCsv("bad #ridge_lambda value".into()))?;
        let mut lines = body.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedCsv("missing header".into()))?;
        let d = header.split(',').count() - 1;
        if d == 0 {
            return Err(Error::MalformedCsv("model header has no dim_ columns".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut intercept = None;
        for line in lines {
            let mut fields = line.split(',').map(str::trim);
            let term = fields.next().unwrap_or_default().to_string();
            let vals = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::MalformedCsv(format!("`{f}` is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != d {
                return Err(Error::MalformedCsv(format!(
                    "row `{term}` has {} values, expected {d}",
                    vals.len()
                )));
            }
            if term == "intercept" {
                intercept = Some(vals);
            } else {
                rows.push(vals);
            }
        }
        let intercept =
            intercept.ok_or_else(|| Error::MalformedCsv("missing intercept row".into()))?;
        let k = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        LinearMap::new(
            DMatrix::from_row_slice(k, d, &flat),
            DVector::from_vec(intercept),
            lambda,
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::io::Write;
        let path = path.as_ref();
        let mut w = create(path)?;
        w.write_all(self.to_csv().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&read_text(path.as_ref())?)
    }
}

/// Thin SVD of a centred (and optionally standardized) design matrix.
///
/// Factorizing once lets the same training rows be regressed onto any number
/// of target sets, which is what the cross-validation harness does with the
/// correct and shuffled targets.
#[derive(Debug, Clone)]
pub struct RidgeSolver {
    means: DVector<f64>,
    scales: DVector<f64>,
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v: DMatrix<f64>,
    rows: usize,
}

impl RidgeSolver {
    /// Factorizes the given rows of `features` (all rows when `rows` is `None`).
    pub fn new(features: &DMatrix<f64>, rows: Option<&[usize]>, standardize: bool) -> Result<Self> {
        let k = features.ncols();
        let picked: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..features.nrows()).collect(),
        };
        let n = picked.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut x = DMatrix::zeros(n, k);
        for (r, &src) in picked.iter().enumerate() {
            for c in 0..k {
                let v = features[(src, c)];
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeatures(src));
                }
                x[(r, c)] = v;
            }
        }
        let means = DVector::from_fn(k, |c, _| x.column(c).sum() / n as f64);
        for c in 0..k {
            x.column_mut(c).add_scalar_mut(-means[c]);
        }
        let scales = if standardize && n > 1 {
            DVector::from_fn(k, |c, _| {
                let sd = (x.column(c).norm_squared() / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
        } else {
            DVector::from_element(k, 1.0)
        };
        for c in 0..k {
            let s = scales[c];
            if s != 1.0 {
                x.column_mut(c).unscale_mut(s);
            }
        }
        let svd = SVD::try_new(x, true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("SVD of design matrix did not converge".into()))?;
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v_t requested").transpose();
        Ok(RidgeSolver {
            means,
            scales,
            u,
            singular: svd.singular_values,
            v,
            rows: n,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    /// Minimizes `Σ ‖Wᵀxᵢ + b − yᵢ‖² + λ‖W‖²_F` for targets given as rows × d,
    /// in the same row order the solver was built with. At `λ = 0` this is the
    /// minimum-norm least-squares solution.
    pub fn solve(&self, targets: &DMatrix<f64>, lambda: f64) -> Result<LinearMap> {
        if targets.nrows() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: targets.nrows(),
            });
        }
        let d = targets.ncols();
        let n = self.rows as f64;
        let y_mean = DVector::from_fn(d, |c, _| targets.column(c).sum() / n);
        let mut yc = targets.clone();
        for c in 0..d {
            yc.column_mut(c).add_scalar_mut(-y_mean[c]);
        }

        let s_max = self.singular.iter().fold(0.0_f64, |m, &s| m.max(s));
        let cutoff = s_max * f64::EPSILON * (self.rows.max(self.width()) as f64);
        let filter = DVector::from_fn(self.singular.len(), |i, _| {
            let s = self.singular[i];
            if lambda == 0.0 {
                if s > cutoff {
                    1.0 / s
                } else {
                    0.0
                }
            } else {
                s / (s * s + lambda)
            }
        });

        // W_std = V · diag(filter) · Uᵀ · Yc
        let mut uty = self.u.transpose() * yc;
        for (i, mut row) in uty.row_iter_mut().enumerate() {
            row *= filter[i];
        }
        let mut w = &self.v * uty;
        for c in 0..self.width() {
            let s = self.scales[c];
            if s != 1.0 {
                w.row_mut(c).unscale_mut(s);
            }
        }
        let intercept = y_mean - w.transpose() * &self.means;
        LinearMap::new(w, intercept, lambda)
    }
}

/// Fits the regularized linear map from item features to their group targets.
pub fn fit_linear_map(data: &LabeledDataset, opts: RidgeOptions) -> Result<LinearMap> {
    opts.validate()?;
    let solver = RidgeSolver::new(data.features().features(), None, opts.standardize)?;
    solver.solve(&data.target_matrix(), opts.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Always the origin.
    Zero,
    /// Always the training centroid.
    Mean,
    /// A draw from the per-dimension Gaussian fitted to the training targets.
    Distribution,
    /// A uniformly chosen training target.
    RandomDraw,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Zero,
        BaselineKind::Mean,
        BaselineKind::Distribution,
        BaselineKind::RandomDraw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Zero => "zero",
            BaselineKind::Mean => "mean",
            BaselineKind::Distribution => "distribution",
            BaselineKind::RandomDraw => "random-draw",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, BaselineKind::Distribution | BaselineKind::RandomDraw)
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub train_mean: Vec<f64>,
    /// Sample standard deviation per dimension (diagonal covariance).
    pub train_stddev: Vec<f64>,
    /// Training targets, rows × d. Kept only for `RandomDraw`.
    pub train_points: DMatrix<f64>,
}

/// Fits a baseline to training targets given as rows × d.
pub fn fit_baseline(kind: BaselineKind, train_targets: &DMatrix<f64>) -> Result<BaselineModel> {
    let n = train_targets.nrows();
    let d = train_targets.ncols();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    if kind == BaselineKind::Distribution && n < 2 {
        return Err(Error::TooFewTargets(n));
    }
    let train_mean: Vec<f64> = (0..d)
        .map(|c| train_targets.column(c).sum() / n as f64)
        .collect();
    let train_stddev: Vec<f64> = if n > 1 {
        (0..d)
            .map(|c| {
                let m = train_mean[c];
                let ss: f64 = train_targets.column(c).iter().map(|v| (v - m) * (v - m)).sum();
                (ss / (n - 1) as f64).sqrt()
            })
            .collect()
    } else {
        vec![0.0; d]
    };
    let train_points = if kind == BaselineKind::RandomDraw {
        train_targets.clone()
    } else {
        DMatrix::zeros(0, d)
    };
    Ok(BaselineModel {
        kind,
        train_mean,
        train_stddev,
        train_points,
    })
}

impl BaselineModel {
    pub fn dims(&self) -> usize {
        self.train_mean.len()
    }

    pub fn predict(&self, rng: &mut SimRng) -> Vec<f64> {
        match self.kind {
            BaselineKind::Zero => vec![0.0; self.dims()],
            BaselineKind::Mean => self.train_mean.clone(),
            BaselineKind::Distribution => self
                .train_mean
                .iter()
                .zip(&self.train_stddev)
                .map(|(&m, &s)| {
                    Normal::new(m, s)
                        .expect("stddev is finite and >= 0")
                        .sample(rng)
                })
                .collect(),
            BaselineKind::RandomDraw => {
                let i = rng.random_range(0..self.train_points.nrows());
                self.train_points.row(i).iter().copied().collect()
            }
        }
    }
}

/// Least-squares multilateration: recovers a point from its Euclidean
/// distances to known anchors.
///
/// Subtracting the first anchor's equation `‖x − a₀‖² = r₀²` from each other
/// one gives the linear system `2(aᵢ − a₀)·x = r₀² − rᵢ² + ‖aᵢ‖² − ‖a₀‖²`,
/// solved in the least-squares sense.
pub fn triangulate(anchors: &[Vec<f64>], distances: &[f64]) -> Result<Vec<f64>> {
    let Some(first) = anchors.first() else {
        return Err(Error::InsufficientAnchors {
            needed: 2,
            dims: 1,
            got: 0,
        });
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidConfig("anchors have zero dimensions".into()));
    }
    if anchors.len() < d + 1 {
        return Err(Error::InsufficientAnchors {
            needed: d + 1,
            dims: d,
            got: anchors.len(),
        });
    }
    if distances.len() != anchors.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            got: distances.len(),
        });
    }
    for a in anchors {
        if a.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.len(),
            });
        }
    }
    if let Some(&r) = distances.iter().find(|&&r| !r.is_finite() || r < 0.0) {
        return Err(Error::NegativeDistance(r));
    }

    let m = anchors.len() - 1;
    let sq = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>();
    let a0_sq = sq(first);
    let r0_sq = distances[0] * distances[0];
    let mut a = DMatrix::zeros(m, d);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        let ai = &anchors[i + 1];
        for c in 0..d {
            a[(i, c)] = 2.0 * (ai[c] - first[c]);
        }
        b[i] = r0_sq - distances[i + 1] * distances[i + 1] + sq(ai) - a0_sq;
    }
    let svd = SVD::new(a, true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < d {
        return Err(Error::RankDeficientAnchors { rank, dims: d });
    }
    let x = svd
        .solve(&b, tol)
        .map_err(|e| Error::EigenFailure(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// A named group of dimensions measured jointly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub dims: Vec<usize>,
}

/// Disjoint domains that together cover dimensions `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Domain>", into = "Vec<Domain>")]
pub struct DomainPartition {
    domains: Vec<Domain>,
    dims: usize,
}

impl DomainPartition {
    pub fn new(domains: Vec<Domain>) -> Result<Self> {
        let dims: usize = domains.iter().map(|d| d.dims.len()).sum();
        let mut seen = vec![false; dims];
        for dom in &domains {
            if dom.dims.is_empty() {
                return Err(Error::PartitionMismatch(format!(
                    "domain `{}` is empty",
                    dom.name
                )));
            }
            for &i in &dom.dims {
                if i >= dims {
                    return Err(Error::PartitionMismatch(format!(
                        "dimension {i} outside 0..{dims}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::PartitionMismatch(format!(
                        "dimension {i} is in more than one domain"
                    )));
                }
            }
        }
        if dims == 0 {
            return Err(Error::PartitionMismatch("no dimensions".into()));
        }
        Ok(DomainPartition { domains, dims })
    }

    /// One domain holding every dimension: plain Euclidean distance.
    pub fn single(dims: usize) -> Result<Self> {
        Self::new(vec![Domain {
            name: "all".into(),
            dims: (0..dims).collect(),
        }])
    }

    /// Every dimension its own domain: Manhattan distance.
    pub fn singletons(dims: usize) -> Result<Self> {
        Self::new(
            (0..dims)
                .map(|i| Domain {
                    name: format!("dim_{i}"),
                    dims: vec![i],
                })
                .collect(),
        )
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }
}

impl TryFrom<Vec<Domain>> for DomainPartition {
    type Error = Error;
    fn try_from(d: Vec<Domain>) -> Result<Self> {
        DomainPartition::new(d)
    }
}

impl From<DomainPartition> for Vec<Domain> {
    fn from(p: DomainPartition) -> Self {
        p.domains
    }
}

/// Euclidean within each domain, summed (Manhattan) across domains.
pub fn conceptual_distance(p: &[f64], q: &[f64], partition: &DomainPartition) -> Result<f64> {
    if p.len() != partition.dims || q.len() != partition.dims {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} dims, points have {} and {}",
            partition.dims,
            p.len(),
            q.len()
        )));
    }
    Ok(partition
        .domains
        .iter()
        .map(|dom| {
            dom.dims
                .iter()
                .map(|&i| (p[i] - q[i]) * (p[i] - q[i]))
                .sum::<f64>()
                .sqrt()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureTable, StimulusId};
    use crate::rng::Seed;
    use std::collections::BTreeMap;

    #[test]
    fn predict_direct_formula() {
        let m = LinearMap::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);

        // 3 features → 2 dims; column c of W holds the weights for output c.
        let m = LinearMap::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5]),
            DVector::from_vec(vec![0.0, 10.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![10.0, 11.5]);

        let m = LinearMap::new(DMatrix::zeros(2, 1), DVector::from_vec(vec![-4.0]), 0.0).unwrap();
        assert_eq!(m.predict(&[7.0, 8.0]).unwrap(), vec![-4.0]);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    fn dataset(rows: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> LabeledDataset {
        let mut map = BTreeMap::new();
        let rows = rows
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (x, y))| {
                let g = StimulusId::new(format!("g{i}")).unwrap();
                map.insert(g.clone(), y);
                (format!("i{i}"), g, x)
            })
            .collect();
        LabeledDataset::new(FeatureTable::from_rows(rows).unwrap(), map).unwrap()
    }

    #[test]
    fn identity_task() {
        let mut rng = Seed(1).rng();
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let data = dataset(pts.clone(), pts);
        let m = fit_linear_map(&data, RidgeOptions::default()).unwrap();
        assert!((&m.weights - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);
        assert!(m.intercept.amax() < 1e-10);
    }

    #[test]
    fn single_point_interpolates() {
        let data = dataset(vec![vec![3.0, -1.0, 2.0]], vec![vec![0.5, 0.25]]);
        let m = fit_linear_map(&data, RidgeOptions::default()).unwrap();
        let y = m.predict(&[3.0, -1.0, 2.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Two identical feature columns: the min-norm fit splits the weight evenly.
        let rows = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let targets = (0..6).map(|i| vec![2.0 * i as f64]).collect();
        let m = fit_linear_map(&dataset(rows, targets), RidgeOptions::default()).unwrap();
        assert!((m.weights[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((m.weights[(1, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ridge_shrinks_and_standardize_is_affine_equivalent() {
        let mut rng = Seed(2).rng();
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|c| rng.random_range(-1.0..1.0) * (c + 1) as f64).collect())
            .collect();
        let targets: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] - 0.5 * r[2] + 0.1 * rng.random_range(-1.0..1.0)])
            .collect();
        let data = dataset(rows.clone(), targets);
        let norm = |l: f64| {
            fit_linear_map(&data, RidgeOptions { lambda: l, standardize: false })
                .unwrap()
                .weights
                .norm()
        };
        assert!(norm(10.0) < norm(0.1));
        assert!(norm(0.1) <= norm(0.0));

        // Unpenalized, standardizing the inputs cannot change predictions.
        let plain = fit_linear_map(&data, RidgeOptions::default()).unwrap();
        let std = fit_linear_map(&data, RidgeOptions { lambda: 0.0, standardize: true }).unwrap();
        for r in &rows {
            let a = plain.predict(r).unwrap();
            let b = std.predict(r).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn non_finite_features_rejected() {
        let data = dataset(vec![vec![1.0], vec![f64::NAN]], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit_linear_map(&data, RidgeOptions::default()),
            Err(Error::NonFiniteFeatures(1))
        ));
        assert!(RidgeOptions { lambda: -1.0, standardize: false }.validate().is_err());
    }

    #[test]
    fn model_csv_round_trip() {
        let m = LinearMap::new(
            DMatrix::from_row_slice(3, 2, &[0.1, 1.0 / 3.0, -2.5, 1e-300, 7.0, 0.0]),
            DVector::from_vec(vec![std::f64::consts::PI, -1.0]),
            0.25,
        )
        .unwrap();
        let text = m.to_csv();
        assert!(text.starts_with("#ridge_lambda=2.5"));
        assert_eq!(LinearMap::from_csv(&text).unwrap(), m);
    }

    fn targets(rows: &[[f64; 2]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), 2, |i, c| rows[i][c])
    }

    #[test]
    fn zero_and_mean_baselines() {
        let t = targets(&[[0.0, 0.0], [2.0, 2.0]]);
        let mut rng = Seed(0).rng();
        let zero = fit_baseline(BaselineKind::Zero, &t).unwrap();
        assert_eq!(zero.predict(&mut rng), vec![0.0, 0.0]);
        let mean = fit_baseline(BaselineKind::Mean, &t).unwrap();
        assert_eq!(mean.predict(&mut rng), vec![1.0, 1.0]);
    }

    #[test]
    fn random_draw_is_a_training_member() {
        let t = targets(&[[0.0, 1.0], [2.0, 3.0], [-1.0, 5.0]]);
        let m = fit_baseline(BaselineKind::RandomDraw, &t).unwrap();
        let mut rng = Seed(77).rng();
        for _ in 0..10 {
            let p = m.predict(&mut rng);
            assert!(t.row_iter().any(|r| r[0] == p[0] && r[1] == p[1]));
        }
    }

    #[test]
    fn distribution_baseline() {
        let one = targets(&[[1.0, 1.0]]);
        assert!(matches!(
            fit_baseline(BaselineKind::Distribution, &one),
            Err(Error::TooFewTargets(1))
        ));
        let t = targets(&[[0.0, 10.0], [2.0, 10.0], [4.0, 10.0]]);
        let m = fit_baseline(BaselineKind::Distribution, &t).unwrap();
        assert_eq!(m.train_mean, vec![2.0, 10.0]);
        assert!((m.train_stddev[0] - 2.0).abs() < 1e-15);
        assert_eq!(m.train_stddev[1], 0.0);
        let mut rng = Seed(3).rng();
        let draws: Vec<Vec<f64>> = (0..2000).map(|_| m.predict(&mut rng)).collect();
        assert!(draws.iter().all(|p| p[1] == 10.0));
        let mean0 = draws.iter().map(|p| p[0]).sum::<f64>() / 2000.0;
        assert!((mean0 - 2.0).abs() < 0.2);
    }

    #[test]
    fn triangulate_exact_geometry() {
        let anchors = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]];
        let d = [2f64.sqrt(), 5f64.sqrt(), 5f64.sqrt()];
        let x = triangulate(&anchors, &d).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triangulate_errors() {
        let two = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let err = triangulate(&two, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().starts_with("insufficient anchors"));

        let collinear = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(
            triangulate(&collinear, &[1.0, 1.0, 1.0]),
            Err(Error::RankDeficientAnchors { rank: 1, dims: 2 })
        ));
        let ok = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            triangulate(&ok, &[1.0, -1.0, 1.0]),
            Err(Error::NegativeDistance(_))
        ));
    }

    #[test]
    fn conceptual_distance_cases() {
        let part = DomainPartition::new(vec![
            Domain { name: "color".into(), dims: vec![0, 1] },
            Domain { name: "shape".into(), dims: vec![2] },
        ])
        .unwrap();
        let d = conceptual_distance(&[0.0, 0.0, 0.0], &[3.0, 4.0, 2.0], &part).unwrap();
        assert!((d - 7.0).abs() < 1e-15);

        let p = [1.0, -2.0, 0.5];
        let q = [0.0, 2.0, 3.0];
        let e = conceptual_distance(&p, &q, &DomainPartition::single(3).unwrap()).unwrap();
        assert!((e - (1.0f64 + 16.0 + 6.25).sqrt()).abs() < 1e-15);
        let m = conceptual_distance(&p, &q, &DomainPartition::singletons(3).unwrap()).unwrap();
        assert!((m - 7.5).abs() < 1e-15);

        assert!(conceptual_distance(&[0.0; 2], &[0.0; 2], &part).is_err());
    }

    #[test]
    fn partition_validation() {
        let dup = DomainPartition::new(vec![
            Domain { name: "a".into(), dims: vec![0, 1] },
            Domain { name: "b".into(), dims: vec![1] },
        ]);
        assert!(matches!(dup, Err(Error::PartitionMismatch(_))));
        let gap = DomainPartition::new(vec![Domain { name: "a".into(), dims: vec![0, 2] }]);
        assert!(matches!(gap, Err(Error::PartitionMismatch(_))));
    }
}
