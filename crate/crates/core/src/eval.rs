//! Image-grouped leave-one-out evaluation of predictors into a similarity space.
//!
//! Every fold holds out all items derived from one stimulus. Scores are RMSE,
//! averaged without weighting across folds and then across independent runs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Embedding, FeatureTable, LabeledDataset, StimulusId};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mapping::{fit_baseline, BaselineKind, RidgeOptions, RidgeSolver};
use crate::par;
use crate::rng::{Seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RmseMode {
    /// `sqrt(mean_i ‖ŷᵢ − yᵢ‖²)`: the typical prediction-to-truth distance.
    #[default]
    PerItem,
    /// `sqrt(mean_{i,c} (ŷᵢc − yᵢc)²)`: the per-item value divided by `sqrt(d)`.
    PerCoordinate,
}

fn check_pairs(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    let d = targets[0].len();
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != d || t.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if p.len() != d { p.len() } else { t.len() },
            });
        }
    }
    Ok(d)
}

/// Root mean squared Euclidean distance between paired predictions and targets.
pub fn rmse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    rmse_with(predictions, targets, RmseMode::PerItem)
}

pub fn rmse_with(predictions: &[Vec<f64>], targets: &[Vec<f64>], mode: RmseMode) -> Result<f64> {
    let d = check_pairs(predictions, targets)?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(normalize(total, predictions.len(), d, mode))
}

fn normalize(sum_sq: f64, items: usize, dims: usize, mode: RmseMode) -> f64 {
    let denom = match mode {
        RmseMode::PerItem => items,
        RmseMode::PerCoordinate => items * dims,
    };
    (sum_sq / denom as f64).sqrt()
}

/// RMSE over selected rows of two row-major point sets (`rows × d`).
fn rmse_rows(pred: &DMatrix<f64>, targets: &DMatrix<f64>, rows: &[usize], mode: RmseMode) -> f64 {
    let d = targets.ncols();
    let mut total = 0.0;
    for (p, &r) in rows.iter().enumerate() {
        for c in 0..d {
            let diff = pred[(p, c)] - targets[(r, c)];
            total += diff * diff;
        }
    }
    normalize(total, rows.len(), d, mode)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test_group: StimulusId,
    /// Item indices into the dataset's feature table.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn train_item_ids<'a>(&self, data: &'a LabeledDataset, fold: usize) -> Vec<&'a str> {
        let ids = data.features().item_ids();
        self.folds[fold].train.iter().map(|&i| ids[i].as_str()).collect()
    }

    pub fn test_item_ids<'a>(&self, data: &'a LabeledDataset, fold: usize) -> Vec<&'a str> {
        let ids = data.features().item_ids();
        self.folds[fold].test.iter().map(|&i| ids[i].as_str()).collect()
    }
}

/// One fold per stimulus, in order of first appearance in the feature table.
pub fn make_folds(dataset: &LabeledDataset) -> Result<FoldPlan> {
    let groups = dataset.features().groups();
    if groups.len() < 2 {
        return Err(Error::SingleGroup(groups.len()));
    }
    let item_groups = dataset.features().group_ids();
    let folds = groups
        .into_iter()
        .map(|g| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..item_groups.len()).partition(|&i| item_groups[i] == g);
            Fold {
                test_group: g,
                train,
                test,
            }
        })
        .collect();
    Ok(FoldPlan { folds })
}

/// Uniformly permutes which group owns which target point. Every item of a
/// group still shares one point, and the set of points is unchanged.
pub fn shuffle_targets(dataset: &LabeledDataset, seed: Seed) -> Result<LabeledDataset> {
    let groups: Vec<StimulusId> = dataset.targets().keys().cloned().collect();
    let mut points: Vec<Vec<f64>> = dataset.targets().values().cloned().collect();
    let mut rng = seed.rng();
    points.shuffle(&mut rng);
    let targets: BTreeMap<StimulusId, Vec<f64>> = groups.into_iter().zip(points).collect();
    dataset.with_targets(targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Predictor {
    Baseline { baseline: BaselineKind },
    Regression { ridge: RidgeOptions },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldScore {
    pub test_group: StimulusId,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvResult {
    pub mean_train_rmse: f64,
    pub mean_test_rmse: f64,
    pub folds: Vec<FoldScore>,
}

fn fold_seed(seed: Seed, group: &StimulusId) -> Seed {
    seed.derive(&format!("fold/{group}"))
}

/// Scores one fold. `solver` must be factorized from exactly `fold.train`.
fn score_fold(
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    fold: &Fold,
    predictor: &Predictor,
    solver: Option<&RidgeSolver>,
    seed: Seed,
    mode: RmseMode,
) -> Result<(f64, f64)> {
    let d = targets.ncols();
    let train_targets = targets.select_rows(fold.train.iter());
    match predictor {
        Predictor::Baseline { baseline } => {
            let model = fit_baseline(*baseline, &train_targets)?;
            let mut rng: SimRng = seed.rng();
            let mut draw = |rows: &[usize]| {
                let mut m = DMatrix::zeros(rows.len(), d);
                for r in 0..rows.len() {
                    let p = model.predict(&mut rng);
                    for c in 0..d {
                        m[(r, c)] = p[c];
                    }
                }
                m
            };
            let train_pred = draw(&fold.train);
            let test_pred = draw(&fold.test);
            Ok((
                rmse_rows(&train_pred, targets, &fold.train, mode),
                rmse_rows(&test_pred, targets, &fold.test, mode),
            ))
        }
        Predictor::Regression { ridge } => {
            let owned;
            let solver = match solver {
                Some(s) => s,
                None => {
                    owned = RidgeSolver::new(features, Some(&fold.train), ridge.standardize)?;
                    &owned
                }
            };
            let map = solver.solve(&train_targets, ridge.lambda)?;
            let train_pred = map.predict_rows(&features.select_rows(fold.train.iter()))?;
            let test_pred = map.predict_rows(&features.select_rows(fold.test.iter()))?;
            Ok((
                rmse_rows(&train_pred, targets, &fold.train, mode),
                rmse_rows(&test_pred, targets, &fold.test, mode),
            ))
        }
    }
}

fn summarize(plan: &FoldPlan, scores: Vec<(f64, f64)>) -> LoocvResult {
    let k = scores.len() as f64;
    let mean_train_rmse = scores.iter().map(|s| s.0).sum::<f64>() / k;
    let mean_test_rmse = scores.iter().map(|s| s.1).sum::<f64>() / k;
    let folds = plan
        .folds
        .iter()
        .zip(scores)
        .map(|(f, (train_rmse, test_rmse))| FoldScore {
            test_group: f.test_group.clone(),
            train_rmse,
            test_rmse,
        })
        .collect();
    LoocvResult {
        mean_train_rmse,
        mean_test_rmse,
        folds,
    }
}

/// Leave-one-group-out: fit on every other group, score train and test RMSE,
/// average across folds.
pub fn run_loocv(
    dataset: &LabeledDataset,
    predictor: &Predictor,
    seed: Seed,
    mode: RmseMode,
) -> Result<LoocvResult> {
    if let Predictor::Regression { ridge } = predictor {
        ridge.validate()?;
    }
    let plan = make_folds(dataset)?;
    let features = dataset.features().features();
    let targets = dataset.target_matrix();
    let scores = par::map(plan.folds.iter().collect(), |fold| {
        score_fold(
            features,
            &targets,
            fold,
            predictor,
            None,
            fold_seed(seed, &fold.test_group),
            mode,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&plan, scores))
}

/// The six rows of the study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyPredictor {
    Baseline(BaselineKind),
    RegressionShuffled,
    RegressionCorrect,
}

impl StudyPredictor {
    pub const ALL: [StudyPredictor; 6] = [
        StudyPredictor::Baseline(BaselineKind::Zero),
        StudyPredictor::Baseline(BaselineKind::Mean),
        StudyPredictor::Baseline(BaselineKind::Distribution),
        StudyPredictor::Baseline(BaselineKind::RandomDraw),
        StudyPredictor::RegressionShuffled,
        StudyPredictor::RegressionCorrect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyPredictor::Baseline(k) => k.name(),
            StudyPredictor::RegressionShuffled => "regression-shuffled",
            StudyPredictor::RegressionCorrect => "regression-correct",
        }
    }
}

impl fmt::Display for StudyPredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyPredictor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StudyPredictor::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown predictor `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySettings {
    pub runs: usize,
    pub seed: Seed,
    pub ridge: RidgeOptions,
    pub rmse_mode: RmseMode,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            runs: 10,
            seed: Seed(0),
            ridge: RidgeOptions::default(),
            rmse_mode: RmseMode::PerItem,
        }
    }
}

/// Seed of one run of one cell. Shuffled runs draw their permutation from
/// `run_seed(..).derive("shuffle")`.
pub fn run_seed(study: Seed, dims: usize, predictor: StudyPredictor, run: usize) -> Seed {
    study.derive(&format!("dims={dims}/{}/run={run}", predictor.name()))
}

pub fn shuffle_seed(run_seed: Seed) -> Seed {
    run_seed.derive("shuffle")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub dims: usize,
    pub predictor: StudyPredictor,
    pub train_runs: Vec<f64>,
    pub test_runs: Vec<f64>,
    pub seeds: Vec<Seed>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn stddev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl StudyCell {
    pub fn mean_train(&self) -> f64 {
        mean(&self.train_runs)
    }
    pub fn mean_test(&self) -> f64 {
        mean(&self.test_runs)
    }
    pub fn stddev_train(&self) -> f64 {
        stddev(&self.train_runs)
    }
    pub fn stddev_test(&self) -> f64 {
        stddev(&self.test_runs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub runs: usize,
    pub dims: Vec<usize>,
    pub cells: Vec<StudyCell>,
}

impl StudyReport {
    pub fn cell(&self, dims: usize, predictor: StudyPredictor) -> Option<&StudyCell> {
        self.cells
            .iter()
            .find(|c| c.dims == dims && c.predictor == predictor)
    }

    /// `dims,predictor,split,mean_rmse,stddev_rmse,runs`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dims,predictor,split,mean_rmse,stddev_rmse,runs\n");
        for c in &self.cells {
            for (split, m, s) in [
                ("train", c.mean_train(), c.stddev_train()),
                ("test", c.mean_test(), c.stddev_test()),
            ] {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.dims,
                    c.predictor,
                    split,
                    fmt_f64(m),
                    fmt_f64(s),
                    c.train_runs.len()
                );
            }
        }
        out
    }

    /// Fixed-width table with one row per predictor and train/test columns per space.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<22}", "predictor");
        for d in &self.dims {
            let _ = write!(out, " {:>9} {:>9}", format!("{d}D train"), format!("{d}D test"));
        }
        out.push('\n');
        for p in StudyPredictor::ALL {
            let _ = write!(out, "{:<22}", p.name());
            for &d in &self.dims {
                match self.cell(d, p) {
                    Some(c) => {
                        let _ = write!(out, " {:>9.4} {:>9.4}", c.mean_train(), c.mean_test());
                    }
                    None => {
                        let _ = write!(out, " {:>9} {:>9}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Features shared by every space plus one embedding per dimensionality.
#[derive(Debug, Clone)]
pub struct StudyInputs {
    pub features: FeatureTable,
    pub embeddings: Vec<Embedding>,
}

/// Evaluates all six predictors in every space, each over `settings.runs`
/// independent runs.
///
/// Every cell value is identical to calling [`run_loocv`] with
/// [`run_seed`] (on the [`shuffle_targets`] copy for the shuffled row); the
/// difference is that each fold's design matrix is factorized once and shared
/// by every space, run and target assignment.
pub fn run_study(inputs: &StudyInputs, settings: &StudySettings) -> Result<StudyReport> {
    if settings.runs == 0 {
        return Err(Error::InvalidConfig("runs must be >= 1".into()));
    }
    if inputs.embeddings.is_empty() {
        return Err(Error::MissingInput("no embeddings".into()));
    }
    settings.ridge.validate()?;
    let mode = settings.rmse_mode;
    let runs = settings.runs;

    struct Space {
        dims: usize,
        targets: DMatrix<f64>,
        shuffled: Vec<DMatrix<f64>>,
    }
    let mut spaces = Vec::with_capacity(inputs.embeddings.len());
    let mut plan = None;
    for emb in &inputs.embeddings {
        let data = LabeledDataset::from_embedding(inputs.features.clone(), emb).map_err(|e| {
            match e {
                Error::UnknownGroup(g) => Error::MissingInput(format!(
                    "{}D embedding has no point for group `{g}`",
                    emb.dims()
                )),
                other => other,
            }
        })?;
        if plan.is_none() {
            plan = Some(make_folds(&data)?);
        }
        let dims = emb.dims();
        let shuffled = (0..runs)
            .map(|r| {
                let s = run_seed(settings.seed, dims, StudyPredictor::RegressionShuffled, r);
                shuffle_targets(&data, shuffle_seed(s)).map(|d| d.target_matrix())
            })
            .collect::<Result<Vec<_>>>()?;
        spaces.push(Space {
            dims,
            targets: data.target_matrix(),
            shuffled,
        });
    }
    let plan = plan.expect("at least one embedding");
    let features = inputs.features.features();
    let regression = Predictor::Regression {
        ridge: settings.ridge,
    };

    // per fold → per (space, predictor, run) → (train, test)
    let per_fold = par::map(plan.folds.iter().collect(), |fold| -> Result<Vec<(f64, f64)>> {
        let solver = RidgeSolver::new(features, Some(&fold.train), settings.ridge.standardize)?;
        let mut out = Vec::with_capacity(spaces.len() * StudyPredictor::ALL.len() * runs);
        for space in &spaces {
            for p in StudyPredictor::ALL {
                for r in 0..runs {
                    let seed = fold_seed(run_seed(settings.seed, space.dims, p, r), &fold.test_group);
                    let score = match p {
                        StudyPredictor::Baseline(baseline) => score_fold(
                            features,
                            &space.targets,
                            fold,
                            &Predictor::Baseline { baseline },
                            None,
                            seed,
                            mode,
                        )?,
                        StudyPredictor::RegressionCorrect => score_fold(
                            features,
                            &space.targets,
                            fold,
                            &regression,
                            Some(&solver),
                            seed,
                            mode,
                        )?,
                        StudyPredictor::RegressionShuffled => score_fold(
                            features,
                            &space.shuffled[r],
                            fold,
                            &regression,
                            Some(&solver),
                            seed,
                            mode,
                        )?,
                    };
                    out.push(score);
                }
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let folds = per_fold.len() as f64;
    let mut cells = Vec::new();
    let mut slot = 0;
    for space in &spaces {
        for p in StudyPredictor::ALL {
            let mut cell = StudyCell {
                dims: space.dims,
                predictor: p,
                train_runs: Vec::with_capacity(runs),
                test_runs: Vec::with_capacity(runs),
                seeds: Vec::with_capacity(runs),
            };
            for r in 0..runs {
                // Same summation order as `summarize`.
                let train = per_fold.iter().map(|f| f[slot].0).sum::<f64>() / folds;
                let test = per_fold.iter().map(|f| f[slot].1).sum::<f64>() / folds;
                cell.train_runs.push(train);
                cell.test_runs.push(test);
                cell.seeds.push(run_seed(settings.seed, space.dims, p, r));
                slot += 1;
            }
            cells.push(cell);
        }
    }
    Ok(StudyReport {
        runs,
        dims: spaces.iter().map(|s| s.dims).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureTable;

    fn sid(s: &str) -> StimulusId {
        StimulusId::new(s).unwrap()
    }

    fn grouped(groups: &[(&str, Vec<f64>)], per_group: usize) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut targets = BTreeMap::new();
        for (gi, (g, t)) in groups.iter().enumerate() {
            targets.insert(sid(g), t.clone());
            for v in 0..per_group {
                rows.push((format!("{g}#{v}"), sid(g), vec![gi as f64, v as f64]));
            }
        }
        LabeledDataset::new(FeatureTable::from_rows(rows).unwrap(), targets).unwrap()
    }

    #[test]
    fn rmse_direct_formula() {
        let t = vec![vec![3.0, 4.0], vec![0.0, 0.0]];
        let p = vec![vec![0.0, 0.0]; 2];
        assert!((rmse(&p, &t).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        let per_coord = rmse_with(&p, &t, RmseMode::PerCoordinate).unwrap();
        assert!((per_coord - 6.25f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput)));
        assert!(rmse(&p, &t[..1]).is_err());
    }

    #[test]
    fn folds_partition_items() {
        let data = grouped(
            &[("a", vec![0.0]), ("b", vec![1.0]), ("c", vec![2.0])],
            4,
        );
        let plan = make_folds(&data).unwrap();
        assert_eq!(plan.folds.len(), 3);
        for (k, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.test.len(), 4);
            assert_eq!(f.train.len(), 8);
            let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..12).collect::<Vec<_>>());
            assert!(plan
                .test_item_ids(&data, k)
                .iter()
                .all(|id| id.starts_with(f.test_group.as_str())));
        }
    }

    #[test]
    fn single_group_has_no_folds() {
        let data = grouped(&[("a", vec![0.0])], 3);
        assert!(matches!(make_folds(&data), Err(Error::SingleGroup(1))));
    }

    #[test]
    fn mean_baseline_two_points() {
        let data = grouped(&[("a", vec![0.0, 0.0]), ("b", vec![2.0, 2.0])], 1);
        let res = run_loocv(
            &data,
            &Predictor::Baseline {
                baseline: BaselineKind::Mean,
            },
            Seed(1),
            RmseMode::PerItem,
        )
        .unwrap();
        let want = 8f64.sqrt();
        assert!((res.mean_test_rmse - want).abs() < 1e-12);
        for f in &res.folds {
            assert!((f.test_rmse - want).abs() < 1e-12);
            assert_eq!(f.train_rmse, 0.0);
        }
    }

    #[test]
    fn shuffle_two_groups_is_fair() {
        let data = grouped(&[("a", vec![0.0]), ("b", vec![1.0])], 2);
        let swaps = (0..1000)
            .filter(|&s| shuffle_targets(&data, Seed(s)).unwrap().targets()[&sid("a")][0] == 1.0)
            .count();
        let freq = swaps as f64 / 1000.0;
        assert!((freq - 0.5).abs() <= 0.05, "{freq}");
    }

    #[test]
    fn shuffle_is_deterministic() {
        let groups: Vec<(String, Vec<f64>)> =
            (0..10).map(|i| (format!("g{i}"), vec![i as f64])).collect();
        let refs: Vec<(&str, Vec<f64>)> =
            groups.iter().map(|(g, t)| (g.as_str(), t.clone())).collect();
        let data = grouped(&refs, 2);
        assert_eq!(
            shuffle_targets(&data, Seed(5)).unwrap(),
            shuffle_targets(&data, Seed(5)).unwrap()
        );
    }

    #[test]
    fn report_csv_layout() {
        let report = StudyReport {
            runs: 2,
            dims: vec![2],
            cells: vec![StudyCell {
                dims: 2,
                predictor: StudyPredictor::Baseline(BaselineKind::Zero),
                train_runs: vec![1.0, 3.0],
                test_runs: vec![2.0, 2.0],
                seeds: vec![Seed(1), Seed(2)],
            }],
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dims,predictor,split,mean_rmse,stddev_rmse,runs");
        assert!(lines[1].starts_with("2,zero,train,2.0000000000000000e0,1.4142135623730951e0,2"));
        assert!(lines[2].starts_with("2,zero,test,2.0000000000000000e0,0.0000000000000000e0,2"));
    }
}
