use simspace::eval::{
    run_loocv, run_seed, run_study, shuffle_seed, shuffle_targets, Predictor, StudyPredictor,
    StudySettings,
};
use simspace::mapping::{BaselineKind, RidgeOptions};
use simspace::synthetic::{self, SyntheticConfig};
use simspace::{LabeledDataset, Seed};

fn small_study() -> synthetic::SyntheticStudy {
    synthetic::generate(&SyntheticConfig {
        groups: 8,
        variants: 4,
        feature_width: 12,
        dims: vec![2, 3],
        seed: Seed(21),
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn study_grid_matches_independent_loocv_runs() {
    let study = small_study();
    let settings = StudySettings {
        runs: 3,
        seed: Seed(8),
        ridge: RidgeOptions { lambda: 0.5, standardize: true },
        ..Default::default()
    };
    let report = run_study(&study.inputs, &settings).unwrap();
    assert_eq!(report.cells.len(), 2 * StudyPredictor::ALL.len());
    for emb in &study.inputs.embeddings {
        let data = LabeledDataset::from_embedding(study.inputs.features.clone(), emb).unwrap();
        for p in StudyPredictor::ALL {
            let cell = report.cell(emb.dims(), p).unwrap();
            for r in 0..settings.runs {
                let seed = run_seed(settings.seed, emb.dims(), p, r);
                let (set, predictor) = match p {
                    StudyPredictor::Baseline(kind) => {
                        (data.clone(), Predictor::Baseline { baseline: kind })
                    }
                    StudyPredictor::RegressionShuffled => (
                        shuffle_targets(&data, shuffle_seed(seed)).unwrap(),
                        Predictor::Regression { ridge: settings.ridge },
                    ),
                    StudyPredictor::RegressionCorrect => {
                        (data.clone(), Predictor::Regression { ridge: settings.ridge })
                    }
                };
                let res = run_loocv(&set, &predictor, seed, settings.rmse_mode).unwrap();
                assert_eq!(cell.test_runs[r], res.mean_test_rmse, "{p} {}D run {r}", emb.dims());
                assert_eq!(cell.train_runs[r], res.mean_train_rmse);
            }
        }
    }
}

#[test]
fn study_is_reproducible_and_csv_is_complete() {
    let study = small_study();
    let settings = StudySettings { runs: 2, seed: Seed(4), ..Default::default() };
    let a = run_study(&study.inputs, &settings).unwrap();
    let b = run_study(&study.inputs, &settings).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let csv = a.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dims,predictor,split,mean_rmse,stddev_rmse,runs"));
    assert_eq!(lines.count(), 2 * 6 * 2);
}

#[test]
fn deterministic_baselines_do_not_vary_across_runs() {
    let study = small_study();
    let settings = StudySettings { runs: 3, seed: Seed(5), ..Default::default() };
    let report = run_study(&study.inputs, &settings).unwrap();
    for kind in [BaselineKind::Zero, BaselineKind::Mean] {
        let cell = report.cell(2, StudyPredictor::Baseline(kind)).unwrap();
        assert_eq!(cell.stddev_test(), 0.0);
    }
}
