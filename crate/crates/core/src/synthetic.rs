//! Synthetic stand-in for an image study with a known linear ground truth.
//!
//! A random dissimilarity matrix is scaled into every requested space. The
//! highest-dimensional solution is pushed through one fixed random linear map
//! into feature space; each item is that group's feature vector plus Gaussian
//! jitter. The same features are then evaluated against every space, as real
//! image features would be.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{numbered_ids, DissimilarityMatrix, Embedding, FeatureTable};
use crate::error::{Error, Result};
use crate::eval::StudyInputs;
use crate::mds::{dimension_scan, SmacofConfig, StressCurve};
use crate::rng::Seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub groups: usize,
    pub variants: usize,
    pub feature_width: usize,
    /// Jitter stddev as a fraction of the RMS noise-free feature value.
    pub noise_fraction: f64,
    pub dims: Vec<usize>,
    pub smacof: SmacofConfig,
    pub seed: Seed,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            groups: 64,
            variants: 50,
            feature_width: 256,
            noise_fraction: 0.05,
            dims: vec![2, 4, 8],
            smacof: SmacofConfig::default(),
            seed: Seed(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStudy {
    pub dissimilarity: DissimilarityMatrix,
    pub stress: StressCurve,
    pub inputs: StudyInputs,
}

/// Symmetric matrix with off-diagonal entries uniform in `(0, 1]`.
pub fn random_dissimilarity(n: usize, seed: Seed) -> Result<DissimilarityMatrix> {
    let mut rng = seed.rng();
    let mut v = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let x = 1.0 - rng.random::<f64>();
            v[(i, j)] = x;
            v[(j, i)] = x;
        }
    }
    DissimilarityMatrix::new(numbered_ids("s", n), v)
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticStudy> {
    if cfg.groups < 3 || cfg.variants < 1 || cfg.feature_width < 1 {
        return Err(Error::InvalidConfig(
            "synthetic study needs >= 3 groups, >= 1 variant, width >= 1".into(),
        ));
    }
    let delta = random_dissimilarity(cfg.groups, cfg.seed.derive("dissimilarity"))?;
    let smacof = SmacofConfig {
        seed: cfg.seed.derive("smacof"),
        ..cfg.smacof.clone()
    };
    let (stress, embeddings) = dimension_scan(&delta, &cfg.dims, &smacof)?;
    let source = embeddings.last().expect("dims list is non-empty");
    let features = jittered_features(source, cfg)?;
    Ok(SyntheticStudy {
        dissimilarity: delta,
        stress,
        inputs: StudyInputs {
            features,
            embeddings,
        },
    })
}

fn jittered_features(source: &Embedding, cfg: &SyntheticConfig) -> Result<FeatureTable> {
    let mut rng = cfg.seed.derive("features").rng();
    let d = source.dims();
    let k = cfg.feature_width;
    let map = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
    let base = source.coords() * map;
    let scale = (base.norm_squared() / (base.len() as f64)).sqrt();
    let sigma = cfg.noise_fraction * scale;

    let mut rows = Vec::with_capacity(source.len() * cfg.variants);
    for (g, id) in source.ids().iter().enumerate() {
        for v in 0..cfg.variants {
            let feats = (0..k)
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    base[(g, c)] + sigma * z
                })
                .collect();
            rows.push((format!("{id}#{v}"), id.clone(), feats));
        }
    }
    FeatureTable::from_rows(rows)
}
