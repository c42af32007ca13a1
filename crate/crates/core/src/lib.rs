//! Similarity spaces from pairwise dissimilarities, and linear maps from image
//! features into them.
//!
//! The pipeline: scale a dissimilarity matrix into a low-dimensional space with
//! SMACOF ([`mds`]), augment the stimulus images and give every variant its
//! original's point ([`augment`]), fit predictors from image features to points
//! ([`mapping`]), and score them with stimulus-grouped leave-one-out
//! cross-validation against baselines and a shuffled-target control ([`eval`]).

pub mod augment;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod mapping;
pub mod mds;
mod par;
pub mod rng;
pub mod svg;
pub mod synthetic;

pub use data::{
    similarity_to_dissimilarity, ConversionMode, DissimilarityMatrix, Embedding, FeatureTable,
    LabeledDataset, SimilarityMatrix, StimulusId,
};
pub use error::{Error, Result};
pub use rng::Seed;

pub use nalgebra;
