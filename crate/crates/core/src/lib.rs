//! Binding disparate, modality-incomplete datasets into pseudo-paired
//! multimodal training data, plus similarity-weighted contrastive
//! pre-training over heterogeneous modality combinations.
//!
//! The pipeline has two stages. Stage one pairs samples across datasets by
//! embedding a shared modality (a sensor stream via a reconstruction-trained
//! encoder, or class labels via a text embedder) and matching on cosine
//! similarity. Stage two trains a multimodal model on the union of the
//! original incomplete samples (zero-padded, with presence masks) and the
//! pseudo-paired samples, weighting each sample's contrastive terms by its
//! pairing similarity.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The pipeline
//! itself runs at [`Real`] precision; dataset tensors are stored as `f32`,
//! matching the on-disk format.

pub mod baselines;
pub mod binding;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod experiment;
pub mod rng;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Working precision of the pipeline (losses, encoders, similarity).
pub type Real = f64;
