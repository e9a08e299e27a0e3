//! Facial-expression pipeline: local descriptors, multi-source fusion,
//! descriptor pooling, dimensionality reduction and classification.

pub mod classify;
pub mod codec;
pub mod dataset;
pub mod descriptors;
pub mod fusion;
pub mod metrics;
pub mod error;
pub mod numerics;
pub mod pipeline;
pub mod reduction;
pub mod rng;
pub mod selection;
pub mod synthetic;
