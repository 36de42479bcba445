//! Appraisal-informed prediction of post-consumption behavior.
//!
//! The crate bundles a small reverse-mode autodiff engine ([`autodiff`]),
//! neural building blocks ([`nn`]), a bag-of-embeddings text encoder
//! ([`text`]), dataset handling and a planted-signal generator ([`data`]),
//! the twelve model architectures ([`zoo`]), the training and evaluation
//! protocol ([`experiment`]) and Integrated-Gradients attribution
//! ([`attribution`]). [`gradcheck`] verifies every op against finite
//! differences.

pub mod attribution;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod io;
pub mod nn;
pub mod params;
pub mod tensor;
pub mod text;
pub mod zoo;

pub use autodiff::{Graph, OpKind, Var};
pub use error::{Error, Result};
pub use params::ParamStore;
pub use tensor::Tensor;
