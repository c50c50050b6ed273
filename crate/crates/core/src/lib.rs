//! Length-controllable sentence variational autoencoder.
//!
//! The crate trains an LSTM VAE on raw sentences and shortens sentences at
//! inference time by seeding a learned remaining-length embedding with a
//! smaller word budget. Everything needed to reproduce the pipeline lives
//! here: text preprocessing, a small hand-differentiated numerics core, the
//! model, the training loop, beam search, ROUGE evaluation and a linear
//! length probe on the latent space.

pub mod config;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod probe;
pub mod textpipe;
pub mod training;

pub use error::{CheckpointError, Error, Result};
