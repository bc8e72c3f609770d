//! File formats, model transports and the command line for the DECK
//! harness. The algorithms live in `deck_core`.

pub mod adapter;
pub mod cache;
pub mod cli;
pub mod corpus_io;
pub mod embeddings;
mod error;
pub mod manifest;
pub mod protocol;
pub mod report;
pub mod suite_io;

pub use error::{DeckError, Result};
