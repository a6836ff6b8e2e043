//! File formats, model persistence, simulation output and the `etree`
//! command-line interface on top of `etree-core`.

pub mod cli;
pub mod manifest;
pub mod model;
pub mod report;

pub use manifest::{load_dataset, load_observations, save_dataset, LoadError};
pub use model::ModelError;
