//! Feed-forward networks with a 1-D convolutional branch over a window of
//! aggregate values and a dense branch over explanatory variables, trained
//! with Adam on the coherence-penalized squared loss.

mod grid;
mod network;
mod serialize;
mod spec;
mod train;

pub use grid::{apply_cell, grid_search, grid_search_with, GridCell, GridOutcome, GridScore, GridSpace};
pub use network::{coherence_loss, Example, LossWeights, Network, Scaling};
pub use serialize::{load_weights, read_weights, save_weights, write_weights};
pub use spec::{ConvSpec, NetworkSpec, TrainConfig};
pub use train::{train, validation_count, Adam, EpochLoss, TrainedNetwork};
