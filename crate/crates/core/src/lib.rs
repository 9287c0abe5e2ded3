pub mod autodiff;
pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod nn;
pub mod sacg;
pub mod syntax;
pub mod vocab;

pub use classifier::{Classifier, ClassifierConfig};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use sacg::{AblationKind, SacgConfig, SacgModel};
pub use syntax::{AdjacencyMatrix, ConstituencyTree, Sentence};
pub use vocab::Vocab;
