//! Exact computations in the tautological ring of M̄_{g,n}.

pub mod cone_complex;
pub mod error;
pub mod exact_linalg;
pub mod integration;
pub mod membership;
pub mod pixton;
pub mod product;
pub mod rational;
pub mod stable_graphs;
pub mod taut_classes;

pub use error::{Error, Result};
pub use rational::Q;
pub use stable_graphs::StableGraph;
pub use taut_classes::{Decoration, TautClass, Term};
