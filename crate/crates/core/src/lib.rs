//! Gossip opinion dynamics with stubborn agents.
//!
//! Regular agents repeatedly meet neighbours and move their belief towards
//! the neighbour's. Stubborn agents never move. This crate builds such
//! networks, simulates the process, and computes the stationary first and
//! second belief moments exactly through the absorption probabilities of the
//! dual random walk. It also measures how quickly that walk mixes, which
//! controls whether most agents end up agreeing.

pub mod error;
pub mod fluidity;
pub mod generators;
pub mod graph;
pub mod linalg;
pub mod moments;
pub mod network;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::UndirectedGraph;
pub use network::{NetworkBuilder, SocialNetwork};
