//! Counter-argument retrieval engine.
//!
//! Given a user's argument on a controversial topic, find the most similar
//! unused argument from the opposing stance pool. Pools are pre-clustered so
//! a query only needs to be scored against cluster heads and one cluster.

pub mod bench;
pub mod clustering;
pub mod config;
pub mod corpus;
pub mod dialogue;
pub mod exec;
pub mod retrieval;
pub mod similarity;
pub mod synth;
