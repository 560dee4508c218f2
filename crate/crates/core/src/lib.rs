pub mod error;
pub mod evaluation;
pub mod ga;
pub mod graph;
pub mod ingest;
pub mod objectives;
pub mod permutation;
pub mod pipeline;
pub mod similarity;
pub mod simulator;
