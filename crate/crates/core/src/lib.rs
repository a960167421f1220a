pub mod oracle;
pub mod rng;
pub mod jsonl;
pub mod topics;
pub mod corpus;
pub mod extract;
pub mod graph;
pub mod manifold;
pub mod analysis;
pub mod config;
pub mod pipeline;
pub mod slice;
pub mod explore;
