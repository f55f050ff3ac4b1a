pub mod bench;
pub mod middleware;
pub mod ontology;
pub mod policy;
pub mod query;
pub mod store;
pub mod synth;
pub mod trust;
