//! Campaign service: persistence, the REST API and the benchmark harness
//! behind the `kiln` binary.

pub mod api;
pub mod bench;
pub mod store;
