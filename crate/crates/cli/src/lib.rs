//! File formats and figure rendering behind the `scenegraph` binary.
//!
//! The binary itself lives in `main.rs`; everything reusable — versioned
//! JSON schemas with validation and the SVG renderer — is exported here so
//! integration tests and other tools can produce and consume the same
//! artifacts.

pub mod schema;
pub mod svg;
