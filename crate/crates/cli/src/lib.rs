//! IO companion to `sidelink-core`: distribution and protocol file formats,
//! the preset catalog, seed parsing, and the reproducible experiment runner
//! behind the `sidelink` binary.

pub mod experiment;
pub mod formats;
pub mod presets;
pub mod seed;
