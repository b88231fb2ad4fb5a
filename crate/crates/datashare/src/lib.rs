//! File formats, scenarios and the command-line interface on top of
//! `datashare-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod puzzle_file;
pub mod scenario;
pub mod transcript;
