//! File formats, dataset directories, configuration and the command line
//! for [`memefuse_core`].

pub mod cli;
pub mod config;
pub mod exec;
pub mod format;
pub mod store;
