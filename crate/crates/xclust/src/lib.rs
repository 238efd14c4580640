//! File formats, report writers and the command line for `xclust`.

pub mod cli;
pub mod jsonl;
pub mod manifest;
pub mod output;
