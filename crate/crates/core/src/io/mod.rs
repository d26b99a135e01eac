//! On-disk formats: binary pointmap and depth containers, and line-oriented
//! text documents for poses, pose graphs, reports and pair verdicts.
//!
//! All binary integers and floats are little-endian. Text documents allow
//! `#` comments and blank lines, and print floats in the shortest decimal
//! form that parses back to the same value.

mod binary;
mod text;

pub use binary::{DepthFile, PointmapFile, DEPTH_MAGIC, FLAG_CONFIDENCE, FLAG_MASK, POINTMAP_MAGIC};
pub use text::{
    format_graph, format_pair_validity, format_poses, format_report, parse_graph, parse_pair_validity,
    parse_poses, parse_report, read_graph, read_pair_validity, read_poses, read_report, write_graph,
    write_pair_validity, write_poses, write_report,
};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: Vec<u8> },
    #[error("truncated file: need {needed} more bytes at byte offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("unsupported flags {flags:#x} at byte offset {offset}")]
    UnknownFlags { offset: usize, flags: u32 },
    #[error("invalid value at byte offset {offset}: {reason}")]
    InvalidValue { offset: usize, reason: String },
    #[error("{count} trailing bytes after payload at byte offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
    #[error("line {line}: {reason}")]
    Text { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_string(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}
