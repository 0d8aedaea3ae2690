//! Git LFS pointer files.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LFS_SPEC_VERSION: &str = "https://git-lfs.github.com/spec/v1";

/// Stand-in for a large file stored outside the repository.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfsPointer {
    /// Lowercase hex SHA-256 of the file contents.
    pub oid: String,
    pub size: u64,
}

impl LfsPointer {
    pub fn for_bytes(bytes: &[u8]) -> Self {
        LfsPointer {
            oid: hex::encode(Sha256::digest(bytes)),
            size: bytes.len() as u64,
        }
    }

    /// Parses pointer text. Only the three-line form written by
    /// [`make_lfs_pointer`] is accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument("not a Git LFS pointer".into());
        let mut lines = text.split_terminator('\n');
        let version = lines.next().and_then(|l| l.strip_prefix("version ")).ok_or_else(bad)?;
        if version != LFS_SPEC_VERSION {
            return Err(bad());
        }
        let oid = lines.next().and_then(|l| l.strip_prefix("oid sha256:")).ok_or_else(bad)?;
        if oid.len() != 64 || !oid.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(bad());
        }
        let size = lines
            .next()
            .and_then(|l| l.strip_prefix("size "))
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?;
        if lines.next().is_some() || !text.ends_with('\n') {
            return Err(bad());
        }
        Ok(LfsPointer {
            oid: oid.to_string(),
            size,
        })
    }

    /// Whether `bytes` look like a pointer file rather than real content.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.len() > 200 {
            return None;
        }
        std::str::from_utf8(bytes).ok().and_then(|t| Self::parse(t).ok())
    }
}

impl fmt::Display for LfsPointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "version {LFS_SPEC_VERSION}\noid sha256:{}\nsize {}\n", self.oid, self.size)
    }
}

/// Pointer text for a file with the given contents.
pub fn make_lfs_pointer(bytes: &[u8]) -> String {
    LfsPointer::for_bytes(bytes).to_string()
}
