//! Atomic file writes shared by every artifact producer.
//!
//! Output files are staged to a sibling temp file and renamed into place, so
//! a failed run never leaves a partial artifact behind.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// Writes `bytes` to `path` atomically (temp file + rename).
pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Serializes `value` as JSON (pretty or compact) and writes it atomically.
/// A trailing newline is appended so files are diff-friendly.
pub fn atomic_write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    let mut bytes = if pretty {
        serde_json::to_vec_pretty(value)?
    } else {
        serde_json::to_vec(value)?
    };
    bytes.push(b'\n');
    atomic_write_bytes(path, &bytes)
}

fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}
