//! APK container access: the binary manifest and every root-level
//! `classes*.dex` entry, decompressed.
//!
//! Duplicate entry names resolve last-wins (the later central directory
//! record replaces the earlier one, as the package installer does). Nested
//! archives, native libraries and resources are ignored.

use std::io::{Cursor, Read};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use zip::result::ZipError;
use zip::ZipArchive;

pub const MANIFEST_ENTRY: &str = "AndroidManifest.xml";

#[derive(Debug, Error)]
pub enum ApkError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a zip archive: {0}")]
    NotZip(String),
    #[error("archive has no {MANIFEST_ENTRY}")]
    MissingManifest,
    #[error("archive has no root classes*.dex entry")]
    MissingDex,
    #[error("corrupt entry {entry}: {reason}")]
    CorruptEntry { entry: String, reason: String },
}

/// Raw payloads extracted from one APK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApkEntries {
    pub app_id: String,
    /// `classes.dex`, `classes2.dex`, `classes3.dex`, ...
    pub dex_payloads: Vec<Vec<u8>>,
    pub manifest_payload: Vec<u8>,
    /// Sum of every returned payload's length.
    pub total_uncompressed_bytes: u64,
    /// SHA-256 of the whole archive, lowercase hex.
    pub source_digest: String,
}

/// Opens an APK from disk; the app id is the file stem.
pub fn open_apk(path: impl AsRef<Path>) -> Result<ApkEntries, ApkError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ApkError::Io { path: path.display().to_string(), source })?;
    let app_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_apk(app_id, &bytes)
}

/// SHA-256 of `bytes` as lowercase hex.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sort key for `classes(\d*)\.dex`: `classes.dex` first, then by number.
fn dex_ordinal(name: &str) -> Option<u64> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        return Some(1);
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn read_apk(app_id: impl Into<String>, bytes: &[u8]) -> Result<ApkEntries, ApkError> {
    let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(|e| match e {
        ZipError::Io(io) => ApkError::NotZip(io.to_string()),
        other => ApkError::NotZip(other.to_string()),
    })?;

    let mut manifest_index = None;
    let mut dex_indices: Vec<(u64, String, usize)> = Vec::new();
    for name in archive.file_names().map(str::to_owned).collect::<Vec<_>>() {
        let Some(index) = archive.index_for_name(&name) else { continue };
        if name == MANIFEST_ENTRY {
            manifest_index = Some(index);
        } else if let Some(ordinal) = dex_ordinal(&name) {
            dex_indices.push((ordinal, name, index));
        }
    }
    let manifest_index = manifest_index.ok_or(ApkError::MissingManifest)?;
    if dex_indices.is_empty() {
        return Err(ApkError::MissingDex);
    }
    dex_indices.sort();

    let manifest_payload = read_entry(&mut archive, manifest_index, MANIFEST_ENTRY)?;
    if manifest_payload.is_empty() {
        return Err(ApkError::CorruptEntry { entry: MANIFEST_ENTRY.into(), reason: "empty payload".into() });
    }
    let mut dex_payloads = Vec::with_capacity(dex_indices.len());
    for (_, name, index) in &dex_indices {
        dex_payloads.push(read_entry(&mut archive, *index, name)?);
    }
    let total_uncompressed_bytes =
        manifest_payload.len() as u64 + dex_payloads.iter().map(|d| d.len() as u64).sum::<u64>();
    Ok(ApkEntries {
        app_id: app_id.into(),
        dex_payloads,
        manifest_payload,
        total_uncompressed_bytes,
        source_digest: digest_hex(bytes),
    })
}

fn read_entry(archive: &mut ZipArchive<Cursor<&[u8]>>, index: usize, name: &str) -> Result<Vec<u8>, ApkError> {
    let corrupt = |reason: String| ApkError::CorruptEntry { entry: name.to_string(), reason };
    let mut file = archive.by_index(index).map_err(|e| corrupt(e.to_string()))?;
    let mut out = Vec::with_capacity(file.size().min(1 << 28) as usize);
    // the reader verifies the CRC once the entry is read to the end
    file.read_to_end(&mut out).map_err(|e| corrupt(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dex_names() {
        assert_eq!(dex_ordinal("classes.dex"), Some(1));
        assert_eq!(dex_ordinal("classes2.dex"), Some(2));
        assert_eq!(dex_ordinal("classes10.dex"), Some(10));
        assert_eq!(dex_ordinal("classesX.dex"), None);
        assert_eq!(dex_ordinal("assets/classes.dex"), None);
        assert_eq!(dex_ordinal("classes.dex.bak"), None);
    }

    #[test]
    fn garbage_is_not_zip() {
        assert!(matches!(read_apk("x", b"definitely not a zip file"), Err(ApkError::NotZip(_))));
        assert!(matches!(read_apk("x", b""), Err(ApkError::NotZip(_))));
    }
}
