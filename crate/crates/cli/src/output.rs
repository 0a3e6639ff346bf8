use std::fs;
use std::io::Write;
use std::path::Path;

use cascade_stab::Result;
use serde::Serialize;
use tempfile::NamedTempFile;

/// Writes `contents` to `dir/name` via a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, &text)
}
