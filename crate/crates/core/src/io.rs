//! Atomic file writes (write to a temp file in the target directory, then rename).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp_path = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    let mut f = std::fs::File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp_path, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp_path, e))?;
    drop(f);
    std::fs::rename(&tmp_path, path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
