use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{data, CliResult};

/// Writes through a sibling temp file and a rename, so readers never see a
/// half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| data(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(data(format!("{what} `{}` does not exist", path.display())))
    }
}

/// Resolves `rel` against the directory holding `base`.
pub fn sibling(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}
