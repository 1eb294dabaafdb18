use std::fs;
use std::path::Path;

use fairlabels::{Error, Result};
use serde::Serialize;

/// Version tag of every JSON file the CLI writes.
pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `format_version` and `kind` prepended.
pub fn to_json<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&Envelope {
        format_version: OUTPUT_FORMAT_VERSION,
        kind,
        body,
    })?;
    text.push('\n');
    Ok(text)
}

/// Writes through a temporary sibling and a rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<()> {
    write_atomic(path, to_json(kind, body)?.as_bytes())
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
