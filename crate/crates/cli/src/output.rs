use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Write through a temporary file in the destination directory, then rename.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(CliError::io(format!("cannot create {}", dir.display())))?;
    let tmp = NamedTempFile::new_in(&dir).map_err(CliError::io(format!("cannot write in {}", dir.display())))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(CliError::io(format!("cannot write {}", path.display())))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()))(e.error))?;
    Ok(())
}

/// `# params {...}` line heading every CSV output.
pub fn stamp<P: Serialize>(params: &P) -> CliResult<String> {
    let json = serde_json::to_string(params).map_err(CliError::json("cannot serialize parameters"))?;
    Ok(format!("params {json}"))
}

pub fn write_stamp(w: &mut dyn Write, stamp: &str) -> CliResult<()> {
    writeln!(w, "# {stamp}").map_err(CliError::io("cannot write output"))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(CliError::json(format!("cannot write {}", path.display())))?;
        writeln!(w).map_err(CliError::io("cannot write output"))
    })
}

pub fn read_json<V: DeserializeOwned>(path: &Path, what: &str) -> CliResult<V> {
    let text = fs::read_to_string(path).map_err(CliError::io(format!("cannot read {what} {}", path.display())))?;
    serde_json::from_str(&text).map_err(CliError::json(format!("invalid {what} {}", path.display())))
}
