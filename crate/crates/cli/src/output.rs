use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// The resolved configuration of a run. Worker counts and output locations
/// are left out so identical manifests mean identical outputs.
pub fn manifest<T: Serialize>(command: &str, config: &T) -> Value {
    json!({
        "tool": "synth",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
    })
}

/// Manifest location for a command that writes a single file.
pub fn manifest_beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Reads a run configuration, unwrapping it first if the file is a manifest.
pub fn read_config(path: &Path, command: &str) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    match value.get("config") {
        Some(inner) if value.get("tool").is_some() => {
            if value.get("command").and_then(Value::as_str) != Some(command) {
                return Err(format!("{} is a manifest for another command", path.display()));
            }
            Ok(inner.clone())
        }
        _ => Ok(value),
    }
}
