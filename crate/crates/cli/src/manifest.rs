//! Run manifests: one JSON file per run directory recording the command, the
//! tool version, and every effective setting, so any output can be reproduced
//! by replaying the same command with the same settings.

use std::collections::BTreeMap;
use std::path::Path;

use seqdet::Result;

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    settings: &BTreeMap<String, String>,
) -> Result<()> {
    let doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "settings": settings,
    });
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}
