pub mod har_prepare;
pub mod run_eval;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use seqdet::{Error, Result};

/// Cap the global worker pool. Call once per process before any parallel
/// work; 0 leaves the default (all cores). Results are identical either way.
pub fn init_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

pub fn ensure_out_dir(out: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(out);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Existence check that names the missing path; bare `File::open` errors
/// don't say which file was meant.
pub fn check_input(path: &str) -> Result<PathBuf> {
    let p = PathBuf::from(path);
    if !p.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input file not found: {path}"),
        )));
    }
    Ok(p)
}

pub fn write_json_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
