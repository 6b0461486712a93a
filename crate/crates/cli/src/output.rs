//! Table formatting and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A CSV table with a fixed header.
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_clock_seconds: f64,
    pub output_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Path of the manifest written beside `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Write `content` to `out` with its manifest, or to stdout.
pub fn emit(
    out: Option<&Path>,
    content: &str,
    command: &str,
    params: serde_json::Value,
    seed: Option<u64>,
    elapsed: Duration,
) -> anyhow::Result<()> {
    let Some(path) = out else {
        std::io::stdout().write_all(content.as_bytes())?;
        return Ok(());
    };
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    let manifest = RunManifest {
        command,
        params,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: elapsed.as_secs_f64(),
        output_sha256: sha256_hex(content.as_bytes()),
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&mpath, text).with_context(|| format!("writing {}", mpath.display()))?;
    Ok(())
}
