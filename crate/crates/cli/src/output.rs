use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const OUT_DIR_ENV: &str = "KAHLER_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a result goes and in which format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Resolves `--out` and `--format`. `--out` may be a path or just `csv` /
/// `json`; without a path the result goes to `$KAHLER_OUT_DIR/<stem>.<ext>`
/// when that variable is set, else to stdout.
pub fn resolve_target(
    out: Option<&str>,
    format: Option<Format>,
    default_format: Format,
    stem: &str,
    out_dir: Option<&Path>,
) -> Result<Target, CliError> {
    let (path, from_out) = match out {
        Some("csv") => (None, Some(Format::Csv)),
        Some("json") => (None, Some(Format::Json)),
        Some(p) => {
            let path = PathBuf::from(p);
            let ext = match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => Some(Format::Csv),
                Some("json") => Some(Format::Json),
                _ => None,
            };
            (Some(path), ext)
        }
        None => (None, None),
    };
    if let (Some(a), Some(b)) = (format, from_out) {
        if a != b {
            return Err(CliError::Validation(format!(
                "--format {} conflicts with --out {}",
                a.extension(),
                out.unwrap_or_default()
            )));
        }
    }
    let format = format.or(from_out).unwrap_or(default_format);
    let path = path.or_else(|| out_dir.map(|d| d.join(format!("{stem}.{}", format.extension()))));
    Ok(Target { path, format })
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn emit(target: &Target, bytes: &[u8]) -> Result<(), CliError> {
    match &target.path {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// CSV with `# key: value` provenance lines ahead of the header row.
pub fn to_csv<R: Serialize>(provenance: &[(&str, String)], rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut bytes = Vec::new();
    for (key, value) in provenance {
        for line in value.lines() {
            bytes.extend_from_slice(format!("# {key}: {line}\n").as_bytes());
        }
    }
    let mut w = csv::Writer::from_writer(bytes);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}
