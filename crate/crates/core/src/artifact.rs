//! File headers and JSON-lines helpers shared by every stage.
//!
//! Each emitted file starts with one header line recording the tool version,
//! the global seed and a digest of the experiment configuration. JSONL files
//! carry it as `{"header": {...}}`; readers skip that line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL: &str = "recprompt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_digest: String,
}

impl Header {
    pub fn new(seed: u64, config_digest: impl Into<String>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            seed,
            config_digest: config_digest.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{{\"header\":{}}}", serde_json::to_string(self).expect("header serializes"))
    }

    /// Fails when a file produced upstream used a different seed.
    pub fn check_seed(&self, path: &Path, expected: u64) -> Result<()> {
        if self.seed != expected {
            return Err(Error::SeedMismatch {
                path: path.to_path_buf(),
                found: self.seed,
                expected,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for Header {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} seed={} config={}",
            self.tool, self.version, self.seed, self.config_digest
        )
    }
}

/// Open a stage input, naming the stage that should have produced it.
pub fn open_input(path: &Path, stage: &'static str) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage,
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write a header line followed by one JSON object per record.
pub fn write_jsonl<T: Serialize>(path: &Path, header: &Header, records: &[T]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.line()).map_err(io)?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Lines of a JSONL file with its header (if any) split off. Blank lines are
/// dropped.
pub struct JsonLines {
    pub path: PathBuf,
    pub header: Option<Header>,
    pub lines: Vec<String>,
}

pub fn read_lines(path: &Path, stage: &'static str) -> Result<JsonLines> {
    let reader = open_input(path, stage)?;
    let mut header = None;
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"header\"") {
            #[derive(Deserialize)]
            struct Wrapper {
                header: Header,
            }
            let w: Wrapper = serde_json::from_str(&line).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                detail: format!("bad header: {e}"),
            })?;
            header = Some(w.header);
            continue;
        }
        lines.push(line);
    }
    Ok(JsonLines {
        path: path.to_path_buf(),
        header,
        lines,
    })
}

/// Strict JSONL read: every record must deserialize.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<(Option<Header>, Vec<T>)> {
    let jl = read_lines(path, stage)?;
    let records = jl
        .lines
        .iter()
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    Ok((jl.header, records))
}

/// Write `{"header": ..., "body": ...}` as a single JSON document.
pub fn write_document<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    out.write_all(b"{\"header\":").map_err(io)?;
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b",\"body\":").map_err(io)?;
    serde_json::to_writer(&mut out, body)?;
    out.write_all(b"}\n").map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_document<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<(Header, T)> {
    #[derive(Deserialize)]
    struct Doc<T> {
        header: Header,
        body: T,
    }
    let reader = open_input(path, stage)?;
    let doc: Doc<T> = serde_json::from_reader(reader).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok((doc.header, doc.body))
}
