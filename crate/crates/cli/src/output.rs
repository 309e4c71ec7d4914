//! Output files of one subcommand: CSV tables with `#` header comments,
//! gnuplot data files, and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Shortest round-trip form of a float, in exponent notation for very
/// small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV table whose comment lines document columns and units.
#[derive(Debug, Clone, Default)]
pub struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Two-column gnuplot data with a comment header.
pub fn gnuplot(comment: &str, points: &[(f64, f64)]) -> Vec<u8> {
    let mut s = String::new();
    for line in comment.lines() {
        s.push_str(&format!("# {line}\n"));
    }
    for (x, y) in points {
        s.push_str(&format!("{} {}\n", num(*x), num(*y)));
    }
    s.into_bytes()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskTime {
    pub task: String,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub tasks: Vec<TaskTime>,
    pub outputs: Vec<OutputDigest>,
    pub error: Option<ErrorRecord>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Output directory and bookkeeping of one subcommand run.
pub struct RunContext {
    command: String,
    dir: PathBuf,
    config: RunConfig,
    started: String,
    tasks: Vec<TaskTime>,
    outputs: Vec<OutputDigest>,
}

impl RunContext {
    /// Creates `<output.dir>/<command>` and checks it is writable.
    pub fn prepare(config: &RunConfig, command: &str) -> io::Result<Self> {
        let dir = config.output.dir.join(command);
        fs::create_dir_all(&dir)?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Self {
            command: command.to_string(),
            dir,
            config: config.clone(),
            started: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            tasks: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `f`, recording its wall time under `name`.
    pub fn task<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.tasks.push(TaskTime {
            task: name.to_string(),
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    /// Records a wall time measured by the caller.
    pub fn record(&mut self, name: &str, wall_seconds: f64) {
        self.tasks.push(TaskTime {
            task: name.to_string(),
            wall_seconds,
        });
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(OutputDigest {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> io::Result<PathBuf> {
        self.write(name, &table.to_bytes())
    }

    /// Streams a large file through `fill` and records its digest.
    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = path.with_extension("tmp~");
        let mut hasher = HashingWriter {
            inner: io::BufWriter::new(fs::File::create(&tmp)?),
            hasher: Sha256::new(),
            bytes: 0,
        };
        fill(&mut hasher)?;
        hasher.inner.flush()?;
        let HashingWriter { inner, hasher, bytes } = hasher;
        inner.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, &path)?;
        self.outputs.push(OutputDigest {
            file: name.to_string(),
            bytes,
            sha256: hex::encode(hasher.finalize()),
        });
        Ok(path)
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(self, error: Option<ErrorRecord>) -> io::Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            started: self.started,
            finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            status: if error.is_some() { "failed" } else { "ok" }.to_string(),
            tasks: self.tasks,
            outputs: self.outputs,
            error,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_comments_then_header() {
        let mut t = Table::new(&["x", "y"]).comment("x: time [1/energy]");
        t.push(vec![num(0.1), opt(None)]);
        t.push(vec![num(-2.5e-7), num(3.0)]);
        let s = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(s, "# x: time [1/energy]\nx,y\n0.1,\n-2.5e-7,3\n");
    }

    #[test]
    fn manifest_digests_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::with_seed(1);
        cfg.output.dir = dir.path().to_path_buf();
        let mut ctx = RunContext::prepare(&cfg, "demo").unwrap();
        ctx.write("a.csv", b"1,2\n").unwrap();
        ctx.write_with("b.txt", &mut |w: &mut dyn Write| w.write_all(b"hello")).unwrap();
        let m = ctx.finish(None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        for o in v["outputs"].as_array().unwrap() {
            let bytes = fs::read(dir.path().join("demo").join(o["file"].as_str().unwrap())).unwrap();
            assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        }
        assert_eq!(v["status"], "ok");
    }
}
