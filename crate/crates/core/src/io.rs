//! On-disk formats: binary snapshots and checkpoints (bit-exact round trip),
//! CSV series, JSON reports, and the content-addressed run manifest.

use crate::config::{SolverConfig, Variant};
use crate::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const SNAPSHOT_MAGIC: &[u8; 8] = b"WLSNAP01";
const CHECKPOINT_MAGIC: &[u8; 8] = b"WLCKPT01";

/// Field dump with the header needed to rebuild its run context.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub half_length: f64,
    pub t: f64,
    pub variant: Variant,
    pub eps: f64,
    pub samples: Vec<f64>,
}

/// Snapshot plus stepper state; restoring reproduces the uninterrupted run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub snapshot: Snapshot,
    pub step_index: u64,
    pub dt: f64,
    pub diss_n: f64,
    pub diss_eps: f64,
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn snapshot_bytes(s: &Snapshot) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 8 + 8 + 8 + 1 + 8 + 8 * s.samples.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(s.n as u64).to_le_bytes());
    push_f64(&mut buf, s.half_length);
    push_f64(&mut buf, s.t);
    buf.push(s.variant.tag());
    push_f64(&mut buf, s.eps);
    for &v in &s.samples {
        push_f64(&mut buf, v);
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::SnapshotFormat("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

fn parse_snapshot_body(r: &mut Reader) -> Result<Snapshot> {
    let n = r.u64()? as usize;
    let half_length = r.f64()?;
    let t = r.f64()?;
    let variant = Variant::from_tag(r.u8()?)?;
    let eps = r.f64()?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push(r.f64()?);
    }
    Ok(Snapshot { n, half_length, t, variant, eps, samples })
}

pub fn write_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    write_bytes(path, &snapshot_bytes(s))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let buf = read_bytes(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != SNAPSHOT_MAGIC {
        return Err(Error::SnapshotFormat(format!("{}: bad magic", path.display())));
    }
    let snap = parse_snapshot_body(&mut r)?;
    if r.pos != buf.len() {
        return Err(Error::SnapshotFormat(format!("{}: trailing bytes", path.display())));
    }
    Ok(snap)
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&snapshot_bytes(&c.snapshot)[8..]);
    buf.extend_from_slice(&c.step_index.to_le_bytes());
    push_f64(&mut buf, c.dt);
    push_f64(&mut buf, c.diss_n);
    push_f64(&mut buf, c.diss_eps);
    write_bytes(path, &buf)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = read_bytes(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::SnapshotFormat(format!("{}: bad magic", path.display())));
    }
    let snapshot = parse_snapshot_body(&mut r)?;
    let step_index = r.u64()?;
    let dt = r.f64()?;
    let diss_n = r.f64()?;
    let diss_eps = r.f64()?;
    if r.pos != buf.len() {
        return Err(Error::SnapshotFormat(format!("{}: trailing bytes", path.display())));
    }
    Ok(Checkpoint { snapshot, step_index, dt, diss_n, diss_eps })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
    }
    let mut f =
        fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(buf)
}

/// Fixed float formatting for CSV cells: 17 significant digits round-trip
/// f64 exactly, and the formatting is deterministic across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write a CSV file from a header line and preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::SnapshotFormat(format!("serializing {}: {e}", path.display())))?;
    write_bytes(path, text.as_bytes())
}

/// Content hash identifying a run: SHA-256 over the canonical config TOML,
/// plus the raw bytes of the initial-data file when one is referenced. Stable
/// across platforms and repeat runs.
pub fn run_id(cfg: &SolverConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(cfg.canonical_toml().as_bytes());
    if let crate::config::InitialData::File { path } = &cfg.initial {
        hasher.update(read_bytes(Path::new(path))?);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Manifest persisted next to a run's outputs. Written with status `running`
/// before integration starts and finalized exactly once afterwards.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: String,
    pub variant: String,
    pub eps: f64,
    pub n_points: usize,
    pub half_length_pi: f64,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: String,
    pub config_toml: String,
    pub series_path: Option<String>,
    pub energy_path: Option<String>,
    pub snapshot_paths: Vec<String>,
    pub report_paths: Vec<String>,
    pub final_time: Option<f64>,
    pub detail: Option<String>,
}

impl RunManifest {
    pub fn new(cfg: &SolverConfig) -> Result<RunManifest> {
        Ok(RunManifest {
            run_id: run_id(cfg)?,
            status: "running".into(),
            variant: cfg.variant.name().into(),
            eps: cfg.eps,
            n_points: cfg.n_points,
            half_length_pi: cfg.half_length_pi,
            t_end: cfg.t_end,
            dt: cfg.dt,
            scheme: cfg.scheme.name().into(),
            config_toml: cfg.canonical_toml(),
            series_path: None,
            energy_path: None,
            snapshot_paths: Vec::new(),
            report_paths: Vec::new(),
            final_time: None,
            detail: None,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
