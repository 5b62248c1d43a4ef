use serde::Serialize;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { buf: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, body: &str) -> io::Result<()> {
    match out {
        Some(p) => fs::write(p, body),
        None => io::stdout().lock().write_all(body.as_bytes()),
    }
}

#[derive(Serialize)]
struct Versions {
    edpa: &'static str,
    manifest_format: u32,
}

#[derive(Serialize)]
struct RunManifest<'a, A: Serialize> {
    subcommand: &'a str,
    flags: &'a A,
    seed: Option<u64>,
    threads: usize,
    versions: Versions,
    wall_time_s: f64,
    outputs: Vec<PathBuf>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `<out>.manifest.json` next to the output file.
pub fn write_manifest<A: Serialize>(
    out: Option<&Path>,
    subcommand: &str,
    flags: &A,
    seed: Option<u64>,
    started: Instant,
) -> io::Result<()> {
    let Some(out) = out else { return Ok(()) };
    let m = RunManifest {
        subcommand,
        flags,
        seed,
        threads: rayon::current_num_threads(),
        versions: Versions { edpa: env!("CARGO_PKG_VERSION"), manifest_format: 1 },
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: vec![out.to_path_buf()],
    };
    let body = serde_json::to_string_pretty(&m).map_err(io::Error::other)?;
    fs::write(manifest_path(out), body + "\n")
}
