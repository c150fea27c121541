//! CSV and run-manifest formats.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::Decomposition;
use crate::error::{AttribError, Result};
use crate::limit::InteractionMatrix;
use crate::path::Path;

/// Version tag written into every manifest.
pub const SPEC_VERSION: &str = "1.0";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> AttribError {
    AttribError::Parse(format!("line {line}: {msg}"))
}

fn csv_err(e: csv::Error) -> AttribError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AttribError::Io(io),
        other => AttribError::Parse(format!("{other:?}")),
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Header `time,X1..Xd,J1..Jd`, one row per grid point.
pub fn write_path<W: Write>(path: &Path, out: W) -> Result<()> {
    let d = path.dim();
    let mut w = writer(out);
    let mut header = vec!["time".to_string()];
    header.extend((1..=d).map(|i| format!("X{i}")));
    header.extend((1..=d).map(|i| format!("J{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (l, &t) in path.times().iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(path.state(l).iter().map(|&v| fmt_f64(v)));
        row.extend((0..d).map(|i| if l > 0 && path.is_jump(i, l) { "1" } else { "0" }.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path<R: Read>(input: R) -> Result<Path> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 3 || cols % 2 == 0 || &header[0] != "time" {
        return Err(parse_err(1, "expected header time,X1..Xd,J1..Jd"));
    }
    let d = (cols - 1) / 2;
    for i in 1..=d {
        if header[i] != format!("X{i}") || header[d + i] != format!("J{i}") {
            return Err(parse_err(1, format!("expected columns X{i} and J{i}")));
        }
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut flags = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != cols {
            return Err(parse_err(line, format!("expected {cols} fields, got {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(line, format!("{s:?}: {e}")));
        times.push(num(&rec[0])?);
        for i in 1..=d {
            states.push(num(&rec[i])?);
        }
        for i in 1..=d {
            let flag = match &rec[d + i] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(line, format!("jump flag must be 0 or 1, got {other:?}"))),
            };
            if k == 0 {
                if flag {
                    return Err(parse_err(line, "row 0 cannot carry a jump flag"));
                }
            } else {
                flags.push(flag);
            }
        }
    }
    if times.first() != Some(&0.0) {
        return Err(parse_err(2, "first row must have time 0"));
    }
    Path::from_raw(times, states, flags, d)
}

pub fn write_path_file(path: &Path, file: &FsPath) -> Result<()> {
    write_path(path, File::create(file)?)
}

pub fn read_path_file(file: &FsPath) -> Result<Path> {
    read_path(File::open(file)?)
}

/// Header `time,total,D1..Dd,residual`, plus `additivity_gap` for closed forms.
pub fn write_decomposition<W: Write>(dec: &Decomposition, out: W) -> Result<()> {
    let d = dec.dim();
    let mut w = writer(out);
    let mut header = vec!["time".to_string(), "total".to_string()];
    header.extend((1..=d).map(|i| format!("D{i}")));
    header.push("residual".into());
    if dec.additivity_gap.is_some() {
        header.push("additivity_gap".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (m, &t) in dec.times.iter().enumerate() {
        let mut row = vec![fmt_f64(t), fmt_f64(dec.total[m])];
        row.extend(dec.contributions.iter().map(|c| fmt_f64(c[m])));
        row.push(fmt_f64(dec.residual[m]));
        if let Some(gap) = &dec.additivity_gap {
            row.push(fmt_f64(gap[m]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a decomposition CSV, keyed by header name.
pub fn read_columns<R: Read>(input: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (c, field) in rec.iter().enumerate() {
            let v = field
                .parse::<f64>()
                .map_err(|e| parse_err(k + 2, format!("{field:?}: {e}")))?;
            cols[c].push(v);
        }
    }
    Ok(header.into_iter().zip(cols).collect())
}

/// Long format `time,i,j,I` with 1-based factor indices, `i <= j`.
pub fn write_interaction<W: Write>(inter: &InteractionMatrix, out: W) -> Result<()> {
    let d = inter.dim();
    let mut w = writer(out);
    w.write_record(["time", "i", "j", "I"]).map_err(csv_err)?;
    for (m, &t) in inter.times.iter().enumerate() {
        for i in 0..d {
            for j in i..d {
                w.write_record([fmt_f64(t), (i + 1).to_string(), (j + 1).to_string(), fmt_f64(inter.at(i, j, m))])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-factor contributions over `[start, end]`, followed by a `total` row.
pub fn write_waterfall<W: Write>(dec: &Decomposition, start: f64, end: f64, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["factor", "contribution", "window_start", "window_end"])
        .map_err(csv_err)?;
    let parts = dec.window(start, end);
    let (a, b) = (dec.index_at(start), dec.index_at(end));
    let (s, e) = (fmt_f64(dec.times[a]), fmt_f64(dec.times[b]));
    for (label, v) in dec.labels.iter().zip(&parts) {
        w.write_record([label.clone(), fmt_f64(*v), s.clone(), e.clone()])
            .map_err(csv_err)?;
    }
    w.write_record(["total".to_string(), fmt_f64(dec.total[b] - dec.total[a]), s, e])
        .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

pub fn sha256_file(file: &FsPath) -> Result<String> {
    let bytes = std::fs::read(file)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Run metadata written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub spec_version: String,
    pub command: Vec<String>,
    pub seeds: Vec<u64>,
    pub rng_algorithm: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub elapsed_seconds: f64,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            spec_version: SPEC_VERSION.into(),
            command,
            seeds: Vec::new(),
            rng_algorithm: crate::simulate::RNG_ALGORITHM.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            elapsed_seconds: 0.0,
            notes: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, file: &FsPath) -> Result<()> {
        self.inputs.insert(file.display().to_string(), sha256_file(file)?);
        Ok(())
    }

    /// Records an output by its file name relative to the output directory.
    pub fn add_output(&mut self, file: &FsPath) -> Result<()> {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.display().to_string());
        self.outputs.insert(name, sha256_file(file)?);
        Ok(())
    }

    pub fn write(&self, file: &FsPath) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| AttribError::Parse(e.to_string()))?;
        std::fs::write(file, text + "\n")?;
        Ok(())
    }

    pub fn read(file: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(file)?;
        serde_json::from_str(&text).map_err(|e| AttribError::Parse(e.to_string()))
    }
}
