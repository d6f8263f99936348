//! File formats.
//!
//! * Point clouds: CSV with a header `x1,...,xd`, one point per row, plus a
//!   JSON envelope holding the metadata.
//! * Diagrams: CSV with header `dim,birth,death,clipped`; the essential class
//!   has death `inf`. A JSON sidecar records maxscale and the point count.
//!
//! Floats are written in Rust's shortest round-trip form, so files are
//! byte-identical across runs and read back to the same values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CloudMeta, PointCloud, ShapeSpec};
use crate::rips::{PersistenceDiagram, PersistencePair};

pub fn format_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "Inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
        "-inf" | "-Inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| Error::Parse(format!("not a number: {t:?}"))),
    }
}

pub fn write_cloud_csv<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=cloud.dim()).map(|i| format!("x{i}")))?;
    for p in cloud.points() {
        w.write_record(p.iter().map(|&x| format_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cloud CSV. The metadata is `meta` if given, otherwise an
/// external-cloud record.
pub fn read_cloud_csv<R: Read>(input: R, meta: Option<CloudMeta>) -> Result<PointCloud> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        rows.push(record.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?);
    }
    let meta = meta.unwrap_or(CloudMeta { shape: ShapeSpec::External, n: rows.len(), noise_fraction: 0.0, seed: 0, noise_seed: None });
    PointCloud::from_rows(rows, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudEnvelope {
    pub meta: CloudMeta,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

impl CloudEnvelope {
    pub fn new(cloud: &PointCloud) -> Self {
        Self { meta: cloud.meta.clone(), dim: cloud.dim(), points: cloud.points().map(<[f64]>::to_vec).collect() }
    }

    pub fn into_cloud(self) -> Result<PointCloud> {
        PointCloud::from_rows(self.points, self.meta)
    }
}

pub fn write_diagram_csv<W: Write>(diag: &PersistenceDiagram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dim", "birth", "death", "clipped"])?;
    for p in &diag.pairs {
        w.write_record([p.dim.to_string(), format_f64(p.birth), format_f64(p.death), p.clipped.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramMeta {
    pub maxscale: f64,
    pub n_points: usize,
    pub maxdim: usize,
}

impl DiagramMeta {
    pub fn new(diag: &PersistenceDiagram) -> Self {
        Self { maxscale: diag.maxscale, n_points: diag.n_points, maxdim: diag.max_dim() }
    }
}

/// Reads a diagram CSV. Without metadata, maxscale is taken as the largest
/// finite death and the point count as the number of H0 pairs.
pub fn read_diagram_csv<R: Read>(input: R, meta: Option<DiagramMeta>) -> Result<PersistenceDiagram> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    };
    let (cd, cb, cx) = (col("dim")?, col("birth")?, col("death")?);
    let cc = headers.iter().position(|h| h.trim() == "clipped");
    let mut pairs = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| record.get(i).ok_or_else(|| Error::Parse("short row".into()));
        let dim = field(cd)?.trim().parse().map_err(|_| Error::Parse(format!("bad dimension {:?}", &record[cd])))?;
        let birth = parse_f64(field(cb)?)?;
        let death = parse_f64(field(cx)?)?;
        let clipped = match cc {
            Some(i) => field(i)?.trim().parse().map_err(|_| Error::Parse(format!("bad flag {:?}", &record[i])))?,
            None => false,
        };
        if death < birth {
            return Err(Error::Parse(format!("death {death} before birth {birth}")));
        }
        pairs.push(PersistencePair { dim, birth, death, clipped });
    }
    let maxscale = match meta {
        Some(m) => m.maxscale,
        None => pairs.iter().map(|p| p.death).filter(|d| d.is_finite()).fold(0.0, f64::max),
    };
    let n_points = match meta {
        Some(m) => m.n_points,
        None => pairs.iter().filter(|p| p.dim == 0).count(),
    };
    Ok(PersistenceDiagram { pairs, maxscale, n_points })
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}
