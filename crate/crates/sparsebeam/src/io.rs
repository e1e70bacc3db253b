//! On-disk formats for volumes and projection sets.
//!
//! Each object is a pair of files sharing a stem: `<name>.json` holds the
//! metadata, `<name>.raw` holds an 8-byte magic followed by the payload as
//! 32-bit little-endian IEEE-754 floats. Volumes are x-fastest
//! (`index = x + nx·(y + ny·z)`); projections are view-major, then row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ScanGeometry, ViewAngleSet};
use crate::volume::{ProjectionSet, Volume};
use crate::Scalar;

pub const VOLUME_MAGIC: &[u8; 8] = b"SPBMVOL1";
pub const PROJECTION_MAGIC: &[u8; 8] = b"SPBMPRJ1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic or version in {path}: expected {expected}")]
    HeaderMismatch { path: String, expected: String },
    #[error("payload length {got} does not match header shape product {want}")]
    ShapeMismatch { got: usize, want: usize },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sidecar parse failure on {path}: {source}")]
    SidecarFailure {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// `<stem>.json` / `<stem>.raw` pair for a given path. The given path may be
/// either of the two or the bare stem.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (stem.with_extension("json"), stem.with_extension("raw"))
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeSidecar {
    shape: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    value_range: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct ProjectionSidecar {
    shape: [usize; 3],
    angles: Vec<f64>,
    norm_max: f64,
    geometry: ScanGeometry,
}

fn write_payload(path: &Path, magic: &[u8; 8], values: impl Iterator<Item = f32>) -> Result<(), IoError> {
    let mut buf = Vec::with_capacity(8);
    buf.extend_from_slice(magic);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))?;
    Ok(())
}

fn read_payload(path: &Path, magic: &[u8; 8], expected_len: usize) -> Result<Vec<f32>, IoError> {
    let mut f = fs::File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(IoError::HeaderMismatch {
            path: path.display().to_string(),
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let payload = &bytes[8..];
    if payload.len() != expected_len * 4 {
        return Err(IoError::ShapeMismatch {
            got: payload.len() / 4,
            want: expected_len,
        });
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_volume<F: Scalar>(path: &Path, vol: &Volume<F>) -> Result<(), IoError> {
    let (json_path, raw_path) = sidecar_paths(path);
    let (lo, hi) = vol.min_max();
    let sidecar = VolumeSidecar {
        shape: [vol.shape.0, vol.shape.1, vol.shape.2],
        spacing: vol.spacing,
        origin: vol.origin,
        value_range: [lo, hi],
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, json).map_err(io_err(&json_path))?;
    write_payload(&raw_path, VOLUME_MAGIC, vol.data().iter().map(|v| v.as_f32()))
}

pub fn read_volume<F: Scalar>(path: &Path) -> Result<Volume<F>, IoError> {
    let (json_path, raw_path) = sidecar_paths(path);
    let text = fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
    let sidecar: VolumeSidecar =
        serde_json::from_str(&text).map_err(|source| IoError::SidecarFailure {
            path: json_path.display().to_string(),
            source,
        })?;
    let [nx, ny, nz] = sidecar.shape;
    let raw = read_payload(&raw_path, VOLUME_MAGIC, nx * ny * nz)?;
    Ok(Volume::new(
        raw.into_iter().map(F::of_f32).collect(),
        (nx, ny, nz),
        sidecar.spacing,
        sidecar.origin,
    ))
}

pub fn write_projections<F: Scalar>(path: &Path, proj: &ProjectionSet<F>) -> Result<(), IoError> {
    let (json_path, raw_path) = sidecar_paths(path);
    let (h, w) = proj.view_shape();
    let sidecar = ProjectionSidecar {
        shape: [proj.n_views(), h, w],
        angles: proj.angles.angles().to_vec(),
        norm_max: proj.norm_max,
        geometry: proj.geom.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, json).map_err(io_err(&json_path))?;
    write_payload(&raw_path, PROJECTION_MAGIC, proj.data().iter().map(|v| v.as_f32()))
}

pub fn read_projections<F: Scalar>(path: &Path) -> Result<ProjectionSet<F>, IoError> {
    let (json_path, raw_path) = sidecar_paths(path);
    let text = fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
    let sidecar: ProjectionSidecar =
        serde_json::from_str(&text).map_err(|source| IoError::SidecarFailure {
            path: json_path.display().to_string(),
            source,
        })?;
    let [n, h, w] = sidecar.shape;
    if h != sidecar.geometry.det_rows || w != sidecar.geometry.det_cols {
        return Err(IoError::InvalidMetadata(format!(
            "sidecar shape {h}x{w} disagrees with geometry detector {}x{}",
            sidecar.geometry.det_rows, sidecar.geometry.det_cols
        )));
    }
    let angles = ViewAngleSet::new(sidecar.angles)
        .map_err(|e| IoError::InvalidMetadata(e.to_string()))?;
    if angles.len() != n {
        return Err(IoError::InvalidMetadata(format!(
            "{} angles for {n} views",
            angles.len()
        )));
    }
    let raw = read_payload(&raw_path, PROJECTION_MAGIC, n * h * w)?;
    Ok(ProjectionSet::new(
        raw.into_iter().map(F::of_f32).collect(),
        angles,
        sidecar.geometry,
        sidecar.norm_max,
    ))
}
